#pragma once

#include <cmath>
#include <string>

#include "skybox/errors.hpp"

namespace skybox {

inline constexpr double kHoursPerYear = 8760.0;

enum class EnergySource { solar, wind, brown };

/// Carbon intensities and embodied footprints with their amortization lifetimes.
struct CarbonParams {
    double intensity_solar_g_per_kwh = 41.0;
    double intensity_wind_g_per_kwh = 11.0;
    double intensity_brown_g_per_kwh = 700.0;

    double embodied_server_kg = 591.0;
    double server_lifetime_years = 4.0;
    double embodied_battery_kg_per_kwh = 146.0;
    double battery_lifetime_years = 10.0;
    double embodied_cooling_kg_per_m2 = 50.0;
    double cooling_lifetime_years = 20.0;

    double intensity(EnergySource s) const {
        switch (s) {
            case EnergySource::solar: return intensity_solar_g_per_kwh;
            case EnergySource::wind: return intensity_wind_g_per_kwh;
            case EnergySource::brown: return intensity_brown_g_per_kwh;
        }
        return intensity_brown_g_per_kwh;
    }
};

struct CostParams {
    double server_usd = 3000.0;
    double server_lifetime_years = 4.0;
    double battery_usd_per_kwh = 1250.0;
    double battery_lifetime_years = 10.0;
    double transmission_usd_per_km = 300000.0;
    double transmission_lifetime_years = 20.0;
    double construction_usd_per_watt = 10.0;
    double construction_lifetime_years = 20.0;
};

/// Physical makeup of one modular data center.
struct RmdcConfig {
    int racks = 10;
    int servers_per_rack = 15;
    int cores_per_server = 16;
    double per_core_watts = 13.5;
    double rack_power_kw = 150.0;
    double cooling_kw = 35.0;
    double battery_backup_minutes = 15.0;
    double footprint_rack_m2 = 20.6;
    double footprint_cooling_m2 = 5.8;
    double footprint_battery_m2 = 5.8;

    int servers() const { return racks * servers_per_rack; }
    double peak_server_watts() const { return racks * rack_power_kw * 1000.0; }
    double per_server_watts() const { return peak_server_watts() / servers(); }
    double battery_kwh() const {
        return peak_server_watts() / 1000.0 * battery_backup_minutes / 60.0;
    }
    double total_footprint_m2() const {
        return footprint_rack_m2 + footprint_cooling_m2 + footprint_battery_m2;
    }
};

/// Energy consumed times the intensity of its source.
inline double operational_carbon_g(double energy_kwh, EnergySource source,
                                   const CarbonParams& params) {
    if (energy_kwh < 0) throw DataError("operational_carbon: negative energy");
    return energy_kwh * params.intensity(source);
}

/// Deployed hardware that accrues embodied carbon and capital cost.
struct Inventory {
    double servers = 0.0;
    double battery_kwh = 0.0;
    double cooling_m2 = 0.0;
    double transmission_km = 0.0;
    double construction_watts = 0.0;
};

struct EmbodiedBreakdown {
    double server_g = 0.0;
    double battery_g = 0.0;
    double cooling_g = 0.0;
    double total_g = 0.0;
};

/// Embodied carbon amortized straight-line over each component's lifetime
/// (8760 hours per year) for the given duration.
inline EmbodiedBreakdown embodied_carbon_amortized_g(const Inventory& inv,
                                                     const CarbonParams& params,
                                                     double duration_hours) {
    if (duration_hours < 0) throw DataError("embodied_carbon: negative duration");
    EmbodiedBreakdown b;
    b.server_g = inv.servers * params.embodied_server_kg * 1000.0 /
                 (params.server_lifetime_years * kHoursPerYear) * duration_hours;
    b.battery_g = inv.battery_kwh * params.embodied_battery_kg_per_kwh * 1000.0 /
                  (params.battery_lifetime_years * kHoursPerYear) * duration_hours;
    b.cooling_g = inv.cooling_m2 * params.embodied_cooling_kg_per_m2 * 1000.0 /
                  (params.cooling_lifetime_years * kHoursPerYear) * duration_hours;
    b.total_g = b.server_g + b.battery_g + b.cooling_g;
    return b;
}

/// Single-rMDC convenience: servers, battery and the full facility footprint
/// from the configuration.
inline EmbodiedBreakdown embodied_carbon_amortized_g(const RmdcConfig& config,
                                                     const CarbonParams& params,
                                                     double duration_hours) {
    Inventory inv;
    inv.servers = config.servers();
    inv.battery_kwh = config.battery_kwh();
    inv.cooling_m2 = config.total_footprint_m2();
    return embodied_carbon_amortized_g(inv, params, duration_hours);
}

struct CostBreakdown {
    double servers_usd = 0.0;
    double battery_usd = 0.0;
    double transmission_usd = 0.0;
    double construction_usd = 0.0;
    double total_usd = 0.0;
};

/// Straight-line amortized monetary cost of the deployed topology.
inline CostBreakdown amortized_cost(const Inventory& topology, const CostParams& params,
                                    double duration_years) {
    if (duration_years < 0) throw DataError("amortized_cost: negative duration");
    CostBreakdown c;
    c.servers_usd =
        topology.servers * params.server_usd / params.server_lifetime_years * duration_years;
    c.battery_usd = topology.battery_kwh * params.battery_usd_per_kwh /
                    params.battery_lifetime_years * duration_years;
    c.transmission_usd = topology.transmission_km * params.transmission_usd_per_km /
                         params.transmission_lifetime_years * duration_years;
    c.construction_usd = topology.construction_watts * params.construction_usd_per_watt /
                         params.construction_lifetime_years * duration_years;
    c.total_usd = c.servers_usd + c.battery_usd + c.transmission_usd + c.construction_usd;
    return c;
}

/// Migration energy is proportional to the VM state moved.
inline double migration_energy_wh(double mem_gb, double power_migr_wh_per_gb) {
    if (mem_gb < 0 || power_migr_wh_per_gb < 0)
        throw DataError("migration_energy: negative input");
    return mem_gb * power_migr_wh_per_gb;
}

inline double wh_from_watts(double watts, double seconds) { return watts * seconds / 3600.0; }
inline double kwh_from_watts(double watts, double seconds) {
    return wh_from_watts(watts, seconds) / 1000.0;
}

}  // namespace skybox
