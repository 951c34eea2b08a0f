#pragma once

#include <algorithm>

#include "skybox/errors.hpp"

namespace skybox {

struct BatteryState {
    double capacity_kwh = 0.0;
    double charge_kwh = 0.0;
    double max_rate_kw = 0.0;

    void validate() const {
        if (capacity_kwh < 0 || max_rate_kw < 0) throw DataError("battery: negative rating");
        if (charge_kwh < 0 || charge_kwh > capacity_kwh)
            throw DataError("battery: charge outside [0, capacity]");
    }
};

struct BatteryFlow {
    BatteryState state;
    double absorbed_watts = 0.0;
    double discharged_watts = 0.0;
};

/// Charges on surplus, discharges on deficit, limited by rate and by capacity
/// headroom or stored charge. Energy is conserved exactly in Wh arithmetic.
inline BatteryFlow step_battery(BatteryState state, double surplus_watts, double step_seconds) {
    state.validate();
    if (!(step_seconds > 0)) throw DataError("battery: step must be > 0");
    const double hours = step_seconds / 3600.0;
    BatteryFlow flow;
    if (surplus_watts > 0) {
        const double headroom_kw = (state.capacity_kwh - state.charge_kwh) / hours;
        const double kw =
            std::min({surplus_watts / 1000.0, state.max_rate_kw, headroom_kw});
        state.charge_kwh += kw * hours;
        flow.absorbed_watts = kw * 1000.0;
    } else if (surplus_watts < 0) {
        const double available_kw = state.charge_kwh / hours;
        const double kw = std::min({-surplus_watts / 1000.0, state.max_rate_kw, available_kw});
        state.charge_kwh -= kw * hours;
        flow.discharged_watts = kw * 1000.0;
    }
    flow.state = state;
    return flow;
}

}  // namespace skybox
