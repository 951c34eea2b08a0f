#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "skybox/csv.hpp"
#include "skybox/errors.hpp"

namespace skybox {

enum class VmCategory { regular, evictable };

inline const char* to_string(VmCategory c) {
    return c == VmCategory::regular ? "regular" : "evictable";
}

/// Static VM description as it appears in the VM trace file.
struct VmSpec {
    std::string vm_id;
    std::int64_t arrival_step = 0;
    double mem_gb = 1.0;
    int vcpus = 1;
    double power_watts = 1.0;
    std::int64_t predicted_lifetime_steps = 1;
    std::int64_t actual_lifetime_steps = 1;
    VmCategory category = VmCategory::regular;

    void validate() const {
        if (vm_id.empty()) throw DataError("vm: empty id");
        if (arrival_step < 0) throw DataError("vm '" + vm_id + "': negative arrival");
        if (!(mem_gb > 0)) throw DataError("vm '" + vm_id + "': mem_gb must be > 0");
        if (vcpus < 1) throw DataError("vm '" + vm_id + "': vcpus must be >= 1");
        if (!(power_watts > 0)) throw DataError("vm '" + vm_id + "': power must be > 0");
        if (predicted_lifetime_steps < 1 || actual_lifetime_steps < 1)
            throw DataError("vm '" + vm_id + "': lifetimes must be >= 1");
    }
};

/// Loads the VM trace CSV: vm_id, arrival, mem_gb, vcpus, power_watts,
/// predicted_lifetime, actual_lifetime, category. An empty file is an empty trace.
inline std::vector<VmSpec> load_vm_trace(const std::string& path) {
    const csv::Table t = csv::read(path);
    std::vector<VmSpec> out;
    if (t.header.empty()) return out;  // zero-byte file
    const std::size_t c_id = t.column("vm_id");
    const std::size_t c_arr = t.column("arrival");
    const std::size_t c_mem = t.column("mem_gb");
    const std::size_t c_cpu = t.column("vcpus");
    const std::size_t c_pow = t.column("power_watts");
    const std::size_t c_pl = t.column("predicted_lifetime");
    const std::size_t c_al = t.column("actual_lifetime");
    const std::size_t c_cat = t.column("category");
    out.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        VmSpec vm;
        vm.vm_id = t.rows[i][c_id];
        vm.arrival_step = csv::parse_int(t, i, c_arr);
        vm.mem_gb = csv::parse_double(t, i, c_mem);
        vm.vcpus = static_cast<int>(csv::parse_int(t, i, c_cpu));
        vm.power_watts = csv::parse_double(t, i, c_pow);
        vm.predicted_lifetime_steps = csv::parse_int(t, i, c_pl);
        vm.actual_lifetime_steps = csv::parse_int(t, i, c_al);
        const std::string& cat = t.rows[i][c_cat];
        if (cat == "regular")
            vm.category = VmCategory::regular;
        else if (cat == "evictable")
            vm.category = VmCategory::evictable;
        else
            throw ParseError(path, i + 2, "unknown category '" + cat + "'");
        try {
            vm.validate();
        } catch (const DataError& e) {
            throw ParseError(path, i + 2, e.what());
        }
        out.push_back(std::move(vm));
    }
    return out;
}

inline void save_vm_trace(const std::vector<VmSpec>& vms, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "vm_id,arrival,mem_gb,vcpus,power_watts,predicted_lifetime,actual_lifetime,category\n";
    for (const auto& vm : vms) {
        out << vm.vm_id << ',' << vm.arrival_step << ',' << csv::format_double(vm.mem_gb) << ','
            << vm.vcpus << ',' << csv::format_double(vm.power_watts) << ','
            << vm.predicted_lifetime_steps << ',' << vm.actual_lifetime_steps << ','
            << to_string(vm.category) << '\n';
    }
}

}  // namespace skybox
