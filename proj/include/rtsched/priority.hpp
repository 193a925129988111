#pragma once

#include "rtsched/model.hpp"

#include <algorithm>
#include <map>
#include <vector>

namespace rtsched {

// Rate-monotonic priorities: shorter period => higher priority, ties broken
// by lower id. Returns id -> priority with priorities 1..n, larger = higher.
inline std::map<int, int> assign_rms_priorities(
    const std::vector<std::pair<int, Duration>>& id_period) {
    for (const auto& [id, period] : id_period)
        if (!period.is_positive()) throw DomainError("rms: period must be positive");
    std::vector<std::pair<int, Duration>> order = id_period;
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });
    std::map<int, int> prio;
    int n = static_cast<int>(order.size());
    for (int i = 0; i < n; i++) prio[order[i].first] = n - i;
    return prio;
}

inline std::map<int, int> assign_rms_priorities(const std::vector<Task>& tasks) {
    std::vector<std::pair<int, Duration>> ip;
    ip.reserve(tasks.size());
    for (const auto& t : tasks) ip.emplace_back(t.id, t.period);
    return assign_rms_priorities(ip);
}

inline std::map<int, int> assign_rms_priorities(const std::vector<Vcpu>& vcpus) {
    std::vector<std::pair<int, Duration>> ip;
    ip.reserve(vcpus.size());
    for (const auto& v : vcpus) ip.emplace_back(v.id, v.period);
    return assign_rms_priorities(ip);
}

}  // namespace rtsched
