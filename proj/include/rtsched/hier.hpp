#pragma once

#include "rtsched/cache.hpp"
#include "rtsched/fixpoint.hpp"
#include "rtsched/model.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <vector>

namespace rtsched::hier {

// VCPU response time on a PCPU; deferrable higher-priority VCPUs interfere
// with release jitter T^v - C^v. Schedulable iff the result fits the period.
inline Wcrt vcpu_response_time(const Vcpu& vi, const std::vector<Vcpu>& pcpu_vcpus,
                               std::uint64_t iteration_cap) {
    Duration ci = vi.budget_value();
    return fixpoint(ci, vi.period, iteration_cap, [&](Duration w) {
        Duration next = ci;
        for (const auto& vh : pcpu_vcpus) {
            if (vh.pcpu != vi.pcpu || vh.priority <= vi.priority) continue;
            next += ceil_div(w + vh.jitter(), vh.period) * vh.budget_value();
        }
        return next;
    });
}

// Tasks hosted on one VCPU with their cache-partition assignment.
struct VcpuTaskView {
    std::vector<Task> tasks;
    std::map<int, std::set<int>> parts;
    Duration delta{};
    Duration budget{};  // C^v
    Duration period{};  // T^v
    std::uint64_t iteration_cap = 1'000'000;

    cache::CoreAlloc as_core() const {
        return cache::CoreAlloc{tasks, parts, delta, iteration_cap};
    }
};

// Hierarchical response time of a task on a VCPU: higher-priority tasks
// interfere with the budget-gap jitter and carry their CRPD; the last term
// is the budget-supply gap of the VCPU itself.
inline Wcrt task_response_time(const VcpuTaskView& v, int task_id) {
    auto core = v.as_core();
    const Task& ti = core.task(task_id);
    const Duration ci = core.wcet_of(task_id);
    const Duration gap = v.period - v.budget;
    return fixpoint(ci, ti.deadline, v.iteration_cap, [&](Duration w) {
        Duration next = ci;
        for (const auto& th : v.tasks) {
            if (th.priority <= ti.priority) continue;
            Duration gamma = cache::crpd(core, th.id, task_id);
            next += ceil_div(w + gap, th.period) * (core.wcet_of(th.id) + gamma);
        }
        next += ceil_div(w + v.budget, v.period) * gap;
        return next;
    });
}

inline bool vcpu_tasks_schedulable(const VcpuTaskView& v) {
    return std::all_of(v.tasks.begin(), v.tasks.end(), [&](const Task& t) {
        return task_response_time(v, t.id).schedulable();
    });
}

// Taskset utilization with intra-VCPU CRPD charged at the lowest-priority
// task's level.
inline Rational taskset_util(const VcpuTaskView& v) {
    if (v.tasks.empty()) return Rational(0);
    auto core = v.as_core();
    const Task& n = core.lowest_priority_task();
    Rational u(0);
    for (const auto& t : v.tasks) {
        Duration gamma = cache::crpd_or_zero(core, t.id, n.id);
        u += ratio(core.wcet_of(t.id) + gamma, t.period);
    }
    return u;
}

struct CacheToTaskResult {
    Util util = Util::inf();
    std::map<int, std::set<int>> parts;  // meaningful when util is finite
};

// Heuristic cache-to-task allocation on one VCPU: each task takes the
// partition count minimizing its utilization-plus-CRPD share (CRPD
// approximated as if all other tasks held every partition), with concrete
// indices assigned by a running circular counter so that sharing stays even.
inline CacheToTaskResult cache_to_task_alloc(const std::vector<Task>& tasks, int n_cache,
                                             Duration budget, Duration period,
                                             Duration delta,
                                             std::uint64_t iteration_cap = 1'000'000) {
    CacheToTaskResult res;
    if (n_cache <= 0) return res;
    if (tasks.empty()) {
        res.util = Util::of(Rational(0));
        return res;
    }

    std::vector<std::size_t> order(tasks.size());
    for (std::size_t i = 0; i < order.size(); i++) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return tasks[a].priority > tasks[b].priority;
    });
    const std::size_t lowest = order.back();

    std::map<int, std::set<int>> parts;
    int cache_idx = 1;
    for (std::size_t oi : order) {
        const Task& t = tasks[oi];
        int best_k = 1;
        Rational best_v;
        for (int k = 1; k <= n_cache; k++) {
            Duration gamma = (oi != lowest && tasks.size() > 1) ? k * delta
                                                                : Duration::zero();
            Rational val = ratio(t.wcet_at(k) + gamma, t.period);
            if (k == 1 || val < best_v) {
                best_v = val;
                best_k = k;
            }
        }
        std::set<int> s;
        for (int k = 0; k < best_k; k++) {
            s.insert(cache_idx);
            cache_idx = cache_idx % n_cache + 1;
        }
        parts[t.id] = std::move(s);
    }

    VcpuTaskView view{tasks, parts, delta, budget, period, iteration_cap};
    if (!vcpu_tasks_schedulable(view)) return res;
    res.util = Util::of(taskset_util(view));
    res.parts = std::move(parts);
    return res;
}

// Bundle utilization assuming one dedicated partition per task.
inline Rational bundle_util_one_partition(const std::vector<Task>& bundle) {
    Rational u(0);
    for (const auto& t : bundle) u += ratio(t.wcet_at(1), t.period);
    return u;
}

// Cache sensitivity (C(1) - C(N_cache)) / T.
inline Rational cache_sensitivity(const Task& t, int n_cache) {
    return ratio(t.wcet_at(1) - t.wcet_at(n_cache), t.period);
}

// Splits a bundle by moving tasks out of the first sub-bundle in increasing
// cache sensitivity until it fits `size`; always moves at least one task.
inline std::pair<std::vector<Task>, std::vector<Task>> break_bundle(
    std::vector<Task> bundle, Rational size, int n_cache) {
    std::sort(bundle.begin(), bundle.end(), [&](const Task& a, const Task& b) {
        Rational sa = cache_sensitivity(a, n_cache), sb = cache_sensitivity(b, n_cache);
        if (sa != sb) return sa < sb;
        return a.id < b.id;
    });
    std::vector<Task> first = bundle;
    std::vector<Task> second;
    for (const auto& t : bundle) {
        first.erase(std::find_if(first.begin(), first.end(),
                                 [&](const Task& x) { return x.id == t.id; }));
        second.push_back(t);
        if (bundle_util_one_partition(first) <= size) break;
    }
    return {first, second};
}

struct VcpuState {
    int id = 0;
    std::vector<Task> tasks;
    int cache_count = 0;  // S^v
};

// Best-fit VCPU for a bundle: smallest extra partition count k, fullest VCPU
// first, such that the cache-to-task heuristic fits within full utilization.
inline std::optional<std::pair<int, int>> best_fit_with_cache(
    const std::vector<Task>& bundle, const std::vector<VcpuState>& vcpus, int n_rem,
    Duration budget, Duration period, Duration delta, std::uint64_t iteration_cap) {
    std::vector<std::size_t> order(vcpus.size());
    for (std::size_t i = 0; i < order.size(); i++) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return bundle_util_one_partition(vcpus[b].tasks) <
               bundle_util_one_partition(vcpus[a].tasks);
    });
    for (int k = 0; k <= n_rem; k++) {
        for (std::size_t vi : order) {
            std::vector<Task> trial = vcpus[vi].tasks;
            trial.insert(trial.end(), bundle.begin(), bundle.end());
            auto r = cache_to_task_alloc(trial, vcpus[vi].cache_count + k, budget,
                                         period, delta, iteration_cap);
            if (!r.util.infinite && r.util.value <= Rational(1))
                return std::make_pair(static_cast<int>(vi), k);
        }
    }
    return std::nullopt;
}

// Minimal VCPU budget (on a 1 us grid by default) under which every task on
// the VCPU stays schedulable; binary search over the grid.
inline std::optional<Duration> vcpu_budget_search(const std::vector<Task>& tasks,
                                                  const std::map<int, std::set<int>>& parts,
                                                  Duration period, Duration delta,
                                                  std::uint64_t iteration_cap = 1'000'000,
                                                  Duration step = Duration::us(1)) {
    if (tasks.empty()) return Duration::zero();
    auto feasible = [&](Duration budget) {
        VcpuTaskView v{tasks, parts, delta, budget, period, iteration_cap};
        return vcpu_tasks_schedulable(v);
    };
    std::int64_t hi = period.count() / step.count();  // grid units
    if (!feasible(hi * step)) return std::nullopt;
    std::int64_t lo = 0;
    if (feasible(Duration::zero())) return Duration::zero();
    while (hi - lo > 1) {
        std::int64_t mid = lo + (hi - lo) / 2;
        if (feasible(mid * step))
            hi = mid;
        else
            lo = mid;
    }
    return hi * step;
}

struct CavmResult {
    bool success = false;
    // Per VCPU: hosted tasks and the budget curve C^v(k); entries without a
    // value are invalid (taskset not schedulable with k partitions).
    std::vector<std::vector<Task>> vcpu_tasks;
    std::vector<std::vector<std::optional<Duration>>> budget_curve;  // [vcpu][k-1]
    std::vector<int> cache_count;
};

// Cache-aware VM design. Phase 1 packs cache-sensitive bundles onto VCPUs
// under full budgets; phase 2 derives each VCPU's minimal budget per
// partition count, forced monotone non-increasing by inheriting C^v(k-1).
inline CavmResult cavm(const std::vector<Task>& taskset, int n_vcpu, int n_cache,
                       Duration period, Duration delta,
                       std::uint64_t iteration_cap = 1'000'000,
                       Duration budget_step = Duration::us(1)) {
    if (!period.is_positive()) throw DomainError("cavm: period must be positive");
    CavmResult res;
    res.vcpu_tasks.assign(static_cast<std::size_t>(n_vcpu), {});
    res.cache_count.assign(static_cast<std::size_t>(n_vcpu), 0);

    std::vector<VcpuState> vcpus(static_cast<std::size_t>(n_vcpu));
    for (int i = 0; i < n_vcpu; i++) vcpus[static_cast<std::size_t>(i)].id = i;
    int n_rem = n_cache;
    const Duration full_budget = period;

    // Cuts a bundle at the cap. When the sensitivity-ordered cut inside
    // break_bundle strips the first sub-bundle empty (a single task can
    // exceed the cap on its own), fall back to seeding with the
    // highest-utilization task so bundling always makes progress; that task
    // may still be hosted with extra partitions thanks to its wcet curve.
    auto cut = [&](std::vector<Task> bundle, Rational cap) {
        auto parts = break_bundle(std::move(bundle), cap, n_cache);
        auto& [first, second] = parts;
        if (first.empty() && second.size() > 1) {
            std::size_t seed = 0;
            for (std::size_t i = 1; i < second.size(); i++) {
                Rational ui = ratio(second[i].wcet_at(1), second[i].period);
                Rational us = ratio(second[seed].wcet_at(1), second[seed].period);
                if (us < ui || (ui == us && second[i].id < second[seed].id)) seed = i;
            }
            first.push_back(second[seed]);
            second.erase(second.begin() + static_cast<std::ptrdiff_t>(seed));
        }
        return parts;
    };

    // Phase 1: initial bundling, then best-fit-decreasing allocation.
    std::vector<std::vector<Task>> pending;
    {
        std::vector<Task> rest = taskset;
        while (rest.size() > 1 && bundle_util_one_partition(rest) > Rational(1)) {
            auto [first, second] = cut(rest, Rational(1));
            pending.push_back(std::move(first));
            rest = std::move(second);
        }
        pending.push_back(std::move(rest));
    }

    auto avg_util = [&](const std::vector<Task>& bundle) {
        Rational u(0);
        for (const auto& t : bundle)
            for (int k = 1; k <= n_cache; k++) u += ratio(t.wcet_at(k), t.period) / n_cache;
        return u;
    };

    std::uint64_t rounds = 0;
    while (!pending.empty()) {
        if (++rounds > 10'000) throw AnalysisError("cavm bundling made no progress");
        std::stable_sort(pending.begin(), pending.end(),
                         [&](const auto& a, const auto& b) { return avg_util(b) < avg_util(a); });
        std::vector<std::vector<Task>> rest;
        for (auto& bundle : pending) {
            auto hit = best_fit_with_cache(bundle, vcpus, n_rem, full_budget, period,
                                           delta, iteration_cap);
            if (hit) {
                auto [vi, k] = *hit;
                auto& v = vcpus[static_cast<std::size_t>(vi)];
                v.tasks.insert(v.tasks.end(), bundle.begin(), bundle.end());
                v.cache_count += k;
                n_rem -= k;
            } else {
                rest.push_back(std::move(bundle));
            }
        }
        pending.clear();
        if (rest.empty()) continue;

        bool singletons = true;
        for (auto& bundle : rest) {
            if (bundle.size() > 1) {
                singletons = false;
                Rational min_util = bundle_util_one_partition(vcpus[0].tasks);
                for (const auto& v : vcpus)
                    min_util = std::min(min_util, bundle_util_one_partition(v.tasks));
                auto [first, second] = cut(std::move(bundle), Rational(1) - min_util);
                pending.push_back(std::move(first));
                pending.push_back(std::move(second));
            } else {
                pending.push_back(std::move(bundle));
            }
        }
        if (singletons) return res;  // unallocated singletons cannot be broken
    }

    // Phase 2: budget curves per VCPU.
    res.budget_curve.assign(static_cast<std::size_t>(n_vcpu), {});
    for (int vi = 0; vi < n_vcpu; vi++) {
        auto& v = vcpus[static_cast<std::size_t>(vi)];
        auto& curve = res.budget_curve[static_cast<std::size_t>(vi)];
        curve.assign(static_cast<std::size_t>(n_cache), std::nullopt);
        std::optional<Duration> prev;
        for (int k = 1; k <= n_cache; k++) {
            std::optional<Duration> cur;
            auto alloc = cache_to_task_alloc(v.tasks, k, full_budget, period, delta,
                                             iteration_cap);
            if (!alloc.util.infinite && alloc.util.value <= Rational(1)) {
                cur = vcpu_budget_search(v.tasks, alloc.parts, period, delta,
                                         iteration_cap, budget_step);
                if (cur) v.cache_count = k;
            }
            if (prev && (!cur || *cur > *prev)) cur = prev;  // keep monotone
            curve[static_cast<std::size_t>(k - 1)] = cur;
            prev = cur;
        }
        res.vcpu_tasks[static_cast<std::size_t>(vi)] = v.tasks;
        res.cache_count[static_cast<std::size_t>(vi)] = v.cache_count;
    }
    res.success = true;
    return res;
}

struct VcpuBudgetCurve {
    std::vector<std::optional<Duration>> by_k;  // by_k[k-1] = C^v(k)
    Duration period{};

    int min_valid_k() const {
        for (std::size_t i = 0; i < by_k.size(); i++)
            if (by_k[i]) return static_cast<int>(i + 1);
        return -1;
    }
    Duration at(int k) const {
        auto v = by_k.at(static_cast<std::size_t>(k - 1));
        if (!v) throw DomainError("budget curve sampled at invalid k");
        return *v;
    }
};

struct CacheToVmResult {
    bool success = false;
    std::vector<int> counts;  // partitions per VCPU
    Rational total_util;      // U(N_cache)
};

// Dynamic program distributing host cache partitions over VCPUs to minimize
// total VM utilization, exploiting monotone budget curves.
inline CacheToVmResult cache_to_vm_alloc(const std::vector<VcpuBudgetCurve>& vcpus,
                                         int n_cache) {
    CacheToVmResult res;
    const int n = static_cast<int>(vcpus.size());
    if (n == 0) {
        res.success = true;
        res.total_util = Rational(0);
        return res;
    }
    int z = 0;
    std::vector<int> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; i++) {
        int xi = vcpus[static_cast<std::size_t>(i)].min_valid_k();
        if (xi < 0) return res;
        x[static_cast<std::size_t>(i)] = xi;
        z += xi;
    }
    if (n_cache < z) return res;

    std::vector<Rational> u(static_cast<std::size_t>(n_cache + 1));
    std::vector<std::vector<int>> rho(static_cast<std::size_t>(n_cache + 1));
    rho[static_cast<std::size_t>(z)] = x;
    Rational uz(0);
    for (int i = 0; i < n; i++)
        uz += ratio(vcpus[static_cast<std::size_t>(i)].at(x[static_cast<std::size_t>(i)]),
                    vcpus[static_cast<std::size_t>(i)].period);
    u[static_cast<std::size_t>(z)] = uz;

    for (int k = z + 1; k <= n_cache; k++) {
        bool have = false;
        Rational best;
        std::vector<int> best_rho;
        for (int kp = z; kp < k; kp++) {
            const auto& r = rho[static_cast<std::size_t>(kp)];
            int d = k - kp;
            // Largest single-VCPU gain from d extra partitions.
            bool gain_have = false;
            Rational gain;
            int gain_i = -1;
            for (int i = 0; i < n; i++) {
                int cur = r[static_cast<std::size_t>(i)];
                if (cur + d > n_cache) continue;
                const auto& vc = vcpus[static_cast<std::size_t>(i)];
                Rational gi = ratio(vc.at(cur) - vc.at(cur + d), vc.period);
                if (!gain_have || gain < gi) {
                    gain = gi;
                    gain_i = i;
                    gain_have = true;
                }
            }
            if (!gain_have) continue;
            Rational cand = u[static_cast<std::size_t>(kp)] - gain;
            if (!have || cand < best) {
                best = cand;
                best_rho = r;
                best_rho[static_cast<std::size_t>(gain_i)] += d;
                have = true;
            }
        }
        u[static_cast<std::size_t>(k)] = best;
        rho[static_cast<std::size_t>(k)] = std::move(best_rho);
    }

    res.success = true;
    res.counts = rho[static_cast<std::size_t>(n_cache)];
    res.total_util = u[static_cast<std::size_t>(n_cache)];
    return res;
}

}  // namespace rtsched::hier
