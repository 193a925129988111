#pragma once

#include "rtsched/fixpoint.hpp"
#include "rtsched/model.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <vector>

namespace rtsched::cache {

// One core's taskset with its cache-partition assignment. Partition indices
// are local to the core's reserved partitions; tasks carry unique priorities.
struct CoreAlloc {
    std::vector<Task> tasks;
    std::map<int, std::set<int>> parts;  // task id -> S_i
    Duration delta{};
    std::uint64_t iteration_cap = 1'000'000;

    const Task& task(int id) const {
        for (const auto& t : tasks)
            if (t.id == id) return t;
        throw DomainError("task not on this core");
    }
    const std::set<int>& parts_of(int id) const {
        static const std::set<int> empty;
        auto it = parts.find(id);
        return it == parts.end() ? empty : it->second;
    }
    int assigned_count(int id) const {
        auto n = parts_of(id).size();
        return n == 0 ? 1 : static_cast<int>(n);
    }
    Duration wcet_of(int id) const { return task(id).wcet_at(assigned_count(id)); }
    const Task& lowest_priority_task() const {
        if (tasks.empty()) throw DomainError("empty core");
        return *std::min_element(tasks.begin(), tasks.end(),
                                 [](const Task& a, const Task& b) {
                                     return a.priority < b.priority;
                                 });
    }
};

namespace detail {
inline std::size_t shared_with_union(const std::set<int>& sj,
                                     const std::vector<const Task*>& others,
                                     const CoreAlloc& a) {
    std::set<int> uni;
    for (const Task* t : others) {
        const auto& s = a.parts_of(t->id);
        uni.insert(s.begin(), s.end());
    }
    std::size_t n = 0;
    for (int p : sj)
        if (uni.count(p)) n++;
    return n;
}
}  // namespace detail

// Cache warm-up delay omega_{j,i}: partitions of tau_j polluted by tasks of
// priority >= pi_i while tau_j was inactive.
inline Duration warmup_delay(const CoreAlloc& a, int j, int i) {
    const Task& tj = a.task(j);
    const Task& ti = a.task(i);
    std::vector<const Task*> others;
    for (const auto& t : a.tasks)
        if (t.id != tj.id && t.priority >= ti.priority) others.push_back(&t);
    auto n = detail::shared_with_union(a.parts_of(j), others, a);
    return static_cast<std::int64_t>(n) * a.delta;
}

// Cache-related preemption delay gamma_{j,i}: reload cost tau_j imposes on
// tasks with priority in [pi_i, pi_j).
inline Duration crpd(const CoreAlloc& a, int j, int i) {
    const Task& tj = a.task(j);
    const Task& ti = a.task(i);
    if (tj.priority <= ti.priority)
        throw DomainError("crpd requires pi_j > pi_i");
    std::vector<const Task*> others;
    for (const auto& t : a.tasks)
        if (t.priority < tj.priority && t.priority >= ti.priority) others.push_back(&t);
    auto n = detail::shared_with_union(a.parts_of(j), others, a);
    return static_cast<std::int64_t>(n) * a.delta;
}

// gamma_{j,i} with gamma_{i,i} = 0 shorthand (no strictly-between tasks).
inline Duration crpd_or_zero(const CoreAlloc& a, int j, int i) {
    if (a.task(j).priority <= a.task(i).priority) return Duration::zero();
    return crpd(a, j, i);
}

// Liu-and-Layland style utilization with warm-up and preemption penalties
// charged at the level of the lowest-priority task.
inline Rational core_utilization(const CoreAlloc& a) {
    if (a.tasks.empty()) return Rational(0);
    const Task& n = a.lowest_priority_task();
    Rational u(0);
    for (const auto& t : a.tasks) {
        Duration c = a.wcet_of(t.id);
        Duration omega = warmup_delay(a, t.id, n.id);
        Duration gamma = crpd_or_zero(a, t.id, n.id);
        u += ratio(c + omega + gamma, t.period);
    }
    return u;
}

// Iterative response-time test with cache warm-up and preemption delays.
// The first job of each higher-priority task charges omega_{h,n}, subsequent
// jobs omega_{h,i}; every job charges gamma_{h,i}.
inline Wcrt response_time(const CoreAlloc& a, int task_id) {
    const Task& ti = a.task(task_id);
    const Task& n = a.lowest_priority_task();
    const Duration ci = a.wcet_of(task_id);
    const Duration omega_in = warmup_delay(a, task_id, n.id);

    struct Hp {
        Duration c, period, omega_hn, omega_hi, gamma_hi;
    };
    std::vector<Hp> hp;
    for (const auto& th : a.tasks) {
        if (th.priority <= ti.priority) continue;
        hp.push_back({a.wcet_of(th.id), th.period, warmup_delay(a, th.id, n.id),
                      warmup_delay(a, th.id, task_id), crpd(a, th.id, task_id)});
    }

    return fixpoint(ci + omega_in, ti.deadline, a.iteration_cap, [&](Duration w) {
        Duration next = ci + omega_in;
        for (const auto& h : hp) {
            std::int64_t jobs = ceil_div(w, h.period);
            if (jobs < 1) jobs = 1;
            next += jobs * h.c;
            next += h.omega_hn + (jobs - 1) * h.omega_hi;
            next += jobs * h.gamma_hi;
        }
        return next;
    });
}

inline bool core_schedulable(const CoreAlloc& a) {
    return std::all_of(a.tasks.begin(), a.tasks.end(), [&](const Task& t) {
        return response_time(a, t.id).schedulable();
    });
}

// Memory co-partitioning feasibility: per partition, the per-partition memory
// shares of the tasks using it must fit one memory partition.
struct PartitionVerdict {
    int partition;
    Rational load_mb;  // sum of M_i / |S_i| over tasks holding the partition
    bool feasible;
};

inline std::vector<PartitionVerdict> copart_feasible(
    const std::vector<Task>& tasks, const std::map<int, std::set<int>>& parts,
    std::int64_t mem_total_mb, int n_cache) {
    Rational limit(mem_total_mb, n_cache);
    std::map<int, Rational> load;
    for (const auto& t : tasks) {
        auto it = parts.find(t.id);
        if (it == parts.end() || it->second.empty()) continue;
        Rational share(t.mem_mb, static_cast<std::int64_t>(it->second.size()));
        for (int p : it->second) load[p] += share;
    }
    std::vector<PartitionVerdict> out;
    for (const auto& [p, l] : load) out.push_back({p, l, l <= limit});
    return out;
}

inline bool copart_all_feasible(const std::vector<Task>& tasks,
                                const std::map<int, std::set<int>>& parts,
                                std::int64_t mem_total_mb, int n_cache) {
    auto v = copart_feasible(tasks, parts, mem_total_mb, n_cache);
    return std::all_of(v.begin(), v.end(),
                       [](const PartitionVerdict& x) { return x.feasible; });
}

struct CacheAllocParams {
    Duration delta{};
    std::int64_t mem_total_mb = 0;
    int n_cache_global = 1;  // partition size denominator for the memory condition
    std::uint64_t iteration_cap = 1'000'000;
    std::uint64_t candidate_cap = 100'000;  // exhaustive search bound
};

// Lays out per-task partition counts as concrete indices with a running
// circular index over 1..n_avail, visiting tasks in decreasing priority.
inline std::map<int, std::set<int>> circular_layout(const std::vector<Task>& tasks,
                                                    const std::vector<int>& counts,
                                                    int n_avail) {
    std::vector<std::size_t> order(tasks.size());
    for (std::size_t i = 0; i < order.size(); i++) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return tasks[x].priority > tasks[y].priority;
    });
    std::map<int, std::set<int>> parts;
    int cache_idx = 1;
    for (std::size_t oi : order) {
        std::set<int> s;
        for (int k = 0; k < counts[oi]; k++) {
            s.insert(cache_idx);
            cache_idx = cache_idx % n_avail + 1;
        }
        parts[tasks[oi].id] = std::move(s);
    }
    return parts;
}

struct MinCacheAllocResult {
    std::optional<std::map<int, std::set<int>>> alloc;
    Util util = Util::inf();
    bool heuristic = false;  // candidate space was capped; greedy fallback used
};

// Feasible cache allocation with minimum CPU utilization. Candidates are
// per-task partition counts in 1..n_avail laid out circularly; exhaustive
// when the count grid is small enough, otherwise a single greedy candidate
// picking each task's count against fully-shared partitions.
inline MinCacheAllocResult min_cache_alloc(const std::vector<Task>& tasks, int n_avail,
                                           const CacheAllocParams& prm) {
    MinCacheAllocResult result;
    if (n_avail <= 0) return result;  // no allocation is possible without partitions
    if (tasks.empty()) {
        result.alloc = std::map<int, std::set<int>>{};
        result.util = Util::of(Rational(0));
        return result;
    }

    const auto n = tasks.size();
    Util best = Util::of(Rational(1));  // candidates above full utilization are rejected
    bool found = false;
    std::map<int, std::set<int>> best_alloc;

    auto consider = [&](const std::vector<int>& counts) {
        auto parts = circular_layout(tasks, counts, n_avail);
        CoreAlloc a{tasks, parts, prm.delta, prm.iteration_cap};
        if (!core_schedulable(a)) return;
        if (!copart_all_feasible(tasks, parts, prm.mem_total_mb, prm.n_cache_global))
            return;
        Util u = Util::of(core_utilization(a));
        if (u <= best) {
            best = u;
            best_alloc = std::move(parts);
            found = true;
        }
    };

    // Candidate-space size: n_avail^n, capped.
    double space = 1;
    for (std::size_t i = 0; i < n; i++) space *= n_avail;
    if (space <= static_cast<double>(prm.candidate_cap)) {
        std::vector<int> counts(n, 1);
        while (true) {
            consider(counts);
            std::size_t pos = 0;
            while (pos < n && counts[pos] == n_avail) counts[pos++] = 1;
            if (pos == n) break;
            counts[pos]++;
        }
    } else {
        result.heuristic = true;
        // Per-task argmin of C_i(k)/T_i + gamma/T_i, approximating the CRPD
        // as if all other tasks held every partition.
        const Task& lowest = *std::min_element(
            tasks.begin(), tasks.end(),
            [](const Task& a, const Task& b) { return a.priority < b.priority; });
        std::vector<int> counts(n, 1);
        for (std::size_t i = 0; i < n; i++) {
            Rational bestv;
            int bestk = 1;
            for (int k = 1; k <= n_avail; k++) {
                Duration gamma = (tasks.size() > 1 && tasks[i].id != lowest.id)
                                     ? k * prm.delta
                                     : Duration::zero();
                Rational v = ratio(tasks[i].wcet_at(k) + gamma, tasks[i].period);
                if (k == 1 || v < bestv) {
                    bestv = v;
                    bestk = k;
                }
            }
            counts[i] = bestk;
        }
        consider(counts);
    }

    if (found) {
        result.alloc = std::move(best_alloc);
        result.util = best;
    }
    return result;
}

// Best-fit core for a task: the feasible core left with the least remaining
// utilization after insertion. Returns 0 when no core fits (cores 1-based).
inline int find_best_fit(const Task& task, int n_cores,
                         const std::vector<std::vector<Task>>& per_core_tasks,
                         const std::vector<int>& per_core_cache,
                         const CacheAllocParams& prm) {
    Rational space(1);
    int cid = 0;
    for (int j = 1; j <= n_cores; j++) {
        std::vector<Task> trial = per_core_tasks[static_cast<std::size_t>(j - 1)];
        trial.push_back(task);
        auto r = min_cache_alloc(trial, per_core_cache[static_cast<std::size_t>(j - 1)], prm);
        if (!r.alloc) continue;
        Rational remaining = Rational(1) - r.util.value;
        if (space >= remaining) {
            space = remaining;
            cid = j;
        }
    }
    return cid;
}

struct CataResult {
    bool schedulable = false;
    std::vector<std::vector<Task>> per_core_tasks;
    std::vector<int> per_core_cache;
    int remaining_partitions = 0;
    std::vector<int> unplaced_task_ids;
};

// Cache-aware task allocation: best-fit decreasing on average utilization,
// growing the winning core's partition count only when a task fits nowhere.
inline CataResult cache_aware_task_alloc(std::vector<Task> tasks, int n_cores,
                                         int n_cache, const CacheAllocParams& prm) {
    CataResult res;
    res.per_core_tasks.assign(static_cast<std::size_t>(n_cores), {});
    res.per_core_cache.assign(static_cast<std::size_t>(n_cores), 0);

    auto avg_util = [&](const Task& t) {
        Rational sum(0);
        for (int k = 1; k <= n_cache; k++) sum += ratio(t.wcet_at(k), t.period);
        return sum / n_cache;
    };
    std::sort(tasks.begin(), tasks.end(), [&](const Task& a, const Task& b) {
        Rational ua = avg_util(a), ub = avg_util(b);
        if (ua != ub) return ub < ua;
        return a.id < b.id;
    });

    int remaining = n_cache;
    for (const auto& t : tasks) {
        int cid = find_best_fit(t, n_cores, res.per_core_tasks, res.per_core_cache, prm);
        if (cid > 0) {
            res.per_core_tasks[static_cast<std::size_t>(cid - 1)].push_back(t);
            continue;
        }
        bool placed = false;
        for (int k = 1; k <= remaining && !placed; k++) {
            std::vector<int> grown = res.per_core_cache;
            for (auto& g : grown) g += k;
            cid = find_best_fit(t, n_cores, res.per_core_tasks, grown, prm);
            if (cid > 0) {
                res.per_core_tasks[static_cast<std::size_t>(cid - 1)].push_back(t);
                res.per_core_cache[static_cast<std::size_t>(cid - 1)] += k;
                remaining -= k;
                placed = true;
            }
        }
        if (!placed) res.unplaced_task_ids.push_back(t.id);
    }
    res.remaining_partitions = remaining;
    res.schedulable = res.unplaced_task_ids.empty();
    return res;
}

}  // namespace rtsched::cache
