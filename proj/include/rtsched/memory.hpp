#pragma once

#include "rtsched/dram.hpp"
#include "rtsched/fixpoint.hpp"
#include "rtsched/model.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <vector>

namespace rtsched::mem {

// Partitioned view of the system for the DRAM interference analysis:
// per-core tasksets and per-core bank-partition sets (0-based core index).
struct MemView {
    std::vector<std::vector<Task>> core_tasks;
    std::vector<std::set<int>> core_banks;
    dram::LatencyTerms terms;
    std::uint64_t iteration_cap = 1'000'000;
    // Cache-combined extension (zero delta_requests disables it).
    std::int64_t delta_requests = 0;
    std::map<int, std::set<int>> task_parts;

    int n_cores() const { return static_cast<int>(core_tasks.size()); }
    bool shares(int p, int q) const {
        const auto& a = core_banks[static_cast<std::size_t>(p)];
        const auto& b = core_banks[static_cast<std::size_t>(q)];
        return std::any_of(a.begin(), a.end(), [&](int x) { return b.count(x) > 0; });
    }
    int assigned_k(const Task& t) const {
        auto it = task_parts.find(t.id);
        if (it == task_parts.end() || it->second.empty()) return 1;
        return static_cast<int>(it->second.size());
    }
    Duration wcet(const Task& t) const { return t.wcet_at(assigned_k(t)); }
    std::int64_t requests(const Task& t) const { return t.dram_requests_at(assigned_k(t)); }
    const std::set<int>& parts_of(int task_id) const {
        static const std::set<int> empty;
        auto it = task_parts.find(task_id);
        return it == task_parts.end() ? empty : it->second;
    }
};

// --- Request-driven bound: worst-case delay per memory request. ---

inline Duration request_inter(const MemView& v, int p) {
    Duration d{};
    for (int q = 0; q < v.n_cores(); q++)
        if (q != p && !v.shares(q, p))
            d += v.terms.l_pre + v.terms.l_act + v.terms.l_rw;
    return d;
}

// Re-ordering effect at p's bank: consecutive row-hits prioritized ahead of
// an older row-conflict, plus the extra PRE+ACT the demoted request needs.
inline Duration reorder_delay(const MemView& v, int p) {
    bool any_sharer = false;
    for (int q = 0; q < v.n_cores(); q++)
        if (q != p && v.shares(q, p)) any_sharer = true;
    if (!any_sharer) return Duration::zero();
    Duration d = v.terms.conhit(v.terms.n_reorder);
    for (int q = 0; q < v.n_cores(); q++)
        if (q != p && !v.shares(q, p)) d += v.terms.n_reorder * v.terms.l_rw;
    d += (v.terms.timing.t_rp + v.terms.timing.t_rcd) * v.terms.timing.t_ck;
    return d;
}

inline Duration request_intra(const MemView& v, int p) {
    Duration d = reorder_delay(v, p);
    for (int q = 0; q < v.n_cores(); q++)
        if (q != p && v.shares(q, p)) d += v.terms.l_conf + request_inter(v, q);
    return d;
}

struct RequestDriven {
    Duration inter{}, intra{};
    Duration total() const { return inter + intra; }
};

inline RequestDriven request_driven_delay(const MemView& v, int p) {
    return {request_inter(v, p), request_intra(v, p)};
}

// --- Job-driven bound: interfering requests within a window. ---

// gamma*_{j,i}: memory requests needed to reload the partitions of tau_j
// polluted by tasks with priority in [pi_i, pi_j), on one core.
inline std::int64_t crpd_requests(const MemView& v, const std::vector<Task>& core,
                                  const Task& tj, const Task& ti) {
    if (v.delta_requests == 0 || tj.priority <= ti.priority) return 0;
    std::set<int> uni;
    for (const auto& tk : core) {
        if (tk.priority < tj.priority && tk.priority >= ti.priority) {
            const auto& s = v.parts_of(tk.id);
            uni.insert(s.begin(), s.end());
        }
    }
    std::int64_t n = 0;
    for (int part : v.parts_of(tj.id))
        if (uni.count(part)) n++;
    return n * v.delta_requests;
}

// A_q(t): requests core q can issue in a window of length t, one carry-in
// job per task. With `with_reload` set (the cache-combined analysis), each
// job also charges its partition-reload requests at the level of the core's
// lowest-priority task.
inline std::int64_t arrivals(const MemView& v, int q, Duration t,
                             bool with_reload = false) {
    const auto& core = v.core_tasks[static_cast<std::size_t>(q)];
    if (core.empty()) return 0;
    const Task& lowest = *std::min_element(
        core.begin(), core.end(),
        [](const Task& a, const Task& b) { return a.priority < b.priority; });
    std::int64_t total = 0;
    for (const auto& task : core) {
        std::int64_t jobs = ceil_div(t, task.period) + 1;
        std::int64_t h = v.requests(task);
        if (with_reload) h += crpd_requests(v, core, task, lowest);
        total += jobs * h;
    }
    return total;
}

inline Duration job_inter(const MemView& v, int p, Duration t,
                          bool with_reload = false) {
    Duration d{};
    for (int q = 0; q < v.n_cores(); q++)
        if (q != p && !v.shares(q, p))
            d += arrivals(v, q, t, with_reload) *
                 (v.terms.l_act + v.terms.l_rw + v.terms.l_pre);
    return d;
}

inline Duration job_intra(const MemView& v, int p, Duration t,
                          bool with_reload = false) {
    Duration d{};
    for (int q = 0; q < v.n_cores(); q++)
        if (q != p && v.shares(q, p))
            d += arrivals(v, q, t, with_reload) * v.terms.l_conf +
                 job_inter(v, q, t, with_reload);
    return d;
}

inline Duration job_driven_delay(const MemView& v, int p, Duration t,
                                 bool with_reload = false) {
    return job_inter(v, p, t, with_reload) + job_intra(v, p, t, with_reload);
}

// --- Response-time tests. ---

// Response time with memory interference bounded by the smaller of the
// request-driven and job-driven approaches.
inline Wcrt response_time_memory(const MemView& v, int p, int task_id) {
    const auto& core = v.core_tasks[static_cast<std::size_t>(p)];
    const Task* ti = nullptr;
    for (const auto& t : core)
        if (t.id == task_id) ti = &t;
    if (!ti) throw DomainError("task not on core");

    const Duration rd = request_driven_delay(v, p).total();
    const Duration ci = v.wcet(*ti);
    const std::int64_t hi = v.requests(*ti);

    return fixpoint(ci, ti->deadline, v.iteration_cap, [&](Duration w) {
        Duration next = ci;
        std::int64_t req = hi;
        for (const auto& th : core) {
            if (th.priority <= ti->priority) continue;
            std::int64_t jobs = ceil_div(w, th.period);
            if (jobs < 1) jobs = 1;
            next += jobs * v.wcet(th);
            req += jobs * v.requests(th);
        }
        Duration request_bound = req * rd;
        Duration job_bound = job_driven_delay(v, p, w);
        next += std::min(request_bound, job_bound);
        return next;
    });
}

// Combined cache+memory response time: partition-reload cost is charged as
// extra memory requests (request-driven via H*, job-driven via the extended
// arrival function), never as separate CPU time.
inline Wcrt response_time_cache_memory(const MemView& v, int p, int task_id) {
    const auto& core = v.core_tasks[static_cast<std::size_t>(p)];
    const Task* ti = nullptr;
    for (const auto& t : core)
        if (t.id == task_id) ti = &t;
    if (!ti) throw DomainError("task not on core");

    const Duration rd = request_driven_delay(v, p).total();
    const Duration ci = v.wcet(*ti);
    const std::int64_t hi = v.requests(*ti);

    return fixpoint(ci, ti->deadline, v.iteration_cap, [&](Duration w) {
        Duration next = ci;
        std::int64_t req = hi;
        for (const auto& th : core) {
            if (th.priority <= ti->priority) continue;
            std::int64_t jobs = ceil_div(w, th.period);
            if (jobs < 1) jobs = 1;
            next += jobs * v.wcet(th);
            req += jobs * (v.requests(th) + crpd_requests(v, core, th, *ti));
        }
        Duration request_bound = req * rd;
        Duration job_bound = job_driven_delay(v, p, w, /*with_reload=*/true);
        next += std::min(request_bound, job_bound);
        return next;
    });
}

inline bool core_schedulable_memory(const MemView& v, int p) {
    const auto& core = v.core_tasks[static_cast<std::size_t>(p)];
    return std::all_of(core.begin(), core.end(), [&](const Task& t) {
        return response_time_memory(v, p, t.id).schedulable();
    });
}

inline bool system_schedulable_memory(const MemView& v) {
    for (int p = 0; p < v.n_cores(); p++)
        if (!core_schedulable_memory(v, p)) return false;
    return true;
}

}  // namespace rtsched::mem
