#pragma once

#include "rtsched/fixpoint.hpp"
#include "rtsched/model.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <vector>

namespace rtsched::gpu {

// Partitioned CPU view with one shared GPU. Core indices are 0-based.
struct System {
    std::vector<std::vector<Task>> core_tasks;
    std::optional<int> server_core;  // set under the server-based approach
    Duration epsilon{};              // GPU server overhead per intervention
    std::uint64_t iteration_cap = 1'000'000;

    int n_cores() const { return static_cast<int>(core_tasks.size()); }
    std::vector<const Task*> all_tasks() const {
        std::vector<const Task*> out;
        for (const auto& core : core_tasks)
            for (const auto& t : core) out.push_back(&t);
        return out;
    }
    int core_of(int task_id) const {
        for (int p = 0; p < n_cores(); p++)
            for (const auto& t : core_tasks[static_cast<std::size_t>(p)])
                if (t.id == task_id) return p;
        throw DomainError("task not allocated");
    }
};

// --- Synchronization-based access control (MPCP, busy-waiting). ---

// Response time of one GPU access segment: the segment itself plus one
// boosted segment per higher-priority GPU user on the same core.
inline Duration segment_response_time(const System& sys, const Task& tl,
                                      const GpuSegment& seg) {
    int p = sys.core_of(tl.id);
    Duration w = seg.total;
    for (const auto& tx : sys.core_tasks[static_cast<std::size_t>(p)]) {
        if (tx.priority <= tl.priority) continue;
        Duration longest{};
        for (const auto& g : tx.gpu_segments) longest = std::max(longest, g.total);
        w += longest;
    }
    return w;
}

// Remote blocking for the GPU mutex: one lower-priority segment response,
// plus repeated higher-priority segment responses, summed over the task's
// own segments.
inline std::optional<Duration> remote_blocking(const System& sys, const Task& ti,
                                               Duration bound) {
    struct Req {
        const Task* task;
        Duration w_gpu;
        bool higher;
    };
    std::vector<Req> reqs;
    for (const Task* t : sys.all_tasks()) {
        if (t->id == ti.id) continue;
        for (const auto& g : t->gpu_segments)
            reqs.push_back({t, segment_response_time(sys, *t, g),
                            t->priority > ti.priority});
    }
    Duration lower_max{};
    for (const auto& r : reqs)
        if (!r.higher) lower_max = std::max(lower_max, r.w_gpu);

    Duration total{};
    for (std::size_t j = 0; j < ti.gpu_segments.size(); j++) {
        auto fp = fixpoint(lower_max, bound, sys.iteration_cap, [&](Duration b) {
            Duration next = lower_max;
            for (const auto& r : reqs)
                if (r.higher) next += (ceil_div(b, r.task->period) + 1) * r.w_gpu;
            return next;
        });
        if (!fp.schedulable()) return std::nullopt;
        total += fp.get();
        if (total > bound) return std::nullopt;
    }
    return total;
}

// Task response time under the synchronization-based approach: GPU segments
// busy-wait on the CPU, higher tasks interfere with back-to-back jitter, and
// lower-priority boosted segments preempt once per suspension point.
inline Wcrt response_time_sync(const System& sys, const Task& ti,
                               const std::map<int, Duration>& higher_wcrt) {
    int p = sys.core_of(ti.id);
    const auto& core = sys.core_tasks[static_cast<std::size_t>(p)];
    const Duration cg = ti.wcet_at(1) + ti.gpu_total();

    auto br = remote_blocking(sys, ti, ti.deadline);
    if (!br) return Wcrt::unschedulable();

    Duration ceiling_preemption{};
    for (const auto& tl : core) {
        if (tl.priority >= ti.priority || tl.gpu_segments.empty()) continue;
        Duration longest{};
        for (const auto& g : tl.gpu_segments) longest = std::max(longest, g.total);
        ceiling_preemption += longest;
    }
    std::int64_t eta1 = static_cast<std::int64_t>(ti.gpu_segments.size()) + 1;

    struct Hp {
        Duration cg, period, jitter;
    };
    std::vector<Hp> hp;
    for (const auto& th : core) {
        if (th.priority <= ti.priority) continue;
        auto it = higher_wcrt.find(th.id);
        if (it == higher_wcrt.end()) return Wcrt::unschedulable();
        Duration chg = th.wcet_at(1) + th.gpu_total();
        hp.push_back({chg, th.period, it->second - chg});
    }

    Duration base = cg + *br + eta1 * ceiling_preemption;
    return fixpoint(base, ti.deadline, sys.iteration_cap, [&](Duration w) {
        Duration next = base;
        for (const auto& h : hp) next += ceil_div(w + h.jitter, h.period) * h.cg;
        return next;
    });
}

// --- Server-based access control (dedicated GPU server task). ---

// Waiting time of a request in the server's priority queue: one non-preemptive
// lower request plus repeated higher-priority requests, each with one server
// intervention. Only GPU-using tasks enqueue requests.
inline std::optional<Duration> request_wait_time(const System& sys, const Task& ti,
                                                 Duration bound) {
    Duration lower_max{};
    for (const Task* t : sys.all_tasks()) {
        if (t->id == ti.id || t->gpu_segments.empty()) continue;
        lower_max = std::max(lower_max, t->gpu_total() + sys.epsilon);
    }
    auto fp = fixpoint(lower_max, bound, sys.iteration_cap, [&](Duration b) {
        Duration next = lower_max;
        for (const Task* th : sys.all_tasks()) {
            if (th->id == ti.id || th->gpu_segments.empty()) continue;
            if (th->priority <= ti.priority) continue;
            next += ceil_div(b, th->period) * (th->gpu_total() + sys.epsilon);
        }
        return next;
    });
    if (!fp.schedulable()) return std::nullopt;
    return fp.get();
}

// Total handling time of a task's GPU requests, including the server's
// interventions before and after.
inline std::optional<Duration> request_handling_time(const System& sys, const Task& ti,
                                                     Duration bound) {
    if (ti.gpu_segments.empty()) return Duration::zero();
    auto bw = request_wait_time(sys, ti, bound);
    if (!bw) return std::nullopt;
    return *bw + ti.gpu_total() + 2 * sys.epsilon;
}

// Task response time under the server-based approach. Tasks suspend during
// GPU execution; co-location with the server adds the server's CPU demand
// for every GPU-using task's miscellaneous operations.
inline Wcrt response_time_server(const System& sys, const Task& ti,
                                 const std::map<int, Duration>& higher_wcrt) {
    if (!sys.server_core) throw DomainError("server core not designated");
    int p = sys.core_of(ti.id);
    const auto& core = sys.core_tasks[static_cast<std::size_t>(p)];
    const Duration ci = ti.wcet_at(1);

    auto bgpu = request_handling_time(sys, ti, ti.deadline);
    if (!bgpu) return Wcrt::unschedulable();

    struct Hp {
        Duration c, period, jitter;
    };
    std::vector<Hp> hp;
    for (const auto& th : core) {
        if (th.priority <= ti.priority) continue;
        auto it = higher_wcrt.find(th.id);
        if (it == higher_wcrt.end()) return Wcrt::unschedulable();
        Duration ch = th.wcet_at(1);
        hp.push_back({ch, th.period, it->second - ch});
    }

    struct Srv {
        Duration demand, period, jitter;
    };
    std::vector<Srv> server;
    if (p == *sys.server_core) {
        for (const Task* tj : sys.all_tasks()) {
            if (tj->gpu_segments.empty()) continue;
            Duration demand = tj->gpu_misc_total() + 2 * sys.epsilon;
            Duration jitter = tj->deadline > demand ? tj->deadline - demand
                                                    : Duration::zero();
            server.push_back({demand, tj->period, jitter});
        }
    }

    Duration base = ci + *bgpu;
    return fixpoint(base, ti.deadline, sys.iteration_cap, [&](Duration w) {
        Duration next = base;
        for (const auto& h : hp) next += ceil_div(w + h.jitter, h.period) * h.c;
        for (const auto& s : server) next += ceil_div(w + s.jitter, s.period) * s.demand;
        return next;
    });
}

// Per-core top-down analysis (highest priority first); dominance applies
// below an unschedulable task.
template <typename F>
std::map<int, Wcrt> core_response_times(const System& sys, int core, F&& analyze) {
    std::vector<const Task*> order;
    for (const auto& t : sys.core_tasks[static_cast<std::size_t>(core)]) order.push_back(&t);
    std::sort(order.begin(), order.end(),
              [](const Task* a, const Task* b) { return a->priority > b->priority; });
    std::map<int, Wcrt> out;
    std::map<int, Duration> done;
    for (const Task* t : order) {
        Wcrt w = analyze(*t, done);
        out[t->id] = w;
        if (w.schedulable()) done[t->id] = w.get();
    }
    return out;
}

inline bool system_schedulable_sync(const System& sys) {
    for (int p = 0; p < sys.n_cores(); p++) {
        auto ws = core_response_times(sys, p, [&](const Task& t, const auto& done) {
            return response_time_sync(sys, t, done);
        });
        for (const auto& [tid, w] : ws) {
            (void)tid;
            if (!w.schedulable()) return false;
        }
    }
    return true;
}

inline bool system_schedulable_server(const System& sys) {
    for (int p = 0; p < sys.n_cores(); p++) {
        auto ws = core_response_times(sys, p, [&](const Task& t, const auto& done) {
            return response_time_server(sys, t, done);
        });
        for (const auto& [tid, w] : ws) {
            (void)tid;
            if (!w.schedulable()) return false;
        }
    }
    return true;
}

}  // namespace rtsched::gpu
