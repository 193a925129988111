#pragma once

#include "rtsched/fixpoint.hpp"
#include "rtsched/model.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <vector>

namespace rtsched::vmpcp {

// Server policy x budget-overrun configurations.
enum class Mode { PSwO, DSwO, PSnO, DSnO };

inline bool overrun_enabled(Mode m) { return m == Mode::PSwO || m == Mode::DSwO; }
inline ServerPolicy policy_of(Mode m) {
    return (m == Mode::PSwO || m == Mode::PSnO) ? ServerPolicy::Periodic
                                                : ServerPolicy::Deferrable;
}
inline const char* mode_name(Mode m) {
    switch (m) {
        case Mode::PSwO: return "PSwO";
        case Mode::DSwO: return "DSwO";
        case Mode::PSnO: return "PSnO";
        case Mode::DSnO: return "DSnO";
    }
    return "?";
}

// Self-contained system view: VCPUs with fixed budgets hosting tasks whose
// WCETs decompose into normal and critical-section segments.
struct System {
    std::vector<Vcpu> vcpus;  // policy fields are overridden by `mode`
    std::vector<Task> tasks;
    Mode mode = Mode::PSwO;
    std::uint64_t iteration_cap = 1'000'000;

    const Vcpu& vcpu(int id) const {
        for (const auto& v : vcpus)
            if (v.id == id) return v;
        throw DomainError("unknown vcpu");
    }
    const Task& task(int id) const {
        for (const auto& t : tasks)
            if (t.id == id) return t;
        throw DomainError("unknown task");
    }
    const Vcpu& vcpu_of_task(int task_id) const {
        for (const auto& v : vcpus)
            for (int tid : v.task_ids)
                if (tid == task_id) return v;
        throw DomainError("task not hosted on any vcpu");
    }
    std::vector<const Task*> tasks_of(const Vcpu& v) const {
        std::vector<const Task*> out;
        for (int tid : v.task_ids) out.push_back(&task(tid));
        return out;
    }
    Duration vcpu_jitter(const Vcpu& v) const {
        return policy_of(mode) == ServerPolicy::Deferrable ? v.period - v.budget_value()
                                                           : Duration::zero();
    }
    // Total order over VCPUs used by the two-level wait queue: priority
    // first, id as the tie-break, so lower/higher is defined system-wide.
    bool vcpu_below(const Vcpu& a, const Vcpu& b) const {
        if (a.priority != b.priority) return a.priority < b.priority;
        return a.id < b.id;
    }
};

// Maximum global resource holding time of a VCPU: one longest gcs per task.
inline Duration ght(const System& sys, const Vcpu& v) {
    Duration total{};
    for (const Task* t : sys.tasks_of(v))
        if (t->has_gcs()) total += t->longest_gcs();
    return total;
}

// Accumulated gcs time the tasks of a VCPU can hold within a window of t,
// one carry-in job per task; used for deferrable servers whose tasks may
// block a higher VCPU several times per period.
inline Duration sum_ght(const System& sys, const Vcpu& v, Duration t) {
    Duration total{};
    for (const Task* task : sys.tasks_of(v)) {
        Duration g = task->sum_gcs();
        if (g.is_zero()) continue;
        total += (ceil_div(t, task->period) + 1) * g;
    }
    return total;
}

// Blocking a VCPU suffers from lower-priority VCPUs on its PCPU whose tasks
// hold global resources released from other cores.
inline Duration vcpu_blocking(const System& sys, const Vcpu& vi, Duration t) {
    Duration total{};
    for (const auto& vl : sys.vcpus) {
        if (vl.pcpu != vi.pcpu || vl.priority >= vi.priority) continue;
        total += policy_of(sys.mode) == ServerPolicy::Periodic ? ght(sys, vl)
                                                               : sum_ght(sys, vl, t);
    }
    return total;
}

inline Duration overrun_time(const System& sys, const Vcpu& v) {
    return overrun_enabled(sys.mode) ? ght(sys, v) : Duration::zero();
}

// VCPU schedulability with blocking and optional budget overrun.
inline Wcrt vcpu_response_time(const System& sys, const Vcpu& vi) {
    Duration base = vi.budget_value() + overrun_time(sys, vi);
    return fixpoint(base, vi.period, sys.iteration_cap, [&](Duration w) {
        Duration next = base + vcpu_blocking(sys, vi, w);
        for (const auto& vh : sys.vcpus) {
            if (vh.pcpu != vi.pcpu || vh.priority <= vi.priority) continue;
            next += ceil_div(w + sys.vcpu_jitter(vh), vh.period) *
                    (vh.budget_value() + overrun_time(sys, vh));
        }
        return next;
    });
}

// Task-level priority ceiling comparisons. Global critical sections live in
// a boosted band above every normal priority; within the band they order by
// the owner's normal priority. Local ceilings are the highest priority among
// the resource's lockers inside the VCPU.
namespace detail {

struct Ceiling {
    bool boosted = false;  // gcs band
    int priority = 0;
    friend bool operator<(const Ceiling& a, const Ceiling& b) {
        if (a.boosted != b.boosted) return !a.boosted;
        return a.priority < b.priority;
    }
};

inline Ceiling gcs_ceiling(const Task& owner) { return {true, owner.priority}; }

inline Ceiling lcs_ceiling(const System& sys, const Vcpu& v, int resource_id) {
    int best = std::numeric_limits<int>::min();
    for (const Task* t : sys.tasks_of(v))
        for (const auto& s : t->crit_sections)
            if (s.kind == SegmentKind::Lcs && s.resource_id == resource_id)
                best = std::max(best, t->priority);
    return {false, best};
}

}  // namespace detail

// Budget needed to run one gcs: its own length plus one higher-ceiling gcs
// per other task in the same VCPU.
inline Duration gcs_load(const System& sys, const Task& tl, const Segment& gcs) {
    const Vcpu& v = sys.vcpu_of_task(tl.id);
    Duration total = gcs.length;
    for (const Task* tx : sys.tasks_of(v)) {
        if (tx->id == tl.id) continue;
        Duration longest{};
        for (const auto& s : tx->crit_sections)
            if (s.kind == SegmentKind::Gcs && tx->priority > tl.priority)
                longest = std::max(longest, s.length);
        total += longest;
    }
    return total;
}

// VCPU-level preemption while a gcs runs: from VCPUs on the same PCPU with a
// higher VCPU-level ceiling, one longest gcs per task.
inline Duration gcs_vcpu_preemption(const System& sys, const Task& tl) {
    const Vcpu& v = sys.vcpu_of_task(tl.id);
    Duration total{};
    for (const auto& vz : sys.vcpus) {
        if (vz.pcpu != v.pcpu || vz.id == v.id) continue;
        if (vz.priority <= v.priority) continue;
        for (const Task* tx : sys.tasks_of(vz)) {
            Duration longest{};
            for (const auto& s : tx->crit_sections)
                if (s.kind == SegmentKind::Gcs) longest = std::max(longest, s.length);
            total += longest;
        }
    }
    return total;
}

// Response time of one gcs execution after the resource is acquired.
inline Duration gcs_response(const System& sys, const Task& tl, const Segment& gcs) {
    const Vcpu& v = sys.vcpu_of_task(tl.id);
    Duration load = gcs_load(sys, tl, gcs);
    Duration prm = gcs_vcpu_preemption(sys, tl);
    Duration budget = v.budget_value();
    Duration gap = v.period - budget;
    if (overrun_enabled(sys.mode)) {
        if (policy_of(sys.mode) == ServerPolicy::Periodic) return gap + load + prm;
        return load + prm;  // deferrable runs the gcs as soon as it is granted
    }
    return ceil_div(load, budget) * gap + load + prm;
}

// Exposed for tests and property suites: the three structural variants.
inline Duration gcs_response_pswo(Duration gap, Duration load, Duration prm) {
    return gap + load + prm;
}
inline Duration gcs_response_dswo(Duration load, Duration prm) { return load + prm; }
inline Duration gcs_response_no_overrun(Duration gap, Duration budget, Duration load,
                                        Duration prm) {
    return ceil_div(load, budget) * gap + load + prm;
}

// Local blocking: per normal segment, one lower-priority lcs with a ceiling
// at or above pi_i plus every lower-priority task's longest gcs; charged
// once per suspension point (sigma_i^gcs + 1).
inline Duration local_blocking(const System& sys, const Task& ti) {
    const Vcpu& v = sys.vcpu_of_task(ti.id);
    Duration lcs_max{};
    Duration gcs_sum{};
    for (const Task* tl : sys.tasks_of(v)) {
        if (tl->priority >= ti.priority) continue;
        Duration best_lcs{};
        Duration best_gcs{};
        for (const auto& s : tl->crit_sections) {
            if (s.kind == SegmentKind::Lcs) {
                auto ceil = detail::lcs_ceiling(sys, v, s.resource_id);
                if (!(ceil < detail::Ceiling{false, ti.priority}))
                    best_lcs = std::max(best_lcs, s.length);
            } else if (s.kind == SegmentKind::Gcs) {
                best_gcs = std::max(best_gcs, s.length);
            }
        }
        lcs_max = std::max(lcs_max, best_lcs);
        gcs_sum += best_gcs;
    }
    return (ti.gcs_count() + 1) * (lcs_max + gcs_sum);
}

// Remote blocking for one gcs of tau_i: the longest lower-VCPU locker's gcs
// response once, plus repeated higher-VCPU lockers' gcs responses.
inline std::optional<Duration> remote_blocking_segment(const System& sys, const Task& ti,
                                                       const Segment& gcs,
                                                       Duration bound) {
    const Vcpu& vi = sys.vcpu_of_task(ti.id);

    struct Locker {
        const Task* task;
        Duration w_gcs;
        bool higher_vcpu;
    };
    std::vector<Locker> lockers;
    for (const auto& t : sys.tasks) {
        if (t.id == ti.id) continue;
        const Vcpu& vt = sys.vcpu_of_task(t.id);
        if (vt.id == vi.id) continue;  // same-VCPU contention is local
        for (const auto& s : t.crit_sections) {
            if (s.kind != SegmentKind::Gcs || s.resource_id != gcs.resource_id) continue;
            lockers.push_back(
                {&t, gcs_response(sys, t, s), !sys.vcpu_below(vt, vi)});
        }
    }

    Duration lower_max{};
    for (const auto& l : lockers)
        if (!l.higher_vcpu) lower_max = std::max(lower_max, l.w_gcs);

    auto step = [&](Duration b) {
        Duration next = lower_max;
        for (const auto& l : lockers)
            if (l.higher_vcpu)
                next += (ceil_div(b, l.task->period) + 1) * l.w_gcs;
        return next;
    };
    auto r = fixpoint(lower_max, bound, sys.iteration_cap, step);
    if (!r.schedulable()) return std::nullopt;
    return r.get();
}

inline std::optional<Duration> remote_blocking(const System& sys, const Task& ti,
                                               Duration bound) {
    Duration total{};
    for (const auto& s : ti.crit_sections) {
        if (s.kind != SegmentKind::Gcs) continue;
        auto b = remote_blocking_segment(sys, ti, s, bound);
        if (!b) return std::nullopt;
        total += *b;
        if (total > bound) return std::nullopt;
    }
    return total;
}

// Task response time under vMPCP. `higher_wcrt` maps higher-priority tasks
// of the same VCPU to their already-computed response times (top-down
// order); their remote blocking shows up as back-to-back jitter W_h - C_h.
inline Wcrt task_response_time(const System& sys, const Task& ti,
                               const std::map<int, Duration>& higher_wcrt) {
    const Vcpu& v = sys.vcpu_of_task(ti.id);
    const Duration budget = v.budget_value();
    const Duration gap = v.period - budget;
    const Duration ci = ti.wcet_at(1);

    Duration bl = local_blocking(sys, ti);
    auto br = remote_blocking(sys, ti, ti.deadline);
    if (!br) return Wcrt::unschedulable();

    struct Hp {
        Duration c, period, jitter;
    };
    std::vector<Hp> hp;
    for (const Task* th : sys.tasks_of(v)) {
        if (th->priority <= ti.priority) continue;
        auto it = higher_wcrt.find(th->id);
        if (it == higher_wcrt.end()) return Wcrt::unschedulable();  // dominance
        Duration ch = th->wcet_at(1);
        hp.push_back({ch, th->period, gap + (it->second - ch)});
    }

    Duration base = ci + bl + *br;
    return fixpoint(base, ti.deadline, sys.iteration_cap, [&](Duration w) {
        Duration next = base;
        for (const auto& h : hp) next += ceil_div(w + h.jitter, h.period) * h.c;
        next += ceil_div(w + budget, v.period) * gap;
        return next;
    });
}

// Analyzes one VCPU's tasks highest-priority first. Returns per-task WCRTs;
// a task below an unschedulable one is reported unschedulable as well.
inline std::map<int, Wcrt> vcpu_task_response_times(const System& sys, const Vcpu& v) {
    std::vector<const Task*> order = sys.tasks_of(v);
    std::sort(order.begin(), order.end(),
              [](const Task* a, const Task* b) { return a->priority > b->priority; });
    std::map<int, Wcrt> out;
    std::map<int, Duration> done;
    for (const Task* t : order) {
        Wcrt w = task_response_time(sys, *t, done);
        out[t->id] = w;
        if (w.schedulable()) done[t->id] = w.get();
    }
    return out;
}

inline bool system_schedulable(const System& sys) {
    for (const auto& v : sys.vcpus)
        if (!vcpu_response_time(sys, v).schedulable()) return false;
    for (const auto& v : sys.vcpus) {
        auto ws = vcpu_task_response_times(sys, v);
        for (const auto& [tid, w] : ws) {
            (void)tid;
            if (!w.schedulable()) return false;
        }
    }
    return true;
}

}  // namespace rtsched::vmpcp
