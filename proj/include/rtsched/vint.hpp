#pragma once

#include "rtsched/fixpoint.hpp"
#include "rtsched/model.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace rtsched::vint {

// System view for the interrupt analysis: regular and pseudo VCPUs, regular
// and DSR tasks, physical and virtual interrupt sources.
struct System {
    std::vector<Vcpu> vcpus;
    std::vector<Task> tasks;
    std::vector<InterruptSource> interrupts;
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
    const InterruptSource& interrupt(int id) const {
        for (const auto& s : interrupts)
            if (s.id == id) return s;
        throw DomainError("unknown interrupt");
    }
    std::vector<const InterruptSource*> physical_on(int pcpu) const {
        std::vector<const InterruptSource*> out;
        for (const auto& s : interrupts)
            if (s.kind == InterruptKind::Physical && s.pcpu == pcpu) out.push_back(&s);
        return out;
    }
    std::vector<const InterruptSource*> virtual_on_vcpu(int vcpu_id) const {
        std::vector<const InterruptSource*> out;
        for (const auto& s : interrupts)
            if (s.kind == InterruptKind::Virtual && s.vcpu == vcpu_id) out.push_back(&s);
        return out;
    }
    // Pseudo-VCPU hosting the DSR role of a task, if the task serves a
    // vINT-managed virtual interrupt.
    const Vcpu* pseudo_of_task(int task_id) const {
        for (const auto& s : interrupts) {
            if (s.kind != InterruptKind::Virtual || !s.managed_by_vint ||
                s.pseudo_vcpu < 0)
                continue;
            for (int tid : s.dsr_task_ids)
                if (tid == task_id) return &vcpu(s.pseudo_vcpu);
        }
        return nullptr;
    }
};

// ISR plus DSR demand of one virtual-interrupt instance.
inline Duration handling_wcet(const System& sys, const InterruptSource& vi) {
    if (vi.kind != InterruptKind::Virtual) throw DomainError("expected virtual interrupt");
    Duration c = vi.isr_wcet;
    for (int tid : vi.dsr_task_ids) c += sys.task(tid).wcet_at(1);
    return c;
}

// Budget of the pseudo-VCPU serving a managed virtual interrupt, covering
// every instance within the pseudo period plus the ISRs of unmanaged
// sibling interrupts that may block inside the original VCPU.
inline Duration pseudo_vcpu_budget(const System& sys, const InterruptSource& vi,
                                   Duration pseudo_period) {
    if (vi.kind != InterruptKind::Virtual) throw DomainError("expected virtual interrupt");
    if (pseudo_period < vi.min_interarrival)
        throw DomainError("pseudo period below interrupt inter-arrival");
    Duration per_instance = handling_wcet(sys, vi);
    for (const InterruptSource* sib : sys.virtual_on_vcpu(vi.vcpu)) {
        if (sib->id == vi.id) continue;
        if (sib->managed_by_vint && sib->pseudo_vcpu >= 0) continue;
        per_instance +=
            ceil_div(vi.min_interarrival, sib->min_interarrival) * sib->isr_wcet;
    }
    return ceil_div(pseudo_period, vi.min_interarrival) * per_instance;
}

// VCPU schedulability with physical-interrupt interference; pseudo-VCPUs
// take part as ordinary higher-priority VCPUs.
inline Wcrt vcpu_response_time(const System& sys, const Vcpu& vi) {
    Duration ci = vi.budget_value();
    return fixpoint(ci, vi.period, sys.iteration_cap, [&](Duration w) {
        Duration next = ci;
        for (const InterruptSource* pi : sys.physical_on(vi.pcpu))
            next += ceil_div(w, pi->min_interarrival) * pi->isr_wcet;
        for (const auto& vh : sys.vcpus) {
            if (vh.pcpu != vi.pcpu || vh.priority <= vi.priority) continue;
            next += ceil_div(w + vh.jitter(), vh.period) * vh.budget_value();
        }
        return next;
    });
}

// Regular-task response time on a VCPU. DSR tasks of vINT-managed interrupts
// bill their pseudo-VCPU's budget and drop out of the interferer set; ISRs
// of unmanaged virtual interrupts interfere with budget-gap jitter.
inline Wcrt task_response_time(const System& sys, const Task& ti) {
    const Vcpu* vk = nullptr;
    for (const auto& v : sys.vcpus)
        for (int tid : v.task_ids)
            if (tid == ti.id) vk = &v;
    if (!vk) throw DomainError("task not hosted on any vcpu");
    const Duration budget = vk->budget_value();
    const Duration gap = vk->period - budget;
    const Duration ci = ti.wcet_at(1);

    return fixpoint(ci, ti.deadline, sys.iteration_cap, [&](Duration w) {
        Duration next = ci;
        for (int tid : vk->task_ids) {
            const Task& th = sys.task(tid);
            if (th.priority <= ti.priority) continue;
            if (sys.pseudo_of_task(th.id) != nullptr) continue;
            next += ceil_div(w + gap, th.period) * th.wcet_at(1);
        }
        next += ceil_div(w + budget, vk->period) * gap;
        for (const InterruptSource* vi : sys.virtual_on_vcpu(vk->id)) {
            if (vi->managed_by_vint && vi->pseudo_vcpu >= 0) continue;
            next += ceil_div(w + gap, vi->min_interarrival) * vi->isr_wcet;
        }
        return next;
    });
}

// Physical-ISR response time against higher-priority ISRs on the same PCPU.
// Bounded by the interrupt's own inter-arrival time.
inline Wcrt physical_isr_response_time(const System& sys, const InterruptSource& pi) {
    if (pi.kind != InterruptKind::Physical) throw DomainError("expected physical interrupt");
    return fixpoint(pi.isr_wcet, pi.min_interarrival, sys.iteration_cap, [&](Duration w) {
        Duration next = pi.isr_wcet;
        for (const InterruptSource* ph : sys.physical_on(pi.pcpu)) {
            if (ph->id == pi.id || ph->priority <= pi.priority) continue;
            next += ceil_div(w, ph->min_interarrival) * ph->isr_wcet;
        }
        return next;
    });
}

// Blocking a managed virtual interrupt suffers inside its original VCPU:
// ISRs of siblings that are unmanaged or owned by lower-priority pseudo-VCPUs.
inline Duration pseudo_blocking(const System& sys, const InterruptSource& vi,
                                const Vcpu& pseudo, Duration t) {
    Duration total{};
    for (const InterruptSource* sib : sys.virtual_on_vcpu(vi.vcpu)) {
        if (sib->id == vi.id) continue;
        bool counts = true;
        if (sib->managed_by_vint && sib->pseudo_vcpu >= 0)
            counts = sys.vcpu(sib->pseudo_vcpu).priority < pseudo.priority;
        if (counts) total += ceil_div(t, sib->min_interarrival) * sib->isr_wcet;
    }
    return total;
}

// Virtual-interrupt response time with vINT: the pseudo-VCPU has budget for
// one instance, so only blocking, physical ISRs and higher VCPUs interfere.
inline Wcrt virtual_response_time_vint(const System& sys, const InterruptSource& vi,
                                       Duration bound) {
    if (vi.pseudo_vcpu < 0) throw DomainError("virtual interrupt has no pseudo vcpu");
    const Vcpu& vp = sys.vcpu(vi.pseudo_vcpu);
    const Duration c = handling_wcet(sys, vi);
    return fixpoint(c, bound, sys.iteration_cap, [&](Duration w) {
        Duration next = c + pseudo_blocking(sys, vi, vp, w);
        for (const InterruptSource* pi : sys.physical_on(vp.pcpu))
            next += ceil_div(w, pi->min_interarrival) * pi->isr_wcet;
        for (const auto& vh : sys.vcpus) {
            if (vh.pcpu != vp.pcpu || vh.priority <= vp.priority) continue;
            next += ceil_div(w + vh.jitter(), vh.period) * vh.budget_value();
        }
        return next;
    });
}

// Virtual-interrupt response time without vINT: handled inside the original
// VCPU, so tasks above the lowest-priority DSR, the budget gap, and the ISRs
// of other unmanaged virtual interrupts all interfere.
inline Wcrt virtual_response_time_baseline(const System& sys, const InterruptSource& vi,
                                           Duration bound) {
    const Vcpu& vk = sys.vcpu(vi.vcpu);
    const Duration budget = vk.budget_value();
    const Duration gap = vk.period - budget;
    const Duration c = handling_wcet(sys, vi);

    int lowest_dsr_priority = std::numeric_limits<int>::max();
    for (int tid : vi.dsr_task_ids)
        lowest_dsr_priority = std::min(lowest_dsr_priority, sys.task(tid).priority);

    return fixpoint(c, bound, sys.iteration_cap, [&](Duration w) {
        Duration next = c;
        for (int tid : vk.task_ids) {
            const Task& th = sys.task(tid);
            if (th.priority <= lowest_dsr_priority) continue;
            if (sys.pseudo_of_task(th.id) != nullptr) continue;
            next += ceil_div(w + gap, th.period) * th.wcet_at(1);
        }
        next += ceil_div(w + budget, vk.period) * gap;
        for (const InterruptSource* sib : sys.virtual_on_vcpu(vk.id)) {
            if (sib->id == vi.id) continue;
            if (sib->managed_by_vint && sib->pseudo_vcpu >= 0) continue;
            next += ceil_div(w + gap, sib->min_interarrival) * sib->isr_wcet;
        }
        return next;
    });
}

struct FlowVerdict {
    bool serviceable = false;
    std::optional<Duration> total;  // present when every stage converged
};

// End-to-end interrupt-triggered flow: physical ISR, optional IPI ISR, then
// the virtual interrupt's ISR+DSR; serviceable iff the total handling time
// fits both declared inter-arrival times.
inline FlowVerdict flow_serviceable(const System& sys, const InterruptSource& phys,
                                    const InterruptSource& virt,
                                    const InterruptSource* ipi, bool use_vint) {
    FlowVerdict fv;
    Duration deadline = std::min(phys.min_interarrival, virt.min_interarrival);

    auto wp = physical_isr_response_time(sys, phys);
    if (!wp.schedulable()) return fv;
    Duration total = wp.get();

    if (ipi) {
        auto wi = physical_isr_response_time(sys, *ipi);
        if (!wi.schedulable()) return fv;
        total += wi.get();
    }
    if (total > deadline) return fv;

    auto wv = use_vint ? virtual_response_time_vint(sys, virt, deadline - total)
                       : virtual_response_time_baseline(sys, virt, deadline - total);
    if (!wv.schedulable()) return fv;
    total += wv.get();

    fv.serviceable = total <= deadline;
    fv.total = total;
    return fv;
}

}  // namespace rtsched::vint
