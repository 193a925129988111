#pragma once

#include "rtsched/model.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace rtsched {

enum class ViolationCode {
    NonPositivePeriod,
    ConstrainedDeadlineViolated,
    WcetNotMonotone,
    SegmentSumMismatch,
    DuplicatePriority,
    NegativeValue,
    BadGpuSegment,
    MemNotDivisible,
    UnknownCore,
    UnknownVcpu,
    UnknownTask,
    PartitionOutOfRange,
    BankOutOfRange,
    BudgetExceedsPeriod,
    PseudoVcpuUnlinked,
    VirtualInterruptUnpinned,
    DsrPeriodTooShort,
    IterationCapInvalid,
};

inline const char* violation_name(ViolationCode c) {
    switch (c) {
        case ViolationCode::NonPositivePeriod: return "NonPositivePeriod";
        case ViolationCode::ConstrainedDeadlineViolated: return "ConstrainedDeadlineViolated";
        case ViolationCode::WcetNotMonotone: return "WcetNotMonotone";
        case ViolationCode::SegmentSumMismatch: return "SegmentSumMismatch";
        case ViolationCode::DuplicatePriority: return "DuplicatePriority";
        case ViolationCode::NegativeValue: return "NegativeValue";
        case ViolationCode::BadGpuSegment: return "BadGpuSegment";
        case ViolationCode::MemNotDivisible: return "MemNotDivisible";
        case ViolationCode::UnknownCore: return "UnknownCore";
        case ViolationCode::UnknownVcpu: return "UnknownVcpu";
        case ViolationCode::UnknownTask: return "UnknownTask";
        case ViolationCode::PartitionOutOfRange: return "PartitionOutOfRange";
        case ViolationCode::BankOutOfRange: return "BankOutOfRange";
        case ViolationCode::BudgetExceedsPeriod: return "BudgetExceedsPeriod";
        case ViolationCode::PseudoVcpuUnlinked: return "PseudoVcpuUnlinked";
        case ViolationCode::VirtualInterruptUnpinned: return "VirtualInterruptUnpinned";
        case ViolationCode::DsrPeriodTooShort: return "DsrPeriodTooShort";
        case ViolationCode::IterationCapInvalid: return "IterationCapInvalid";
    }
    return "Unknown";
}

struct Violation {
    ViolationCode code;
    std::string subject;  // task/vcpu/interrupt name or id
    std::string detail;
};

// Structural validation. Violations are data, not failures; an empty list
// means the model is well-formed.
inline std::vector<Violation> validate(const SystemConfig& sys) {
    std::vector<Violation> out;
    auto add = [&](ViolationCode c, const std::string& subject, const std::string& detail) {
        out.push_back({c, subject, detail});
    };

    const Platform& pf = sys.platform;
    if (pf.constants.iteration_cap < 1)
        add(ViolationCode::IterationCapInvalid, "platform", "iteration_cap must be >= 1");
    if (pf.n_cache >= 1 && pf.mem_total_mb > 0 && pf.mem_total_mb % pf.n_cache != 0)
        add(ViolationCode::MemNotDivisible, "platform",
            "mem_total not divisible by n_cache");

    for (const auto& t : sys.tasks) {
        const std::string who = t.name.empty() ? std::to_string(t.id) : t.name;
        if (!t.period.is_positive())
            add(ViolationCode::NonPositivePeriod, who, "period must be positive");
        if (t.deadline > t.period)
            add(ViolationCode::ConstrainedDeadlineViolated, who, "deadline exceeds period");
        if (!t.wcet.non_increasing())
            add(ViolationCode::WcetNotMonotone, who, "wcet curve increases with k");
        if (t.mem_mb < 0)
            add(ViolationCode::NegativeValue, who, "mem_mb negative");
        for (const auto& g : t.gpu_segments) {
            if (!g.total.is_positive() || g.exec < Duration::zero() ||
                g.misc < Duration::zero() || g.exec + g.misc > g.total)
                add(ViolationCode::BadGpuSegment, who, "gpu segment exec+misc must fit in total");
        }
        if (!t.crit_sections.empty()) {
            Duration sum{};
            for (const auto& s : t.crit_sections) sum += s.length;
            // Segment lengths must add up to the WCET at every sampled k.
            bool matches = false;
            for (const auto& c : t.wcet.by_k)
                if (c == sum) matches = true;
            if (!matches)
                add(ViolationCode::SegmentSumMismatch, who,
                    "critical-section segments do not sum to any wcet sample");
        }
    }

    // Priority uniqueness per scheduling domain (core or VCPU).
    std::map<int, std::set<int>> core_prios;
    for (const auto& [tid, core] : sys.task_core) {
        if (core < 1 || core > pf.n_cores)
            add(ViolationCode::UnknownCore, std::to_string(tid),
                "task allocated to core " + std::to_string(core));
        const Task& t = sys.task(tid);
        if (!core_prios[core].insert(t.priority).second)
            add(ViolationCode::DuplicatePriority, t.name,
                "duplicate priority on core " + std::to_string(core));
    }
    for (const auto& v : sys.vcpus) {
        std::set<int> prios;
        for (int tid : v.task_ids) {
            bool found = false;
            for (const auto& t : sys.tasks)
                if (t.id == tid) found = true;
            if (!found) {
                add(ViolationCode::UnknownTask, v.name, "vcpu lists unknown task");
                continue;
            }
            if (!prios.insert(sys.task(tid).priority).second)
                add(ViolationCode::DuplicatePriority, v.name, "duplicate task priority in vcpu");
        }
        if (v.pcpu < 1 || v.pcpu > pf.n_cores)
            add(ViolationCode::UnknownCore, v.name, "vcpu pinned to unknown pcpu");
        if (!v.budget.empty() && v.budget_value() > v.period)
            add(ViolationCode::BudgetExceedsPeriod, v.name, "budget exceeds period");
        if (v.kind == VcpuKind::Pseudo &&
            (v.pseudo_for_interrupt < 0 || v.original_vcpu < 0))
            add(ViolationCode::PseudoVcpuUnlinked, v.name,
                "pseudo vcpu missing interrupt or original-vcpu link");
    }

    for (const auto& [tid, parts] : sys.task_partitions) {
        for (int p : parts)
            if (p < 1 || p > pf.n_cache)
                add(ViolationCode::PartitionOutOfRange, std::to_string(tid),
                    "partition " + std::to_string(p));
    }
    for (const auto& [core, banks] : sys.core_banks) {
        for (int b : banks)
            if (b < 1 || b > pf.n_banks)
                add(ViolationCode::BankOutOfRange, std::to_string(core),
                    "bank " + std::to_string(b));
    }

    for (const auto& s : sys.interrupts) {
        const std::string who = s.name.empty() ? std::to_string(s.id) : s.name;
        if (!s.min_interarrival.is_positive())
            add(ViolationCode::NonPositivePeriod, who, "min_interarrival must be positive");
        if (s.kind == InterruptKind::Virtual) {
            if (s.vcpu < 0)
                add(ViolationCode::VirtualInterruptUnpinned, who,
                    "virtual interrupt must be pinned to a vcpu");
            for (int tid : s.dsr_task_ids) {
                bool found = false;
                for (const auto& t : sys.tasks)
                    if (t.id == tid) {
                        found = true;
                        if (t.period < s.min_interarrival)
                            add(ViolationCode::DsrPeriodTooShort, who,
                                "DSR task period below interrupt inter-arrival");
                    }
                if (!found) add(ViolationCode::UnknownTask, who, "unknown DSR task");
            }
        } else if (s.pcpu < 1 || s.pcpu > pf.n_cores) {
            add(ViolationCode::UnknownCore, who, "physical interrupt pinned to unknown pcpu");
        }
    }

    return out;
}

}  // namespace rtsched
