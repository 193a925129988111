#pragma once

#include "rtsched/time.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rtsched {

// WCET (or VCPU budget, or DRAM-request count) as a function of the number
// of assigned cache partitions. A single sample models a flat curve; lookups
// past the last sample clamp to it.
template <typename V>
struct Curve {
    std::vector<V> by_k;  // by_k[k-1] = value with k partitions

    Curve() = default;
    explicit Curve(V flat) : by_k{flat} {}
    explicit Curve(std::vector<V> v) : by_k(std::move(v)) {}

    bool empty() const { return by_k.empty(); }
    V at(int k) const {
        if (by_k.empty()) throw DomainError("empty curve");
        if (k < 1) throw DomainError("curve sampled at k < 1");
        auto idx = static_cast<std::size_t>(k - 1);
        return idx < by_k.size() ? by_k[idx] : by_k.back();
    }
    bool non_increasing() const {
        for (std::size_t i = 1; i < by_k.size(); i++)
            if (by_k[i] > by_k[i - 1]) return false;
        return true;
    }
};

using WcetCurve = Curve<Duration>;

enum class SegmentKind { Normal, Lcs, Gcs };

struct Segment {
    SegmentKind kind = SegmentKind::Normal;
    Duration length{};
    int resource_id = -1;  // for lcs/gcs
};

struct GpuSegment {
    Duration total{};  // G_{i,j}
    Duration exec{};   // X^e_{i,j}, on-GPU execution
    Duration misc{};   // X^m_{i,j}, copies and notifications
};

struct Task {
    int id = -1;
    std::string name;
    Duration period{};
    Duration deadline{};
    WcetCurve wcet;                        // C_i(k)
    std::int64_t mem_mb = 0;               // M_i
    Curve<std::int64_t> dram_requests;     // H_i(k); single sample = flat H_i
    int priority = 0;                      // larger = higher
    std::vector<Segment> crit_sections;    // full segment sequence when present
    std::vector<GpuSegment> gpu_segments;

    Duration wcet_at(int k) const { return wcet.at(k); }
    std::int64_t dram_requests_at(int k) const {
        return dram_requests.empty() ? 0 : dram_requests.at(k);
    }

    bool has_gcs() const {
        return std::any_of(crit_sections.begin(), crit_sections.end(),
                           [](const Segment& s) { return s.kind == SegmentKind::Gcs; });
    }
    int gcs_count() const {
        return static_cast<int>(std::count_if(
            crit_sections.begin(), crit_sections.end(),
            [](const Segment& s) { return s.kind == SegmentKind::Gcs; }));
    }
    Duration longest_gcs() const {
        Duration m{};
        for (const auto& s : crit_sections)
            if (s.kind == SegmentKind::Gcs) m = std::max(m, s.length);
        return m;
    }
    Duration sum_gcs() const {
        Duration s{};
        for (const auto& cs : crit_sections)
            if (cs.kind == SegmentKind::Gcs) s += cs.length;
        return s;
    }
    Duration gpu_total() const {  // G_i
        Duration s{};
        for (const auto& g : gpu_segments) s += g.total;
        return s;
    }
    Duration gpu_misc_total() const {  // X^m_i
        Duration s{};
        for (const auto& g : gpu_segments) s += g.misc;
        return s;
    }
};

struct DramTiming {
    Duration t_ck{};  // clock cycle time
    // Cycle counts.
    std::int64_t t_rp = 0, t_rcd = 0, cl = 0, wl = 0, bl = 0;
    std::int64_t t_wtr = 0, t_wr = 0, t_rrd = 0, t_faw = 0;
    std::int64_t t_ras = 0, t_rc = 0, t_rtp = 0, t_rtrs = 0;
    std::int64_t n_cols = 0;  // columns per row
    // Refresh parameters, used only by the optional refresh-overhead estimate.
    Duration t_rfc{};
    Duration t_refi{};
};

// DDR3-1333 parameters (Micron datasheet values).
inline DramTiming ddr3_1333() {
    DramTiming d;
    d.t_ck = Duration::ps(1500);
    d.t_rp = 9;
    d.t_rcd = 9;
    d.cl = 9;
    d.wl = 7;
    d.bl = 8;
    d.t_wtr = 5;
    d.t_wr = 10;
    d.t_rrd = 4;
    d.t_faw = 20;
    d.t_ras = 24;
    d.t_rc = 33;
    d.t_rtp = 5;
    d.t_rtrs = 2;
    d.n_cols = 1024;
    d.t_rfc = Duration::ns(160);
    d.t_refi = Duration::ns(7800);
    return d;
}

struct AnalysisConstants {
    Duration delta{};                     // per-partition reload time
    std::int64_t delta_requests = 0;      // memory requests per partition reload
    std::optional<std::int64_t> n_cap;    // re-ordering cap; absent = uncapped
    Duration epsilon{};                   // GPU server overhead
    std::uint64_t iteration_cap = 1'000'000;
    bool model_refresh = false;           // add the refresh-overhead estimate
};

struct Platform {
    int n_cores = 1;
    int n_cache = 1;
    int n_banks = 1;
    std::int64_t mem_total_mb = 0;
    DramTiming dram = ddr3_1333();
    AnalysisConstants constants;

    Duration partition_size_check() const {
        if (n_cache < 1) throw DomainError("n_cache must be >= 1");
        return Duration::zero();
    }
};

enum class ServerPolicy { Periodic, Deferrable, Sporadic };
enum class VcpuKind { Regular, Pseudo };

struct Vcpu {
    int id = -1;
    std::string name;
    WcetCurve budget;       // C^v(k); single sample = fixed budget
    Duration period{};      // T^v
    ServerPolicy policy = ServerPolicy::Periodic;
    int priority = 0;       // larger = higher, unique per PCPU
    int pcpu = 0;
    std::vector<int> task_ids;
    std::set<int> cache_set;  // S^v
    VcpuKind kind = VcpuKind::Regular;
    int pseudo_for_interrupt = -1;  // pseudo only: managed virtual interrupt
    int original_vcpu = -1;         // pseudo only

    Duration budget_value() const { return budget.at(1); }
    Duration jitter() const {
        // Deferrable servers release with jitter T^v - C^v; periodic and
        // sporadic replenishment has none.
        if (policy == ServerPolicy::Deferrable) return period - budget_value();
        return Duration::zero();
    }
};

struct Vm {
    int id = -1;
    std::string name;
    std::vector<int> vcpu_ids;
};

enum class InterruptKind { Physical, Virtual };

struct InterruptSource {
    int id = -1;
    std::string name;
    InterruptKind kind = InterruptKind::Physical;
    Duration isr_wcet{};
    Duration min_interarrival{};
    int priority = 0;
    int pcpu = -1;                  // physical: pinned PCPU
    int vcpu = -1;                  // virtual: pinned VCPU
    std::vector<int> dsr_task_ids;  // virtual only
    bool managed_by_vint = false;
    int pseudo_vcpu = -1;           // virtual, when managed
    int source_physical = -1;       // virtual: triggering physical interrupt
    int source_ipi = -1;            // virtual: optional IPI in the flow
};

struct SystemConfig {
    Platform platform;
    std::vector<Task> tasks;
    std::vector<Vm> vms;
    std::vector<Vcpu> vcpus;
    std::vector<InterruptSource> interrupts;

    std::map<int, int> task_core;                 // native: task -> core
    std::map<int, std::set<int>> task_partitions; // task -> cache partition set S_i
    std::map<int, std::set<int>> core_banks;      // core -> bank partition set
    std::optional<int> gpu_server_core;

    const Task& task(int id) const {
        for (const auto& t : tasks)
            if (t.id == id) return t;
        throw DomainError("unknown task id " + std::to_string(id));
    }
    const Vcpu& vcpu(int id) const {
        for (const auto& v : vcpus)
            if (v.id == id) return v;
        throw DomainError("unknown vcpu id " + std::to_string(id));
    }
    const InterruptSource& interrupt(int id) const {
        for (const auto& s : interrupts)
            if (s.id == id) return s;
        throw DomainError("unknown interrupt id " + std::to_string(id));
    }

    std::vector<const Task*> tasks_on_core(int core) const {
        std::vector<const Task*> out;
        for (const auto& [tid, c] : task_core)
            if (c == core) out.push_back(&task(tid));
        return out;
    }
    std::vector<const Task*> tasks_on_vcpu(int vcpu_id) const {
        std::vector<const Task*> out;
        for (int tid : vcpu(vcpu_id).task_ids) out.push_back(&task(tid));
        return out;
    }
    std::vector<const Vcpu*> vcpus_on_pcpu(int pcpu) const {
        std::vector<const Vcpu*> out;
        for (const auto& v : vcpus)
            if (v.pcpu == pcpu) out.push_back(&v);
        return out;
    }
    std::vector<const InterruptSource*> physical_interrupts_on(int pcpu) const {
        std::vector<const InterruptSource*> out;
        for (const auto& s : interrupts)
            if (s.kind == InterruptKind::Physical && s.pcpu == pcpu) out.push_back(&s);
        return out;
    }
    std::vector<const InterruptSource*> virtual_interrupts_on_vcpu(int vcpu_id) const {
        std::vector<const InterruptSource*> out;
        for (const auto& s : interrupts)
            if (s.kind == InterruptKind::Virtual && s.vcpu == vcpu_id) out.push_back(&s);
        return out;
    }
    const Vcpu* vcpu_of_task(int task_id) const {
        for (const auto& v : vcpus)
            for (int tid : v.task_ids)
                if (tid == task_id) return &v;
        return nullptr;
    }
    std::set<int> banks_of_core(int core) const {
        auto it = core_banks.find(core);
        return it == core_banks.end() ? std::set<int>{} : it->second;
    }
    bool cores_share_banks(int p, int q) const {
        const auto a = banks_of_core(p);
        const auto b = banks_of_core(q);
        return std::any_of(a.begin(), a.end(),
                           [&](int bank) { return b.count(bank) > 0; });
    }
    std::set<int> partitions_of(int task_id) const {
        auto it = task_partitions.find(task_id);
        return it == task_partitions.end() ? std::set<int>{} : it->second;
    }
};

}  // namespace rtsched
