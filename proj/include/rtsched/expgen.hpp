#pragma once

#include "rtsched/model.hpp"
#include "rtsched/priority.hpp"
#include "rtsched/gpu.hpp"
#include "rtsched/vint.hpp"
#include "rtsched/vmpcp.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rtsched::expgen {

// Seeded, platform-independent generator: std::mt19937_64 (fully specified
// by the standard) with hand-rolled integer sampling. No floating point
// anywhere in generation, so results are bit-stable across platforms.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    // Uniform integer in [0, n), Lemire multiply-shift reduction.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw DomainError("rng range empty");
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }
    // Uniform integer in the closed interval [lo, hi].
    std::int64_t between(std::int64_t lo, std::int64_t hi) {
        if (lo > hi) throw DomainError("rng interval empty");
        return lo + static_cast<std::int64_t>(
                        below(static_cast<std::uint64_t>(hi - lo) + 1));
    }
    Duration duration_between(Duration lo, Duration hi) {
        return Duration::ps(between(lo.count(), hi.count()));
    }
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; i--)
            std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
    }

  private:
    std::mt19937_64 eng_;
};

// Splits a total utilization (in millionths) into n random-sized pieces that
// sum exactly to the total: n-1 uniform cuts, sorted, differenced.
inline std::vector<std::int64_t> stick_break(Rng& rng, std::int64_t total_millionths,
                                             int n) {
    if (n <= 0) throw DomainError("stick_break: n must be positive");
    std::vector<std::int64_t> cuts;
    cuts.reserve(static_cast<std::size_t>(n) + 1);
    cuts.push_back(0);
    for (int i = 0; i < n - 1; i++) cuts.push_back(rng.between(0, total_millionths));
    cuts.push_back(total_millionths);
    std::sort(cuts.begin(), cuts.end());
    std::vector<std::int64_t> pieces;
    for (int i = 0; i < n; i++)
        pieces.push_back(cuts[static_cast<std::size_t>(i) + 1] -
                         cuts[static_cast<std::size_t>(i)]);
    return pieces;
}

// util (in millionths) times period, rounded half-up to 1 us, at least 1 us.
inline Duration wcet_from_util(std::int64_t util_millionths, Duration period) {
    BigInt num = BigInt(util_millionths) * period.count();
    BigInt den = 1'000'000;
    BigInt us = 1'000'000;  // ps per us
    BigInt c_us = (num + den * us / 2) / (den * us);
    if (c_us < 1) c_us = 1;
    return Duration::us(c_us.convert_to<std::int64_t>());
}

// Parametric cache-sensitivity curve C(k) = Cinf + (C1 - Cinf) * beta^(k-1),
// rounded to 1 us; monotone non-increasing by construction. beta and the
// Cinf factor are given in thousandths.
inline WcetCurve gen_wcet_curve(Duration c1, std::int64_t beta_milli,
                                std::int64_t cinf_factor_milli, int n_cache) {
    if (!c1.is_positive()) throw DomainError("gen_wcet_curve: C(1) must be positive");
    BigInt c1_ps = c1.count();
    BigInt cinf_ps = c1_ps * cinf_factor_milli / 1000;
    std::vector<Duration> by_k;
    BigInt beta_num = beta_milli;
    BigInt pow_num = 1, pow_den = 1;
    for (int k = 1; k <= n_cache; k++) {
        BigInt val_ps = cinf_ps + (c1_ps - cinf_ps) * pow_num / pow_den;
        BigInt us = (val_ps + 500'000) / 1'000'000;
        by_k.push_back(Duration::us(us.convert_to<std::int64_t>()));
        pow_num *= beta_num;
        pow_den *= 1000;
    }
    return WcetCurve(by_k);
}

inline int round_half_up_count(std::int64_t numer, std::int64_t denom) {
    return static_cast<int>((2 * numer + denom) / (2 * denom));
}

// --- Chapter parameter sets (the per-chapter experiment tables). ---

struct MemAllocParams {
    int n_cores = 8;
    int n_banks = 8;
    int n_tasks = 20;
    Duration period_lo = Duration::ms(100), period_hi = Duration::ms(200);
    std::int64_t util_lo_millionths = 100'000, util_hi_millionths = 300'000;
    int intensive_out_of_10 = 5;  // ratio of memory-intensive tasks
    std::int64_t h_intensive_lo = 10'000, h_intensive_hi = 100'000;
    std::int64_t h_normal_lo = 100, h_normal_hi = 1'000;
    std::int64_t n_cap = 12;  // re-ordering window used in the experiments
};

struct VirtCacheParams {
    int n_pcpus = 4;
    int n_vms = 2;
    int vcpus_per_vm = 4;
    Duration vcpu_period = Duration::ms(10);
    int n_cache = 32;
    Duration delta = Duration::us(207);
    int n_tasks_lo = 10, n_tasks_hi = 15;
    std::int64_t util_total_millionths = 3'000'000;
    Duration c1_lo = Duration::us(8'470), c1_hi = Duration::us(202'020);
    std::int64_t mem_lo_mb = 8, mem_hi_mb = 40;
    std::int64_t beta_lo_milli = 500, beta_hi_milli = 950;
    std::int64_t cinf_lo_milli = 300, cinf_hi_milli = 900;
};

struct VmpcpParams {
    int n_cores = 8;
    int vcpus_per_core = 2;
    int tasks_per_vcpu = 3;
    Duration vcpu_period = Duration::ms(5);
    Duration period_lo = Duration::ms(100), period_hi = Duration::ms(500);
    std::int64_t util_per_vcpu_millionths = 150'000;
    int gcs_per_task = 1;
    int lockers_per_mutex = 2;
    Duration gcs_len = Duration::us(10);
    Duration budget_step = Duration::us(10);
};

struct VintParams {
    int n_pcpus = 4;
    int vcpus_per_pcpu = 3;
    int phys_per_pcpu = 6;
    int virt_per_vcpu = 2;
    Duration vcpu_period = Duration::ms(10);
    Duration intr_lo = Duration::ms(5), intr_hi = Duration::ms(10);
    Duration period_lo = Duration::ms(100), period_hi = Duration::ms(500);
    Duration isr_lo = Duration::us(5), isr_hi = Duration::us(10);
    Duration dsr_lo = Duration::us(10), dsr_hi = Duration::us(50);
    int regular_tasks_per_vcpu = 3;
    std::int64_t util_per_vcpu_millionths = 100'000;
    std::int64_t pseudo_period_ratio_milli = 1000;  // T_p / T^vi
    Duration budget_step = Duration::us(1);
};

struct GpuParams {
    int n_cores = 4;
    int tasks_per_core = 4;
    int gpu_ratio_pct = 20;
    Duration period_lo = Duration::ms(100), period_hi = Duration::ms(500);
    std::int64_t util_per_core_millionths = 500'000;
    int segments_per_task = 1;
    Duration g_lo = Duration::ms(5), g_hi = Duration::ms(10);
    Duration misc_lo = Duration::us(500), misc_hi = Duration::us(2000);
    Duration epsilon = Duration::us(100);
};

// --- Generated systems (scheme-independent parts). ---

struct MemAllocSystem {
    std::vector<Task> tasks;
    int n_cores;
    int n_banks;
    DramTiming dram;
    AnalysisConstants constants;
};

inline MemAllocSystem gen_mem_alloc(const MemAllocParams& p, std::uint64_t seed) {
    Rng rng(seed);
    MemAllocSystem sys;
    sys.n_cores = p.n_cores;
    sys.n_banks = p.n_banks;
    sys.dram = ddr3_1333();
    sys.constants.n_cap = p.n_cap;

    int n_intensive = p.n_tasks * p.intensive_out_of_10 / 10;
    for (int i = 0; i < p.n_tasks; i++) {
        Task t;
        t.id = i;
        t.name = "t" + std::to_string(i);
        t.period = rng.duration_between(p.period_lo, p.period_hi);
        t.deadline = t.period;
        std::int64_t u = rng.between(p.util_lo_millionths, p.util_hi_millionths);
        t.wcet = WcetCurve(wcet_from_util(u, t.period));
        bool intensive = i < n_intensive;
        t.dram_requests = Curve<std::int64_t>(
            intensive ? rng.between(p.h_intensive_lo, p.h_intensive_hi)
                      : rng.between(p.h_normal_lo, p.h_normal_hi));
        sys.tasks.push_back(std::move(t));
    }
    auto prios = assign_rms_priorities(sys.tasks);
    for (auto& t : sys.tasks) t.priority = prios[t.id];
    return sys;
}

struct VirtCacheSystem {
    // tasks grouped by VM
    std::vector<std::vector<Task>> vm_tasks;
    int n_cache;
    Duration delta;
    Duration vcpu_period;
    int vcpus_per_vm;
};

inline VirtCacheSystem gen_virt_cache(const VirtCacheParams& p, std::uint64_t seed) {
    Rng rng(seed);
    VirtCacheSystem sys;
    sys.n_cache = p.n_cache;
    sys.delta = p.delta;
    sys.vcpu_period = p.vcpu_period;
    sys.vcpus_per_vm = p.vcpus_per_vm;
    sys.vm_tasks.assign(static_cast<std::size_t>(p.n_vms), {});

    int n = static_cast<int>(rng.between(p.n_tasks_lo, p.n_tasks_hi));
    auto pieces = stick_break(rng, p.util_total_millionths, n);
    std::vector<Task> tasks;
    for (int i = 0; i < n; i++) {
        Task t;
        t.id = i;
        t.name = "t" + std::to_string(i);
        Duration c1 = rng.duration_between(p.c1_lo, p.c1_hi);
        std::int64_t u = std::max<std::int64_t>(pieces[static_cast<std::size_t>(i)], 1'000);
        // Period from the one-partition utilization piece, on a 1 us grid.
        BigInt t_ps = BigInt(c1.count()) * 1'000'000 / u;
        BigInt t_us = (t_ps + 500'000) / 1'000'000;
        t.period = Duration::us(t_us.convert_to<std::int64_t>());
        t.deadline = t.period;
        t.wcet = gen_wcet_curve(c1, rng.between(p.beta_lo_milli, p.beta_hi_milli),
                                rng.between(p.cinf_lo_milli, p.cinf_hi_milli), p.n_cache);
        t.mem_mb = rng.between(p.mem_lo_mb, p.mem_hi_mb);
        tasks.push_back(std::move(t));
    }
    auto prios = assign_rms_priorities(tasks);
    for (auto& t : tasks) t.priority = prios[t.id];
    for (auto& t : tasks) {
        auto vm = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(p.n_vms)));
        sys.vm_tasks[vm].push_back(t);
    }
    return sys;
}

inline vmpcp::System gen_vmpcp(const VmpcpParams& p, std::uint64_t seed) {
    Rng rng(seed);
    vmpcp::System sys;
    int task_id = 0;
    for (int core = 1; core <= p.n_cores; core++) {
        for (int vi = 0; vi < p.vcpus_per_core; vi++) {
            Vcpu v;
            v.id = static_cast<int>(sys.vcpus.size());
            v.name = "v" + std::to_string(v.id);
            v.period = p.vcpu_period;
            v.budget = WcetCurve(p.vcpu_period);  // determined later per scheme
            v.pcpu = core;
            v.priority = vi + 1;  // same periods; id order within the core
            auto pieces = stick_break(rng, p.util_per_vcpu_millionths, p.tasks_per_vcpu);
            for (int ti = 0; ti < p.tasks_per_vcpu; ti++) {
                Task t;
                t.id = task_id++;
                t.name = "t" + std::to_string(t.id);
                t.period = rng.duration_between(p.period_lo, p.period_hi);
                t.deadline = t.period;
                Duration c = wcet_from_util(
                    std::max<std::int64_t>(pieces[static_cast<std::size_t>(ti)], 100),
                    t.period);
                Duration gcs_total = (p.gcs_per_task * p.gcs_len);
                if (c < gcs_total + Duration::us(1)) c = gcs_total + Duration::us(1);
                t.wcet = WcetCurve(c);
                // Alternate normal and gcs segments; the tail normal segment
                // absorbs the remainder.
                Duration normal_total = c - gcs_total;
                std::int64_t slots = p.gcs_per_task + 1;
                Duration share = Duration::ps(normal_total.count() / slots);
                Duration used{};
                for (int g = 0; g < p.gcs_per_task; g++) {
                    t.crit_sections.push_back({SegmentKind::Normal, share, -1});
                    used += share;
                    t.crit_sections.push_back({SegmentKind::Gcs, p.gcs_len, -1});
                }
                t.crit_sections.push_back(
                    {SegmentKind::Normal, normal_total - used, -1});
                v.task_ids.push_back(t.id);
                sys.tasks.push_back(std::move(t));
            }
            sys.vcpus.push_back(std::move(v));
        }
    }
    // Task priorities: rate-monotonic within each VCPU.
    for (auto& v : sys.vcpus) {
        std::vector<std::pair<int, Duration>> ip;
        for (int tid : v.task_ids) ip.emplace_back(tid, sys.task(tid).period);
        auto prios = assign_rms_priorities(ip);
        for (auto& t : sys.tasks)
            if (prios.count(t.id)) t.priority = prios[t.id];
    }
    // Mutex groups: shuffle all gcs-bearing tasks, slice into locker groups.
    std::vector<int> ids;
    for (const auto& t : sys.tasks) ids.push_back(t.id);
    rng.shuffle(ids);
    int resource = 0;
    for (std::size_t i = 0; i < ids.size();
         i += static_cast<std::size_t>(p.lockers_per_mutex), resource++) {
        for (std::size_t j = i;
             j < std::min(ids.size(), i + static_cast<std::size_t>(p.lockers_per_mutex));
             j++) {
            for (auto& t : sys.tasks)
                if (t.id == ids[j])
                    for (auto& s : t.crit_sections)
                        if (s.kind == SegmentKind::Gcs) s.resource_id = resource;
        }
    }
    return sys;
}

// Interrupt-flow wiring produced alongside a generated interrupt system.
struct VintFlow {
    int physical_id;
    int virtual_id;
};

struct VintSystem {
    vint::System sys;
    std::vector<VintFlow> flows;
};

inline VintSystem gen_vint(const VintParams& p, std::uint64_t seed) {
    Rng rng(seed);
    VintSystem out;
    auto& sys = out.sys;

    int task_id = 0, intr_id = 0;
    for (int pc = 1; pc <= p.n_pcpus; pc++) {
        // Physical interrupts pinned to this PCPU, priorities shuffled.
        std::vector<int> pprio(static_cast<std::size_t>(p.phys_per_pcpu));
        std::iota(pprio.begin(), pprio.end(), 1);
        rng.shuffle(pprio);
        std::vector<int> phys_ids;
        for (int i = 0; i < p.phys_per_pcpu; i++) {
            InterruptSource s;
            s.id = intr_id++;
            s.name = "pi" + std::to_string(s.id);
            s.kind = InterruptKind::Physical;
            s.isr_wcet = rng.duration_between(p.isr_lo, p.isr_hi);
            s.min_interarrival = rng.duration_between(p.intr_lo, p.intr_hi);
            s.priority = pprio[static_cast<std::size_t>(i)];
            s.pcpu = pc;
            phys_ids.push_back(s.id);
            sys.interrupts.push_back(std::move(s));
        }
        rng.shuffle(phys_ids);
        std::size_t next_phys = 0;

        for (int vi = 0; vi < p.vcpus_per_pcpu; vi++) {
            Vcpu v;
            v.id = static_cast<int>(sys.vcpus.size());
            v.name = "v" + std::to_string(v.id);
            v.period = p.vcpu_period;
            v.budget = WcetCurve(p.vcpu_period);  // determined later per scheme
            v.pcpu = pc;
            v.priority = vi + 1;

            std::vector<std::pair<int, Duration>> prio_input;
            auto pieces = stick_break(rng, p.util_per_vcpu_millionths,
                                      p.regular_tasks_per_vcpu);
            for (int ti = 0; ti < p.regular_tasks_per_vcpu; ti++) {
                Task t;
                t.id = task_id++;
                t.name = "t" + std::to_string(t.id);
                t.period = rng.duration_between(p.period_lo, p.period_hi);
                t.deadline = t.period;
                t.wcet = WcetCurve(wcet_from_util(
                    std::max<std::int64_t>(pieces[static_cast<std::size_t>(ti)], 100),
                    t.period));
                prio_input.emplace_back(t.id, t.period);
                v.task_ids.push_back(t.id);
                sys.tasks.push_back(std::move(t));
            }
            // One virtual interrupt per slot, each matched with an unused
            // physical interrupt on the same PCPU and served by one DSR task.
            for (int ii = 0; ii < p.virt_per_vcpu; ii++) {
                const InterruptSource& src =
                    sys.interrupt(phys_ids.at(next_phys++));
                Task dsr;
                dsr.id = task_id++;
                dsr.name = "dsr" + std::to_string(dsr.id);
                dsr.period = src.min_interarrival;
                dsr.deadline = dsr.period;
                dsr.wcet = WcetCurve(rng.duration_between(p.dsr_lo, p.dsr_hi));
                prio_input.emplace_back(dsr.id, dsr.period);
                v.task_ids.push_back(dsr.id);

                InterruptSource s;
                s.id = intr_id++;
                s.name = "vi" + std::to_string(s.id);
                s.kind = InterruptKind::Virtual;
                s.isr_wcet = rng.duration_between(p.isr_lo, p.isr_hi);
                s.min_interarrival = src.min_interarrival;
                s.priority = ii + 1;
                s.vcpu = v.id;
                s.dsr_task_ids = {dsr.id};
                s.source_physical = src.id;
                out.flows.push_back({src.id, s.id});

                sys.tasks.push_back(std::move(dsr));
                sys.interrupts.push_back(std::move(s));
            }
            auto prios = assign_rms_priorities(prio_input);
            for (auto& t : sys.tasks)
                if (prios.count(t.id)) t.priority = prios[t.id];
            sys.vcpus.push_back(std::move(v));
        }
    }
    return out;
}

// Adds vINT pseudo-VCPUs for every virtual interrupt: period is the ratio
// times the inter-arrival, budget covers the window, priority sits in a band
// above every regular VCPU ordered by (original VCPU priority, slot).
inline vint::System with_vint(const vint::System& base,
                              std::int64_t pseudo_period_ratio_milli) {
    vint::System sys = base;
    constexpr int kPseudoBand = 1'000'000;
    // First create the pseudo-VCPU shells so that sibling interrupts are
    // recognized as managed when budgets are computed.
    for (auto& s : sys.interrupts) {
        if (s.kind != InterruptKind::Virtual) continue;
        s.managed_by_vint = true;
        const Vcpu& orig = sys.vcpu(s.vcpu);
        Vcpu pseudo;
        pseudo.id = static_cast<int>(sys.vcpus.size());
        pseudo.name = "pv-" + s.name;
        pseudo.period = Duration::ps(
            BigInt(BigInt(s.min_interarrival.count()) * pseudo_period_ratio_milli / 1000)
                .convert_to<std::int64_t>());
        pseudo.policy = orig.policy;
        pseudo.pcpu = orig.pcpu;
        pseudo.kind = VcpuKind::Pseudo;
        pseudo.pseudo_for_interrupt = s.id;
        pseudo.original_vcpu = orig.id;
        pseudo.priority = kPseudoBand + orig.priority * 100 + s.priority;
        pseudo.budget = WcetCurve(Duration::zero());
        s.pseudo_vcpu = pseudo.id;
        sys.vcpus.push_back(std::move(pseudo));
    }
    for (auto& pseudo : sys.vcpus) {
        if (pseudo.kind != VcpuKind::Pseudo) continue;
        const InterruptSource& s = sys.interrupt(pseudo.pseudo_for_interrupt);
        pseudo.budget = WcetCurve(vint::pseudo_vcpu_budget(sys, s, pseudo.period));
    }
    return sys;
}

inline gpu::System gen_gpu(const GpuParams& p, std::uint64_t seed) {
    Rng rng(seed);
    gpu::System sys;
    sys.epsilon = p.epsilon;
    sys.core_tasks.assign(static_cast<std::size_t>(p.n_cores), {});
    int task_id = 0;
    for (int core = 0; core < p.n_cores; core++) {
        auto pieces = stick_break(rng, p.util_per_core_millionths, p.tasks_per_core);
        std::vector<Task> tasks;
        for (int ti = 0; ti < p.tasks_per_core; ti++) {
            Task t;
            t.id = task_id++;
            t.name = "t" + std::to_string(t.id);
            t.period = rng.duration_between(p.period_lo, p.period_hi);
            t.deadline = t.period;
            t.wcet = WcetCurve(wcet_from_util(
                std::max<std::int64_t>(pieces[static_cast<std::size_t>(ti)], 100),
                t.period));
            tasks.push_back(std::move(t));
        }
        auto prios = assign_rms_priorities(tasks);
        for (auto& t : tasks) t.priority = prios[t.id];
        sys.core_tasks[static_cast<std::size_t>(core)] = std::move(tasks);
    }
    // GPU-using subset: count rounded half-up, members drawn by shuffle.
    int n_tasks = p.n_cores * p.tasks_per_core;
    int n_gpu = round_half_up_count(
        static_cast<std::int64_t>(n_tasks) * p.gpu_ratio_pct, 100);
    std::vector<int> ids(static_cast<std::size_t>(n_tasks));
    std::iota(ids.begin(), ids.end(), 0);
    rng.shuffle(ids);
    std::set<int> gpu_ids(ids.begin(), ids.begin() + n_gpu);
    for (auto& core : sys.core_tasks) {
        for (auto& t : core) {
            if (!gpu_ids.count(t.id)) continue;
            for (int s = 0; s < p.segments_per_task; s++) {
                GpuSegment g;
                g.total = rng.duration_between(p.g_lo, p.g_hi);
                g.misc = rng.duration_between(p.misc_lo, p.misc_hi);
                g.exec = g.total - g.misc;
                t.gpu_segments.push_back(g);
            }
        }
    }
    sys.server_core = static_cast<int>(rng.below(static_cast<std::uint64_t>(p.n_cores)));
    return sys;
}

// --- VCPU budget determination for experiments. ---

// Single budget value for all regular VCPUs, scanned downward from the
// period until every VCPU passes the mode's schedulability test.
inline std::optional<Duration> scan_vmpcp_budget(vmpcp::System& sys, Duration step) {
    Duration period = sys.vcpus.front().period;
    for (Duration b = period; b >= Duration::zero(); b -= step) {
        for (auto& v : sys.vcpus) v.budget = WcetCurve(b);
        bool ok = true;
        for (const auto& v : sys.vcpus)
            if (!vmpcp::vcpu_response_time(sys, v).schedulable()) {
                ok = false;
                break;
            }
        if (ok) return b;
        if (b < step) break;
    }
    return std::nullopt;
}

inline std::optional<Duration> scan_vint_budget(vint::System& sys, Duration step) {
    Duration period{};
    for (const auto& v : sys.vcpus)
        if (v.kind == VcpuKind::Regular) period = v.period;
    for (Duration b = period; b >= Duration::zero(); b -= step) {
        for (auto& v : sys.vcpus)
            if (v.kind == VcpuKind::Regular) v.budget = WcetCurve(b);
        bool ok = true;
        for (const auto& v : sys.vcpus) {
            if (v.kind != VcpuKind::Regular) continue;
            if (!vint::vcpu_response_time(sys, v).schedulable()) {
                ok = false;
                break;
            }
        }
        if (ok) return b;
        if (b < step) break;
    }
    return std::nullopt;
}

}  // namespace rtsched::expgen
