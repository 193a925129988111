#pragma once

#include "rtsched/config.hpp"
#include "rtsched/expgen.hpp"
#include "rtsched/hier.hpp"
#include "rtsched/memalloc.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace rtsched::exp {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Per-taskset seed derived from (base seed, sweep index, taskset index):
// independent of evaluation order and of the number of worker threads.
inline std::uint64_t taskset_seed(std::uint64_t base, std::size_t sweep_idx,
                                  int taskset_idx) {
    return splitmix64(base ^ splitmix64(0xABCD0000 + sweep_idx) ^
                      splitmix64(static_cast<std::uint64_t>(taskset_idx) * 0x51ED2700));
}

// --- Memory-interference allocation schemes (MIAA and baselines). ---

enum class MemScheme {
    Miaa,
    BfdNb,
    BfdWb,
    FfdNb,
    FfdWb,
    WfdNb,
    WfdWb,
    Ia3Nb,
    Ia3Wb,
};

inline const char* mem_scheme_name(MemScheme s) {
    switch (s) {
        case MemScheme::Miaa: return "miaa";
        case MemScheme::BfdNb: return "bfd_nb";
        case MemScheme::BfdWb: return "bfd_wb";
        case MemScheme::FfdNb: return "ffd_nb";
        case MemScheme::FfdWb: return "ffd_wb";
        case MemScheme::WfdNb: return "wfd_nb";
        case MemScheme::WfdWb: return "wfd_wb";
        case MemScheme::Ia3Nb: return "ia3_nb";
        case MemScheme::Ia3Wb: return "ia3_wb";
    }
    return "?";
}

inline bool mem_scheme_banked(MemScheme s) {
    return s == MemScheme::BfdWb || s == MemScheme::FfdWb || s == MemScheme::WfdWb ||
           s == MemScheme::Ia3Wb;
}

// Conventional bin-packing allocation: sort tasks by decreasing utilization
// (IA3 inflates the sort key by the per-request delay), insert into a core
// picked by the heuristic, checking only the candidate core's taskset. The
// final verdict re-checks the complete system, which is exactly where such
// schemes lose tasks allocated earlier on other cores.
inline bool run_mem_baseline(const expgen::MemAllocSystem& sys, MemScheme scheme,
                             std::uint64_t iteration_cap = 1'000'000) {
    const int n_cores = sys.n_cores;
    auto terms = dram::latency_terms(sys.dram, sys.constants);

    mem::MemView view;
    view.terms = terms;
    view.iteration_cap = iteration_cap;
    view.core_tasks.assign(static_cast<std::size_t>(n_cores), {});
    std::set<int> all_banks;
    for (int b = 1; b <= sys.n_banks; b++) all_banks.insert(b);
    for (int p = 0; p < n_cores; p++) {
        if (mem_scheme_banked(scheme))
            view.core_banks.push_back({p % sys.n_banks + 1});
        else
            view.core_banks.push_back(all_banks);
    }

    std::vector<Task> order = sys.tasks;
    const bool ia3 = scheme == MemScheme::Ia3Nb || scheme == MemScheme::Ia3Wb;
    Duration rd = mem::request_driven_delay(view, 0).total();
    auto sort_key = [&](const Task& t) {
        Duration c = t.wcet_at(1);
        if (ia3) c += t.dram_requests_at(1) * rd;
        return ratio(c, t.period);
    };
    std::stable_sort(order.begin(), order.end(), [&](const Task& a, const Task& b) {
        Rational ka = sort_key(a), kb = sort_key(b);
        if (ka != kb) return kb < ka;
        return a.id < b.id;
    });

    auto core_util = [&](int p) {
        Rational u(0);
        for (const auto& t : view.core_tasks[static_cast<std::size_t>(p)])
            u += ratio(t.wcet_at(1), t.period);
        return u;
    };

    for (const auto& t : order) {
        std::vector<int> cores(static_cast<std::size_t>(n_cores));
        for (int p = 0; p < n_cores; p++) cores[static_cast<std::size_t>(p)] = p;
        if (scheme == MemScheme::BfdNb || scheme == MemScheme::BfdWb) {
            std::stable_sort(cores.begin(), cores.end(),
                             [&](int a, int b) { return core_util(b) < core_util(a); });
        } else if (scheme == MemScheme::WfdNb || scheme == MemScheme::WfdWb) {
            std::stable_sort(cores.begin(), cores.end(),
                             [&](int a, int b) { return core_util(a) < core_util(b); });
        }  // FFD and IA3 keep index order
        bool placed = false;
        for (int p : cores) {
            auto& core = view.core_tasks[static_cast<std::size_t>(p)];
            core.push_back(t);
            if (mem::core_schedulable_memory(view, p)) {
                placed = true;
                break;
            }
            core.pop_back();
        }
        if (!placed) return false;
    }
    return mem::system_schedulable_memory(view);
}

inline bool run_mem_scheme(const expgen::MemAllocParams& params, std::uint64_t seed,
                           MemScheme scheme) {
    auto sys = expgen::gen_mem_alloc(params, seed);
    if (scheme == MemScheme::Miaa) {
        auto terms = dram::latency_terms(sys.dram, sys.constants);
        return memalloc::miaa(sys.tasks, sys.n_cores, sys.n_banks, terms).schedulable;
    }
    return run_mem_baseline(sys, scheme);
}

// --- Virtualization cache-management schemes. ---

enum class VcacheScheme { Cavm, BfdCcp, WfdCcp, FfdCcp, BfdCcs, WfdCcs, FfdCcs };

inline const char* vcache_scheme_name(VcacheScheme s) {
    switch (s) {
        case VcacheScheme::Cavm: return "cavm";
        case VcacheScheme::BfdCcp: return "bfd_ccp";
        case VcacheScheme::WfdCcp: return "wfd_ccp";
        case VcacheScheme::FfdCcp: return "ffd_ccp";
        case VcacheScheme::BfdCcs: return "bfd_ccs";
        case VcacheScheme::WfdCcs: return "wfd_ccs";
        case VcacheScheme::FfdCcs: return "ffd_ccs";
    }
    return "?";
}

// Complete cache partitioning: private partitions proportional to memory
// footprint (largest remainder, one minimum each). Returns empty when the
// VCPU cannot give every task a partition.
inline std::optional<std::map<int, std::set<int>>> ccp_partitions(
    const std::vector<Task>& tasks, int n_parts) {
    if (static_cast<int>(tasks.size()) > n_parts) return std::nullopt;
    if (tasks.empty()) return std::map<int, std::set<int>>{};
    std::int64_t total_mem = 0;
    for (const auto& t : tasks) total_mem += std::max<std::int64_t>(t.mem_mb, 1);
    int spare = n_parts - static_cast<int>(tasks.size());
    std::vector<std::pair<std::int64_t, std::size_t>> remainders;
    std::vector<int> counts(tasks.size(), 1);
    std::int64_t used = 0;
    for (std::size_t i = 0; i < tasks.size(); i++) {
        std::int64_t share =
            spare * std::max<std::int64_t>(tasks[i].mem_mb, 1) / total_mem;
        counts[i] += static_cast<int>(share);
        used += share;
        remainders.push_back(
            {spare * std::max<std::int64_t>(tasks[i].mem_mb, 1) % total_mem, i});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t r = 0; used < spare && r < remainders.size(); r++, used++)
        counts[remainders[r].second]++;
    std::map<int, std::set<int>> parts;
    int idx = 1;
    for (std::size_t i = 0; i < tasks.size(); i++) {
        std::set<int> s;
        for (int k = 0; k < counts[i]; k++) s.insert(idx++);
        parts[tasks[i].id] = std::move(s);
    }
    return parts;
}

inline std::map<int, std::set<int>> ccs_partitions(const std::vector<Task>& tasks,
                                                   int n_parts) {
    std::set<int> everything;
    for (int p = 1; p <= n_parts; p++) everything.insert(p);
    std::map<int, std::set<int>> parts;
    for (const auto& t : tasks) parts[t.id] = everything;
    return parts;
}

inline bool run_vcache_scheme(const expgen::VirtCacheParams& params, std::uint64_t seed,
                              VcacheScheme scheme, int host_partitions) {
    auto sys = expgen::gen_virt_cache(params, seed);
    const int total_vcpus = params.n_vms * params.vcpus_per_vm;
    const Duration period = sys.vcpu_period;

    if (scheme == VcacheScheme::Cavm) {
        std::vector<hier::VcpuBudgetCurve> curves;
        for (const auto& vm : sys.vm_tasks) {
            auto r = hier::cavm(vm, params.vcpus_per_vm, sys.n_cache, period, sys.delta);
            if (!r.success) return false;
            for (const auto& by_k : r.budget_curve) {
                hier::VcpuBudgetCurve c;
                c.by_k = by_k;
                c.period = period;
                curves.push_back(std::move(c));
            }
        }
        return hier::cache_to_vm_alloc(curves, host_partitions).success;
    }

    // Comparators: spread host partitions evenly over all VCPUs, pack tasks
    // per VM with the bin-packing heuristic, then search each VCPU budget.
    const bool ccp = scheme == VcacheScheme::BfdCcp || scheme == VcacheScheme::WfdCcp ||
                     scheme == VcacheScheme::FfdCcp;
    std::vector<int> vcpu_parts(static_cast<std::size_t>(total_vcpus),
                                host_partitions / total_vcpus);
    for (int i = 0; i < host_partitions % total_vcpus; i++)
        vcpu_parts[static_cast<std::size_t>(i)]++;
    for (int c : vcpu_parts)
        if (c == 0) return false;  // every VCPU needs at least one partition

    int base_k = std::max(1, host_partitions / total_vcpus);
    std::vector<std::vector<Task>> vcpu_tasks(static_cast<std::size_t>(total_vcpus));

    for (int vmi = 0; vmi < params.n_vms; vmi++) {
        std::vector<Task> order = sys.vm_tasks[static_cast<std::size_t>(vmi)];
        std::stable_sort(order.begin(), order.end(), [&](const Task& a, const Task& b) {
            Rational ua = ratio(a.wcet_at(base_k), a.period);
            Rational ub = ratio(b.wcet_at(base_k), b.period);
            if (ua != ub) return ub < ua;
            return a.id < b.id;
        });
        auto vcpu_util = [&](int v) {
            Rational u(0);
            for (const auto& t : vcpu_tasks[static_cast<std::size_t>(v)])
                u += ratio(t.wcet_at(base_k), t.period);
            return u;
        };
        auto fits = [&](int v, const Task& t) {
            auto& host = vcpu_tasks[static_cast<std::size_t>(v)];
            host.push_back(t);
            int n_parts = vcpu_parts[static_cast<std::size_t>(v)];
            std::optional<std::map<int, std::set<int>>> parts =
                ccp ? ccp_partitions(host, n_parts)
                    : std::optional<std::map<int, std::set<int>>>(
                          ccs_partitions(host, n_parts));
            bool ok = false;
            if (parts) {
                hier::VcpuTaskView view{host, *parts, sys.delta, period, period,
                                        1'000'000};
                ok = hier::vcpu_tasks_schedulable(view);
            }
            if (!ok) host.pop_back();
            return ok;
        };
        int first = vmi * params.vcpus_per_vm;
        for (const auto& t : order) {
            std::vector<int> vs;
            for (int v = first; v < first + params.vcpus_per_vm; v++) vs.push_back(v);
            if (scheme == VcacheScheme::BfdCcp || scheme == VcacheScheme::BfdCcs)
                std::stable_sort(vs.begin(), vs.end(), [&](int a, int b) {
                    return vcpu_util(b) < vcpu_util(a);
                });
            else if (scheme == VcacheScheme::WfdCcp || scheme == VcacheScheme::WfdCcs)
                std::stable_sort(vs.begin(), vs.end(), [&](int a, int b) {
                    return vcpu_util(a) < vcpu_util(b);
                });
            bool placed = false;
            for (int v : vs)
                if (fits(v, t)) {
                    placed = true;
                    break;
                }
            if (!placed) return false;
        }
    }

    for (int v = 0; v < total_vcpus; v++) {
        const auto& tasks = vcpu_tasks[static_cast<std::size_t>(v)];
        int n_parts = vcpu_parts[static_cast<std::size_t>(v)];
        auto parts = ccp ? ccp_partitions(tasks, n_parts)
                         : std::optional<std::map<int, std::set<int>>>(
                               ccs_partitions(tasks, n_parts));
        if (!parts) return false;
        if (!hier::vcpu_budget_search(tasks, *parts, period, sys.delta)) return false;
    }
    return true;
}

// --- vMPCP schemes. ---

inline bool run_vmpcp_scheme(const expgen::VmpcpParams& params, std::uint64_t seed,
                             vmpcp::Mode mode) {
    auto sys = expgen::gen_vmpcp(params, seed);
    sys.mode = mode;
    for (auto& v : sys.vcpus) v.policy = vmpcp::policy_of(mode);
    auto budget = expgen::scan_vmpcp_budget(sys, params.budget_step);
    if (!budget) return false;
    for (auto& v : sys.vcpus) v.budget = WcetCurve(*budget);
    return vmpcp::system_schedulable(sys);
}

// --- vINT schemes. ---

enum class VintScheme { DsBase, SsBase, DsVint, SsVint };

inline const char* vint_scheme_name(VintScheme s) {
    switch (s) {
        case VintScheme::DsBase: return "ds_base";
        case VintScheme::SsBase: return "ss_base";
        case VintScheme::DsVint: return "ds_vint";
        case VintScheme::SsVint: return "ss_vint";
    }
    return "?";
}

struct VintOutcome {
    bool tasks_schedulable = false;
    bool serviceable = false;
};

inline VintOutcome run_vint_scheme(const expgen::VintParams& params, std::uint64_t seed,
                                   VintScheme scheme) {
    auto gen = expgen::gen_vint(params, seed);
    bool use_vint = scheme == VintScheme::DsVint || scheme == VintScheme::SsVint;
    bool deferrable = scheme == VintScheme::DsBase || scheme == VintScheme::DsVint;
    vint::System sys =
        use_vint ? expgen::with_vint(gen.sys, params.pseudo_period_ratio_milli)
                 : gen.sys;
    for (auto& v : sys.vcpus)
        v.policy = deferrable ? ServerPolicy::Deferrable : ServerPolicy::Sporadic;

    VintOutcome out;
    auto budget = expgen::scan_vint_budget(sys, params.budget_step);
    if (!budget) return out;
    for (auto& v : sys.vcpus)
        if (v.kind == VcpuKind::Regular) v.budget = WcetCurve(*budget);

    out.tasks_schedulable = true;
    for (const auto& v : sys.vcpus) {
        if (v.kind != VcpuKind::Regular) continue;
        for (int tid : v.task_ids) {
            if (sys.pseudo_of_task(tid) != nullptr) continue;
            if (!vint::task_response_time(sys, sys.task(tid)).schedulable()) {
                out.tasks_schedulable = false;
                break;
            }
        }
        if (!out.tasks_schedulable) break;
    }

    out.serviceable = true;
    for (const auto& flow : gen.flows) {
        const auto& phys = sys.interrupt(flow.physical_id);
        const auto& virt = sys.interrupt(flow.virtual_id);
        auto fv = vint::flow_serviceable(sys, phys, virt, nullptr, use_vint);
        if (!fv.serviceable) {
            out.serviceable = false;
            break;
        }
    }
    return out;
}

// --- GPU schemes. ---

inline bool run_gpu_scheme(const expgen::GpuParams& params, std::uint64_t seed,
                           bool server) {
    auto sys = expgen::gen_gpu(params, seed);
    return server ? gpu::system_schedulable_server(sys)
                  : gpu::system_schedulable_sync(sys);
}

// --- Experiment specification and sweep driver. ---

struct ExperimentSpec {
    std::string chapter;  // mem_alloc | virt_cache | vmpcp | vint | gpu
    expgen::MemAllocParams mem;
    expgen::VirtCacheParams vcache;
    expgen::VmpcpParams vmpcp_params;
    expgen::VintParams vint_params;
    expgen::GpuParams gpu_params;
    std::string sweep;
    std::vector<std::int64_t> sweep_values;
    int n_tasksets = 500;
    std::uint64_t seed = 1;
    std::vector<std::string> schemes;  // empty = every scheme of the chapter
};

inline std::vector<std::string> schemes_for(const std::string& chapter) {
    if (chapter == "mem_alloc")
        return {"miaa",   "bfd_nb", "bfd_wb", "ffd_nb", "ffd_wb",
                "wfd_nb", "wfd_wb", "ia3_nb", "ia3_wb"};
    if (chapter == "virt_cache")
        return {"cavm",    "bfd_ccp", "wfd_ccp", "ffd_ccp",
                "bfd_ccs", "wfd_ccs", "ffd_ccs"};
    if (chapter == "vmpcp") return {"pswo", "dswo", "psno", "dsno"};
    if (chapter == "vint") return {"ds_base", "ss_base", "ds_vint", "ss_vint"};
    if (chapter == "gpu") return {"sync", "server"};
    throw config::ConfigError("unknown chapter '" + chapter + "'");
}

// Applies one sweep value onto the chapter parameters.
inline void apply_sweep(ExperimentSpec& spec, std::int64_t value) {
    const std::string& var = spec.sweep;
    if (spec.chapter == "mem_alloc") {
        if (var == "mem_ratio")
            spec.mem.intensive_out_of_10 = static_cast<int>(value);
        else if (var == "n_tasks")
            spec.mem.n_tasks = static_cast<int>(value);
        else if (var == "util_per_task_milli") {
            spec.mem.util_lo_millionths = value * 1000 - 10'000;
            spec.mem.util_hi_millionths = value * 1000 + 10'000;
        } else if (var == "n_cores")
            spec.mem.n_cores = static_cast<int>(value);
        else
            throw config::ConfigError("unknown sweep '" + var + "' for mem_alloc");
    } else if (spec.chapter == "virt_cache") {
        if (var != "n_cache_host")
            throw config::ConfigError("unknown sweep '" + var + "' for virt_cache");
    } else if (spec.chapter == "vmpcp") {
        if (var == "vcpu_period_ms")
            spec.vmpcp_params.vcpu_period = Duration::ms(value);
        else if (var == "gcs_us")
            spec.vmpcp_params.gcs_len = Duration::us(value);
        else if (var == "n_lockers")
            spec.vmpcp_params.lockers_per_mutex = static_cast<int>(value);
        else if (var == "gcs_per_task")
            spec.vmpcp_params.gcs_per_task = static_cast<int>(value);
        else if (var == "vcpu_util_permille")
            spec.vmpcp_params.util_per_vcpu_millionths = value * 1000;
        else
            throw config::ConfigError("unknown sweep '" + var + "' for vmpcp");
    } else if (spec.chapter == "vint") {
        if (var == "intr_lo_us") {
            spec.vint_params.intr_lo = Duration::us(value);
            spec.vint_params.intr_hi =
                Duration::us(value) + (spec.vint_params.intr_hi - spec.vint_params.intr_lo);
        } else if (var == "intr_range_us") {
            // closed range [value, value + width] with the preset width
            Duration width = spec.vint_params.intr_hi - spec.vint_params.intr_lo;
            spec.vint_params.intr_lo = Duration::us(value);
            spec.vint_params.intr_hi = Duration::us(value) + width;
        } else if (var == "vcpu_period_us")
            spec.vint_params.vcpu_period = Duration::us(value);
        else if (var == "pseudo_ratio_milli")
            spec.vint_params.pseudo_period_ratio_milli = value;
        else if (var == "isr_hi_us")
            spec.vint_params.isr_hi = Duration::us(value);
        else if (var == "dsr_hi_us")
            spec.vint_params.dsr_hi = Duration::us(value);
        else
            throw config::ConfigError("unknown sweep '" + var + "' for vint");
    } else if (spec.chapter == "gpu") {
        if (var == "gpu_ratio_pct")
            spec.gpu_params.gpu_ratio_pct = static_cast<int>(value);
        else if (var == "gpu_len_ms") {
            spec.gpu_params.g_lo = Duration::ms(value);
            spec.gpu_params.g_hi = Duration::ms(value);
        } else if (var == "misc_us") {
            spec.gpu_params.misc_lo = Duration::us(value);
            spec.gpu_params.misc_hi = Duration::us(value);
        } else if (var == "epsilon_us")
            spec.gpu_params.epsilon = Duration::us(value);
        else if (var == "n_cores")
            spec.gpu_params.n_cores = static_cast<int>(value);
        else
            throw config::ConfigError("unknown sweep '" + var + "' for gpu");
    } else {
        throw config::ConfigError("unknown chapter '" + spec.chapter + "'");
    }
}

// One (scheme, sweep value) evaluation for one taskset seed.
inline bool evaluate_one(const ExperimentSpec& spec, const std::string& scheme,
                         std::int64_t sweep_value, std::uint64_t seed) {
    ExperimentSpec local = spec;
    apply_sweep(local, sweep_value);
    if (spec.chapter == "mem_alloc") {
        for (auto s : {MemScheme::Miaa, MemScheme::BfdNb, MemScheme::BfdWb,
                       MemScheme::FfdNb, MemScheme::FfdWb, MemScheme::WfdNb,
                       MemScheme::WfdWb, MemScheme::Ia3Nb, MemScheme::Ia3Wb})
            if (scheme == mem_scheme_name(s)) return run_mem_scheme(local.mem, seed, s);
    } else if (spec.chapter == "virt_cache") {
        for (auto s : {VcacheScheme::Cavm, VcacheScheme::BfdCcp, VcacheScheme::WfdCcp,
                       VcacheScheme::FfdCcp, VcacheScheme::BfdCcs, VcacheScheme::WfdCcs,
                       VcacheScheme::FfdCcs})
            if (scheme == vcache_scheme_name(s))
                return run_vcache_scheme(local.vcache, seed, s,
                                         static_cast<int>(sweep_value));
    } else if (spec.chapter == "vmpcp") {
        for (auto m : {vmpcp::Mode::PSwO, vmpcp::Mode::DSwO, vmpcp::Mode::PSnO,
                       vmpcp::Mode::DSnO}) {
            std::string name = vmpcp::mode_name(m);
            for (auto& c : name) c = static_cast<char>(std::tolower(c));
            if (scheme == name) return run_vmpcp_scheme(local.vmpcp_params, seed, m);
        }
    } else if (spec.chapter == "vint") {
        for (auto s : {VintScheme::DsBase, VintScheme::SsBase, VintScheme::DsVint,
                       VintScheme::SsVint})
            if (scheme == vint_scheme_name(s))
                return run_vint_scheme(local.vint_params, seed, s).serviceable;
    } else if (spec.chapter == "gpu") {
        if (scheme == "sync") return run_gpu_scheme(local.gpu_params, seed, false);
        if (scheme == "server") return run_gpu_scheme(local.gpu_params, seed, true);
    }
    throw config::ConfigError("unknown scheme '" + scheme + "' for chapter '" +
                              spec.chapter + "'");
}

struct CsvRow {
    std::string scheme;
    std::int64_t sweep_value;
    int n_tasksets;
    int n_ok;
    std::uint64_t seed_base;
};

// Evaluates one (scheme, sweep point) over n_tasksets seeds with a pool of
// workers. Counting is order-independent, so the result does not depend on
// the worker count.
inline CsvRow run_point(const ExperimentSpec& spec, const std::string& scheme,
                        std::size_t sweep_idx, int jobs) {
    std::int64_t value = spec.sweep_values[sweep_idx];
    std::atomic<int> next{0};
    std::atomic<int> ok{0};
    auto work = [&]() {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= spec.n_tasksets) return;
            std::uint64_t seed = taskset_seed(spec.seed, sweep_idx, i);
            if (evaluate_one(spec, scheme, value, seed)) ok.fetch_add(1);
        }
    };
    if (jobs <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; j++) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    return {scheme, value, spec.n_tasksets, ok.load(), spec.seed};
}

inline std::string csv_header(const std::string& chapter) {
    std::string count_col = chapter == "vint" ? "n_serviceable" : "n_schedulable";
    return "scheme,sweep_value,n_tasksets," + count_col + ",fraction,seed_base";
}

inline std::string csv_line(const CsvRow& r) {
    std::ostringstream os;
    os << r.scheme << "," << r.sweep_value << "," << r.n_tasksets << "," << r.n_ok << ","
       << std::fixed << std::setprecision(4)
       << (r.n_tasksets > 0 ? static_cast<double>(r.n_ok) / r.n_tasksets : 0.0) << ","
       << r.seed_base;
    return os.str();
}

// Full sweep with per-point checkpointing: completed points land in
// "<out>.partial" and are skipped on resume; the final CSV is written in
// canonical (scheme, sweep order) order.
inline std::vector<CsvRow> run_experiment(const ExperimentSpec& spec,
                                          const std::string& out_path, int jobs,
                                          std::ostream* progress = nullptr) {
    std::vector<std::string> schemes =
        spec.schemes.empty() ? schemes_for(spec.chapter) : spec.schemes;
    for (const auto& s : schemes) {
        auto all = schemes_for(spec.chapter);
        if (std::find(all.begin(), all.end(), s) == all.end())
            throw config::ConfigError("unknown scheme '" + s + "' for chapter '" +
                                      spec.chapter + "'");
    }

    const std::string partial_path = out_path + ".partial";
    std::map<std::pair<std::string, std::int64_t>, CsvRow> done;
    if (std::filesystem::exists(partial_path)) {
        std::ifstream in(partial_path);
        std::string line;
        while (std::getline(in, line)) {
            std::istringstream ls(line);
            CsvRow r;
            char comma;
            if (std::getline(ls, r.scheme, ',') && ls >> r.sweep_value >> comma &&
                ls >> r.n_tasksets >> comma && ls >> r.n_ok >> comma && ls >> r.seed_base)
                done[{r.scheme, r.sweep_value}] = r;
        }
    }

    std::vector<CsvRow> rows;
    std::ofstream partial(partial_path, std::ios::app);
    for (const auto& scheme : schemes) {
        for (std::size_t si = 0; si < spec.sweep_values.size(); si++) {
            auto key = std::make_pair(scheme, spec.sweep_values[si]);
            auto it = done.find(key);
            CsvRow row;
            if (it != done.end() && it->second.n_tasksets == spec.n_tasksets &&
                it->second.seed_base == spec.seed) {
                row = it->second;
            } else {
                row = run_point(spec, scheme, si, jobs);
                partial << row.scheme << "," << row.sweep_value << "," << row.n_tasksets
                        << "," << row.n_ok << "," << row.seed_base << "\n";
                partial.flush();
            }
            if (progress) *progress << csv_line(row) << "\n";
            rows.push_back(std::move(row));
        }
    }
    std::ofstream out(out_path);
    if (!out) throw config::ConfigError("cannot write '" + out_path + "'");
    out << csv_header(spec.chapter) << "\n";
    for (const auto& r : rows) out << csv_line(r) << "\n";
    out.close();
    std::filesystem::remove(partial_path);
    return rows;
}

// --- Experiment file loading (presets named after the parameter tables). ---

inline void apply_preset(ExperimentSpec& spec, const std::string& preset) {
    if (preset == "table-5.2") {
        spec.chapter = "mem_alloc";
        spec.mem = expgen::MemAllocParams{};
        if (spec.sweep.empty()) {
            spec.sweep = "mem_ratio";
            spec.sweep_values = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
        }
    } else if (preset == "table-6.2") {
        spec.chapter = "virt_cache";
        spec.vcache = expgen::VirtCacheParams{};
        if (spec.sweep.empty()) {
            spec.sweep = "n_cache_host";
            spec.sweep_values = {16, 20, 24, 28, 32};
        }
    } else if (preset == "table-7.1") {
        spec.chapter = "vmpcp";
        spec.vmpcp_params = expgen::VmpcpParams{};
        if (spec.sweep.empty()) {
            spec.sweep = "vcpu_period_ms";
            spec.sweep_values = {5, 10, 20, 30, 40};
        }
    } else if (preset == "table-8.2") {
        spec.chapter = "vint";
        spec.vint_params = expgen::VintParams{};
        if (spec.sweep.empty()) {
            spec.sweep = "intr_range_us";
            spec.sweep_values = {5000};
        }
    } else if (preset == "table-9.1") {
        spec.chapter = "gpu";
        spec.gpu_params = expgen::GpuParams{};
        if (spec.sweep.empty()) {
            spec.sweep = "gpu_ratio_pct";
            spec.sweep_values = {0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
        }
    } else {
        throw config::ConfigError("unknown preset '" + preset + "'");
    }
}

inline ExperimentSpec load_experiment(std::istream& in, const std::string& where) {
    auto sections = config::parse_sections(in, where);
    const config::Section* es = nullptr;
    for (const auto& s : sections)
        if (s.kind == "experiment") es = &s;
    if (!es) throw config::ConfigError(where + ": missing [experiment] section");

    ExperimentSpec spec;
    if (auto sweep = es->get("sweep")) spec.sweep = *sweep;
    if (auto sv = es->get("sweep_values")) {
        spec.sweep_values.clear();
        for (const auto& tok : config::split_ws(*sv))
            spec.sweep_values.push_back(config::parse_int(tok, "sweep_values"));
    }
    if (auto preset = es->get("preset")) apply_preset(spec, *preset);
    if (auto chapter = es->get("chapter")) spec.chapter = *chapter;
    if (spec.chapter.empty())
        throw config::ConfigError(where + ": experiment needs a chapter or preset");
    (void)schemes_for(spec.chapter);  // validate the chapter name early
    if (auto n = es->get("n_tasksets"))
        spec.n_tasksets = static_cast<int>(config::parse_int(*n, "n_tasksets"));
    if (spec.n_tasksets < 1) throw config::ConfigError("n_tasksets must be >= 1");
    if (auto s = es->get("seed"))
        spec.seed = static_cast<std::uint64_t>(config::parse_int(*s, "seed"));
    if (auto sch = es->get("schemes")) spec.schemes = config::split_ws(*sch);
    if (spec.sweep_values.empty())
        throw config::ConfigError(where + ": sweep_values must be non-empty");

    // Chapter-specific overrides.
    auto dur = [&](const char* key, Duration& target) {
        if (auto v = es->get(key)) target = config::parse_duration(*v);
    };
    auto num = [&](const char* key, auto& target) {
        if (auto v = es->get(key))
            target = static_cast<std::decay_t<decltype(target)>>(
                config::parse_int(*v, key));
    };
    if (spec.chapter == "mem_alloc") {
        num("n_cores", spec.mem.n_cores);
        num("n_banks", spec.mem.n_banks);
        num("n_tasks", spec.mem.n_tasks);
        num("mem_ratio", spec.mem.intensive_out_of_10);
        num("n_cap", spec.mem.n_cap);
        num("h_intensive_lo", spec.mem.h_intensive_lo);
        num("h_intensive_hi", spec.mem.h_intensive_hi);
        num("h_normal_lo", spec.mem.h_normal_lo);
        num("h_normal_hi", spec.mem.h_normal_hi);
    } else if (spec.chapter == "virt_cache") {
        num("n_vms", spec.vcache.n_vms);
        num("vcpus_per_vm", spec.vcache.vcpus_per_vm);
        num("n_cache", spec.vcache.n_cache);
        dur("vcpu_period", spec.vcache.vcpu_period);
        dur("delta", spec.vcache.delta);
    } else if (spec.chapter == "vmpcp") {
        num("n_cores", spec.vmpcp_params.n_cores);
        num("vcpus_per_core", spec.vmpcp_params.vcpus_per_core);
        num("tasks_per_vcpu", spec.vmpcp_params.tasks_per_vcpu);
        num("lockers_per_mutex", spec.vmpcp_params.lockers_per_mutex);
        num("gcs_per_task", spec.vmpcp_params.gcs_per_task);
        dur("vcpu_period", spec.vmpcp_params.vcpu_period);
        dur("gcs_len", spec.vmpcp_params.gcs_len);
        dur("budget_step", spec.vmpcp_params.budget_step);
    } else if (spec.chapter == "vint") {
        num("n_pcpus", spec.vint_params.n_pcpus);
        num("vcpus_per_pcpu", spec.vint_params.vcpus_per_pcpu);
        num("phys_per_pcpu", spec.vint_params.phys_per_pcpu);
        num("virt_per_vcpu", spec.vint_params.virt_per_vcpu);
        dur("vcpu_period", spec.vint_params.vcpu_period);
        dur("intr_lo", spec.vint_params.intr_lo);
        dur("intr_hi", spec.vint_params.intr_hi);
        num("pseudo_ratio_milli", spec.vint_params.pseudo_period_ratio_milli);
        dur("budget_step", spec.vint_params.budget_step);
    } else if (spec.chapter == "gpu") {
        num("n_cores", spec.gpu_params.n_cores);
        num("tasks_per_core", spec.gpu_params.tasks_per_core);
        num("gpu_ratio_pct", spec.gpu_params.gpu_ratio_pct);
        dur("epsilon", spec.gpu_params.epsilon);
        dur("g_lo", spec.gpu_params.g_lo);
        dur("g_hi", spec.gpu_params.g_hi);
    }
    return spec;
}

inline ExperimentSpec load_experiment_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config::ConfigError("cannot open experiment file '" + path + "'");
    return load_experiment(in, path);
}

}  // namespace rtsched::exp
