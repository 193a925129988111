#pragma once

#include "rtsched/cache.hpp"
#include "rtsched/dram.hpp"
#include "rtsched/gpu.hpp"
#include "rtsched/hier.hpp"
#include "rtsched/memory.hpp"
#include "rtsched/validate.hpp"
#include "rtsched/vint.hpp"
#include "rtsched/vmpcp.hpp"

#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace rtsched::report {

struct Row {
    std::string analysis;
    std::string subject;
    std::optional<Duration> wcrt;  // empty for verdict-only rows
    bool ok = false;
    std::string detail;
};

struct AnalysisReport {
    std::vector<Violation> violations;
    std::vector<Row> rows;
    bool all_ok = true;

    void add(Row r) {
        all_ok = all_ok && r.ok;
        rows.push_back(std::move(r));
    }
};

namespace detail {

inline std::string fmt_ms(Duration d) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << d.as_ms() << "ms";
    return os.str();
}

inline mem::MemView mem_view(const SystemConfig& sys) {
    mem::MemView v;
    v.core_tasks.assign(static_cast<std::size_t>(sys.platform.n_cores), {});
    v.core_banks.assign(static_cast<std::size_t>(sys.platform.n_cores), {});
    for (const auto& [tid, core] : sys.task_core)
        v.core_tasks[static_cast<std::size_t>(core - 1)].push_back(sys.task(tid));
    for (int p = 1; p <= sys.platform.n_cores; p++)
        v.core_banks[static_cast<std::size_t>(p - 1)] = sys.banks_of_core(p);
    v.terms = dram::latency_terms(sys.platform.dram, sys.platform.constants);
    v.iteration_cap = sys.platform.constants.iteration_cap;
    v.delta_requests = sys.platform.constants.delta_requests;
    v.task_parts = sys.task_partitions;
    return v;
}

inline bool has_banks(const SystemConfig& sys) { return !sys.core_banks.empty(); }
inline bool has_parts(const SystemConfig& sys) { return !sys.task_partitions.empty(); }
inline bool has_requests(const SystemConfig& sys) {
    return std::any_of(sys.tasks.begin(), sys.tasks.end(),
                       [](const Task& t) { return !t.dram_requests.empty(); });
}
inline bool has_gcs(const SystemConfig& sys) {
    return std::any_of(sys.tasks.begin(), sys.tasks.end(),
                       [](const Task& t) { return t.has_gcs(); });
}
inline bool has_gpu(const SystemConfig& sys) {
    return std::any_of(sys.tasks.begin(), sys.tasks.end(),
                       [](const Task& t) { return !t.gpu_segments.empty(); });
}

inline void run_cache(const SystemConfig& sys, AnalysisReport& rep) {
    for (int core = 1; core <= sys.platform.n_cores; core++) {
        cache::CoreAlloc a;
        for (const Task* t : sys.tasks_on_core(core)) a.tasks.push_back(*t);
        if (a.tasks.empty()) continue;
        for (const auto& t : a.tasks) a.parts[t.id] = sys.partitions_of(t.id);
        a.delta = sys.platform.constants.delta;
        a.iteration_cap = sys.platform.constants.iteration_cap;
        for (const auto& t : a.tasks) {
            auto w = cache::response_time(a, t.id);
            Row r;
            r.analysis = "cache";
            r.subject = t.name;
            r.ok = w.schedulable();
            r.wcrt = w.value;
            const Task& lowest = a.lowest_priority_task();
            std::ostringstream det;
            det << "core=" << core
                << " warmup=" << fmt_ms(cache::warmup_delay(a, t.id, lowest.id));
            r.detail = det.str();
            rep.add(std::move(r));
        }
        Row util;
        util.analysis = "cache";
        util.subject = "core" + std::to_string(core);
        util.ok = cache::core_utilization(a) <= Rational(1);
        util.detail = "utilization=" + std::to_string(to_double(cache::core_utilization(a)));
        rep.add(std::move(util));
    }
    if (sys.platform.mem_total_mb > 0) {
        auto verdicts = cache::copart_feasible(sys.tasks, sys.task_partitions,
                                               sys.platform.mem_total_mb,
                                               sys.platform.n_cache);
        for (const auto& v : verdicts) {
            Row r;
            r.analysis = "mem-copart";
            r.subject = "partition" + std::to_string(v.partition);
            r.ok = v.feasible;
            r.detail = "load_mb=" + std::to_string(to_double(v.load_mb));
            rep.add(std::move(r));
        }
    }
}

inline void run_memory(const SystemConfig& sys, AnalysisReport& rep) {
    auto v = mem_view(sys);
    bool combined = sys.platform.constants.delta_requests > 0 && has_parts(sys);
    for (int p = 0; p < v.n_cores(); p++) {
        Duration rd = mem::request_driven_delay(v, p).total();
        for (const auto& t : v.core_tasks[static_cast<std::size_t>(p)]) {
            {
                auto w = mem::response_time_memory(v, p, t.id);
                Row r;
                r.analysis = "memory";
                r.subject = t.name;
                r.ok = w.schedulable();
                r.wcrt = w.value;
                r.detail = "core=" + std::to_string(p + 1) +
                           " per_request=" + std::to_string(rd.count()) + "ps";
                // Optional refresh-command sensitivity estimate on top of
                // the interference charged within the response time.
                if (sys.platform.constants.model_refresh && w.schedulable()) {
                    Duration interference = w.get() - v.wcet(t);
                    Duration er =
                        dram::refresh_overhead(interference, sys.platform.dram);
                    r.detail += " refresh_est=+" + fmt_ms(er);
                }
                rep.add(std::move(r));
            }
            if (combined) {
                auto w = mem::response_time_cache_memory(v, p, t.id);
                Row r;
                r.analysis = "cache+memory";
                r.subject = t.name;
                r.ok = w.schedulable();
                r.wcrt = w.value;
                rep.add(std::move(r));
            }
        }
    }
}

inline void run_hier(const SystemConfig& sys, AnalysisReport& rep) {
    for (const auto& v : sys.vcpus) {
        std::vector<Vcpu> peers;
        for (const Vcpu* pv : sys.vcpus_on_pcpu(v.pcpu)) peers.push_back(*pv);
        auto w = hier::vcpu_response_time(v, peers, sys.platform.constants.iteration_cap);
        Row r;
        r.analysis = "hier";
        r.subject = v.name;
        r.ok = w.schedulable();
        r.wcrt = w.value;
        r.detail = "pcpu=" + std::to_string(v.pcpu);
        rep.add(std::move(r));
    }
    for (const auto& v : sys.vcpus) {
        if (v.task_ids.empty()) continue;
        hier::VcpuTaskView view;
        for (const Task* t : sys.tasks_on_vcpu(v.id)) view.tasks.push_back(*t);
        for (const auto& t : view.tasks) view.parts[t.id] = sys.partitions_of(t.id);
        view.delta = sys.platform.constants.delta;
        view.budget = v.budget_value();
        view.period = v.period;
        view.iteration_cap = sys.platform.constants.iteration_cap;
        for (const auto& t : view.tasks) {
            auto w = hier::task_response_time(view, t.id);
            Row r;
            r.analysis = "hier";
            r.subject = t.name;
            r.ok = w.schedulable();
            r.wcrt = w.value;
            r.detail = "vcpu=" + v.name;
            rep.add(std::move(r));
        }
    }
}

inline void run_vmpcp(const SystemConfig& sys, AnalysisReport& rep) {
    vmpcp::System vs;
    vs.vcpus = sys.vcpus;
    vs.tasks = sys.tasks;
    vs.iteration_cap = sys.platform.constants.iteration_cap;
    bool deferrable = !sys.vcpus.empty() &&
                      sys.vcpus.front().policy == ServerPolicy::Deferrable;
    std::vector<vmpcp::Mode> modes =
        deferrable ? std::vector<vmpcp::Mode>{vmpcp::Mode::DSwO, vmpcp::Mode::DSnO}
                   : std::vector<vmpcp::Mode>{vmpcp::Mode::PSwO, vmpcp::Mode::PSnO};
    for (auto mode : modes) {
        vs.mode = mode;
        std::string tag = std::string("vmpcp/") + vmpcp::mode_name(mode);
        for (const auto& v : vs.vcpus) {
            auto w = vmpcp::vcpu_response_time(vs, v);
            Row r;
            r.analysis = tag;
            r.subject = v.name;
            r.ok = w.schedulable();
            r.wcrt = w.value;
            rep.add(std::move(r));
        }
        for (const auto& v : vs.vcpus) {
            auto ws = vmpcp::vcpu_task_response_times(vs, v);
            for (const auto& [tid, w] : ws) {
                const Task& t = vs.task(tid);
                Row r;
                r.analysis = tag;
                r.subject = t.name;
                r.ok = w.schedulable();
                r.wcrt = w.value;
                std::ostringstream det;
                det << "Bl=" << fmt_ms(vmpcp::local_blocking(vs, t));
                auto br = vmpcp::remote_blocking(vs, t, t.deadline);
                det << " Br=" << (br ? fmt_ms(*br) : std::string("unbounded"));
                r.detail = det.str();
                rep.add(std::move(r));
            }
        }
    }
}

inline void run_vint(const SystemConfig& sys, AnalysisReport& rep) {
    vint::System vs;
    vs.vcpus = sys.vcpus;
    vs.tasks = sys.tasks;
    vs.interrupts = sys.interrupts;
    vs.iteration_cap = sys.platform.constants.iteration_cap;
    for (const auto& v : vs.vcpus) {
        if (v.kind != VcpuKind::Regular) continue;
        auto w = vint::vcpu_response_time(vs, v);
        Row r;
        r.analysis = "vint";
        r.subject = v.name;
        r.ok = w.schedulable();
        r.wcrt = w.value;
        rep.add(std::move(r));
    }
    for (const auto& v : vs.vcpus) {
        if (v.kind != VcpuKind::Regular) continue;
        for (int tid : v.task_ids) {
            const Task& t = vs.task(tid);
            if (vs.pseudo_of_task(tid) != nullptr) continue;  // billed elsewhere
            auto w = vint::task_response_time(vs, t);
            Row r;
            r.analysis = "vint";
            r.subject = t.name;
            r.ok = w.schedulable();
            r.wcrt = w.value;
            rep.add(std::move(r));
        }
    }
    for (const auto& s : vs.interrupts) {
        if (s.kind != InterruptKind::Physical) continue;
        auto w = vint::physical_isr_response_time(vs, s);
        Row r;
        r.analysis = "vint";
        r.subject = s.name;
        r.ok = w.schedulable();
        r.wcrt = w.value;
        rep.add(std::move(r));
    }
    for (const auto& s : vs.interrupts) {
        if (s.kind != InterruptKind::Virtual || s.source_physical < 0) continue;
        const InterruptSource* ipi =
            s.source_ipi >= 0 ? &vs.interrupt(s.source_ipi) : nullptr;
        bool use_vint = s.managed_by_vint && s.pseudo_vcpu >= 0;
        auto fv = vint::flow_serviceable(vs, vs.interrupt(s.source_physical), s, ipi,
                                         use_vint);
        Row r;
        r.analysis = "vint-flow";
        r.subject = s.name;
        r.ok = fv.serviceable;
        r.wcrt = fv.total;
        r.detail = use_vint ? "managed" : "unmanaged";
        rep.add(std::move(r));
    }
}

inline void run_gpu(const SystemConfig& sys, AnalysisReport& rep) {
    gpu::System gs;
    gs.core_tasks.assign(static_cast<std::size_t>(sys.platform.n_cores), {});
    for (const auto& [tid, core] : sys.task_core)
        gs.core_tasks[static_cast<std::size_t>(core - 1)].push_back(sys.task(tid));
    gs.epsilon = sys.platform.constants.epsilon;
    gs.iteration_cap = sys.platform.constants.iteration_cap;
    if (sys.gpu_server_core) gs.server_core = *sys.gpu_server_core - 1;

    for (int p = 0; p < gs.n_cores(); p++) {
        auto ws = gpu::core_response_times(gs, p, [&](const Task& t, const auto& done) {
            return gpu::response_time_sync(gs, t, done);
        });
        for (const auto& [tid, w] : ws) {
            Row r;
            r.analysis = "gpu/sync";
            for (const auto& t : gs.core_tasks[static_cast<std::size_t>(p)])
                if (t.id == tid) r.subject = t.name;
            r.ok = w.schedulable();
            r.wcrt = w.value;
            rep.add(std::move(r));
        }
    }
    if (gs.server_core) {
        for (int p = 0; p < gs.n_cores(); p++) {
            auto ws =
                gpu::core_response_times(gs, p, [&](const Task& t, const auto& done) {
                    return gpu::response_time_server(gs, t, done);
                });
            for (const auto& [tid, w] : ws) {
                Row r;
                r.analysis = "gpu/server";
                for (const auto& t : gs.core_tasks[static_cast<std::size_t>(p)])
                    if (t.id == tid) r.subject = t.name;
                r.ok = w.schedulable();
                r.wcrt = w.value;
                rep.add(std::move(r));
            }
        }
    }
}

}  // namespace detail

// Runs every analysis the configuration supports.
inline AnalysisReport analyze(const SystemConfig& sys) {
    AnalysisReport rep;
    rep.violations = validate(sys);
    if (!rep.violations.empty()) {
        rep.all_ok = false;
        return rep;
    }
    bool native = !sys.task_core.empty();
    if (native && detail::has_parts(sys)) detail::run_cache(sys, rep);
    if (native && detail::has_banks(sys) && detail::has_requests(sys))
        detail::run_memory(sys, rep);
    if (!sys.vcpus.empty() && sys.interrupts.empty() && !detail::has_gcs(sys))
        detail::run_hier(sys, rep);
    if (!sys.vcpus.empty() && detail::has_gcs(sys)) detail::run_vmpcp(sys, rep);
    if (!sys.interrupts.empty()) detail::run_vint(sys, rep);
    if (native && detail::has_gpu(sys)) detail::run_gpu(sys, rep);
    return rep;
}

inline std::string format_text(const AnalysisReport& rep) {
    std::ostringstream os;
    if (!rep.violations.empty()) {
        os << "configuration invalid:\n";
        for (const auto& v : rep.violations)
            os << "  " << violation_name(v.code) << " " << v.subject << ": " << v.detail
               << "\n";
        return os.str();
    }
    os << std::left << std::setw(14) << "analysis" << std::setw(14) << "subject"
       << std::setw(14) << "wcrt" << std::setw(8) << "verdict"
       << "detail\n";
    for (const auto& r : rep.rows) {
        os << std::left << std::setw(14) << r.analysis << std::setw(14) << r.subject
           << std::setw(14) << (r.wcrt ? detail::fmt_ms(*r.wcrt) : std::string("-"))
           << std::setw(8) << (r.ok ? "ok" : "FAIL") << r.detail << "\n";
    }
    os << (rep.all_ok ? "schedulable" : "NOT schedulable") << " (" << rep.rows.size()
       << " rows)\n";
    return os.str();
}

inline std::string format_csv(const AnalysisReport& rep) {
    std::ostringstream os;
    os << "analysis,subject,wcrt_ms,verdict,detail\n";
    for (const auto& r : rep.rows) {
        std::ostringstream w;
        if (r.wcrt) w << std::fixed << std::setprecision(6) << r.wcrt->as_ms();
        os << r.analysis << "," << r.subject << "," << w.str() << ","
           << (r.ok ? "ok" : "fail") << "," << r.detail << "\n";
    }
    return os.str();
}

}  // namespace rtsched::report
