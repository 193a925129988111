#pragma once

#include "rtsched/model.hpp"
#include "rtsched/priority.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace rtsched::config {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Line-based key/value file with [section] headers and '#' comments.
// Section headers are "[kind]" or "[kind name]"; keys keep declaration order.
struct Entry {
    std::string key;
    std::string value;
    int line;
};

struct Section {
    std::string kind;
    std::string name;
    int line;
    std::vector<Entry> entries;

    const Entry* find(const std::string& key) const {
        for (const auto& e : entries)
            if (e.key == key) return &e;
        return nullptr;
    }
    std::string require(const std::string& key) const {
        const Entry* e = find(key);
        if (!e)
            throw ConfigError("section [" + kind + (name.empty() ? "" : " " + name) +
                              "] (line " + std::to_string(line) + "): missing key '" +
                              key + "'");
        return e->value;
    }
    std::optional<std::string> get(const std::string& key) const {
        const Entry* e = find(key);
        return e ? std::optional<std::string>(e->value) : std::nullopt;
    }
};

inline std::string trim(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<Section> parse_sections(std::istream& in, const std::string& where) {
    std::vector<Section> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError(where + ":" + std::to_string(lineno) +
                                  ": malformed section header '" + t + "'");
            std::string inner = trim(t.substr(1, t.size() - 2));
            auto space = inner.find(' ');
            Section s;
            s.line = lineno;
            if (space == std::string::npos) {
                s.kind = inner;
            } else {
                s.kind = trim(inner.substr(0, space));
                s.name = trim(inner.substr(space + 1));
            }
            out.push_back(std::move(s));
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + t + "'");
        if (out.empty())
            throw ConfigError(where + ":" + std::to_string(lineno) +
                              ": key outside any section");
        Entry e;
        e.key = trim(t.substr(0, eq));
        e.value = trim(t.substr(eq + 1));
        e.line = lineno;
        if (e.key.empty())
            throw ConfigError(where + ":" + std::to_string(lineno) + ": empty key");
        out.back().entries.push_back(std::move(e));
    }
    return out;
}

// "12ms", "45.3us", "1.5ns", "10s", "1500ps"; decimal mantissas must land on
// an exact picosecond count.
inline Duration parse_duration(const std::string& text) {
    std::string s = trim(text);
    static const std::pair<const char*, std::int64_t> units[] = {
        {"ps", 1LL},         {"ns", 1'000LL},          {"us", 1'000'000LL},
        {"ms", 1'000'000'000LL}, {"s", 1'000'000'000'000LL},
    };
    for (const auto& [suffix, scale] : units) {
        std::string suf = suffix;
        if (s.size() > suf.size() && s.ends_with(suf)) {
            // "s" would also match "ms"/"us"/"ns"/"ps" tails; require the
            // char before the suffix to be a digit or dot.
            char before = s[s.size() - suf.size() - 1];
            if (!(std::isdigit(static_cast<unsigned char>(before)) || before == '.'))
                continue;
            std::string mant = trim(s.substr(0, s.size() - suf.size()));
            auto dot = mant.find('.');
            std::string whole = dot == std::string::npos ? mant : mant.substr(0, dot);
            std::string frac = dot == std::string::npos ? "" : mant.substr(dot + 1);
            if (whole.empty() && frac.empty())
                throw ConfigError("bad duration '" + text + "'");
            std::int64_t w = 0;
            if (!whole.empty()) {
                auto [p, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), w);
                if (ec != std::errc() || p != whole.data() + whole.size())
                    throw ConfigError("bad duration '" + text + "'");
            }
            Duration total = Duration::ps(w) * scale;
            if (!frac.empty()) {
                std::int64_t f = 0;
                auto [p, ec] = std::from_chars(frac.data(), frac.data() + frac.size(), f);
                if (ec != std::errc() || p != frac.data() + frac.size())
                    throw ConfigError("bad duration '" + text + "'");
                std::int64_t denom = 1;
                for (std::size_t i = 0; i < frac.size(); i++) denom *= 10;
                if ((f * scale) % denom != 0)
                    throw ConfigError("duration '" + text +
                                      "' is finer than one picosecond");
                total += Duration::ps(f * scale / denom);
            }
            return total;
        }
    }
    throw ConfigError("duration '" + text + "' needs a unit (ps/ns/us/ms/s)");
}

inline std::int64_t parse_int(const std::string& text, const std::string& what) {
    std::string s = trim(text);
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ConfigError("bad integer for " + what + ": '" + text + "'");
    return v;
}

inline bool parse_bool(const std::string& text, const std::string& what) {
    std::string s = trim(text);
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    throw ConfigError("bad boolean for " + what + ": '" + text + "'");
}

inline std::vector<std::string> split_ws(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

namespace detail {

inline DramTiming parse_dram(const Section& s) {
    if (auto preset = s.get("preset")) {
        if (*preset == "ddr3-1333") return ddr3_1333();
        throw ConfigError("unknown dram preset '" + *preset + "'");
    }
    DramTiming d;
    d.t_ck = parse_duration(s.require("t_ck"));
    d.t_rp = parse_int(s.require("t_rp"), "t_rp");
    d.t_rcd = parse_int(s.require("t_rcd"), "t_rcd");
    d.cl = parse_int(s.require("cl"), "cl");
    d.wl = parse_int(s.require("wl"), "wl");
    d.bl = parse_int(s.require("bl"), "bl");
    d.t_wtr = parse_int(s.require("t_wtr"), "t_wtr");
    d.t_wr = parse_int(s.require("t_wr"), "t_wr");
    d.t_rrd = parse_int(s.require("t_rrd"), "t_rrd");
    d.t_faw = parse_int(s.require("t_faw"), "t_faw");
    d.t_ras = parse_int(s.require("t_ras"), "t_ras");
    d.t_rc = parse_int(s.require("t_rc"), "t_rc");
    d.t_rtp = parse_int(s.require("t_rtp"), "t_rtp");
    d.t_rtrs = parse_int(s.require("t_rtrs"), "t_rtrs");
    d.n_cols = parse_int(s.require("n_cols"), "n_cols");
    if (auto v = s.get("t_rfc")) d.t_rfc = parse_duration(*v);
    if (auto v = s.get("t_refi")) d.t_refi = parse_duration(*v);
    return d;
}

inline std::vector<Segment> parse_segments(const std::string& text) {
    // "n:1ms g0:0.1ms l2:5us n:1ms" -- kind[resource]:length
    std::vector<Segment> out;
    for (const auto& tok : split_ws(text)) {
        auto colon = tok.find(':');
        if (colon == std::string::npos)
            throw ConfigError("bad segment '" + tok + "' (want kind:length)");
        std::string head = tok.substr(0, colon);
        Segment seg;
        seg.length = parse_duration(tok.substr(colon + 1));
        if (head == "n") {
            seg.kind = SegmentKind::Normal;
        } else if (head.size() >= 2 && (head[0] == 'g' || head[0] == 'l')) {
            seg.kind = head[0] == 'g' ? SegmentKind::Gcs : SegmentKind::Lcs;
            seg.resource_id =
                static_cast<int>(parse_int(head.substr(1), "segment resource"));
        } else {
            throw ConfigError("bad segment kind '" + head + "' (want n, g<id>, l<id>)");
        }
        out.push_back(seg);
    }
    return out;
}

inline std::vector<GpuSegment> parse_gpu_segments(const std::string& text) {
    // "3ms/2.5ms/0.4ms" -- total/exec/misc per segment
    std::vector<GpuSegment> out;
    for (const auto& tok : split_ws(text)) {
        auto a = tok.find('/');
        auto b = tok.rfind('/');
        if (a == std::string::npos || b == a)
            throw ConfigError("bad gpu segment '" + tok + "' (want total/exec/misc)");
        GpuSegment g;
        g.total = parse_duration(tok.substr(0, a));
        g.exec = parse_duration(tok.substr(a + 1, b - a - 1));
        g.misc = parse_duration(tok.substr(b + 1));
        out.push_back(g);
    }
    return out;
}

template <typename V, typename Parse>
Curve<V> parse_curve(const std::string& text, Parse&& parse) {
    std::vector<V> vals;
    for (const auto& tok : split_ws(text)) vals.push_back(parse(tok));
    if (vals.empty()) throw ConfigError("empty curve");
    return Curve<V>(vals);
}

}  // namespace detail

// Loads a full system configuration. Field names mirror the model types;
// tasks, vcpus and interrupts are referenced by their section names.
inline SystemConfig load_system(std::istream& in, const std::string& where) {
    auto sections = parse_sections(in, where);
    SystemConfig sys;
    std::map<std::string, int> task_ids, vcpu_ids, intr_ids;

    // First pass: assign ids in declaration order so references resolve.
    for (const auto& s : sections) {
        if (s.kind == "task") {
            if (s.name.empty()) throw ConfigError("task section needs a name");
            if (!task_ids.emplace(s.name, static_cast<int>(task_ids.size())).second)
                throw ConfigError("duplicate task '" + s.name + "'");
        } else if (s.kind == "vcpu") {
            if (s.name.empty()) throw ConfigError("vcpu section needs a name");
            if (!vcpu_ids.emplace(s.name, static_cast<int>(vcpu_ids.size())).second)
                throw ConfigError("duplicate vcpu '" + s.name + "'");
        } else if (s.kind == "interrupt") {
            if (s.name.empty()) throw ConfigError("interrupt section needs a name");
            if (!intr_ids.emplace(s.name, static_cast<int>(intr_ids.size())).second)
                throw ConfigError("duplicate interrupt '" + s.name + "'");
        }
    }
    auto task_ref = [&](const std::string& n) {
        auto it = task_ids.find(n);
        if (it == task_ids.end()) throw ConfigError("unknown task '" + n + "'");
        return it->second;
    };
    auto vcpu_ref = [&](const std::string& n) {
        auto it = vcpu_ids.find(n);
        if (it == vcpu_ids.end()) throw ConfigError("unknown vcpu '" + n + "'");
        return it->second;
    };
    auto intr_ref = [&](const std::string& n) {
        auto it = intr_ids.find(n);
        if (it == intr_ids.end()) throw ConfigError("unknown interrupt '" + n + "'");
        return it->second;
    };

    for (const auto& s : sections) {
        if (s.kind == "platform") {
            auto& pf = sys.platform;
            if (auto v = s.get("n_cores")) pf.n_cores = (int)parse_int(*v, "n_cores");
            if (auto v = s.get("n_cache")) pf.n_cache = (int)parse_int(*v, "n_cache");
            if (auto v = s.get("n_banks")) pf.n_banks = (int)parse_int(*v, "n_banks");
            if (auto v = s.get("mem_total_mb"))
                pf.mem_total_mb = parse_int(*v, "mem_total_mb");
            if (auto v = s.get("delta")) pf.constants.delta = parse_duration(*v);
            if (auto v = s.get("delta_requests"))
                pf.constants.delta_requests = parse_int(*v, "delta_requests");
            if (auto v = s.get("n_cap")) pf.constants.n_cap = parse_int(*v, "n_cap");
            if (auto v = s.get("epsilon")) pf.constants.epsilon = parse_duration(*v);
            if (auto v = s.get("iteration_cap"))
                pf.constants.iteration_cap =
                    static_cast<std::uint64_t>(parse_int(*v, "iteration_cap"));
            if (auto v = s.get("model_refresh"))
                pf.constants.model_refresh = parse_bool(*v, "model_refresh");
        } else if (s.kind == "dram") {
            sys.platform.dram = detail::parse_dram(s);
        } else if (s.kind == "task") {
            Task t;
            t.id = task_ref(s.name);
            t.name = s.name;
            t.period = parse_duration(s.require("period"));
            t.deadline = s.get("deadline") ? parse_duration(*s.get("deadline"))
                                           : t.period;
            if (auto v = s.get("wcet_curve"))
                t.wcet = detail::parse_curve<Duration>(
                    *v, [](const std::string& x) { return parse_duration(x); });
            else
                t.wcet = WcetCurve(parse_duration(s.require("wcet")));
            if (auto v = s.get("mem_mb")) t.mem_mb = parse_int(*v, "mem_mb");
            if (auto v = s.get("dram_requests_curve"))
                t.dram_requests = detail::parse_curve<std::int64_t>(
                    *v, [](const std::string& x) { return parse_int(x, "dram_requests"); });
            else if (auto v2 = s.get("dram_requests"))
                t.dram_requests =
                    Curve<std::int64_t>(parse_int(*v2, "dram_requests"));
            if (auto v = s.get("priority")) t.priority = (int)parse_int(*v, "priority");
            if (auto v = s.get("crit_sections"))
                t.crit_sections = detail::parse_segments(*v);
            if (auto v = s.get("gpu_segments"))
                t.gpu_segments = detail::parse_gpu_segments(*v);
            sys.tasks.push_back(std::move(t));
        } else if (s.kind == "vm") {
            Vm vm;
            vm.id = static_cast<int>(sys.vms.size());
            vm.name = s.name;
            if (auto v = s.get("vcpus"))
                for (const auto& n : split_ws(*v)) vm.vcpu_ids.push_back(vcpu_ref(n));
            sys.vms.push_back(std::move(vm));
        } else if (s.kind == "vcpu") {
            Vcpu v;
            v.id = vcpu_ref(s.name);
            v.name = s.name;
            v.period = parse_duration(s.require("period"));
            if (auto b = s.get("budget_curve"))
                v.budget = detail::parse_curve<Duration>(
                    *b, [](const std::string& x) { return parse_duration(x); });
            else
                v.budget = WcetCurve(parse_duration(s.require("budget")));
            std::string policy = s.get("policy").value_or("periodic");
            if (policy == "periodic")
                v.policy = ServerPolicy::Periodic;
            else if (policy == "deferrable")
                v.policy = ServerPolicy::Deferrable;
            else if (policy == "sporadic")
                v.policy = ServerPolicy::Sporadic;
            else
                throw ConfigError("unknown policy '" + policy + "'");
            if (auto p = s.get("priority")) v.priority = (int)parse_int(*p, "priority");
            v.pcpu = (int)parse_int(s.require("pcpu"), "pcpu");
            if (auto t = s.get("tasks"))
                for (const auto& n : split_ws(*t)) v.task_ids.push_back(task_ref(n));
            if (auto cs = s.get("cache_set"))
                for (const auto& n : split_ws(*cs))
                    v.cache_set.insert((int)parse_int(n, "cache_set"));
            if (s.get("kind").value_or("regular") == "pseudo") v.kind = VcpuKind::Pseudo;
            if (auto pf = s.get("pseudo_for")) v.pseudo_for_interrupt = intr_ref(*pf);
            if (auto ov = s.get("original_vcpu")) v.original_vcpu = vcpu_ref(*ov);
            sys.vcpus.push_back(std::move(v));
        } else if (s.kind == "interrupt") {
            InterruptSource is;
            is.id = intr_ref(s.name);
            is.name = s.name;
            std::string kind = s.require("kind");
            if (kind == "physical")
                is.kind = InterruptKind::Physical;
            else if (kind == "virtual")
                is.kind = InterruptKind::Virtual;
            else
                throw ConfigError("unknown interrupt kind '" + kind + "'");
            is.isr_wcet = parse_duration(s.require("isr_wcet"));
            is.min_interarrival = parse_duration(s.require("min_interarrival"));
            if (auto p = s.get("priority")) is.priority = (int)parse_int(*p, "priority");
            if (auto p = s.get("pcpu")) is.pcpu = (int)parse_int(*p, "pcpu");
            if (auto v = s.get("vcpu")) is.vcpu = vcpu_ref(*v);
            if (auto d = s.get("dsr_tasks"))
                for (const auto& n : split_ws(*d)) is.dsr_task_ids.push_back(task_ref(n));
            if (auto m = s.get("managed_by_vint"))
                is.managed_by_vint = parse_bool(*m, "managed_by_vint");
            if (auto p = s.get("pseudo_vcpu")) is.pseudo_vcpu = vcpu_ref(*p);
            if (auto p = s.get("source_physical")) is.source_physical = intr_ref(*p);
            if (auto p = s.get("source_ipi")) is.source_ipi = intr_ref(*p);
            sys.interrupts.push_back(std::move(is));
        } else if (s.kind == "allocation") {
            for (const auto& e : s.entries) {
                if (e.key == "gpu_server_core") {
                    sys.gpu_server_core = (int)parse_int(e.value, e.key);
                    continue;
                }
                auto dot = e.key.find('.');
                if (dot == std::string::npos)
                    throw ConfigError(where + ":" + std::to_string(e.line) +
                                      ": allocation key '" + e.key +
                                      "' (want <task>.core, <task>.cache, "
                                      "core<N>.banks or gpu_server_core)");
                std::string head = e.key.substr(0, dot);
                std::string attr = e.key.substr(dot + 1);
                if (attr == "core") {
                    sys.task_core[task_ref(head)] = (int)parse_int(e.value, e.key);
                } else if (attr == "cache") {
                    std::set<int> parts;
                    for (const auto& n : split_ws(e.value))
                        parts.insert((int)parse_int(n, e.key));
                    sys.task_partitions[task_ref(head)] = std::move(parts);
                } else if (attr == "banks") {
                    if (head.rfind("core", 0) != 0)
                        throw ConfigError(where + ":" + std::to_string(e.line) +
                                          ": bank allocation key must look like "
                                          "core<N>.banks");
                    int core = (int)parse_int(head.substr(4), e.key);
                    std::set<int> banks;
                    for (const auto& n : split_ws(e.value))
                        banks.insert((int)parse_int(n, e.key));
                    sys.core_banks[core] = std::move(banks);
                } else {
                    throw ConfigError(where + ":" + std::to_string(e.line) +
                                      ": unknown allocation attribute '" + attr + "'");
                }
            }
        } else if (s.kind == "experiment") {
            // handled by the experiment loader
        } else {
            throw ConfigError(where + ":" + std::to_string(s.line) +
                              ": unknown section kind '" + s.kind + "'");
        }
    }

    // Default priorities where unset: rate-monotonic per scheduling domain.
    auto needs_priorities = [](const std::vector<const Task*>& group) {
        return std::all_of(group.begin(), group.end(),
                           [](const Task* t) { return t->priority == 0; });
    };
    std::map<int, std::vector<const Task*>> domains;
    for (const auto& [tid, core] : sys.task_core)
        domains[core].push_back(&sys.task(tid));
    for (const auto& v : sys.vcpus)
        for (int tid : v.task_ids) domains[1000 + v.id].push_back(&sys.task(tid));
    for (auto& [dom, group] : domains) {
        (void)dom;
        if (group.size() < 1 || !needs_priorities(group)) continue;
        std::vector<std::pair<int, Duration>> ip;
        for (const Task* t : group) ip.emplace_back(t->id, t->period);
        auto prios = assign_rms_priorities(ip);
        for (auto& t : sys.tasks)
            if (prios.count(t.id)) t.priority = prios[t.id];
    }
    return sys;
}

inline SystemConfig load_system_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return load_system(in, path);
}

}  // namespace rtsched::config
