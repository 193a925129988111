#pragma once

#include "rtsched/memory.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace rtsched::memalloc {

// Complete undirected graph over a taskset; edge weights are the mutual
// CPU-utilization penalty of running the two tasks on two cores that share
// one bank partition.
struct InterferenceGraph {
    std::map<std::pair<int, int>, Rational> edges;

    static std::pair<int, int> key(int a, int b) {
        return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    }
    Rational weight(int a, int b) const {
        if (a == b) return Rational(0);
        auto it = edges.find(key(a, b));
        return it == edges.end() ? Rational(0) : it->second;
    }
};

// Response time of a task running alone on a core, against one other core
// holding the paired task, both cores on one bank. Unbounded deadlines: the
// request-driven branch always caps the fixed point.
inline Duration pairwise_response_time(const Task& a, const Task& b,
                                       const dram::LatencyTerms& terms,
                                       std::uint64_t iteration_cap) {
    mem::MemView v;
    v.core_tasks = {{a}, {b}};
    v.core_banks = {{1}, {1}};
    v.terms = terms;
    v.iteration_cap = iteration_cap;
    Task ua = a;
    ua.deadline = Duration::ps(std::numeric_limits<std::int64_t>::max() / 4);
    v.core_tasks[0][0] = ua;
    auto w = mem::response_time_memory(v, 0, a.id);
    return w.get();
}

inline InterferenceGraph build_interference_graph(const std::vector<Task>& tasks,
                                                  const dram::LatencyTerms& terms,
                                                  std::uint64_t iteration_cap) {
    InterferenceGraph g;
    for (std::size_t i = 0; i < tasks.size(); i++) {
        for (std::size_t j = i + 1; j < tasks.size(); j++) {
            Duration wi = pairwise_response_time(tasks[i], tasks[j], terms, iteration_cap);
            Duration wj = pairwise_response_time(tasks[j], tasks[i], terms, iteration_cap);
            Rational w = ratio(wi - tasks[i].wcet_at(1), tasks[i].period) +
                         ratio(wj - tasks[j].wcet_at(1), tasks[j].period);
            g.edges[InterferenceGraph::key(tasks[i].id, tasks[j].id)] = w;
        }
    }
    return g;
}

using Bundle = std::vector<Task>;

inline Rational bundle_util(const Bundle& b) {
    Rational u(0);
    for (const auto& t : b) u += ratio(t.wcet_at(1), t.period);
    return u;
}

// Allocation state: open cores, their tasksets and single bank partitions.
struct AllocState {
    std::vector<Bundle> core_tasks;
    std::vector<int> core_bank;  // one bank partition per core
    dram::LatencyTerms terms;
    std::uint64_t iteration_cap = 1'000'000;

    mem::MemView view() const {
        mem::MemView v;
        v.terms = terms;
        v.iteration_cap = iteration_cap;
        for (std::size_t p = 0; p < core_tasks.size(); p++) {
            v.core_tasks.push_back(core_tasks[p]);
            v.core_banks.push_back({core_bank[p]});
        }
        return v;
    }
    bool core_schedulable(int p) const { return mem::core_schedulable_memory(view(), p); }
    Rational core_util(int p) const { return bundle_util(core_tasks[static_cast<std::size_t>(p)]); }
    int n_cores() const { return static_cast<int>(core_tasks.size()); }
};

// Bank partition for a newly opened core: an unused bank while any remain,
// otherwise the bank of the core least entangled with the unallocated tasks.
inline int least_interfering_bank(int n_bank, const AllocState& st,
                                  const InterferenceGraph& g, const Bundle& unallocated) {
    if (st.n_cores() < n_bank) {
        std::set<int> used(st.core_bank.begin(), st.core_bank.end());
        for (int b = 1; b <= n_bank; b++)
            if (!used.count(b)) return b;
    }
    int best_core = 0;
    Rational best_w;
    bool have = false;
    for (int p = 0; p < st.n_cores(); p++) {
        Rational w(0);
        for (const auto& tj : st.core_tasks[static_cast<std::size_t>(p)])
            for (const auto& tk : unallocated) w += g.weight(tj.id, tk.id);
        if (!have || w < best_w) {
            best_w = w;
            best_core = p;
            have = true;
        }
    }
    return st.core_bank[static_cast<std::size_t>(best_core)];
}

// Best-fit: scan cores fullest-first and take the first one that stays
// schedulable with the bundle inserted. Returns -1 when nothing fits.
inline int best_fit(const Bundle& bundle, AllocState& st) {
    std::vector<int> order(static_cast<std::size_t>(st.n_cores()));
    for (int p = 0; p < st.n_cores(); p++) order[static_cast<std::size_t>(p)] = p;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return st.core_util(b) < st.core_util(a); });
    for (int p : order) {
        auto& core = st.core_tasks[static_cast<std::size_t>(p)];
        auto saved = core;
        core.insert(core.end(), bundle.begin(), bundle.end());
        if (st.core_schedulable(p)) return p;
        core = std::move(saved);
    }
    return -1;
}

// Strip tasks, least-entangled first, until the core is schedulable again.
// Already-schedulable cores yield an empty bundle.
inline Bundle remove_excess(int p, AllocState& st, const InterferenceGraph& g) {
    Bundle removed;
    auto& core = st.core_tasks[static_cast<std::size_t>(p)];
    while (!core.empty() && !st.core_schedulable(p)) {
        std::size_t victim = 0;
        Rational victim_w;
        bool have = false;
        for (std::size_t i = 0; i < core.size(); i++) {
            Rational w(0);
            for (std::size_t j = 0; j < core.size(); j++)
                if (j != i) w += g.weight(core[i].id, core[j].id);
            bool better = !have || w < victim_w ||
                          (w == victim_w && core[i].id < core[victim].id);
            if (better) {
                victim = i;
                victim_w = w;
                have = true;
            }
        }
        removed.push_back(core[victim]);
        core.erase(core.begin() + static_cast<std::ptrdiff_t>(victim));
    }
    std::sort(removed.begin(), removed.end(),
              [](const Task& a, const Task& b) { return a.id < b.id; });
    return removed;
}

// Split a bundle in two: seed the first sub-bundle with the highest-utilization
// task, then greedily pull over the most-entangled tasks while the first
// sub-bundle stays within max_util and the second keeps at least one task.
inline std::pair<Bundle, Bundle> extract_min_cut(const Bundle& bundle, Rational max_util,
                                                 const InterferenceGraph& g) {
    if (bundle.size() < 2) throw DomainError("extract_min_cut needs >= 2 tasks");
    std::size_t seed = 0;
    for (std::size_t i = 1; i < bundle.size(); i++) {
        Rational ui = ratio(bundle[i].wcet_at(1), bundle[i].period);
        Rational us = ratio(bundle[seed].wcet_at(1), bundle[seed].period);
        if (us < ui || (ui == us && bundle[i].id < bundle[seed].id)) seed = i;
    }
    Bundle first{bundle[seed]};
    Bundle second;
    for (std::size_t i = 0; i < bundle.size(); i++)
        if (i != seed) second.push_back(bundle[i]);

    while (second.size() > 1) {
        std::size_t pick = 0;
        Rational pick_w(-1);
        for (std::size_t i = 0; i < second.size(); i++) {
            Rational w(0);
            for (const auto& t : first) w += g.weight(second[i].id, t.id);
            if (pick_w < w) {
                pick = i;
                pick_w = w;
            }
        }
        Bundle trial = first;
        trial.push_back(second[pick]);
        if (bundle_util(trial) <= max_util) {
            first = std::move(trial);
            second.erase(second.begin() + static_cast<std::ptrdiff_t>(pick));
        } else {
            break;
        }
    }
    return {first, second};
}

struct MiaaResult {
    bool schedulable = false;
    std::vector<Bundle> core_tasks;
    std::vector<int> core_bank;
};

// Memory-interference-aware allocation: bundle memory-intensive tasks onto
// shared cores with dedicated banks, re-checking the whole system after each
// placement. The step counter turns pathological non-progress into an error.
inline MiaaResult miaa(const std::vector<Task>& taskset, int n_cores, int n_bank,
                       const dram::LatencyTerms& terms,
                       std::uint64_t iteration_cap = 1'000'000,
                       std::uint64_t step_cap = 100'000) {
    InterferenceGraph g = build_interference_graph(taskset, terms, iteration_cap);

    AllocState st;
    st.terms = terms;
    st.iteration_cap = iteration_cap;
    int first_bank = least_interfering_bank(n_bank, st, g, taskset);
    st.core_tasks.push_back({});
    st.core_bank.push_back(first_bank);

    std::vector<Bundle> pending{taskset};
    std::uint64_t steps = 0;
    auto tick = [&]() {
        if (++steps > step_cap) throw AnalysisError("miaa step cap exceeded");
    };

    auto finish = [&](bool ok) {
        MiaaResult r;
        r.schedulable = ok;
        r.core_tasks = st.core_tasks;
        r.core_bank = st.core_bank;
        return r;
    };

    while (!pending.empty()) {
        tick();
        std::vector<Bundle> round = std::move(pending);
        pending.clear();
        std::stable_sort(round.begin(), round.end(), [](const Bundle& a, const Bundle& b) {
            Rational ua = bundle_util(a), ub = bundle_util(b);
            if (ua != ub) return ub < ua;
            int ia = a.empty() ? -1 : a.front().id;
            int ib = b.empty() ? -1 : b.front().id;
            return ia < ib;
        });

        std::vector<Bundle> rest;
        for (auto& bundle : round) {
            tick();
            int p = best_fit(bundle, st);
            if (p >= 0) {
                for (int q = 0; q < st.n_cores(); q++) {
                    if (q == p) continue;
                    if (!st.core_schedulable(q)) {
                        Bundle evicted = remove_excess(q, st, g);
                        if (!evicted.empty()) pending.push_back(std::move(evicted));
                    }
                }
            } else {
                rest.push_back(std::move(bundle));
            }
        }
        if (rest.empty()) continue;

        bool all_singletons = true;
        for (auto& bundle : rest) {
            tick();
            if (bundle.size() > 1) {
                all_singletons = false;
                int emptiest = 0;
                for (int p = 1; p < st.n_cores(); p++)
                    if (st.core_util(p) < st.core_util(emptiest)) emptiest = p;
                Rational cap = Rational(1) - st.core_util(emptiest);
                auto [first, second] = extract_min_cut(bundle, cap, g);
                pending.push_back(std::move(first));
                pending.push_back(std::move(second));
            } else {
                pending.push_back(std::move(bundle));
            }
        }

        if (all_singletons) {
            if (st.n_cores() == n_cores) return finish(false);
            Bundle merged;
            for (auto& b : pending) merged.insert(merged.end(), b.begin(), b.end());
            std::sort(merged.begin(), merged.end(),
                      [](const Task& a, const Task& b) { return a.id < b.id; });
            int bank = least_interfering_bank(n_bank, st, g, merged);
            st.core_tasks.push_back({});
            st.core_bank.push_back(bank);
            pending = {std::move(merged)};
        }
    }

    // Full-system recheck: every returned allocation must pass the test.
    auto v = st.view();
    return finish(mem::system_schedulable_memory(v));
}

}  // namespace rtsched::memalloc
