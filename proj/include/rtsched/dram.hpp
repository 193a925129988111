#pragma once

#include "rtsched/model.hpp"

#include <algorithm>

namespace rtsched::dram {

// Worst-case per-command and per-request DRAM service latencies under
// FR-FCFS with an open-row policy.
struct LatencyTerms {
    Duration l_pre{};   // command-bus slot taken by an earlier PRE
    Duration l_act{};   // row-activate separation (t_RRD / t_FAW window)
    Duration l_rw{};    // data-bus contention, turn-around and rank switch
    Duration l_hit{};   // row-hit service time
    Duration l_conf{};  // row-conflict service time
    std::int64_t n_reorder = 0;
    DramTiming timing;

    // Service time of m consecutive row-hits: reads and writes alternating,
    // plus the write-recovery tail before a following PRE.
    Duration conhit(std::int64_t m) const {
        const auto& d = timing;
        std::int64_t cycles = (m + 1) / 2 * (d.wl + d.bl / 2 + d.t_wtr) +
                              m / 2 * d.cl + (d.t_wr - d.t_wtr);
        return cycles * d.t_ck;
    }
};

inline LatencyTerms latency_terms(const DramTiming& d, const AnalysisConstants& c) {
    if (!d.t_ck.is_positive()) throw DomainError("t_ck must be positive");
    if (d.bl % 2 != 0) throw DomainError("burst length must be even");
    LatencyTerms t;
    t.timing = d;
    t.l_pre = d.t_ck;
    t.l_act = std::max(d.t_rrd, d.t_faw - 3 * d.t_rrd) * d.t_ck;
    t.l_rw = std::max({d.wl + d.bl / 2 + d.t_wtr,
                       d.cl + d.bl / 2 + 2 - d.wl,
                       d.wl + d.bl / 2 + d.t_rtrs - d.cl,
                       d.cl + d.bl / 2 + d.t_rtrs - d.wl,
                       d.bl / 2 + d.t_rtrs}) *
            d.t_ck;
    t.l_hit = std::max(d.cl + d.bl / 2 + 2,
                       d.wl + d.bl / 2 + std::max(d.t_wtr, d.t_wr)) *
              d.t_ck;
    t.l_conf = (d.t_rp + d.t_rcd) * d.t_ck + t.l_hit;
    std::int64_t theoretical = d.n_cols / d.bl;
    t.n_reorder = c.n_cap ? std::min(theoretical, *c.n_cap) : theoretical;
    return t;
}

// Optional refresh-overhead estimate: iterates the extra delay from REF
// commands on top of a computed interference delay. For sensitivity studies
// only; refresh is negligible for routine analysis.
inline Duration refresh_overhead(Duration total_delay, const DramTiming& d,
                                 std::uint64_t iteration_cap = 1000) {
    if (!d.t_refi.is_positive()) throw DomainError("t_refi must be positive");
    Duration er{};
    for (std::uint64_t i = 0; i < iteration_cap; i++) {
        Duration next = ceil_div(total_delay + er, d.t_refi) * d.t_rfc;
        if (next == er) return er;
        er = next;
    }
    throw AnalysisError("refresh-overhead estimate did not converge");
}

}  // namespace rtsched::dram
