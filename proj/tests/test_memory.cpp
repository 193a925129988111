#include "rtsched/memory.hpp"

#include "oracles.hpp"
#include "rtsched/expgen.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace rtsched;

namespace {

Task mtask(int id, int prio, Duration period, Duration wcet, std::int64_t h) {
    Task t;
    t.id = id;
    t.period = period;
    t.deadline = period;
    t.wcet = WcetCurve(wcet);
    t.priority = prio;
    t.dram_requests = Curve<std::int64_t>(h);
    return t;
}

mem::MemView make_view(std::vector<std::vector<Task>> cores,
                       std::vector<std::set<int>> banks,
                       std::optional<std::int64_t> n_cap = std::nullopt) {
    mem::MemView v;
    v.core_tasks = std::move(cores);
    v.core_banks = std::move(banks);
    AnalysisConstants c;
    c.n_cap = n_cap;
    v.terms = dram::latency_terms(ddr3_1333(), c);
    return v;
}

oracle::MemOracleSystem make_oracle(const mem::MemView& v,
                                    std::optional<std::int64_t> n_cap = std::nullopt) {
    oracle::MemOracleSystem o;
    o.cores = v.core_tasks;
    o.banks = v.core_banks;
    o.dram = oracle::DramOracle{ddr3_1333()};
    o.n_cap = n_cap;
    return o;
}

}  // namespace

TEST_CASE("per-request delay with private banks") {
    auto v = make_view({{}, {}, {}, {}}, {{1}, {2}, {3}, {4}});
    auto rd = mem::request_driven_delay(v, 0);
    CHECK(rd.inter == Duration::ps(3 * 37'500));  // 3 * (1.5 + 12 + 24) ns
    CHECK(rd.intra == Duration::zero());
    CHECK(rd.total() == Duration::ns(112) + Duration::ps(500));
}

TEST_CASE("per-request delay for a lone core is zero") {
    auto v = make_view({{}}, {{1}});
    CHECK(mem::request_driven_delay(v, 0).total() == Duration::zero());
}

TEST_CASE("per-request delay with a shared bank includes re-ordering") {
    auto v = make_view({{}, {}}, {{1}, {1}});
    auto rd = mem::request_driven_delay(v, 0);
    // conhit(128) = 1605 cycles = 2407.5 ns, plus PRE+ACT 27 ns, plus one
    // row-conflict service of 58.5 ns from the sharing core.
    CHECK(rd.inter == Duration::zero());
    CHECK(rd.total() == Duration::ns(2493));
    auto o = make_oracle(v);
    CHECK(rd.total().count() == o.rd(0));
}

TEST_CASE("per-request delay matches the reference on mixed layouts") {
    expgen::Rng rng(3);
    for (int trial = 0; trial < 50; trial++) {
        int n = static_cast<int>(rng.between(1, 5));
        std::vector<std::set<int>> banks;
        for (int p = 0; p < n; p++) banks.push_back({static_cast<int>(rng.between(1, 3))});
        auto v = make_view(std::vector<std::vector<Task>>(static_cast<std::size_t>(n)),
                           banks);
        auto o = make_oracle(v);
        for (int p = 0; p < n; p++)
            CHECK(mem::request_driven_delay(v, p).total().count() == o.rd(p));
    }
}

TEST_CASE("re-ordering monotonicity: adding a sharer never lowers the delay") {
    auto priv = make_view({{}, {}, {}}, {{1}, {2}, {3}});
    auto shared = make_view({{}, {}, {}}, {{1}, {1}, {3}});
    CHECK(mem::request_driven_delay(priv, 0).total() <=
          mem::request_driven_delay(shared, 0).total());
    auto two = make_view({{}, {}}, {{1}, {2}});
    auto three = make_view({{}, {}, {}}, {{1}, {2}, {3}});
    CHECK(mem::request_driven_delay(two, 0).total() <=
          mem::request_driven_delay(three, 0).total());
}

TEST_CASE("window arrivals count one carry-in job per task") {
    auto v = make_view({{}, {mtask(0, 1, Duration::ms(100), Duration::ms(10), 1000)}},
                       {{1}, {2}});
    CHECK(mem::arrivals(v, 1, Duration::zero()) == 1000);
    CHECK(mem::arrivals(v, 1, Duration::ms(100)) == 2000);
    CHECK(mem::arrivals(v, 1, Duration::ms(101)) == 3000);
}

TEST_CASE("window delay with an idle neighbour core is zero") {
    auto v = make_view({{mtask(0, 1, Duration::ms(100), Duration::ms(10), 500)}, {}},
                       {{1}, {2}});
    for (auto t : {Duration::zero(), Duration::ms(50), Duration::ms(500)})
        CHECK(mem::job_driven_delay(v, 0, t) == Duration::zero());
}

TEST_CASE("window delay for private banks at one period") {
    auto v = make_view({{}, {mtask(0, 1, Duration::ms(100), Duration::ms(10), 1000)}},
                       {{1}, {2}});
    // 2000 requests times 37.5 ns.
    CHECK(mem::job_driven_delay(v, 0, Duration::ms(100)) == Duration::us(75));
    auto o = make_oracle(v);
    CHECK(mem::job_driven_delay(v, 0, Duration::ms(100)).count() ==
          o.jd(0, Duration::ms(100).count()));
}

TEST_CASE("window delay is monotone in the window length") {
    auto v = make_view({{},
                        {mtask(0, 2, Duration::ms(40), Duration::ms(4), 700),
                         mtask(1, 1, Duration::ms(90), Duration::ms(9), 50)}},
                       {{1}, {1}});
    Duration prev{};
    for (int ms = 0; ms <= 400; ms += 13) {
        Duration cur = mem::job_driven_delay(v, 0, Duration::ms(ms));
        CHECK(prev <= cur);
        prev = cur;
    }
}

TEST_CASE("memory response time of an isolated task is its wcet") {
    auto v = make_view({{mtask(0, 1, Duration::ms(100), Duration::ms(10), 500)}}, {{1}});
    auto w = mem::response_time_memory(v, 0, 0);
    REQUIRE(w.schedulable());
    CHECK(w.get() == Duration::ms(10));
}

TEST_CASE("no own requests and no higher tasks leaves the wcet") {
    auto v = make_view({{mtask(0, 1, Duration::ms(100), Duration::ms(10), 0)},
                        {mtask(1, 1, Duration::ms(50), Duration::ms(20), 90'000)}},
                       {{1}, {2}});
    auto w = mem::response_time_memory(v, 0, 0);
    REQUIRE(w.schedulable());
    CHECK(w.get() == Duration::ms(10));
}

TEST_CASE("two cores, private banks, one request each") {
    auto v = make_view({{mtask(0, 1, Duration::ms(100), Duration::ms(10), 1)},
                        {mtask(1, 1, Duration::ms(100), Duration::ms(10), 1)}},
                       {{1}, {2}});
    auto w = mem::response_time_memory(v, 0, 0);
    REQUIRE(w.schedulable());
    // Request-driven branch: 1 * 37.5 ns; job-driven: 2 * 37.5 ns at t=C.
    CHECK(w.get() == Duration::ms(10) + Duration::ps(37'500));
    auto o = make_oracle(v);
    CHECK(w.get().count() == *o.wcrt(0, 0));
}

TEST_CASE("memory response times match the reference evaluator") {
    expgen::Rng rng(17);
    for (int trial = 0; trial < 60; trial++) {
        int n_cores = static_cast<int>(rng.between(1, 4));
        std::vector<std::vector<Task>> cores(static_cast<std::size_t>(n_cores));
        std::vector<std::set<int>> banks;
        int id = 0;
        for (int p = 0; p < n_cores; p++) {
            banks.push_back({static_cast<int>(rng.between(1, 2))});
            int n_tasks = static_cast<int>(rng.between(1, 3));
            for (int i = 0; i < n_tasks; i++) {
                Duration period = Duration::us(rng.between(20'000, 200'000));
                Duration wcet = Duration::us(rng.between(1'000, 15'000));
                cores[static_cast<std::size_t>(p)].push_back(
                    mtask(id, 10 - i, period, wcet, rng.between(0, 20'000)));
                id++;
            }
        }
        std::optional<std::int64_t> n_cap;
        if (rng.between(0, 1) == 1) n_cap = 12;
        auto v = make_view(cores, banks, n_cap);
        auto o = make_oracle(v, n_cap);
        for (int p = 0; p < n_cores; p++) {
            for (const auto& t : cores[static_cast<std::size_t>(p)]) {
                auto w = mem::response_time_memory(v, p, t.id);
                auto ow = o.wcrt(p, t.id);
                if (w.schedulable()) {
                    REQUIRE(ow.has_value());
                    CHECK(w.get().count() == *ow);
                } else {
                    CHECK(!ow.has_value());
                }
            }
        }
    }
}

TEST_CASE("the combined bound never exceeds either branch at the fixed point") {
    auto v = make_view({{mtask(0, 2, Duration::ms(40), Duration::ms(4), 3'000),
                         mtask(1, 1, Duration::ms(120), Duration::ms(30), 2'000)},
                        {mtask(2, 1, Duration::ms(60), Duration::ms(5), 9'000)}},
                       {{1}, {1}});
    auto w = mem::response_time_memory(v, 0, 1);
    REQUIRE(w.schedulable());
    Duration rd = mem::request_driven_delay(v, 0).total();
    std::int64_t req = v.core_tasks[0][1].dram_requests_at(1) +
                       ceil_div(w.get(), v.core_tasks[0][0].period) *
                           v.core_tasks[0][0].dram_requests_at(1);
    Duration request_bound = req * rd;
    Duration job_bound = mem::job_driven_delay(v, 0, w.get());
    Duration charged = w.get() - v.core_tasks[0][1].wcet_at(1) -
                       ceil_div(w.get(), v.core_tasks[0][0].period) *
                           v.core_tasks[0][0].wcet_at(1);
    CHECK(charged <= request_bound);
    CHECK(charged <= job_bound);
    CHECK(charged == std::min(request_bound, job_bound));
}

TEST_CASE("combined cache+memory test reduces to the memory test") {
    auto v = make_view({{mtask(0, 2, Duration::ms(40), Duration::ms(4), 1'000),
                         mtask(1, 1, Duration::ms(120), Duration::ms(30), 500)},
                        {mtask(2, 1, Duration::ms(60), Duration::ms(5), 2'000)}},
                       {{1}, {1}});
    SECTION("zero reload requests") {
        v.delta_requests = 0;
        v.task_parts = {{0, {1, 2}}, {1, {1, 2}}, {2, {3}}};
        for (int id : {0, 1}) {
            auto wm = mem::response_time_memory(v, 0, id);
            auto wc = mem::response_time_cache_memory(v, 0, id);
            REQUIRE(wm.schedulable());
            REQUIRE(wc.schedulable());
            CHECK(wm.get() == wc.get());
        }
    }
    SECTION("disjoint partition sets") {
        v.delta_requests = 512;
        v.task_parts = {{0, {1}}, {1, {2}}, {2, {3}}};
        for (int id : {0, 1}) {
            auto wm = mem::response_time_memory(v, 0, id);
            auto wc = mem::response_time_cache_memory(v, 0, id);
            REQUIRE(wm.schedulable());
            REQUIRE(wc.schedulable());
            CHECK(wm.get() == wc.get());
        }
    }
}

TEST_CASE("combined test stays finite on the shared-partition example") {
    // Three tasks sharing partitions on one core, one bank per core.
    std::vector<Task> core0 = {mtask(0, 3, Duration::ms(12), Duration::ms(2), 100),
                               mtask(1, 2, Duration::ms(12), Duration::ms(2), 100),
                               mtask(2, 1, Duration::ms(12), Duration::ms(2), 100)};
    auto v = make_view({core0, {mtask(3, 1, Duration::ms(50), Duration::ms(5), 1'000)}},
                       {{1}, {2}});
    v.delta_requests = 1;
    v.task_parts = {{0, {1, 2}}, {1, {1}}, {2, {2}}, {3, {3}}};
    for (int id : {0, 1, 2}) {
        auto w = mem::response_time_cache_memory(v, 0, id);
        REQUIRE(w.schedulable());
        // Plug the fixed point back into the recurrence.
        const Task& ti = core0[static_cast<std::size_t>(id)];
        Duration rhs = ti.wcet_at(1);
        std::int64_t req = ti.dram_requests_at(1);
        for (const auto& th : core0) {
            if (th.priority <= ti.priority) continue;
            std::int64_t jobs = ceil_div(w.get(), th.period);
            if (jobs < 1) jobs = 1;
            rhs += jobs * th.wcet_at(1);
            req += jobs * (th.dram_requests_at(1) +
                           mem::crpd_requests(v, core0, th, ti));
        }
        Duration request_bound = req * mem::request_driven_delay(v, 0).total();
        rhs += std::min(request_bound, mem::job_driven_delay(v, 0, w.get(), true));
        CHECK(rhs == w.get());
    }
}

TEST_CASE("memory response times scale with uniform time scaling") {
    auto v = make_view({{mtask(0, 2, Duration::ms(40), Duration::ms(4), 3'000),
                         mtask(1, 1, Duration::ms(120), Duration::ms(30), 2'000)},
                        {mtask(2, 1, Duration::ms(60), Duration::ms(5), 9'000)}},
                       {{1}, {1}});
    const std::int64_t s = 5;
    auto scaled = v;
    for (auto& core : scaled.core_tasks) {
        for (auto& t : core) {
            t.period = s * t.period;
            t.deadline = s * t.deadline;
            t.wcet = WcetCurve(s * t.wcet.at(1));
        }
    }
    scaled.terms.l_pre = s * v.terms.l_pre;
    scaled.terms.l_act = s * v.terms.l_act;
    scaled.terms.l_rw = s * v.terms.l_rw;
    scaled.terms.l_hit = s * v.terms.l_hit;
    scaled.terms.l_conf = s * v.terms.l_conf;
    scaled.terms.timing.t_ck = s * v.terms.timing.t_ck;
    for (int id : {0, 1, 2}) {
        int p = id < 2 ? 0 : 1;
        auto w = mem::response_time_memory(v, p, id);
        auto ws = mem::response_time_memory(scaled, p, id);
        REQUIRE(w.schedulable());
        REQUIRE(ws.schedulable());
        CHECK(ws.get() == s * w.get());
    }
}
