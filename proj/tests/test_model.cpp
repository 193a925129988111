#include "rtsched/model.hpp"
#include "rtsched/priority.hpp"
#include "rtsched/validate.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <set>

using namespace rtsched;

namespace {

Task make_task(int id, Duration period, Duration wcet) {
    Task t;
    t.id = id;
    t.name = "t" + std::to_string(id);
    t.period = period;
    t.deadline = period;
    t.wcet = WcetCurve(wcet);
    return t;
}

}  // namespace

TEST_CASE("rms priorities order by period") {
    std::vector<Task> ts = {make_task(0, Duration::ms(100), Duration::ms(1)),
                            make_task(1, Duration::ms(200), Duration::ms(1)),
                            make_task(2, Duration::ms(300), Duration::ms(1))};
    auto p = assign_rms_priorities(ts);
    CHECK(p[0] == 3);
    CHECK(p[1] == 2);
    CHECK(p[2] == 1);
}

TEST_CASE("rms tie broken by lower id") {
    std::vector<Task> ts = {make_task(7, Duration::ms(100), Duration::ms(1)),
                            make_task(3, Duration::ms(100), Duration::ms(1))};
    auto p = assign_rms_priorities(ts);
    CHECK(p[3] > p[7]);
}

TEST_CASE("rms on the four-application taskset") {
    std::vector<Task> ts = {make_task(1, Duration::ms(40), Duration::ms(1)),
                            make_task(2, Duration::ms(120), Duration::ms(1)),
                            make_task(3, Duration::ms(180), Duration::ms(1)),
                            make_task(4, Duration::ms(600), Duration::ms(1))};
    auto p = assign_rms_priorities(ts);
    CHECK(p[1] > p[2]);
    CHECK(p[2] > p[3]);
    CHECK(p[3] > p[4]);
}

TEST_CASE("rms empty input gives empty map") {
    CHECK(assign_rms_priorities(std::vector<Task>{}).empty());
}

TEST_CASE("priority maps are permutations") {
    std::vector<Task> ts;
    for (int i = 0; i < 17; i++)
        ts.push_back(make_task(i, Duration::ms(10 + (i * 37) % 90), Duration::ms(1)));
    auto p = assign_rms_priorities(ts);
    std::set<int> seen;
    for (auto& [id, pr] : p) {
        (void)id;
        seen.insert(pr);
    }
    REQUIRE(seen.size() == ts.size());
    CHECK(*seen.begin() == 1);
    CHECK(*seen.rbegin() == static_cast<int>(ts.size()));
}

TEST_CASE("duration arithmetic reports overflow") {
    Duration big = Duration::ps(std::numeric_limits<std::int64_t>::max() - 1);
    CHECK_THROWS_AS(big + big, OverflowError);
    CHECK_THROWS_AS(1'000'000 * big, OverflowError);
}

TEST_CASE("validate accepts a well-formed config") {
    SystemConfig sys;
    sys.platform.n_cores = 4;
    sys.platform.n_cache = 8;
    sys.platform.n_banks = 8;
    sys.platform.mem_total_mb = 1024;
    for (int i = 0; i < 4; i++) {
        auto t = make_task(i, Duration::ms(100 * (i + 1)), Duration::ms(5));
        t.priority = 4 - i;
        sys.tasks.push_back(t);
        sys.task_core[i] = i + 1;
    }
    CHECK(validate(sys).empty());
}

TEST_CASE("validate flags constrained-deadline violation") {
    SystemConfig sys;
    auto t = make_task(0, Duration::ms(100), Duration::ms(5));
    t.deadline = Duration::ms(200);
    sys.tasks.push_back(t);
    auto v = validate(sys);
    REQUIRE(v.size() == 1);
    CHECK(v[0].code == ViolationCode::ConstrainedDeadlineViolated);
}

TEST_CASE("validate flags non-monotone wcet curve") {
    SystemConfig sys;
    Task t = make_task(0, Duration::ms(100), Duration::ms(5));
    t.wcet = WcetCurve({Duration::ms(5), Duration::ms(6)});
    sys.tasks.push_back(t);
    auto v = validate(sys);
    REQUIRE(v.size() == 1);
    CHECK(v[0].code == ViolationCode::WcetNotMonotone);
}

TEST_CASE("validation is idempotent on valid configs") {
    SystemConfig sys;
    sys.platform.n_cores = 2;
    sys.platform.n_cache = 4;
    sys.platform.mem_total_mb = 512;
    auto t = make_task(0, Duration::ms(50), Duration::ms(10));
    t.priority = 1;
    sys.tasks.push_back(t);
    REQUIRE(validate(sys).empty());
    CHECK(validate(sys).empty());
}

TEST_CASE("curve clamps past the last sample") {
    WcetCurve c({Duration::ms(10), Duration::ms(8), Duration::ms(7)});
    CHECK(c.at(1) == Duration::ms(10));
    CHECK(c.at(3) == Duration::ms(7));
    CHECK(c.at(9) == Duration::ms(7));
    CHECK_THROWS_AS(c.at(0), DomainError);
}
