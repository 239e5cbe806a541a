#include <doctest.h>

#include <algorithm>
#include <random>

#include "d2o/autonomics.hpp"

using namespace d2o;

TEST_CASE("summarize: hand-checked window") {
    Stats s = summarize_samples({0.2, 0.4, 0.6});
    CHECK(s.min == doctest::Approx(0.2));
    CHECK(s.max == doctest::Approx(0.6));
    CHECK(s.mean == doctest::Approx(0.4));
    CHECK(s.median == doctest::Approx(0.4));
}

TEST_CASE("summarize: singleton window") {
    Stats s = summarize_samples({0.37});
    CHECK(s.min == 0.37);
    CHECK(s.max == 0.37);
    CHECK(s.mean == 0.37);
    CHECK(s.median == 0.37);
}

TEST_CASE("summarize: even-length windows take the lower middle") {
    Stats s = summarize_samples({0.1, 0.2, 0.3, 0.4});
    CHECK(s.median == doctest::Approx(0.2));
}

TEST_CASE("summarize: empty window is an error") {
    CHECK_THROWS_AS(summarize_samples({}), EmptyWindow);
}

TEST_CASE("summarize: matches a brute-force oracle on seeded windows") {
    std::mt19937_64 rng(2024);
    for (int round = 0; round < 100; ++round) {
        size_t count = 1 + rng() % 1000;
        std::vector<double> samples;
        for (size_t i = 0; i < count; ++i) samples.push_back(double(rng() % 10001) / 10000.0);

        Stats got = summarize_samples(samples);

        // independent recomputation
        double mn = 1e9, mx = -1e9, sum = 0;
        for (double v : samples) {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
            sum += v;
        }
        std::vector<double> sorted = samples;
        std::sort(sorted.begin(), sorted.end());
        double median = sorted[(sorted.size() - 1) / 2];
        CHECK(got.min == doctest::Approx(mn));
        CHECK(got.max == doctest::Approx(mx));
        CHECK(got.mean == doctest::Approx(sum / double(count)));
        CHECK(got.median == doctest::Approx(median));
        CHECK(got.min <= got.median);
        CHECK(got.median <= got.max);
        CHECK(got.min <= got.mean);
        CHECK(got.mean <= got.max);
    }
}

namespace {

MachineStatus machine(double cpu_mhz, double cpu_util, double mem_mb = 2048,
                      double mem_util = 0, double disk_mb = 20480, double disk_util = 0) {
    MachineStatus st;
    st.spec.cpu_capacity_mhz = cpu_mhz;
    st.spec.memory_mb = mem_mb;
    st.spec.disk_mb = disk_mb;
    st.summary.cpu.mean = cpu_util;
    st.summary.mem.mean = mem_util;
    st.summary.disk.mean = disk_util;
    return st;
}

}  // namespace

TEST_CASE("ranking: fully utilized machines score zero") {
    std::map<std::string, MachineStatus> machines{
        {"a", machine(2000, 1, 2048, 1, 20480, 1)},
        {"b", machine(4000, 1, 1024, 1, 10240, 1)},
    };
    for (const auto& rm : rank_machines(machines, Metric{})) CHECK(rm.score == 0);
}

TEST_CASE("ranking: a single idle machine scores the weighting sum") {
    std::map<std::string, MachineStatus> machines{{"a", machine(2000, 0, 2048, 0, 20480, 0)}};
    auto ranked = rank_machines(machines, Metric{1, 1, 1});
    REQUIRE(ranked.size() == 1);
    CHECK(ranked[0].score == doctest::Approx(3.0));
}

TEST_CASE("ranking: the published tie example breaks by ascending name") {
    // A(cpu 2000, util .5) vs B(cpu 4000, util .75), cpu weight 1, rest 0:
    // both score .25 and A wins the tie
    std::map<std::string, MachineStatus> machines{
        {"A", machine(2000, 0.5)},
        {"B", machine(4000, 0.75)},
    };
    auto ranked = rank_machines(machines, Metric{1, 0, 0});
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].score == doctest::Approx(0.25));
    CHECK(ranked[1].score == doctest::Approx(0.25));
    CHECK(ranked[0].name == "A");
}

TEST_CASE("ranking: capacity scale invariance and utilization monotonicity") {
    std::mt19937_64 rng(99);
    for (int round = 0; round < 200; ++round) {
        int count = 2 + int(rng() % 5);
        std::map<std::string, MachineStatus> machines;
        for (int i = 0; i < count; ++i) {
            machines["m" + std::to_string(i)] =
                machine(500 + double(rng() % 4000), double(rng() % 100) / 100.0,
                        512 + double(rng() % 8192), double(rng() % 100) / 100.0,
                        1024 + double(rng() % 40960), double(rng() % 100) / 100.0);
        }
        Metric metric{double(rng() % 100) / 100.0, double(rng() % 100) / 100.0,
                      double(rng() % 100) / 100.0};
        if (metric.cpu_weight + metric.mem_weight + metric.disk_weight == 0) metric.cpu_weight = 1;

        auto base = rank_machines(machines, metric);
        // scores are bounded by the weighting sum
        for (const auto& rm : base) {
            CHECK(rm.score >= 0);
            CHECK(rm.score <= metric.cpu_weight + metric.mem_weight + metric.disk_weight + 1e-12);
        }

        // scaling every cpu capacity by the same factor changes nothing
        std::map<std::string, MachineStatus> scaled = machines;
        for (auto& [name, st] : scaled) st.spec.cpu_capacity_mhz *= 3.5;
        auto after = rank_machines(scaled, metric);
        REQUIRE(after.size() == base.size());
        for (size_t i = 0; i < base.size(); ++i) {
            CHECK(after[i].name == base[i].name);
            CHECK(after[i].score == doctest::Approx(base[i].score));
        }

        // raising one machine's utilization never raises its score
        auto bumped = machines;
        auto& victim = bumped.begin()->second;
        victim.summary.cpu.mean = std::min(1.0, victim.summary.cpu.mean + 0.3);
        auto after2 = rank_machines(bumped, metric);
        auto find_score = [](const std::vector<RankedMachine>& v, const std::string& n) {
            for (const auto& rm : v) {
                if (rm.name == n) return rm.score;
            }
            return -1.0;
        };
        CHECK(find_score(after2, bumped.begin()->first) <=
              find_score(base, bumped.begin()->first) + 1e-12);
    }
}

TEST_CASE("thresholds: the published exemplar values fire exactly") {
    ThresholdConfig cfg = ThresholdConfig::defaults(MachineType::Workstation);
    MachineSpec spec;
    spec.disk_mb = 30000;

    ResourceSummary quiet;
    quiet.cpu.mean = 0.5;
    quiet.mem.mean = 0.5;
    quiet.disk.mean = 0.5;  // 15000 MB free
    CHECK(check_thresholds(quiet, spec, cfg).empty());

    ResourceSummary hot_cpu = quiet;
    hot_cpu.cpu.mean = 0.75;  // above 70%
    auto events = check_thresholds(hot_cpu, spec, cfg);
    REQUIRE(events.size() == 1);
    CHECK(events[0].resource == "cpu");
    CHECK(events[0].threshold == doctest::Approx(0.70));

    ResourceSummary hot_mem = quiet;
    hot_mem.mem.mean = 0.81;  // above 80%
    events = check_thresholds(hot_mem, spec, cfg);
    REQUIRE(events.size() == 1);
    CHECK(events[0].resource == "memory");

    // free disk 3,000 MB against a 4,096 MB floor
    ResourceSummary low_disk = quiet;
    low_disk.disk.mean = 0.9;
    MachineSpec small;
    small.disk_mb = 30000;  // 3000 MB free
    events = check_thresholds(low_disk, small, cfg);
    REQUIRE(events.size() == 1);
    CHECK(events[0].resource == "disk_free");
    CHECK(events[0].observed == doctest::Approx(3000));
    CHECK(events[0].threshold == doctest::Approx(4096));

    ResourceSummary busy_disk = quiet;
    busy_disk.disk_writes_per_s = 4500;  // above 4000/s
    events = check_thresholds(busy_disk, spec, cfg);
    REQUIRE(events.size() == 1);
    CHECK(events[0].resource == "disk_writes");

    // the dedicated-server profile has no limits
    ThresholdConfig dedicated = ThresholdConfig::defaults(MachineType::DedicatedServer);
    ResourceSummary slammed;
    slammed.cpu.mean = slammed.mem.mean = slammed.disk.mean = 1.0;
    slammed.disk_writes_per_s = 1e9;
    CHECK(check_thresholds(slammed, spec, dedicated).empty());
}

TEST_CASE("replica choice: query pattern dominates equal rankings") {
    std::vector<RankedMachine> ranking{{"x", 1.0}, {"y", 1.0}, {"z", 1.0}};
    std::map<std::string, uint64_t> pattern{{"x", 100}};
    CHECK(choose_replica_location(ranking, pattern, {}) == "x");
}

TEST_CASE("replica choice: forced single candidate; exclusions respected") {
    std::vector<RankedMachine> ranking{{"x", 2.0}, {"y", 1.0}};
    CHECK(choose_replica_location(ranking, {}, {"x"}) == "y");
    CHECK_THROWS_AS(choose_replica_location(ranking, {}, {"x", "y"}), NoEligibleInstance);
}

TEST_CASE("replica choice: no history means pure ranking") {
    std::vector<RankedMachine> ranking{{"b", 2.0}, {"a", 1.0}};
    CHECK(choose_replica_location(ranking, {}, {}) == "b");
}

TEST_CASE("negotiation: strict inequality rule") {
    CHECK(negotiate_placement(0.8, 0.5));   // 0.8 > 0.5
    CHECK(!negotiate_placement(0.3, 0.5));  // 0.3 <= 0.5
    CHECK(!negotiate_placement(0.5, 0.5));  // boundary is a rejection
}

TEST_CASE("negotiation: exhaustive 21x21 grid") {
    for (int n = 0; n <= 20; ++n) {
        for (int w = 0; w <= 20; ++w) {
            double need = double(n) / 20.0;
            double willing = double(w) / 20.0;
            CHECK(negotiate_placement(need, willing) == (need > 1.0 - willing));
        }
    }
}

TEST_CASE("negotiation: escalation reaches acceptance and terminates") {
    // need 0.1 step 0.3 against willingness 0.2 accepts once need > 0.8
    double need = 0.1;
    double step = 0.3;
    int rounds = 0;
    while (!negotiate_placement(need, 0.2)) {
        need = std::min(1.0, need + step);
        ++rounds;
        REQUIRE(rounds <= 4);  // ceil(1/step) bound
    }
    CHECK(need > 0.8);
    // at need = 1 nobody with positive willingness can refuse
    CHECK(negotiate_placement(1.0, 0.01));
    CHECK(!negotiate_placement(1.0, 0.0));
}

TEST_CASE("sensor timelines parse and step") {
    SensorTimeline t = parse_sensor_csv("0,0.1,0.2,0.3\n5000,0.9,0.8,0.7,4500\n");
    CHECK(t.at(0).cpu == doctest::Approx(0.1));
    CHECK(t.at(4999).cpu == doctest::Approx(0.1));
    CHECK(t.at(5000).cpu == doctest::Approx(0.9));
    REQUIRE(t.at(6000).writes_per_s);
    CHECK(*t.at(6000).writes_per_s == doctest::Approx(4500));
    // 4-column files still parse (writes column optional)
    CHECK(!t.at(0).writes_per_s);
}

TEST_CASE("metric and threshold config files parse") {
    Metric m = parse_metric("cpu=1\nmem=0.5\ndisk=0.25\n");
    CHECK(m.cpu_weight == 1);
    CHECK(m.mem_weight == 0.5);
    CHECK(m.disk_weight == 0.25);
    ThresholdConfig c = parse_threshold_config("machine_type=workstation\ncpu_util_max=0.6\n");
    REQUIRE(c.cpu_util_max);
    CHECK(*c.cpu_util_max == 0.6);
}
