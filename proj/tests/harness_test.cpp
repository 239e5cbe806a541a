#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "d2o/harness.hpp"

using namespace d2o;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

ScriptRunConfig test_config() {
    ScriptRunConfig config;
    config.workload_loader = [](const std::string& name) {
        return slurp(fs::path(D2O_TEST_DATA_DIR) / "workloads" / name);
    };
    return config;
}

}  // namespace

TEST_CASE("parse_script: the published example script has 13 commands in order") {
    Script s = parse_script(slurp(fs::path(D2O_TEST_DATA_DIR) / "scenarios/figure61.script"));
    REQUIRE(s.commands.size() == 13);
    CHECK(s.commands[0].kind == ScriptCommand::StartMachine);
    CHECK(s.commands[1].kind == ScriptCommand::StartMachine);
    CHECK(s.commands[2].kind == ScriptCommand::CreateTable);
    CHECK(s.commands[2].prepopulate == 300);
    CHECK(s.commands[2].table == "workloadTable");
    CHECK(s.commands[3].kind == ScriptCommand::Sleep);
    CHECK(s.commands[3].sleep_ms == 20000);
    CHECK(s.commands[4].kind == ScriptCommand::SqlOn);
    CHECK(s.commands[4].machine == 1);
    CHECK(s.commands[5].kind == ScriptCommand::ExecuteWorkload);
    CHECK(s.commands[5].workload_file == "readWorkload.workload");
    CHECK(s.commands[5].duration_ms == 60000);
    CHECK(s.commands[7].kind == ScriptCommand::TerminateMachine);
    CHECK(s.commands[9].kind == ScriptCommand::StartMachine);
    CHECK(s.commands[9].block_workloads);
    CHECK(s.commands[11].kind == ScriptCommand::CheckMetaReplFactor);
    CHECK(!s.commands[11].has_table);
    CHECK(s.commands[11].expected == 3);
    CHECK(s.commands[12].kind == ScriptCommand::CheckReplFactor);
    CHECK(s.commands[12].expected == 2);
}

TEST_CASE("parse_script: the whole scenario corpus parses") {
    const char* names[] = {"test_1a", "test_1b", "test_1c", "test_1d", "test_1e",
                           "test_2a", "test_2b", "test_2c", "test_2d", "test_2e",
                           "test_3a", "test_3b", "test_3c", "test_3d", "test_3e",
                           "test_4a", "test_4b", "test_4c", "test_4d", "test_4e"};
    for (const char* name : names) {
        CAPTURE(name);
        Script s = parse_script(
            slurp(fs::path(D2O_TEST_DATA_DIR) / "scenarios" / (std::string(name) + ".script")));
        CHECK(!s.commands.empty());
        // every scenario declares its replication factor
        CHECK(s.replication_factor >= 2);
        // and embeds at least one executable check
        bool has_check = false;
        for (const auto& cmd : s.commands) {
            if (cmd.kind == ScriptCommand::CheckReplFactor ||
                cmd.kind == ScriptCommand::CheckMetaReplFactor) {
                has_check = true;
            }
        }
        CHECK(has_check);
    }
}

TEST_CASE("parse_script: references to unintroduced ids are rejected") {
    CHECK_THROWS_AS(parse_script("{terminate_machine id=\"9\"}\n"), ScriptError);
    CHECK_THROWS_AS(parse_script("{start_machine id=\"0\"}\n{9} COMMIT\n"), ScriptError);
    CHECK_THROWS_AS(parse_script(""), ScriptError);
    CHECK_THROWS_AS(parse_script("{frobnicate id=\"1\"}\n"), ScriptError);
}

TEST_CASE("compute_recovery: definition examples") {
    ThroughputSeries series;
    series.per_second = {50, 50, 0, 0, 0, 48, 47};
    series.failure_marks = {2000};
    RecoveryReport r = compute_recovery(series);
    CHECK(r.recovery_time_s == 3);
    CHECK(r.recovered);

    ThroughputSeries dead;
    dead.per_second = {50, 50, 0, 0, 0};
    dead.failure_marks = {2000};
    RecoveryReport d = compute_recovery(dead);
    CHECK(!d.recovered);

    ThroughputSeries instant;
    instant.per_second = {50, 50, 12, 48, 50};
    instant.failure_marks = {2000};
    RecoveryReport i = compute_recovery(instant);
    CHECK(i.recovery_time_s == 0);
    CHECK(i.recovered);

    ThroughputSeries unmarked;
    unmarked.per_second = {1, 2, 3};
    CHECK_THROWS_AS(compute_recovery(unmarked), NoFailureMark);
}

TEST_CASE("run_workload: duration 0 gives an empty series; same seed repeats exactly") {
    Script script = parse_script(
        "{start_machine id=\"0\"}\n"
        "{start_machine id=\"1\"}\n"
        "{create_table id=\"1\" name=\"workloadTable\" prepopulate_with=\"20\"}\n"
        "{0} {execute_workload=\"short.workload\" duration=\"0\"}\n");
    ScriptRunConfig config = test_config();
    ScriptRunReport report = run_script(script, config);
    REQUIRE(report.workloads.size() == 1);
    CHECK(report.workloads[0].per_second.empty());
}

TEST_CASE("healthy short run: positive throughput every second, deterministic replay") {
    Script script = parse_script(
        "[Global Parameters: System-wide replication factor = 2]\n"
        "{start_machine id=\"0\"}\n"
        "{sleep=\"1000\"}\n"
        "{start_machine id=\"1\"}\n"
        "{start_machine id=\"2\"}\n"
        "{create_table id=\"1\" name=\"workloadTable\" prepopulate_with=\"50\"}\n"
        "{sleep=\"4000\"}\n"
        "{check_repl_factor name=\"workloadTable\" expected=\"2\"}\n"
        "{0} {execute_workload=\"short.workload\" duration=\"10000\"}\n"
        "{sleep=\"10000\"}\n");
    ScriptRunConfig config = test_config();
    ScriptRunReport a = run_script(script, config);
    REQUIRE(a.workloads.size() == 1);
    REQUIRE(a.workloads[0].per_second.size() == 10);
    for (int64_t count : a.workloads[0].per_second) CHECK(count > 0);
    CHECK(a.all_checks_passed);

    // identical (script, seed) gives identical traces; a new seed does not
    ScriptRunReport b = run_script(script, config);
    CHECK(a.trace_hash == b.trace_hash);
    ScriptRunConfig other = test_config();
    other.seed = 2;
    ScriptRunReport c = run_script(script, other);
    CHECK(a.trace_hash != c.trace_hash);
}

TEST_CASE("failed checks flip the run status") {
    Script script = parse_script(
        "{start_machine id=\"0\"}\n"
        "{start_machine id=\"1\"}\n"
        "{create_table id=\"1\" name=\"t\"}\n"
        "{sleep=\"2000\"}\n"
        "{check_repl_factor name=\"t\" expected=\"7\"}\n");
    ScriptRunConfig config = test_config();
    ScriptRunReport report = run_script(script, config);
    CHECK(!report.all_checks_passed);
    REQUIRE(report.assertions.size() == 1);
    CHECK(report.assertions[0].expected == 7);
    CHECK(report.assertions[0].observed != 7);
    CHECK(format_report(report).find("FAIL") != std::string::npos);
}

TEST_CASE("throughput csv format") {
    ThroughputSeries series;
    series.per_second = {3, 0, 7};
    CHECK(format_throughput_csv(series) == "second,txns\n0,3\n1,0\n2,7\n");
}

TEST_CASE("bench: a quick two-point run produces positive throughput") {
    BenchConfig config;
    config.replica_counts = {1, 2};
    config.duration_ms = 5000;
    auto points = run_bench(config);
    REQUIRE(points.size() == 2);
    CHECK(points[0].committed > 0);
    CHECK(points[1].committed > 0);
    CHECK(points[0].txns_per_s >= points[1].txns_per_s);
}
