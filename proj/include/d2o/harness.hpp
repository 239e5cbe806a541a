#pragma once

// Coordination-script parser and executor, workload runner with per-second
// throughput, recovery metrics and the failure-scenario assertions.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "d2o/engine.hpp"
#include "d2o/simnet.hpp"
#include "d2o/statements.hpp"

namespace d2o {

struct ScriptError : std::runtime_error {
    explicit ScriptError(const std::string& what) : std::runtime_error(what) {}
};

struct ScriptCommand {
    enum Kind {
        StartMachine,
        TerminateMachine,
        Sleep,
        CreateTable,
        ExecuteWorkload,
        SqlOn,
        CheckReplFactor,
        CheckMetaReplFactor,
    } kind = Sleep;

    int machine = -1;
    bool block_workloads = false;
    SimTime sleep_ms = 0;
    std::string table;
    std::string schema_cols;  // empty = harness default schema
    int prepopulate = 0;
    std::string workload_file;
    SimTime duration_ms = 0;
    std::string sql;
    int expected = 0;
    bool has_table = false;  // check_meta_repl_factor with a table name
    int line = 0;
};

struct Script {
    int replication_factor = 3;  // [Global Parameters: ...] header
    std::vector<ScriptCommand> commands;
};

Script parse_script(const std::string& text);

struct ThroughputSeries {
    std::vector<int64_t> per_second;
    std::vector<SimTime> failure_marks;  // relative to series start, ms
};

struct RecoveryReport {
    int64_t recovery_time_s = 0;
    bool recovered = true;
    // fine-grained, simulated-ms view used by the scenario assertions:
    // first failed commit attempt at/after the mark -> next successful commit
    SimTime fine_gap_ms = 0;
    bool fine_gap_finite = true;
};

struct NoFailureMark : std::runtime_error {
    NoFailureMark() : std::runtime_error("series has no failure mark") {}
};

// Zero-run metric per the per-second series; the fine-grained fields are
// filled by the script runner from the event trace.
RecoveryReport compute_recovery(const ThroughputSeries& series);

struct AssertionResult {
    std::string what;
    int expected = 0;
    int observed = 0;
    bool passed = false;
    SimTime at = 0;
};

struct ScriptRunConfig {
    uint64_t seed = 1;
    int locators = 3;
    SimTime base_latency_ms = 2;
    SimTime jitter_ms = 3;
    SimTime send_cost_ms = 2;
    OwnershipMode ownership = OwnershipMode::PerCommit;
    CommitProtocol commit_protocol = CommitProtocol::TwoPhase;
    bool paxos_commit = false;
    bool write_delay = false;
    bool partial_mode = false;
    int partial_r = 1;
    SimTime drain_ms = 2000;  // settle time after the last command
    // maps workload file name -> contents
    std::function<std::string(const std::string&)> workload_loader;
};

struct ScriptRunReport {
    std::vector<ThroughputSeries> workloads;  // in start order
    std::vector<RecoveryReport> recoveries;
    std::vector<AssertionResult> assertions;
    bool all_checks_passed = true;
    uint64_t trace_hash = 0;
    SimTime final_clock = 0;
};

ScriptRunReport run_script(const Script& script, const ScriptRunConfig& config);

std::string format_report(const ScriptRunReport& report);
std::string format_throughput_csv(const ThroughputSeries& series);

// --- bench (throughput-shape experiment) -------------------------------------

struct BenchConfig {
    std::vector<int> replica_counts{1, 2, 3, 5};
    CommitProtocol commit_protocol = CommitProtocol::TwoPhase;
    bool paxos_commit = false;
    bool write_delay = false;
    bool partial_mode = false;
    int partial_r = 1;
    SimTime duration_ms = 20'000;
    uint64_t seed = 1;
};

struct BenchPoint {
    int replicas = 0;
    int64_t committed = 0;
    double txns_per_s = 0;
};

std::vector<BenchPoint> run_bench(const BenchConfig& config);

}  // namespace d2o
