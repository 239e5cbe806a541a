#pragma once

// A database instance: System Table and Table Manager roles, strict
// two-phase locking, synchronous replication fan-out, migration, recovery,
// ring failure detection and shutdown hand-off. One InstanceNode per
// simulated machine; everything runs on the simnet scheduler.

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "d2o/autonomics.hpp"
#include "d2o/commit.hpp"
#include "d2o/locator.hpp"
#include "d2o/model.hpp"
#include "d2o/simnet.hpp"
#include "d2o/statements.hpp"

namespace d2o {

enum class OwnershipMode { PerCommit, Lease, Disabled };

struct EngineConfig {
    ReplicationConfig repl;
    CommitProtocol commit_protocol = CommitProtocol::TwoPhase;
    bool paxos_commit = false;    // route votes through co-located acceptors
    bool partial_mode = false;    // commit once r replicas finish
    bool write_delay = false;     // one flush per window instead of per commit
    OwnershipMode ownership = OwnershipMode::PerCommit;
    bool replica_target = true;   // eligible to receive placed replicas
    SimTime flush_ms = 8;
    SimTime write_delay_window_ms = 500;
    SimTime fail_timeout_ms = 40;  // query-time failure detection, 20x base latency
    SimTime retry_backoff_ms = 50;
    SimTime ring_period_ms = 1000;
    SimTime maintenance_period_ms = 1000;
    SimTime sensor_period_ms = 1000;
    SimTime summary_period_ms = 5000;
    SimTime lease_duration_ms = 10'000;
    int successor_list_k = 3;
    int per_row_install_cost_x10 = 1;  // install delay = rows * this / 10 ms
    MachineSpec spec;
    ThresholdConfig thresholds = ThresholdConfig::defaults(MachineType::Workstation);
    Metric metric;
    NegotiationParams negotiation;
    SensorTimeline sensor;
    bool execute_threshold_plans = false;  // plans are logged; execution is gated
};

// Global schema registry. Exactly one active System Table exists system-wide;
// its state is synchronously replicated to the listed holders.
struct SystemTableState {
    std::map<std::string, std::string> table_tm;                       // table -> active TM host
    std::map<std::string, std::vector<std::string>> tm_meta_holders;   // table -> TM-state holders
    std::map<std::string, std::string> schemas;                        // table -> column list
    std::vector<std::string> members;
    std::vector<std::string> st_meta_holders;                          // current ST-state holders
    uint64_t version = 0;

    json to_json() const;
    static SystemTableState from_json(const json& j);
};

// Per-table lock manager and replica registry.
struct TableManagerState {
    std::string table;
    std::string schema_cols;
    std::vector<std::string> holders;   // data replica holders
    std::set<std::string> stale;        // holders excluded from reads until caught up
    std::vector<std::string> meta_holders;
    uint64_t version = 0;
    std::map<std::string, uint64_t> query_pattern;  // lock requests per instance

    struct LockReq {
        uint64_t txn = 0;
        std::string owner;
        bool exclusive = false;
    };
    std::vector<LockReq> lock_holders;
    std::deque<LockReq> lock_queue;

    std::vector<std::string> current_holders() const;
    bool can_grant(const LockReq& req) const;

    json to_json() const;
    static TableManagerState from_json(const json& j);
};

struct WorkloadStats {
    std::vector<int64_t> per_second;
    std::vector<SimTime> failure_marks;
    SimTime start = 0;
    SimTime duration = 0;
    bool finished = false;
    int64_t committed = 0;
};

class InstanceNode : public Node {
  public:
    InstanceNode(ProcessId self, DescriptorFile descriptor, EngineConfig config);

    void on_start(SimWorld& w) override;
    void on_message(SimWorld& w, const Message& m) override;

    // --- driver surface ------------------------------------------------------
    BootstrapOutcome bootstrap_outcome() const { return bootstrap_outcome_; }
    bool joined() const { return joined_; }

    // Runs one statement group as a transaction (or schema/migration op).
    void execute(SimWorld& w, std::vector<Statement> stmts, std::function<void(bool)> done);

    // Seeded bulk insert used by the script prepopulate step.
    void prepopulate(SimWorld& w, const std::string& table, int rows, uint64_t seed,
                     std::function<void(bool)> done);

    void start_workload(SimWorld& w, Workload workload, SimTime duration_ms, uint64_t seed);
    void suspend_workload();
    void resume_workload(SimWorld& w);
    void mark_failure(SimTime clock);
    const WorkloadStats* workload_stats() const;

    void begin_shutdown(SimWorld& w);  // graceful hand-off; poll shutdown_complete()
    bool shutdown_complete() const { return shutdown_complete_; }

    // --- inspection (harness / tests) ---------------------------------------
    bool is_active_st() const { return st_.has_value(); }
    bool hosts_tm(const std::string& table) const { return tms_.count(table) != 0; }
    bool holds_current_data_replica(const std::string& table) const;
    bool holds_current_st_meta() const;
    bool holds_current_tm_meta(const std::string& table) const;
    const SystemTableState* system_table() const { return st_ ? &*st_ : nullptr; }
    const TableManagerState* table_manager(const std::string& table) const;
    std::vector<std::pair<uint64_t, uint64_t>> lock_wait_edges() const;  // waiter -> holder
    const TableStore* local_store(const std::string& table) const;
    std::vector<std::string> member_view() const { return members_; }

    const EngineConfig& config() const { return config_; }

  private:
    // ---- locator client ----
    struct LocCall {
        uint64_t id = 0;
        std::string op;
        json payload;
        size_t server_idx = 0;
        std::vector<json> responses;
        std::function<void(const QuorumOutcome&)> done;
    };
    void locator_call(SimWorld& w, const std::string& op, json payload,
                      std::function<void(const QuorumOutcome&)> done);
    void locator_next(SimWorld& w, LocCall& call);
    void locator_finish(SimWorld& w, LocCall call);

    // ---- bootstrap (startup state machine) ----
    void bootstrap_begin(SimWorld& w);
    void bootstrap_try_join(SimWorld& w, const std::string& st);
    void bootstrap_try_restart_st(SimWorld& w, std::vector<std::string> holders, size_t idx);
    void bootstrap_try_create(SimWorld& w);
    void finish_join(SimWorld& w, BootstrapOutcome outcome);

    // ---- transactions ----
    struct Txn {
        uint64_t id = 0;
        std::vector<Statement> stmts;
        std::vector<std::string> statement_texts;
        std::vector<std::string> tables;  // ascending
        enum Phase { Resolve, Lock, Exec, Prepare, PreCommitPhase, Done } phase = Resolve;
        size_t lock_idx = 0;
        size_t stmt_idx = 0;
        int exec_round = 0;
        std::map<std::string, std::string> tm;
        std::map<std::string, std::vector<std::string>> replicas;  // current at grant time
        std::set<std::string> locked;
        std::set<std::string> awaiting;
        std::set<std::string> participants;
        std::set<std::string> votes;
        std::set<std::string> precommit_acks;
        std::map<std::string, std::set<std::string>> executed_at;  // table -> replicas reached
        std::map<std::string, std::set<std::string>> stragglers;   // partial mode
        bool has_writes = false;
        bool bulk = false;
        int result_rows = 0;
        int epoch = 0;  // invalidates stale timers
        std::function<void(bool)> done;
    };
    void txn_start(SimWorld& w, std::vector<Statement> stmts, std::function<void(bool)> done,
                   bool bulk);
    void txn_resolve_next(SimWorld& w);
    void txn_lock_next(SimWorld& w);
    void txn_exec_next(SimWorld& w);
    void txn_begin_commit(SimWorld& w);
    void txn_decide(SimWorld& w, bool commit);
    void txn_fail(SimWorld& w, const std::string& suspect);
    void txn_timer(SimWorld& w, SimTime delay, const std::string& what);

    // ---- schema / migration ops ----
    struct SchemaOp {
        Statement stmt;
        std::function<void(bool)> done;
        int attempts = 0;
        int epoch = 0;
    };
    void schema_start(SimWorld& w, Statement stmt, std::function<void(bool)> done);
    void schema_send(SimWorld& w);
    void schema_fail_retry(SimWorld& w);

    // ---- System Table role ----
    void st_enqueue_commit(SimWorld& w, std::function<void()> apply,
                           std::function<void()> committed);
    void st_pump(SimWorld& w);
    void st_apply_and_replicate(SimWorld& w);
    void st_handle_death(SimWorld& w, const std::string& dead);
    void st_broadcast_membership(SimWorld& w);
    void st_persist(SimWorld& w);
    void st_abdicate(SimWorld& w);
    std::vector<RankedMachine> st_ranking() const;
    std::vector<std::string> eligible_members(const std::vector<std::string>& excluded) const;

    // ---- Table Manager role ----
    void tm_persist(SimWorld& w, TableManagerState& tm);
    void tm_sync_meta(SimWorld& w, TableManagerState& tm);
    void tm_pump_locks(SimWorld& w, TableManagerState& tm);
    void tm_release(SimWorld& w, TableManagerState& tm, uint64_t txn);
    void tm_drop_table(SimWorld& w, const std::string& table);

    // ---- replica role ----
    struct LocalReplica {
        TableStore store;
        bool current = true;
        std::map<uint64_t, std::vector<std::pair<bool, Row>>> undo;  // (was_insert, row)
        std::map<uint64_t, std::vector<std::string>> pending_texts;
        std::map<uint64_t, size_t> log_mark;
    };
    void replica_persist(SimWorld& w, const std::string& table);
    void replica_apply_write(SimWorld& w, const std::string& table, uint64_t txn,
                             const std::string& text, int* rows_out);

    // ---- maintenance / autonomics ----
    void maintenance_tick(SimWorld& w);
    void maintain_table(SimWorld& w, TableManagerState& tm);
    void start_replica_create(SimWorld& w, const std::string& table, const std::string& target);
    void sensor_tick(SimWorld& w);
    void summary_tick(SimWorld& w);

    // ---- ring ----
    void ring_tick(SimWorld& w);
    std::vector<std::string> ring_order() const;
    bool ring_between(uint64_t x, uint64_t a, uint64_t b) const;

    // ---- recovery ----
    void recover_st_via_locators(SimWorld& w, std::function<void(bool)> done);
    void report_suspect(SimWorld& w, const std::string& suspect, std::function<void(bool)> done);

    void flush_then(SimWorld& w, std::function<void()> fn);

    ProcessId self_;
    DescriptorFile descriptor_;
    EngineConfig config_;

    // identity / membership
    BootstrapOutcome bootstrap_outcome_ = BootstrapOutcome::Pending;
    bool joined_ = false;
    std::vector<std::string> members_;
    std::map<std::string, bool> member_eligible_;
    std::string st_location_;  // cached
    std::map<std::string, std::string> tm_cache_;

    // roles
    std::optional<SystemTableState> st_;
    uint64_t st_epoch_ = 0;  // incarnation counter for divergence analysis
    std::deque<std::pair<std::function<void()>, std::function<void()>>> st_queue_;
    bool st_commit_inflight_ = false;
    bool st_migrating_ = false;
    SimTime lease_expiry_ = -1;
    std::map<std::string, TableManagerState> tms_;
    std::map<std::string, LocalReplica> replicas_;
    std::optional<std::pair<uint64_t, SystemTableState>> st_meta_;  // version, snapshot
    std::map<std::string, std::pair<uint64_t, TableManagerState>> tm_meta_;

    // client machinery
    uint64_t next_txn_id_ = 1;
    std::optional<Txn> txn_;
    std::optional<SchemaOp> schema_op_;
    std::deque<std::pair<std::vector<Statement>, std::function<void(bool)>>> exec_queue_;
    bool exec_busy_ = false;
    void pump_exec(SimWorld& w);

    // workload runner
    struct WorkloadRun {
        Workload workload;
        WorkloadStats stats;
        LoopState loop;
        size_t line_idx = 0;
        bool autocommit = true;
        std::vector<Statement> buffer;
        std::vector<std::string> buffer_texts;
        bool suspended = false;
        bool retrying = false;
        std::vector<Statement> retry_stmts;
        int epoch = 0;
    };
    std::optional<WorkloadRun> wl_;
    void wl_step(SimWorld& w);
    void wl_run_group(SimWorld& w, std::vector<Statement> stmts);

    // locator client
    uint64_t next_call_id_ = 1;
    std::map<uint64_t, LocCall> loc_calls_;
    std::map<std::string, uint64_t> loc_last_seen_;

    // ring
    std::string ring_predecessor_;
    std::string ring_successor_;
    std::set<std::string> ring_suspected_;

    // sensors
    std::vector<double> window_cpu_, window_mem_, window_disk_;
    std::optional<double> window_writes_;
    SimTime window_start_ = 0;
    ResourceSummary latest_summary_;
    bool have_summary_ = false;
    std::map<std::string, MachineStatus> st_statuses_;  // ST role: per-member telemetry
    std::vector<RankedMachine> ranking_cache_;
    std::map<std::string, double> need_level_;  // per-table escalation state

    // replica creation in flight (per table), to avoid duplicate actions
    std::set<std::string> replica_action_;
    std::set<std::string> st_meta_action_;
    std::set<std::string> probe_waiting_;
    std::map<uint64_t, std::string> pending_replica_create_;  // create-txn -> target
    std::map<uint64_t, std::string> pending_recover_notify_;  // create-txn -> table
    std::optional<std::string> pending_recreate_requester_;
    bool shutdown_requested_ = false;
    bool shutdown_complete_ = false;
    int pending_flushes_ = 0;
    std::vector<std::function<void()>> delayed_flush_queue_;
};

// Shared world construction used by harness, bench and safety tests.
struct ClusterConfig {
    int locators = 3;
    uint64_t seed = 1;
    SimTime base_latency_ms = 2;
    SimTime jitter_ms = 3;
    SimTime send_cost_ms = 2;
    EngineConfig engine;
};

DescriptorFile make_descriptor(int locators);
void add_locators(SimWorld& w, const ClusterConfig& cfg);
InstanceNode* add_instance(SimWorld& w, const ClusterConfig& cfg, const std::string& name,
                           bool replica_target = true);

}  // namespace d2o
