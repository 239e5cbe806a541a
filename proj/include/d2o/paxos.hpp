#pragma once

// Single-decree Paxos (proposer/acceptor/learner) plus the atomic-commit
// variant where every replica site runs its own instance and the transaction
// coordinator learns for all of them. Failure-free atomic-commit runs emit
// exactly (2F+3)N - 1 messages for N participants and F acceptors per site.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "d2o/simnet.hpp"

namespace d2o {

// Acceptor state machine; promised never decreases, accepts need n >= promised.
struct AcceptorCore {
    std::optional<uint64_t> promised;
    std::optional<std::pair<uint64_t, int64_t>> accepted;  // (number, value)

    struct PrepareResult {
        bool ignored = false;
        std::optional<std::pair<uint64_t, int64_t>> prior;
    };

    PrepareResult handle_prepare(uint64_t n);
    bool handle_accept(uint64_t n, int64_t v);
};

// --- standard single-decree runs --------------------------------------------

struct PaxosConfig {
    int proposers = 2;
    int acceptors = 3;
    std::vector<int64_t> values;          // per proposer
    std::vector<SimTime> start_delays;    // per proposer, default 0
    std::vector<uint64_t> fixed_numbers;  // optional: pin the first proposal number
    int max_rounds = 6;
    uint64_t seed = 1;
    SimTime jitter_ms = 3;
    double drop_probability = 0;
    // (kill_at_ms, restart_at_ms, acceptor_index) schedules; state is durable
    std::vector<std::tuple<SimTime, SimTime, int>> acceptor_restarts;
};

struct PaxosReport {
    std::optional<int64_t> learner_chosen;
    std::vector<int64_t> chosen_values;  // distinct values with an acceptor majority
    bool safety_violated = false;        // more than one distinct chosen value
    uint64_t messages_sent = 0;
};

PaxosReport run_paxos(const PaxosConfig& config);

// Same run with a hook applied after processes exist and before any event is
// dispatched; used to stage exact delivery orders (per-link latency overrides).
PaxosReport run_paxos_staged(const PaxosConfig& config,
                             const std::function<void(SimWorld&)>& stage);

// --- atomic-commit variant ---------------------------------------------------

struct PaxosCommitConfig {
    int participants = 2;        // replica sites, N
    int acceptors_per_site = 3;  // F
    std::vector<bool> votes;     // empty = all prepared
    std::vector<int> dead_sites; // killed before the run starts
    uint64_t seed = 1;
};

struct PaxosCommitReport {
    bool committed = false;
    bool aborted = false;
    uint64_t messages_sent = 0;
    std::map<ProcessId, std::string> site_outcomes;
};

PaxosCommitReport run_paxos_commit(const PaxosCommitConfig& config);

}  // namespace d2o
