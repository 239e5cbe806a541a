#pragma once

// Two-phase and three-phase atomic commit with exact message accounting.
// Failure-free runs emit exactly 3N-1 (2PC) and 5N-3 (3PC) messages:
// one message from the initiating participant to start the run, N-1 prepares,
// N-1 vote responses and N commits, plus (3PC) two sets of N-1 messages for
// the pre-commit round.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "d2o/simnet.hpp"

namespace d2o {

enum class CommitProtocol { TwoPhase, ThreePhase };
enum class CommitOutcome { Unknown, Committed, Aborted, Blocked };

std::string to_string(CommitOutcome o);

struct CommitRunConfig {
    CommitProtocol protocol = CommitProtocol::TwoPhase;
    int participants = 3;
    std::vector<bool> votes;  // empty = all prepared
    // Failure injection: kill the coordinator right after it has sent this
    // many COMMIT / PRE-COMMIT messages (post-decision). -1 disables.
    int kill_coordinator_after_commit_sends = -1;
    int kill_coordinator_after_precommit_sends = -1;
    uint64_t seed = 1;
    SimTime flush_ms = 8;  // durable-vote cost before a participant replies
};

struct CommitReport {
    std::map<ProcessId, CommitOutcome> participant_outcomes;
    CommitOutcome coordinator_decision = CommitOutcome::Unknown;
    uint64_t messages_sent = 0;

    bool all_committed() const;
    int count(CommitOutcome o) const;
};

CommitReport run_commit(const CommitRunConfig& config);

// --- sim nodes (exposed for engine-level reuse of the message shapes) -------

class CommitCoordinator : public Node {
  public:
    CommitCoordinator(CommitProtocol protocol, std::vector<ProcessId> participants,
                      int kill_after_commit_sends, int kill_after_precommit_sends);

    void on_message(SimWorld& w, const Message& m) override;

    CommitOutcome decision = CommitOutcome::Unknown;
    bool kill_requested = false;

  private:
    void decide(SimWorld& w);
    void fan_out(SimWorld& w, const std::string& kind, bool skip_initiator, int kill_after);

    CommitProtocol protocol_;
    std::vector<ProcessId> participants_;
    std::map<ProcessId, bool> votes_;
    int precommit_acks_ = 0;
    bool decided_ = false;
    int kill_after_commit_sends_;
    int kill_after_precommit_sends_;
};

class CommitParticipant : public Node {
  public:
    CommitParticipant(ProcessId self, ProcessId coordinator, std::vector<ProcessId> peers,
                      bool vote_prepared, bool initiator, SimTime flush_ms);

    void on_start(SimWorld& w) override;
    void on_message(SimWorld& w, const Message& m) override;

    CommitOutcome outcome = CommitOutcome::Unknown;

  private:
    void start_decision_timer(SimWorld& w);

    ProcessId self_;
    ProcessId coordinator_;
    std::vector<ProcessId> peers_;
    bool vote_prepared_;
    bool initiator_;
    SimTime flush_ms_;
    bool voted_ = false;
    bool pre_committed_ = false;
    bool queried_coordinator_ = false;
    int timer_epoch_ = 0;
};

}  // namespace d2o
