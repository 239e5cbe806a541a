#include "d2o/commit.hpp"

namespace d2o {

namespace {
// Decision-wait leg at a participant; long enough for a full fan-out round
// at N <= 8 with sender serialization.
constexpr SimTime kDecisionLegFactor = 30;
}  // namespace

std::string to_string(CommitOutcome o) {
    switch (o) {
        case CommitOutcome::Unknown: return "unknown";
        case CommitOutcome::Committed: return "committed";
        case CommitOutcome::Aborted: return "aborted";
        case CommitOutcome::Blocked: return "blocked";
    }
    return "?";
}

bool CommitReport::all_committed() const {
    for (const auto& [id, o] : participant_outcomes) {
        if (o != CommitOutcome::Committed) return false;
    }
    return !participant_outcomes.empty();
}

int CommitReport::count(CommitOutcome o) const {
    int n = 0;
    for (const auto& [id, oc] : participant_outcomes) {
        if (oc == o) ++n;
    }
    return n;
}

CommitCoordinator::CommitCoordinator(CommitProtocol protocol, std::vector<ProcessId> participants,
                                     int kill_after_commit_sends, int kill_after_precommit_sends)
    : protocol_(protocol),
      participants_(std::move(participants)),
      kill_after_commit_sends_(kill_after_commit_sends),
      kill_after_precommit_sends_(kill_after_precommit_sends) {}

void CommitCoordinator::fan_out(SimWorld& w, const std::string& kind, bool skip_initiator,
                                int kill_after) {
    int sent = 0;
    for (size_t i = 0; i < participants_.size(); ++i) {
        if (skip_initiator && i == 0) continue;
        if (kill_after >= 0 && sent >= kill_after) {
            kill_requested = true;  // died mid fan-out; the rest never leave
            return;
        }
        w.send("coord", participants_[i], kind);
        ++sent;
    }
    if (kill_after >= 0) kill_requested = true;
}

void CommitCoordinator::on_message(SimWorld& w, const Message& m) {
    if (m.kind == "begin_commit") {
        votes_[m.from] = m.body.at("prepared").get<bool>();
        fan_out(w, "prepare", true, -1);
        // Vote timeout counts from the departure of the last prepare plus the
        // participants' durable-write cost.
        SimTime fan = SimTime(participants_.size()) * w.link().send_cost_ms;
        w.set_timer("coord", fan + 8 + 10 * w.link().base_latency_ms, "vote_timeout");
        if (participants_.size() == 1) decide(w);
        return;
    }
    if (m.kind == "vote") {
        if (decided_) return;
        votes_[m.from] = m.body.at("prepared").get<bool>();
        if (!votes_[m.from]) {
            decided_ = true;
            decision = CommitOutcome::Aborted;
            fan_out(w, "rollback", false, -1);
            return;
        }
        if (votes_.size() == participants_.size()) decide(w);
        return;
    }
    if (m.kind == "vote_timeout") {
        if (decided_) return;
        decided_ = true;
        decision = CommitOutcome::Aborted;
        fan_out(w, "rollback", false, -1);
        return;
    }
    if (m.kind == "precommit_ack") {
        ++precommit_acks_;
        if (precommit_acks_ == int(participants_.size()) - 1) {
            fan_out(w, "commit", false, kill_after_commit_sends_);
        }
        return;
    }
    if (m.kind == "decision_query") {
        if (decided_ || decision != CommitOutcome::Unknown) {
            w.send("coord", m.from, "decision",
                   {{"committed", decision == CommitOutcome::Committed}});
        }
        return;
    }
}

void CommitCoordinator::decide(SimWorld& w) {
    decided_ = true;
    decision = CommitOutcome::Committed;
    if (protocol_ == CommitProtocol::ThreePhase && participants_.size() > 1) {
        fan_out(w, "precommit", true, kill_after_precommit_sends_);
    } else {
        fan_out(w, "commit", false, kill_after_commit_sends_);
    }
}

CommitParticipant::CommitParticipant(ProcessId self, ProcessId coordinator,
                                     std::vector<ProcessId> peers, bool vote_prepared,
                                     bool initiator, SimTime flush_ms)
    : self_(std::move(self)),
      coordinator_(std::move(coordinator)),
      peers_(std::move(peers)),
      vote_prepared_(vote_prepared),
      initiator_(initiator),
      flush_ms_(flush_ms) {}

void CommitParticipant::on_start(SimWorld& w) {
    if (w.disk_has(self_, "vote")) {
        // restarted with a durable prepared vote: ask the coordinator
        if (w.disk_read(self_, "vote") == "prepared" && outcome == CommitOutcome::Unknown) {
            queried_coordinator_ = true;
            w.send(self_, coordinator_, "decision_query");
            w.set_timer(self_, kDecisionLegFactor * w.link().base_latency_ms, "blocked_timeout",
                        {{"epoch", timer_epoch_}});
        }
        return;
    }
    if (initiator_) {
        // durably record the vote, then one message starts the run
        w.disk_write(self_, "vote", vote_prepared_ ? "prepared" : "aborted");
        voted_ = true;
        w.set_timer(self_, flush_ms_, "flush_done");
    }
}

void CommitParticipant::start_decision_timer(SimWorld& w) {
    ++timer_epoch_;
    w.set_timer(self_, kDecisionLegFactor * w.link().base_latency_ms, "decision_timeout",
                {{"epoch", timer_epoch_}});
}

void CommitParticipant::on_message(SimWorld& w, const Message& m) {
    if (m.kind == "flush_done") {
        w.send(self_, coordinator_, "begin_commit", {{"prepared", vote_prepared_}});
        if (!vote_prepared_) outcome = CommitOutcome::Aborted;
        start_decision_timer(w);
        return;
    }
    if (m.kind == "prepare") {
        w.disk_write(self_, "vote", vote_prepared_ ? "prepared" : "aborted");
        voted_ = true;
        w.set_timer(self_, flush_ms_, "vote_flush_done");
        return;
    }
    if (m.kind == "vote_flush_done") {
        w.send(self_, coordinator_, "vote", {{"prepared", vote_prepared_}});
        if (!vote_prepared_) outcome = CommitOutcome::Aborted;
        start_decision_timer(w);
        return;
    }
    if (m.kind == "precommit") {
        pre_committed_ = true;
        w.send(self_, coordinator_, "precommit_ack");
        start_decision_timer(w);
        return;
    }
    if (m.kind == "commit" || (m.kind == "decision" && m.body.at("committed").get<bool>())) {
        outcome = CommitOutcome::Committed;
        ++timer_epoch_;
        return;
    }
    if (m.kind == "rollback" || (m.kind == "decision" && !m.body.at("committed").get<bool>())) {
        if (outcome != CommitOutcome::Committed) outcome = CommitOutcome::Aborted;
        ++timer_epoch_;
        return;
    }
    if (m.kind == "peer_commit") {
        if (outcome == CommitOutcome::Unknown) {
            outcome = CommitOutcome::Committed;
            ++timer_epoch_;
        }
        return;
    }
    if (m.kind == "decision_timeout") {
        if (m.body.at("epoch").get<int>() != timer_epoch_ || outcome != CommitOutcome::Unknown) return;
        if (pre_committed_) {
            // the global decision to commit is known; commit independently and
            // let prepared-only peers learn it
            outcome = CommitOutcome::Committed;
            ++timer_epoch_;
            for (const auto& p : peers_) {
                if (p != self_) w.send(self_, p, "peer_commit");
            }
            return;
        }
        if (vote_prepared_ && voted_ && !queried_coordinator_) {
            queried_coordinator_ = true;
            w.send(self_, coordinator_, "decision_query");
            ++timer_epoch_;
            w.set_timer(self_, kDecisionLegFactor * w.link().base_latency_ms, "blocked_timeout",
                        {{"epoch", timer_epoch_}});
        }
        return;
    }
    if (m.kind == "blocked_timeout") {
        if (m.body.at("epoch").get<int>() != timer_epoch_ || outcome != CommitOutcome::Unknown) return;
        // Prepared, decision unknown, coordinator unreachable. Under 2PC this
        // participant holds its locks and blocks. Under 3PC nothing can have
        // committed (commit follows a full pre-commit round), so abort.
        bool three_phase = !peers_.empty();
        if (three_phase) {
            outcome = CommitOutcome::Aborted;
        } else {
            outcome = CommitOutcome::Blocked;
        }
        return;
    }
}

CommitReport run_commit(const CommitRunConfig& config) {
    SimWorld world(config.seed);
    const int n = config.participants;
    std::vector<ProcessId> ids;
    for (int i = 0; i < n; ++i) ids.push_back("p" + std::to_string(i));

    const CommitRunConfig cfg = config;
    world.add_process("coord", [cfg, ids](SimWorld&, const ProcessId&) {
        return std::make_unique<CommitCoordinator>(cfg.protocol, ids,
                                                   cfg.kill_coordinator_after_commit_sends,
                                                   cfg.kill_coordinator_after_precommit_sends);
    });
    for (int i = 0; i < n; ++i) {
        bool prepared = config.votes.empty() ? true : config.votes[size_t(i)];
        // peers are only consulted by the 3PC failure path
        std::vector<ProcessId> peers = config.protocol == CommitProtocol::ThreePhase
                                           ? ids
                                           : std::vector<ProcessId>{};
        world.add_process(ids[size_t(i)], [i, prepared, peers, cfg](SimWorld&, const ProcessId& id) {
            return std::make_unique<CommitParticipant>(id, "coord", peers, prepared, i == 0,
                                                       cfg.flush_ms);
        });
    }

    CommitReport report;
    while (world.step()) {
        auto* coord = world.node_as<CommitCoordinator>("coord");
        if (coord && coord->kill_requested) {
            report.coordinator_decision = coord->decision;
            world.kill("coord");
        }
    }

    if (world.is_up("coord")) {
        report.coordinator_decision = world.node_as<CommitCoordinator>("coord")->decision;
    }
    for (const auto& id : ids) {
        auto* p = world.node_as<CommitParticipant>(id);
        report.participant_outcomes[id] = p ? p->outcome : CommitOutcome::Unknown;
    }
    report.messages_sent = world.messages_sent;
    return report;
}

}  // namespace d2o
