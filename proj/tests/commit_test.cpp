#include <doctest.h>

#include "d2o/commit.hpp"

using namespace d2o;

TEST_CASE("2pc: failure-free runs emit exactly 3N-1 messages for N in 1..8") {
    for (int n = 1; n <= 8; ++n) {
        CommitRunConfig config;
        config.protocol = CommitProtocol::TwoPhase;
        config.participants = n;
        CommitReport report = run_commit(config);
        CHECK(report.coordinator_decision == CommitOutcome::Committed);
        CHECK(report.all_committed());
        CHECK(report.messages_sent == uint64_t(3 * n - 1));
    }
}

TEST_CASE("3pc: failure-free runs emit exactly 5N-3 messages for N in 1..8") {
    for (int n = 1; n <= 8; ++n) {
        CommitRunConfig config;
        config.protocol = CommitProtocol::ThreePhase;
        config.participants = n;
        CommitReport report = run_commit(config);
        CHECK(report.coordinator_decision == CommitOutcome::Committed);
        CHECK(report.all_committed());
        CHECK(report.messages_sent == uint64_t(5 * n - 3));
    }
}

TEST_CASE("2pc: one aborted vote aborts everywhere") {
    CommitRunConfig config;
    config.participants = 3;
    config.votes = {true, false, true};
    CommitReport report = run_commit(config);
    CHECK(report.coordinator_decision == CommitOutcome::Aborted);
    CHECK(report.count(CommitOutcome::Aborted) == 3);
    CHECK(report.count(CommitOutcome::Committed) == 0);
}

TEST_CASE("3pc: abort path matches 2pc") {
    CommitRunConfig config;
    config.protocol = CommitProtocol::ThreePhase;
    config.participants = 3;
    config.votes = {true, true, false};
    CommitReport report = run_commit(config);
    CHECK(report.coordinator_decision == CommitOutcome::Aborted);
    CHECK(report.count(CommitOutcome::Aborted) == 3);
}

TEST_CASE("2pc blocks when the coordinator dies mid COMMIT fan-out") {
    // N=2, coordinator killed after 1 of 2 COMMITs delivered
    CommitRunConfig config;
    config.participants = 2;
    config.kill_coordinator_after_commit_sends = 1;
    CommitReport report = run_commit(config);
    CHECK(report.coordinator_decision == CommitOutcome::Committed);
    CHECK(report.count(CommitOutcome::Committed) == 1);
    CHECK(report.count(CommitOutcome::Blocked) == 1);
}

TEST_CASE("3pc: coordinator death after the full pre-commit round commits everywhere") {
    CommitRunConfig config;
    config.protocol = CommitProtocol::ThreePhase;
    config.participants = 3;
    config.kill_coordinator_after_commit_sends = 0;  // decided, no COMMIT sent
    CommitReport report = run_commit(config);
    CHECK(report.count(CommitOutcome::Committed) == 3);
    CHECK(report.count(CommitOutcome::Blocked) == 0);
}

TEST_CASE("agreement holds across single-coordinator-crash schedules") {
    // every post-decision crash point, both protocols, N in 2..4
    for (int n = 2; n <= 4; ++n) {
        for (int k = 0; k < n; ++k) {
            {
                CommitRunConfig c2;
                c2.participants = n;
                c2.kill_coordinator_after_commit_sends = k;
                CommitReport r = run_commit(c2);
                // no participant aborted while another committed
                CHECK((r.count(CommitOutcome::Aborted) == 0 || r.count(CommitOutcome::Committed) == 0));
            }
            {
                CommitRunConfig c3;
                c3.protocol = CommitProtocol::ThreePhase;
                c3.participants = n;
                c3.kill_coordinator_after_commit_sends = k;
                CommitReport r = run_commit(c3);
                CHECK((r.count(CommitOutcome::Aborted) == 0 || r.count(CommitOutcome::Committed) == 0));
                CHECK(r.count(CommitOutcome::Blocked) == 0);  // 3pc never blocks
            }
        }
        // crashes during the pre-commit fan-out
        for (int k = 0; k < n - 1; ++k) {
            CommitRunConfig c3;
            c3.protocol = CommitProtocol::ThreePhase;
            c3.participants = n;
            c3.kill_coordinator_after_precommit_sends = k;
            CommitReport r = run_commit(c3);
            CHECK((r.count(CommitOutcome::Aborted) == 0 || r.count(CommitOutcome::Committed) == 0));
            CHECK(r.count(CommitOutcome::Blocked) == 0);
        }
    }
}

TEST_CASE("2pc blocks where 3pc terminates, for every commit-splitting crash") {
    for (int n = 2; n <= 5; ++n) {
        for (int k = 1; k < n; ++k) {
            CommitRunConfig c2;
            c2.participants = n;
            c2.kill_coordinator_after_commit_sends = k;
            CommitReport r2 = run_commit(c2);
            CHECK(r2.count(CommitOutcome::Blocked) >= 1);

            CommitRunConfig c3;
            c3.protocol = CommitProtocol::ThreePhase;
            c3.participants = n;
            c3.kill_coordinator_after_commit_sends = k;
            CommitReport r3 = run_commit(c3);
            CHECK(r3.count(CommitOutcome::Blocked) == 0);
            CHECK(r3.count(CommitOutcome::Committed) == n);
        }
    }
}

TEST_CASE("a restarted participant with a durable prepared vote asks the coordinator") {
    // drive the nodes directly: prepare, kill, restart, decision query
    SimWorld world(5);
    std::vector<ProcessId> ids{"p0", "p1"};
    world.add_process("coord", [&](SimWorld&, const ProcessId&) {
        return std::make_unique<CommitCoordinator>(CommitProtocol::TwoPhase, ids, -1, -1);
    });
    for (int i = 0; i < 2; ++i) {
        world.add_process(ids[size_t(i)], [&, i](SimWorld&, const ProcessId& id) {
            return std::make_unique<CommitParticipant>(id, "coord", std::vector<ProcessId>{},
                                                       true, i == 0, 8);
        });
    }
    world.run_until_idle();
    CHECK(world.node_as<CommitParticipant>("p1")->outcome == CommitOutcome::Committed);
    // p1 restarts with its durable vote on disk; the coordinator still knows
    world.kill("p1");
    world.restart("p1");
    world.run_until_idle();
    CHECK(world.node_as<CommitParticipant>("p1")->outcome == CommitOutcome::Committed);
}
