#pragma once

// Locator servers: the external quorum service recording the active System
// Table and its state-replica locations. Mutations are guarded by a monotone
// update number; System Table creation is serialized by a timed lock.

#include <optional>
#include <string>
#include <vector>

#include "d2o/simnet.hpp"

namespace d2o {

enum class BootstrapOutcome {
    Pending,
    Joined,
    CreatedSystemTable,
    RestartedSystemTable,
    CannotJoin,
};

std::string to_string(BootstrapOutcome o);

// Ordered list of locator addresses; the order is identical for every
// instance and load-bearing (fixed-order access prevents deadlock).
struct DescriptorFile {
    std::vector<ProcessId> locators;
};

std::string serialize_descriptor(const DescriptorFile& d);
DescriptorFile parse_descriptor(const std::string& text);

struct LocatorConfig {
    SimTime creation_lock_timeout_ms = 30'000;
    SimTime lease_duration_ms = 10'000;
};

struct LocatorState {
    std::string active_system_table;      // empty = none
    std::vector<std::string> st_replicas;
    uint64_t update_number = 0;
    std::optional<std::pair<std::string, SimTime>> creation_lock;  // holder, expires
    std::optional<std::pair<std::string, SimTime>> lease;          // holder, expires
};

// Persisted locator state: `<update_number>\t<active_uri>\t<replica_uri_csv>`.
std::string serialize_locator_state(const LocatorState& s);
LocatorState parse_locator_state(const std::string& text);

// One locator server process. Request body: {call, op, last_seen, ...};
// response: {call, op, status, update_number, ...}.
class LocatorNode : public Node {
  public:
    explicit LocatorNode(ProcessId self, LocatorConfig config = {});

    void on_start(SimWorld& w) override;
    void on_message(SimWorld& w, const Message& m) override;

    const LocatorState& state() const { return state_; }

    // Direct-call entry point, used by the interleaving-enumeration tests.
    json handle(SimTime now, const json& request);

  private:
    void persist(SimWorld& w);

    ProcessId self_;
    LocatorConfig config_;
    LocatorState state_;
};

// Outcome of a fixed-order quorum call, evaluated by the client.
struct QuorumOutcome {
    enum Status { Ok, NoMajority, Stale, LockHeld, LeaseHeld } status = NoMajority;
    std::string value;                 // majority-consistent active ST (reads)
    std::vector<std::string> replicas; // majority-consistent replica list (reads)
    uint64_t update_number = 0;        // highest seen among agreeing servers
    int grants = 0;                    // obtain_lock: servers granting
};

}  // namespace d2o
