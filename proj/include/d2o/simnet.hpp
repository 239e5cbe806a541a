#pragma once

// Deterministic discrete-event cluster simulator. Every protocol in this
// project runs against the message/timer contract below; there is no
// wall-clock anywhere in protocol code.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace d2o {

using json = nlohmann::json;
using ProcessId = std::string;
using SimTime = int64_t;  // simulated milliseconds

struct Message {
    ProcessId from;
    ProcessId to;
    std::string kind;
    json body;
    bool is_timer = false;
};

class SimWorld;

// A simulated process. Handlers may send, set timers and mutate owned
// state; they must never block.
class Node {
  public:
    virtual ~Node() = default;
    virtual void on_start(SimWorld& w) { (void)w; }
    virtual void on_message(SimWorld& w, const Message& m) = 0;
};

using NodeFactory = std::function<std::unique_ptr<Node>(SimWorld&, const ProcessId&)>;

struct LinkModel {
    SimTime base_latency_ms = 2;
    SimTime jitter_ms = 3;        // uniform in [0, jitter_ms]
    SimTime send_cost_ms = 2;     // per-message serialization at the sender
    double drop_probability = 0;  // paxos stress knob; 0 in normal runs
};

struct TraceEvent {
    SimTime clock;
    std::string kind;
    std::string digest;
};

// Ordered event log. Equal seeds and inputs must yield byte-identical dumps.
class EventTrace {
  public:
    void record(SimTime clock, const std::string& kind, const std::string& digest);
    std::string dump() const;            // one event per line: <clock>\t<kind>\t<digest>
    uint64_t hash() const;               // FNV-1a over dump()
    const std::vector<TraceEvent>& events() const { return events_; }
    size_t count(const std::string& kind) const;

  private:
    std::vector<TraceEvent> events_;
};

class SimWorld {
  public:
    explicit SimWorld(uint64_t seed);

    // --- topology ---------------------------------------------------------
    void add_process(const ProcessId& id, NodeFactory factory);
    bool has_process(const ProcessId& id) const;
    bool is_up(const ProcessId& id) const;
    std::vector<ProcessId> process_ids() const;
    Node* node(const ProcessId& id);      // nullptr when down
    template <typename T>
    T* node_as(const ProcessId& id) { return dynamic_cast<T*>(node(id)); }

    // --- messaging --------------------------------------------------------
    void send(const ProcessId& from, const ProcessId& to, const std::string& kind,
              json body = json::object());
    void set_timer(const ProcessId& owner, SimTime delay, const std::string& kind,
                   json body = json::object());

    // --- scheduler --------------------------------------------------------
    bool step();                  // dispatch earliest pending item; false when Idle
    void run_until_idle(size_t max_steps = 50'000'000);
    void run_until(SimTime t);    // process everything scheduled strictly before/at t
    void run_while(const std::function<bool()>& keep_going, size_t max_steps = 50'000'000);
    SimTime clock() const { return clock_; }

    // --- failure injection --------------------------------------------------
    void kill(const ProcessId& id);      // drops inbox; volatile state lost, disk kept
    void restart(const ProcessId& id);   // fresh node from the factory, re-runs on_start
    void partition(const std::vector<std::vector<ProcessId>>& groups);
    void heal();
    bool same_partition(const ProcessId& a, const ProcessId& b) const;

    // --- persisted state (survives kill) ------------------------------------
    std::string disk_read(const ProcessId& id, const std::string& file) const;
    void disk_write(const ProcessId& id, const std::string& file, const std::string& content);
    bool disk_has(const ProcessId& id, const std::string& file) const;
    void disk_erase(const ProcessId& id, const std::string& file);
    std::vector<std::string> disk_files(const ProcessId& id) const;

    // --- randomness ----------------------------------------------------------
    uint64_t rng_next();
    uint64_t rng_below(uint64_t bound);  // uniform in [0, bound)

    EventTrace& trace() { return trace_; }
    LinkModel& link() { return link_; }

    // Per-pair fixed latency, for staging exact delivery orders in tests.
    void set_latency_override(const ProcessId& from, const ProcessId& to, SimTime latency);

    // Protocol-level message counter; commit/paxos runs reset and read it.
    uint64_t messages_sent = 0;

  private:
    struct ProcessSlot {
        std::unique_ptr<Node> node;
        NodeFactory factory;
        bool up = false;
        int group = 0;
        uint64_t epoch = 0;
    };

    void dispatch(const Message& m);

    SimTime clock_ = 0;
    uint64_t next_seq_ = 0;
    int sends_this_dispatch_ = 0;
    std::map<std::pair<ProcessId, ProcessId>, SimTime> latency_override_;
    std::map<std::pair<SimTime, uint64_t>, Message> pending_;
    std::map<ProcessId, ProcessSlot> processes_;
    std::map<ProcessId, std::map<std::string, std::string>> disk_;
    std::mt19937_64 rng_;
    EventTrace trace_;
    LinkModel link_;
};

uint64_t fnv1a(const std::string& s);

// Stable 64-bit hash of an instance name; used for ring positions.
uint64_t stable_name_hash(const std::string& name);

}  // namespace d2o
