#include <doctest.h>

#include "d2o/simnet.hpp"

using namespace d2o;

namespace {

// echoes everything it hears onto the trace; optionally replies
class Probe : public Node {
  public:
    explicit Probe(ProcessId self) : self_(std::move(self)) {}
    void on_message(SimWorld& w, const Message& m) override {
        received.push_back({w.clock(), m.kind});
        if (m.kind == "ping") w.send(self_, m.from, "pong");
        if (m.kind == "fanout") {
            for (int i = 0; i < 3; ++i) w.send(self_, m.body.at("to").get<std::string>(), "burst");
        }
    }
    std::vector<std::pair<SimTime, std::string>> received;

  private:
    ProcessId self_;
};

SimWorld make_world(uint64_t seed, SimTime latency, SimTime jitter) {
    SimWorld w(seed);
    w.link().base_latency_ms = latency;
    w.link().jitter_ms = jitter;
    w.link().send_cost_ms = 0;
    return w;
}

Probe* probe(SimWorld& w, const ProcessId& id) {
    return w.node_as<Probe>(id);
}

void add_probe(SimWorld& w, const ProcessId& id) {
    w.add_process(id, [](SimWorld&, const ProcessId& pid) { return std::make_unique<Probe>(pid); });
}

}  // namespace

TEST_CASE("send: same-group delivery respects latency") {
    SimWorld w = make_world(1, 5, 0);
    add_probe(w, "a");
    add_probe(w, "b");
    w.run_until(100);
    w.send("a", "b", "ping");
    w.run_until_idle();
    REQUIRE(probe(w, "b")->received.size() == 1);
    CHECK(probe(w, "b")->received[0].first >= 105);
}

TEST_CASE("send: cross-partition messages never deliver") {
    SimWorld w = make_world(1, 2, 0);
    add_probe(w, "a");
    add_probe(w, "b");
    add_probe(w, "c");
    w.partition({{"a"}, {"b", "c"}});
    w.send("a", "b", "ping");
    w.send("b", "c", "ping");
    w.run_until_idle();
    CHECK(probe(w, "b")->received.size() == 1);  // only c->b pong path... b got ping from c? no:
    // b received nothing from a; it received nothing else. c received b's ping.
    CHECK(probe(w, "c")->received.size() == 1);
    for (const auto& e : w.trace().events()) {
        if (e.kind == "deliver") CHECK(e.digest.find("a>b") == std::string::npos);
    }
    w.heal();
    w.send("a", "b", "ping");
    w.run_until_idle();
    CHECK(probe(w, "b")->received.size() == 2);
}

TEST_CASE("send: messages to a down process are dropped") {
    SimWorld w = make_world(1, 2, 0);
    add_probe(w, "a");
    add_probe(w, "b");
    w.kill("b");
    w.send("a", "b", "ping");
    w.run_until_idle();
    CHECK(w.trace().count("drop") == 1);
}

TEST_CASE("step: equal-time messages dispatch in enqueue order") {
    SimWorld w = make_world(1, 2, 0);
    add_probe(w, "a");
    add_probe(w, "b");
    w.send("a", "b", "first");
    w.send("a", "b", "second");
    w.run_until_idle();
    REQUIRE(probe(w, "b")->received.size() == 2);
    CHECK(probe(w, "b")->received[0].second == "first");
    CHECK(probe(w, "b")->received[1].second == "second");
}

TEST_CASE("kill drops pending deliveries; restart gets a fresh node") {
    SimWorld w = make_world(1, 5, 0);
    add_probe(w, "a");
    add_probe(w, "b");
    w.send("a", "b", "ping");
    w.kill("b");  // the in-flight ping must vanish
    w.restart("b");
    w.run_until_idle();
    CHECK(probe(w, "b")->received.empty());
}

TEST_CASE("disk state survives kill and restart") {
    SimWorld w = make_world(1, 2, 0);
    add_probe(w, "a");
    w.disk_write("a", "log", "1\tINSERT\n");
    w.kill("a");
    CHECK(w.disk_read("a", "log") == "1\tINSERT\n");
    w.restart("a");
    CHECK(w.disk_read("a", "log") == "1\tINSERT\n");
    w.disk_erase("a", "log");
    CHECK(!w.disk_has("a", "log"));
}

TEST_CASE("determinism: identical seed and inputs give identical traces") {
    auto run = [](uint64_t seed) {
        SimWorld w = make_world(seed, 2, 3);
        add_probe(w, "a");
        add_probe(w, "b");
        add_probe(w, "c");
        for (int i = 0; i < 50; ++i) {
            w.send("a", i % 2 ? "b" : "c", "ping");
            w.set_timer("a", i, "tick");
        }
        w.run_until_idle();
        return w.trace().hash();
    };
    CHECK(run(9) == run(9));
    CHECK(run(9) != run(10));  // jitter differs under another seed
}

TEST_CASE("clock never runs backwards and timers fire at their delay") {
    SimWorld w = make_world(3, 2, 3);
    add_probe(w, "a");
    add_probe(w, "b");
    w.set_timer("a", 50, "late");
    w.set_timer("a", 10, "early");
    w.send("a", "b", "ping");
    SimTime last = 0;
    while (w.step()) {
        CHECK(w.clock() >= last);
        last = w.clock();
    }
    REQUIRE(probe(w, "a")->received.size() == 3);  // early, pong, late
    CHECK(probe(w, "a")->received[0].second == "early");
    CHECK(probe(w, "a")->received.back().second == "late");
}

TEST_CASE("sender serialization spaces out fan-out departures") {
    SimWorld w = make_world(1, 2, 0);
    w.link().send_cost_ms = 2;
    add_probe(w, "a");
    add_probe(w, "b");
    add_probe(w, "c");
    w.send("a", "b", "fanout", {{"to", "c"}});
    w.run_until_idle();
    REQUIRE(probe(w, "c")->received.size() == 3);
    // three sends from one handler leave 2ms apart
    CHECK(probe(w, "c")->received[1].first == probe(w, "c")->received[0].first + 2);
    CHECK(probe(w, "c")->received[2].first == probe(w, "c")->received[1].first + 2);
}

TEST_CASE("trace dump format is line oriented") {
    SimWorld w = make_world(1, 2, 0);
    add_probe(w, "a");
    add_probe(w, "b");
    w.send("a", "b", "ping");
    w.run_until_idle();
    std::string dump = w.trace().dump();
    CHECK(dump.find("\tdeliver\ta>b:ping\n") != std::string::npos);
}
