#include <doctest.h>

#include <algorithm>

#include "d2o/locator.hpp"

using namespace d2o;

namespace {

json req(const std::string& op, uint64_t last_seen, json extra = json::object()) {
    extra["op"] = op;
    extra["last_seen"] = last_seen;
    return extra;
}

}  // namespace

TEST_CASE("descriptor file round-trips and keeps order") {
    DescriptorFile d{{"loc0", "loc1", "loc2"}};
    CHECK(parse_descriptor(serialize_descriptor(d)).locators == d.locators);
    DescriptorFile parsed = parse_descriptor("locB\n# comment\nlocA\n");
    REQUIRE(parsed.locators.size() == 2);
    CHECK(parsed.locators[0] == "locB");  // order is significant
}

TEST_CASE("locator state file format") {
    LocatorState s;
    s.update_number = 7;
    s.active_system_table = "jdbc:d2o:tcp://h:1/p/x";
    s.st_replicas = {"a", "b"};
    std::string text = serialize_locator_state(s);
    CHECK(text == "7\tjdbc:d2o:tcp://h:1/p/x\ta,b");
    LocatorState back = parse_locator_state(text);
    CHECK(back.update_number == 7);
    CHECK(back.active_system_table == s.active_system_table);
    CHECK(back.st_replicas == s.st_replicas);
}

TEST_CASE("fresh server answers reads with update number 0 and no state") {
    LocatorNode server("loc0");
    json resp = server.handle(0, req("get_active", 0));
    CHECK(resp.at("status") == "ok");
    CHECK(resp.at("active") == "");
    CHECK(resp.at("update_number") == 0);
}

TEST_CASE("stale mutations are rejected") {
    LocatorNode server("loc0");
    // three updates move the number to 3
    CHECK(server.handle(0, req("set_active", 0, {{"uri", "a"}})).at("status") == "ok");
    CHECK(server.handle(0, req("set_active", 1, {{"uri", "b"}})).at("status") == "ok");
    CHECK(server.handle(0, req("set_active", 2, {{"uri", "c"}})).at("status") == "ok");
    // a client that last saw 3 short of the current number is refused
    json resp = server.handle(0, req("set_active", 1, {{"uri", "d"}}));
    CHECK(resp.at("status") == "stale");
    CHECK(server.state().active_system_table == "c");
    CHECK(server.state().update_number == 3);
}

TEST_CASE("update number increments by exactly one per successful mutation") {
    LocatorNode server("loc0");
    uint64_t n = 0;
    auto mutate = [&](const json& r) {
        json resp = server.handle(0, r);
        if (resp.at("status") == "ok") {
            CHECK(resp.at("update_number").get<uint64_t>() == n + 1);
            ++n;
        }
    };
    mutate(req("set_active", 0, {{"uri", "a"}}));
    mutate(req("set_replicas", 1, {{"uris", std::vector<std::string>{"a", "b"}}}));
    mutate(req("obtain_lock", 2, {{"requester", "x"}}));
    CHECK(server.state().update_number == 3);
}

TEST_CASE("creation lock is exclusive until expiry") {
    LocatorConfig cfg;
    cfg.creation_lock_timeout_ms = 30'000;
    LocatorNode server("loc0", cfg);
    CHECK(server.handle(0, req("obtain_lock", 0, {{"requester", "A"}})).at("status") == "ok");
    // B is refused while A's lock is unexpired
    json refused = server.handle(10'000, req("obtain_lock", 1, {{"requester", "B"}}));
    CHECK(refused.at("status") == "lock_held");
    CHECK(refused.at("holder") == "A");
    // after the timeout B can take it
    CHECK(server.handle(30'001, req("obtain_lock", 1, {{"requester", "B"}})).at("status") == "ok");
}

TEST_CASE("commit_creation needs the caller's own unexpired lock") {
    LocatorNode server("loc0");
    server.handle(0, req("obtain_lock", 0, {{"requester", "A"}}));
    CHECK(server.handle(0, req("commit_creation", 1, {{"uri", "B"}})).at("status") == "lock_held");
    json ok = server.handle(0, req("commit_creation", 1, {{"uri", "A"}}));
    CHECK(ok.at("status") == "ok");
    CHECK(server.state().active_system_table == "A");
    CHECK(server.state().st_replicas == std::vector<std::string>{"A"});
    CHECK(!server.state().creation_lock);
}

TEST_CASE("lease blocks another instance's registration until expiry") {
    LocatorConfig cfg;
    cfg.lease_duration_ms = 10'000;
    LocatorNode server("loc0", cfg);
    server.handle(0, req("set_active", 0, {{"uri", "A"}}));
    CHECK(server.handle(0, req("lease_acquire", 1, {{"requester", "A"}})).at("status") == "ok");
    // the holder crashed; a replacement before expiry is refused
    json blocked = server.handle(5'000, req("set_active", 1, {{"uri", "B"}}));
    CHECK(blocked.at("status") == "lease_held");
    // after expiry the replacement goes through
    CHECK(server.handle(10'001, req("set_active", 1, {{"uri", "B"}})).at("status") == "ok");
    // renewals by the holder are always allowed
    CHECK(server.handle(12'000, req("lease_acquire", 2, {{"requester", "B"}})).at("status") == "ok");
}

TEST_CASE("racing obtainLock in fixed order: at most one majority, all interleavings") {
    // Two clients walk servers 0,1,2 in order, each sending its next request
    // only after the previous server answered. The global arrival order is a
    // merge of the two sequences: enumerate all C(6,3)=20 of them.
    std::vector<std::vector<int>> merges;
    for (int mask = 0; mask < 64; ++mask) {
        std::vector<int> order;
        int a = 0, b = 0;
        for (int bit = 0; bit < 6; ++bit) {
            if (mask & (1 << bit)) {
                order.push_back(0);
                ++a;
            } else {
                order.push_back(1);
                ++b;
            }
        }
        if (a == 3 && b == 3) merges.push_back(order);
    }
    REQUIRE(merges.size() == 20);

    for (const auto& order : merges) {
        LocatorNode s0("loc0"), s1("loc1"), s2("loc2");
        LocatorNode* servers[3] = {&s0, &s1, &s2};
        int next_server[2] = {0, 0};
        int grants[2] = {0, 0};
        uint64_t last_seen[2][3] = {{0, 0, 0}, {0, 0, 0}};
        const char* names[2] = {"A", "B"};

        for (int who : order) {
            int idx = next_server[who];
            REQUIRE(idx < 3);
            LocatorNode* server = servers[idx];
            json resp = server->handle(0, req("obtain_lock", last_seen[who][idx],
                                              {{"requester", names[who]}}));
            // both clients learn this server's number for any retry logic
            last_seen[0][idx] = last_seen[1][idx] =
                resp.at("update_number").get<uint64_t>();
            if (resp.at("status") == "ok") ++grants[who];
            ++next_server[who];
        }
        int majorities = (grants[0] >= 2 ? 1 : 0) + (grants[1] >= 2 ? 1 : 0);
        CHECK(majorities <= 1);
    }
}

TEST_CASE("read-through repair adopts strictly newer state") {
    LocatorNode server("loc0");
    server.handle(0, req("set_active", 0, {{"uri", "old"}}));
    json repair{{"op", "repair"},
                {"active", "new"},
                {"replicas", std::vector<std::string>{"new"}},
                {"update_number", 5}};
    server.handle(0, repair);
    CHECK(server.state().active_system_table == "new");
    CHECK(server.state().update_number == 5);
    // older repair attempts do nothing
    json stale{{"op", "repair"},
               {"active", "older"},
               {"replicas", std::vector<std::string>{}},
               {"update_number", 2}};
    server.handle(0, stale);
    CHECK(server.state().active_system_table == "new");
}
