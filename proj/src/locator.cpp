#include "d2o/locator.hpp"

#include <sstream>

namespace d2o {

std::string to_string(BootstrapOutcome o) {
    switch (o) {
        case BootstrapOutcome::Pending: return "pending";
        case BootstrapOutcome::Joined: return "joined";
        case BootstrapOutcome::CreatedSystemTable: return "created_system_table";
        case BootstrapOutcome::RestartedSystemTable: return "restarted_system_table";
        case BootstrapOutcome::CannotJoin: return "cannot_join";
    }
    return "?";
}

std::string serialize_descriptor(const DescriptorFile& d) {
    std::string out;
    for (const auto& l : d.locators) out += l + "\n";
    return out;
}

DescriptorFile parse_descriptor(const std::string& text) {
    DescriptorFile d;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        d.locators.push_back(line);
    }
    return d;
}

namespace {
std::string join_csv(const std::vector<std::string>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += v[i];
    }
    return out;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}
}  // namespace

std::string serialize_locator_state(const LocatorState& s) {
    return std::to_string(s.update_number) + "\t" + s.active_system_table + "\t" +
           join_csv(s.st_replicas);
}

LocatorState parse_locator_state(const std::string& text) {
    LocatorState s;
    if (text.empty()) return s;
    size_t t1 = text.find('\t');
    size_t t2 = text.find('\t', t1 + 1);
    s.update_number = std::stoull(text.substr(0, t1));
    s.active_system_table = text.substr(t1 + 1, t2 - t1 - 1);
    std::string rest = text.substr(t2 + 1);
    if (!rest.empty() && rest.back() == '\n') rest.pop_back();
    s.st_replicas = split_csv(rest);
    return s;
}

LocatorNode::LocatorNode(ProcessId self, LocatorConfig config)
    : self_(std::move(self)), config_(config) {}

void LocatorNode::on_start(SimWorld& w) {
    if (w.disk_has(self_, "locator_state")) {
        state_ = parse_locator_state(w.disk_read(self_, "locator_state"));
    }
}

void LocatorNode::persist(SimWorld& w) {
    w.disk_write(self_, "locator_state", serialize_locator_state(state_));
}

json LocatorNode::handle(SimTime now, const json& request) {
    const std::string op = request.at("op").get<std::string>();
    json resp{{"op", op}, {"server", self_}};
    if (request.contains("call")) resp["call"] = request.at("call");

    auto guard_ok = [&]() {
        uint64_t last_seen = request.at("last_seen").get<uint64_t>();
        return last_seen == state_.update_number;
    };
    auto lock_expired = [&]() {
        return !state_.creation_lock || state_.creation_lock->second <= now;
    };
    auto lease_blocks = [&](const std::string& who) {
        return state_.lease && state_.lease->second > now && state_.lease->first != who;
    };

    if (op == "get_active") {
        resp["status"] = "ok";
        resp["active"] = state_.active_system_table;
        resp["update_number"] = state_.update_number;
        return resp;
    }
    if (op == "get_replicas") {
        resp["status"] = "ok";
        resp["replicas"] = state_.st_replicas;
        resp["update_number"] = state_.update_number;
        return resp;
    }
    if (op == "set_active") {
        std::string uri = request.at("uri").get<std::string>();
        if (!guard_ok()) {
            resp["status"] = "stale";
        } else if (lease_blocks(uri)) {
            resp["status"] = "lease_held";
        } else {
            state_.active_system_table = uri;
            ++state_.update_number;
            resp["status"] = "ok";
        }
        resp["update_number"] = state_.update_number;
        return resp;
    }
    if (op == "set_replicas") {
        if (!guard_ok()) {
            resp["status"] = "stale";
        } else {
            state_.st_replicas = request.at("uris").get<std::vector<std::string>>();
            ++state_.update_number;
            resp["status"] = "ok";
        }
        resp["update_number"] = state_.update_number;
        return resp;
    }
    if (op == "obtain_lock") {
        std::string who = request.at("requester").get<std::string>();
        if (!guard_ok()) {
            resp["status"] = "stale";
        } else if (!lock_expired() && state_.creation_lock->first != who) {
            resp["status"] = "lock_held";
            resp["holder"] = state_.creation_lock->first;
        } else {
            state_.creation_lock = {who, now + config_.creation_lock_timeout_ms};
            ++state_.update_number;
            resp["status"] = "ok";
        }
        resp["update_number"] = state_.update_number;
        return resp;
    }
    if (op == "commit_creation") {
        std::string uri = request.at("uri").get<std::string>();
        if (!guard_ok()) {
            resp["status"] = "stale";
        } else if (lock_expired() || state_.creation_lock->first != uri) {
            resp["status"] = "lock_held";
        } else if (lease_blocks(uri)) {
            resp["status"] = "lease_held";
        } else {
            state_.active_system_table = uri;
            state_.st_replicas = {uri};
            state_.creation_lock.reset();
            ++state_.update_number;
            resp["status"] = "ok";
        }
        resp["update_number"] = state_.update_number;
        return resp;
    }
    if (op == "lease_acquire") {
        std::string who = request.at("requester").get<std::string>();
        if (state_.lease && state_.lease->second > now && state_.lease->first != who) {
            resp["status"] = "lease_held";
            resp["holder"] = state_.lease->first;
            resp["expires"] = state_.lease->second;
        } else {
            state_.lease = {who, now + config_.lease_duration_ms};
            resp["status"] = "ok";
            resp["expires"] = state_.lease->second;
        }
        resp["update_number"] = state_.update_number;
        return resp;
    }
    if (op == "repair") {
        // read-through repair: adopt strictly newer majority state
        uint64_t number = request.at("update_number").get<uint64_t>();
        if (number > state_.update_number) {
            state_.active_system_table = request.at("active").get<std::string>();
            state_.st_replicas = request.at("replicas").get<std::vector<std::string>>();
            state_.update_number = number;
        }
        resp["status"] = "ok";
        resp["update_number"] = state_.update_number;
        return resp;
    }
    resp["status"] = "bad_op";
    return resp;
}

void LocatorNode::on_message(SimWorld& w, const Message& m) {
    if (m.kind != "loc_req") return;
    json resp = handle(w.clock(), m.body);
    persist(w);
    w.send(self_, m.from, "loc_resp", resp);
}

}  // namespace d2o
