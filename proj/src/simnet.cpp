#include "d2o/simnet.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace d2o {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

uint64_t stable_name_hash(const std::string& name) {
    return fnv1a(name);
}

void EventTrace::record(SimTime clock, const std::string& kind, const std::string& digest) {
    events_.push_back({clock, kind, digest});
}

std::string EventTrace::dump() const {
    std::ostringstream out;
    for (const auto& e : events_) {
        out << e.clock << '\t' << e.kind << '\t' << e.digest << '\n';
    }
    return out.str();
}

uint64_t EventTrace::hash() const {
    return fnv1a(dump());
}

size_t EventTrace::count(const std::string& kind) const {
    size_t n = 0;
    for (const auto& e : events_) {
        if (e.kind == kind) ++n;
    }
    return n;
}

SimWorld::SimWorld(uint64_t seed) : rng_(seed) {}

void SimWorld::add_process(const ProcessId& id, NodeFactory factory) {
    if (processes_.count(id)) throw std::logic_error("duplicate process id: " + id);
    ProcessSlot slot;
    slot.factory = std::move(factory);
    slot.up = true;
    slot.node = slot.factory(*this, id);
    auto [it, ok] = processes_.emplace(id, std::move(slot));
    (void)ok;
    it->second.node->on_start(*this);
}

bool SimWorld::has_process(const ProcessId& id) const {
    return processes_.count(id) != 0;
}

bool SimWorld::is_up(const ProcessId& id) const {
    auto it = processes_.find(id);
    return it != processes_.end() && it->second.up;
}

std::vector<ProcessId> SimWorld::process_ids() const {
    std::vector<ProcessId> out;
    for (const auto& [id, slot] : processes_) out.push_back(id);
    return out;
}

Node* SimWorld::node(const ProcessId& id) {
    auto it = processes_.find(id);
    if (it == processes_.end() || !it->second.up) return nullptr;
    return it->second.node.get();
}

void SimWorld::send(const ProcessId& from, const ProcessId& to, const std::string& kind,
                    json body) {
    auto fit = processes_.find(from);
    if (fit == processes_.end() || !fit->second.up) return;  // dead senders send nothing
    ++messages_sent;
    SimTime departure = SimTime(sends_this_dispatch_) * link_.send_cost_ms;
    ++sends_this_dispatch_;

    auto tit = processes_.find(to);
    if (tit == processes_.end() || !tit->second.up || !same_partition(from, to)) {
        trace_.record(clock_, "drop", from + ">" + to + ":" + kind);
        return;
    }
    if (link_.drop_probability > 0) {
        uint64_t r = rng_next();
        if (double(r % 1000000) / 1000000.0 < link_.drop_probability) {
            trace_.record(clock_, "drop", from + ">" + to + ":" + kind);
            return;
        }
    }
    SimTime deliver;
    auto ov = latency_override_.find({from, to});
    if (ov != latency_override_.end()) {
        deliver = clock_ + departure + ov->second;
    } else {
        SimTime jitter = link_.jitter_ms > 0 ? SimTime(rng_below(uint64_t(link_.jitter_ms) + 1)) : 0;
        deliver = clock_ + departure + link_.base_latency_ms + jitter;
    }
    Message m{from, to, kind, std::move(body), false};
    pending_.emplace(std::make_pair(deliver, next_seq_++), std::move(m));
}

void SimWorld::set_timer(const ProcessId& owner, SimTime delay, const std::string& kind,
                         json body) {
    auto it = processes_.find(owner);
    if (it == processes_.end() || !it->second.up) return;
    Message m{owner, owner, kind, std::move(body), true};
    pending_.emplace(std::make_pair(clock_ + delay, next_seq_++), std::move(m));
}

bool SimWorld::step() {
    if (pending_.empty()) return false;
    auto it = pending_.begin();
    SimTime t = it->first.first;
    Message m = std::move(it->second);
    pending_.erase(it);
    if (t < clock_) throw std::logic_error("clock regression");
    clock_ = t;
    dispatch(m);
    return true;
}

void SimWorld::dispatch(const Message& m) {
    auto it = processes_.find(m.to);
    if (it == processes_.end() || !it->second.up) {
        trace_.record(clock_, "drop", m.from + ">" + m.to + ":" + m.kind);
        return;
    }
    trace_.record(clock_, m.is_timer ? "timer" : "deliver", m.from + ">" + m.to + ":" + m.kind);
    sends_this_dispatch_ = 0;
    it->second.node->on_message(*this, m);
}

void SimWorld::run_until_idle(size_t max_steps) {
    size_t steps = 0;
    while (step()) {
        if (++steps > max_steps) throw std::runtime_error("run_until_idle: step budget exceeded");
    }
}

void SimWorld::run_until(SimTime t) {
    while (!pending_.empty() && pending_.begin()->first.first <= t) step();
    if (clock_ < t) clock_ = t;
}

void SimWorld::run_while(const std::function<bool()>& keep_going, size_t max_steps) {
    size_t steps = 0;
    while (keep_going() && step()) {
        if (++steps > max_steps) throw std::runtime_error("run_while: step budget exceeded");
    }
}

void SimWorld::kill(const ProcessId& id) {
    auto it = processes_.find(id);
    if (it == processes_.end() || !it->second.up) throw std::logic_error("kill: invalid target " + id);
    it->second.up = false;
    it->second.node.reset();  // volatile state is gone
    ++it->second.epoch;
    for (auto p = pending_.begin(); p != pending_.end();) {
        if (p->second.to == id) {
            p = pending_.erase(p);
        } else {
            ++p;
        }
    }
    trace_.record(clock_, "kill", id);
}

void SimWorld::restart(const ProcessId& id) {
    auto it = processes_.find(id);
    if (it == processes_.end() || it->second.up) throw std::logic_error("restart: invalid target " + id);
    it->second.up = true;
    it->second.node = it->second.factory(*this, id);
    trace_.record(clock_, "restart", id);
    it->second.node->on_start(*this);
}

void SimWorld::partition(const std::vector<std::vector<ProcessId>>& groups) {
    // Unlisted processes share a residual group.
    for (auto& [id, slot] : processes_) slot.group = 0;
    int g = 1;
    std::string digest;
    for (const auto& group : groups) {
        for (const auto& id : group) {
            auto it = processes_.find(id);
            if (it == processes_.end()) throw std::logic_error("partition: unknown process " + id);
            it->second.group = g;
            digest += id + ",";
        }
        digest += "|";
        ++g;
    }
    trace_.record(clock_, "partition", digest);
}

void SimWorld::heal() {
    for (auto& [id, slot] : processes_) slot.group = 0;
    trace_.record(clock_, "heal", "");
}

bool SimWorld::same_partition(const ProcessId& a, const ProcessId& b) const {
    auto ia = processes_.find(a);
    auto ib = processes_.find(b);
    if (ia == processes_.end() || ib == processes_.end()) return false;
    return ia->second.group == ib->second.group;
}

std::string SimWorld::disk_read(const ProcessId& id, const std::string& file) const {
    auto it = disk_.find(id);
    if (it == disk_.end()) return "";
    auto fit = it->second.find(file);
    return fit == it->second.end() ? "" : fit->second;
}

void SimWorld::disk_write(const ProcessId& id, const std::string& file, const std::string& content) {
    disk_[id][file] = content;
}

bool SimWorld::disk_has(const ProcessId& id, const std::string& file) const {
    auto it = disk_.find(id);
    return it != disk_.end() && it->second.count(file) != 0;
}

void SimWorld::disk_erase(const ProcessId& id, const std::string& file) {
    auto it = disk_.find(id);
    if (it != disk_.end()) it->second.erase(file);
}

std::vector<std::string> SimWorld::disk_files(const ProcessId& id) const {
    std::vector<std::string> out;
    auto it = disk_.find(id);
    if (it == disk_.end()) return out;
    for (const auto& [name, _] : it->second) out.push_back(name);
    return out;
}

void SimWorld::set_latency_override(const ProcessId& from, const ProcessId& to, SimTime latency) {
    latency_override_[{from, to}] = latency;
}

uint64_t SimWorld::rng_next() {
    return rng_();
}

uint64_t SimWorld::rng_below(uint64_t bound) {
    // modulo bias is irrelevant at these bounds
    return bound == 0 ? 0 : rng_next() % bound;
}

}  // namespace d2o
