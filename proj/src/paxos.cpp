#include "d2o/paxos.hpp"

#include <algorithm>

namespace d2o {

AcceptorCore::PrepareResult AcceptorCore::handle_prepare(uint64_t n) {
    if (promised && n <= *promised) return {true, {}};
    promised = n;
    return {false, accepted};
}

bool AcceptorCore::handle_accept(uint64_t n, int64_t v) {
    if (promised && n < *promised) return false;
    promised = std::max<uint64_t>(promised.value_or(0), n);
    accepted = {n, v};
    return true;
}

namespace {

// Acceptor with durable promised/accepted state; notifies every learner on accept.
class AcceptorNode : public Node {
  public:
    AcceptorNode(ProcessId self, std::vector<ProcessId> learners)
        : self_(std::move(self)), learners_(std::move(learners)) {}

    void on_start(SimWorld& w) override {
        if (w.disk_has(self_, "promised")) {
            core_.promised = std::stoull(w.disk_read(self_, "promised"));
        }
        if (w.disk_has(self_, "accepted")) {
            std::string s = w.disk_read(self_, "accepted");
            size_t tab = s.find('\t');
            core_.accepted = {std::stoull(s.substr(0, tab)), std::stoll(s.substr(tab + 1))};
        }
    }

    void on_message(SimWorld& w, const Message& m) override {
        if (m.kind == "prepare") {
            uint64_t n = m.body.at("n").get<uint64_t>();
            auto r = core_.handle_prepare(n);
            persist(w);
            if (r.ignored) return;  // already promised a higher number
            json body{{"n", n}};
            if (r.prior) {
                body["prior_n"] = r.prior->first;
                body["prior_v"] = r.prior->second;
            }
            w.send(self_, m.from, "promise", body);
            return;
        }
        if (m.kind == "accept") {
            uint64_t n = m.body.at("n").get<uint64_t>();
            int64_t v = m.body.at("v").get<int64_t>();
            if (!core_.handle_accept(n, v)) return;
            persist(w);
            w.trace().record(w.clock(), "accepted",
                             self_ + ":" + std::to_string(n) + ":" + std::to_string(v));
            for (const auto& l : learners_) {
                w.send(self_, l, "accepted_notify", {{"n", n}, {"v", v}, {"acceptor", self_}});
            }
            return;
        }
    }

    AcceptorCore core_;

  private:
    void persist(SimWorld& w) {
        if (core_.promised) w.disk_write(self_, "promised", std::to_string(*core_.promised));
        if (core_.accepted) {
            w.disk_write(self_, "accepted", std::to_string(core_.accepted->first) + "\t" +
                                                std::to_string(core_.accepted->second));
        }
    }

    ProcessId self_;
    std::vector<ProcessId> learners_;
};

class LearnerNode : public Node {
  public:
    explicit LearnerNode(int acceptor_count) : majority_(acceptor_count / 2 + 1) {}

    void on_message(SimWorld& w, const Message& m) override {
        if (m.kind != "accepted_notify") return;
        uint64_t n = m.body.at("n").get<uint64_t>();
        int64_t v = m.body.at("v").get<int64_t>();
        auto& entry = by_number_[n];
        entry.first = v;
        entry.second.insert(m.body.at("acceptor").get<std::string>());
        if (int(entry.second.size()) >= majority_ && !chosen) {
            chosen = v;
            w.trace().record(w.clock(), "chosen", std::to_string(v));
        }
    }

    std::optional<int64_t> chosen;

  private:
    int majority_;
    std::map<uint64_t, std::pair<int64_t, std::set<std::string>>> by_number_;
};

class ProposerNode : public Node {
  public:
    ProposerNode(ProcessId self, int index, int proposer_count, int64_t value,
                 std::vector<ProcessId> acceptors, SimTime start_delay, int max_rounds,
                 std::optional<uint64_t> fixed_number)
        : self_(std::move(self)),
          index_(index),
          proposer_count_(proposer_count),
          value_(value),
          acceptors_(std::move(acceptors)),
          start_delay_(start_delay),
          max_rounds_(max_rounds),
          fixed_number_(fixed_number) {}

    void on_start(SimWorld& w) override { w.set_timer(self_, start_delay_, "kick"); }

    void on_message(SimWorld& w, const Message& m) override {
        if (m.kind == "kick" || m.kind == "round_timeout") {
            if (m.kind == "round_timeout" && m.body.at("round").get<int>() != round_) return;
            if (round_ >= max_rounds_) return;  // stalls are legal
            start_round(w);
            return;
        }
        if (m.kind == "promise") {
            if (m.body.at("n").get<uint64_t>() != current_number_) return;
            ++promises_;
            if (m.body.contains("prior_n")) {
                uint64_t pn = m.body.at("prior_n").get<uint64_t>();
                if (!best_prior_ || pn > best_prior_->first) {
                    best_prior_ = {pn, m.body.at("prior_v").get<int64_t>()};
                }
            }
            if (promises_ >= int(acceptors_.size()) / 2 + 1 && !accept_issued_) {
                accept_issued_ = true;
                // adopt the value of the highest-numbered proposal seen, else our own
                int64_t v = best_prior_ ? best_prior_->second : value_;
                for (const auto& a : acceptors_) {
                    w.send(self_, a, "accept", {{"n", current_number_}, {"v", v}});
                }
            }
            return;
        }
    }

  private:
    void start_round(SimWorld& w) {
        current_number_ = fixed_number_ && round_ == 0
                              ? *fixed_number_
                              : uint64_t(round_) * uint64_t(proposer_count_) + uint64_t(index_) + 1;
        ++round_;
        promises_ = 0;
        accept_issued_ = false;
        best_prior_.reset();
        for (const auto& a : acceptors_) {
            w.send(self_, a, "prepare", {{"n", current_number_}});
        }
        w.set_timer(self_, 40 * w.link().base_latency_ms, "round_timeout", {{"round", round_}});
    }

    ProcessId self_;
    int index_;
    int proposer_count_;
    int64_t value_;
    std::vector<ProcessId> acceptors_;
    SimTime start_delay_;
    int max_rounds_;
    std::optional<uint64_t> fixed_number_;
    int round_ = 0;
    uint64_t current_number_ = 0;
    int promises_ = 0;
    bool accept_issued_ = false;
    std::optional<std::pair<uint64_t, int64_t>> best_prior_;
};

}  // namespace

PaxosReport run_paxos(const PaxosConfig& config) {
    return run_paxos_staged(config, {});
}

PaxosReport run_paxos_staged(const PaxosConfig& config,
                             const std::function<void(SimWorld&)>& stage) {
    SimWorld world(config.seed);
    world.link().jitter_ms = config.jitter_ms;
    world.link().drop_probability = config.drop_probability;

    std::vector<ProcessId> acceptor_ids;
    for (int i = 0; i < config.acceptors; ++i) acceptor_ids.push_back("acc" + std::to_string(i));
    std::vector<ProcessId> learners{"learner"};

    world.add_process("learner", [n = config.acceptors](SimWorld&, const ProcessId&) {
        return std::make_unique<LearnerNode>(n);
    });
    for (const auto& id : acceptor_ids) {
        world.add_process(id, [learners](SimWorld&, const ProcessId& pid) {
            return std::make_unique<AcceptorNode>(pid, learners);
        });
    }
    for (int i = 0; i < config.proposers; ++i) {
        int64_t value = i < int(config.values.size()) ? config.values[size_t(i)] : 100 + i;
        SimTime delay = i < int(config.start_delays.size()) ? config.start_delays[size_t(i)] : 0;
        std::optional<uint64_t> fixed;
        if (i < int(config.fixed_numbers.size())) fixed = config.fixed_numbers[size_t(i)];
        world.add_process("prop" + std::to_string(i),
                          [=, p = config.proposers, mr = config.max_rounds](SimWorld&, const ProcessId& pid) {
                              return std::make_unique<ProposerNode>(pid, i, p, value, acceptor_ids,
                                                                    delay, mr, fixed);
                          });
    }

    if (stage) stage(world);

    // crash/recovery schedule for acceptors (durable state)
    if (config.acceptor_restarts.empty()) {
        world.run_until_idle();
    } else {
        std::vector<std::tuple<SimTime, bool, int>> plan;  // (time, is_kill, acceptor)
        for (const auto& [kill_at, restart_at, idx] : config.acceptor_restarts) {
            plan.emplace_back(kill_at, true, idx);
            plan.emplace_back(restart_at, false, idx);
        }
        std::sort(plan.begin(), plan.end());
        for (const auto& [at, is_kill, idx] : plan) {
            world.run_until(at);
            ProcessId id = "acc" + std::to_string(idx);
            if (is_kill && world.is_up(id)) world.kill(id);
            if (!is_kill && !world.is_up(id)) world.restart(id);
        }
        world.run_until_idle();
    }

    PaxosReport report;
    report.messages_sent = world.messages_sent;
    auto* learner = world.node_as<LearnerNode>("learner");
    if (learner) report.learner_chosen = learner->chosen;

    // Recompute chosen values from the acceptors' own accept events: a value is
    // chosen when some proposal number reaches an acceptor majority.
    std::map<uint64_t, std::pair<std::set<std::string>, std::set<int64_t>>> by_number;
    for (const auto& e : world.trace().events()) {
        if (e.kind != "accepted") continue;
        size_t c1 = e.digest.find(':');
        size_t c2 = e.digest.find(':', c1 + 1);
        uint64_t n = std::stoull(e.digest.substr(c1 + 1, c2 - c1 - 1));
        by_number[n].first.insert(e.digest.substr(0, c1));
        by_number[n].second.insert(std::stoll(e.digest.substr(c2 + 1)));
    }
    int majority = config.acceptors / 2 + 1;
    std::set<int64_t> chosen;
    for (const auto& [n, entry] : by_number) {
        if (entry.second.size() > 1) report.safety_violated = true;  // one value per ballot
        if (int(entry.first.size()) >= majority) chosen.insert(*entry.second.begin());
    }
    report.chosen_values.assign(chosen.begin(), chosen.end());
    if (chosen.size() > 1) report.safety_violated = true;
    return report;
}

// --- atomic commit -----------------------------------------------------------

namespace {

// A replica site proposes its own vote (proposal number 0) to its own
// acceptor set; the coordinator learns from every site's acceptors.
class CommitSiteNode : public Node {
  public:
    CommitSiteNode(ProcessId self, bool initiator, bool vote,
                   std::vector<ProcessId> acceptors)
        : self_(std::move(self)), initiator_(initiator), vote_(vote),
          acceptors_(std::move(acceptors)) {}

    void on_start(SimWorld& w) override {
        if (initiator_) {
            w.send(self_, "coord", "begin_commit", {{"prepared", vote_}});
            run_instance(w);
        }
    }

    void on_message(SimWorld& w, const Message& m) override {
        if (m.kind == "prepare_request") {
            run_instance(w);
            w.send(self_, "coord", "vote", {{"prepared", vote_}});
            return;
        }
        if (m.kind == "commit") outcome = "committed";
        if (m.kind == "rollback") outcome = "aborted";
    }

    std::string outcome = "unknown";

  private:
    void run_instance(SimWorld& w) {
        for (const auto& a : acceptors_) {
            w.send(self_, a, "accept", {{"n", 0}, {"v", vote_ ? 1 : 0}});
        }
    }

    ProcessId self_;
    bool initiator_;
    bool vote_;
    std::vector<ProcessId> acceptors_;
};

class CommitLearnerNode : public Node {
  public:
    CommitLearnerNode(std::vector<ProcessId> sites, int acceptors_per_site)
        : sites_(std::move(sites)), majority_(acceptors_per_site / 2 + 1) {}

    void on_message(SimWorld& w, const Message& m) override {
        if (m.kind == "begin_commit") {
            site_votes_[m.from] = m.body.at("prepared").get<bool>();
            for (size_t i = 1; i < sites_.size(); ++i) {
                w.send("coord", sites_[i], "prepare_request");
            }
            w.set_timer("coord", 60 * w.link().base_latency_ms + SimTime(sites_.size()) * 4 *
                                     w.link().send_cost_ms,
                        "commit_timeout");
            maybe_decide(w);
            return;
        }
        if (m.kind == "accepted_notify") {
            // acceptor ids look like s<i>.a<j>
            std::string site = m.body.at("acceptor").get<std::string>();
            site = site.substr(0, site.find('.'));
            bool prepared = m.body.at("v").get<int64_t>() == 1;
            auto& entry = acks_[site];
            entry.first.insert(m.body.at("acceptor").get<std::string>());
            entry.second = prepared;
            maybe_decide(w);
            return;
        }
        if (m.kind == "vote") {
            site_votes_[m.from] = m.body.at("prepared").get<bool>();
            return;
        }
        if (m.kind == "commit_timeout") {
            if (!decided_) {
                decided_ = true;
                decision = "aborted";
                for (const auto& s : sites_) w.send("coord", s, "rollback");
            }
            return;
        }
    }

    std::string decision = "unknown";

  private:
    void maybe_decide(SimWorld& w) {
        if (decided_) return;
        bool any_abort = false;
        int decided_sites = 0;
        for (const auto& s : sites_) {
            auto it = acks_.find(s);
            if (it == acks_.end() || int(it->second.first.size()) < majority_) continue;
            ++decided_sites;
            if (!it->second.second) any_abort = true;
        }
        if (any_abort) {
            decided_ = true;
            decision = "aborted";
            for (const auto& s : sites_) w.send("coord", s, "rollback");
            return;
        }
        if (decided_sites == int(sites_.size())) {
            decided_ = true;
            decision = "committed";
            for (const auto& s : sites_) w.send("coord", s, "commit");
        }
    }

    std::vector<ProcessId> sites_;
    int majority_;
    bool decided_ = false;
    std::map<ProcessId, std::pair<std::set<ProcessId>, bool>> acks_;
    std::map<ProcessId, bool> site_votes_;
};

}  // namespace

PaxosCommitReport run_paxos_commit(const PaxosCommitConfig& config) {
    SimWorld world(config.seed);
    const int n = config.participants;
    const int f = config.acceptors_per_site;

    std::vector<ProcessId> sites;
    for (int i = 0; i < n; ++i) sites.push_back("s" + std::to_string(i));

    world.add_process("coord", [sites, f](SimWorld&, const ProcessId&) {
        return std::make_unique<CommitLearnerNode>(sites, f);
    });
    for (int i = 0; i < n; ++i) {
        std::vector<ProcessId> accs;
        for (int j = 0; j < f; ++j) accs.push_back(sites[size_t(i)] + ".a" + std::to_string(j));
        for (const auto& a : accs) {
            world.add_process(a, [](SimWorld&, const ProcessId& pid) {
                return std::make_unique<AcceptorNode>(pid, std::vector<ProcessId>{"coord"});
            });
        }
        bool vote = config.votes.empty() ? true : config.votes[size_t(i)];
        world.add_process(sites[size_t(i)], [i, vote, accs](SimWorld&, const ProcessId& pid) {
            return std::make_unique<CommitSiteNode>(pid, i == 0, vote, accs);
        });
    }
    for (int idx : config.dead_sites) world.kill(sites.at(size_t(idx)));

    world.run_until_idle();

    PaxosCommitReport report;
    report.messages_sent = world.messages_sent;
    auto* coord = world.node_as<CommitLearnerNode>("coord");
    report.committed = coord && coord->decision == "committed";
    report.aborted = coord && coord->decision == "aborted";
    for (const auto& s : sites) {
        auto* site = world.node_as<CommitSiteNode>(s);
        report.site_outcomes[s] = site ? site->outcome : "dead";
    }
    return report;
}

}  // namespace d2o
