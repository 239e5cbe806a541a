#include "d2o/engine.hpp"

#include <algorithm>
#include <sstream>

namespace d2o {

namespace {

std::vector<std::string> from_json_list(const json& j) {
    return j.get<std::vector<std::string>>();
}

std::string schema_to_cols(const TableSchema& schema) {
    std::string out;
    for (size_t i = 0; i < schema.columns.size(); ++i) {
        if (i) out += ", ";
        const auto& [name, type] = schema.columns[i];
        out += name + " ";
        switch (type.kind) {
            case ColumnKind::Int: out += "int"; break;
            case ColumnKind::BigInt: out += "bigint"; break;
            case ColumnKind::Varchar: out += "varchar(" + std::to_string(type.varchar_len) + ")"; break;
        }
    }
    return out;
}

uint64_t mix(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

json SystemTableState::to_json() const {
    json j;
    j["table_tm"] = table_tm;
    j["tm_meta_holders"] = tm_meta_holders;
    j["schemas"] = schemas;
    j["members"] = members;
    j["st_meta_holders"] = st_meta_holders;
    j["version"] = version;
    return j;
}

SystemTableState SystemTableState::from_json(const json& j) {
    SystemTableState s;
    s.table_tm = j.at("table_tm").get<std::map<std::string, std::string>>();
    s.tm_meta_holders = j.at("tm_meta_holders").get<std::map<std::string, std::vector<std::string>>>();
    s.schemas = j.at("schemas").get<std::map<std::string, std::string>>();
    s.members = from_json_list(j.at("members"));
    s.st_meta_holders = from_json_list(j.at("st_meta_holders"));
    s.version = j.at("version").get<uint64_t>();
    return s;
}

json TableManagerState::to_json() const {
    json j;
    j["table"] = table;
    j["schema_cols"] = schema_cols;
    j["holders"] = holders;
    j["stale"] = std::vector<std::string>(stale.begin(), stale.end());
    j["meta_holders"] = meta_holders;
    j["version"] = version;
    return j;
}

TableManagerState TableManagerState::from_json(const json& j) {
    TableManagerState t;
    t.table = j.at("table").get<std::string>();
    t.schema_cols = j.at("schema_cols").get<std::string>();
    t.holders = from_json_list(j.at("holders"));
    for (const auto& s : from_json_list(j.at("stale"))) t.stale.insert(s);
    t.meta_holders = from_json_list(j.at("meta_holders"));
    t.version = j.at("version").get<uint64_t>();
    return t;
}

std::vector<std::string> TableManagerState::current_holders() const {
    std::vector<std::string> out;
    for (const auto& h : holders) {
        if (!stale.count(h)) out.push_back(h);
    }
    return out;
}

bool TableManagerState::can_grant(const LockReq& req) const {
    if (lock_holders.empty()) return true;
    if (req.exclusive) return false;
    for (const auto& h : lock_holders) {
        if (h.exclusive) return false;
    }
    return true;
}

DescriptorFile make_descriptor(int locators) {
    DescriptorFile d;
    for (int i = 0; i < locators; ++i) d.locators.push_back("loc" + std::to_string(i));
    return d;
}

void add_locators(SimWorld& w, const ClusterConfig& cfg) {
    w.link().base_latency_ms = cfg.base_latency_ms;
    w.link().jitter_ms = cfg.jitter_ms;
    w.link().send_cost_ms = cfg.send_cost_ms;
    for (int i = 0; i < cfg.locators; ++i) {
        w.add_process("loc" + std::to_string(i), [](SimWorld&, const ProcessId& id) {
            return std::make_unique<LocatorNode>(id);
        });
    }
}

InstanceNode* add_instance(SimWorld& w, const ClusterConfig& cfg, const std::string& name,
                           bool replica_target) {
    DescriptorFile desc = make_descriptor(cfg.locators);
    EngineConfig engine = cfg.engine;
    engine.replica_target = replica_target;
    engine.fail_timeout_ms = 20 * cfg.base_latency_ms;
    if (!w.has_process(name)) {
        w.add_process(name, [desc, engine](SimWorld&, const ProcessId& id) {
            return std::make_unique<InstanceNode>(id, desc, engine);
        });
    } else {
        w.restart(name);
    }
    return w.node_as<InstanceNode>(name);
}

InstanceNode::InstanceNode(ProcessId self, DescriptorFile descriptor, EngineConfig config)
    : self_(std::move(self)), descriptor_(std::move(descriptor)), config_(std::move(config)) {}

void InstanceNode::on_start(SimWorld& w) {
    // reload persisted data replicas; they stay out of service until the
    // Table Manager accepts the rejoin
    for (const auto& file : w.disk_files(self_)) {
        if (file.rfind("log_", 0) == 0) {
            std::string table = file.substr(4);
            std::string schema_cols = w.disk_read(self_, "schema_" + table);
            if (schema_cols.empty()) continue;
            LocalReplica rep;
            rep.store = replay_log(parse_schema_columns(table, schema_cols),
                                   parse_log(w.disk_read(self_, file)));
            rep.current = false;
            replicas_.emplace(table, std::move(rep));
        }
        if (file == "st_meta") {
            json j = json::parse(w.disk_read(self_, file));
            st_meta_ = {j.at("version").get<uint64_t>(),
                        SystemTableState::from_json(j.at("state"))};
        }
        if (file.rfind("tm_meta_", 0) == 0) {
            json j = json::parse(w.disk_read(self_, file));
            tm_meta_[file.substr(8)] = {j.at("version").get<uint64_t>(),
                                        TableManagerState::from_json(j.at("state"))};
        }
    }
    window_start_ = w.clock();
    w.set_timer(self_, config_.sensor_period_ms, "sensor_tick");
    w.set_timer(self_, config_.summary_period_ms, "summary_tick");
    w.set_timer(self_, config_.maintenance_period_ms, "maint_tick");
    w.set_timer(self_, config_.ring_period_ms, "ring_tick");
    if (config_.write_delay) w.set_timer(self_, config_.write_delay_window_ms, "flush_window");
    bootstrap_begin(w);
}

// --------------------------------------------------------------------------
// locator client: fixed-order sequential quorum calls
// --------------------------------------------------------------------------

void InstanceNode::locator_call(SimWorld& w, const std::string& op, json payload,
                                std::function<void(const QuorumOutcome&)> done) {
    LocCall call;
    call.id = next_call_id_++;
    call.op = op;
    call.payload = std::move(payload);
    call.done = std::move(done);
    auto [it, ok] = loc_calls_.emplace(call.id, std::move(call));
    (void)ok;
    locator_next(w, it->second);
}

void InstanceNode::locator_next(SimWorld& w, LocCall& call) {
    if (call.server_idx >= descriptor_.locators.size()) {
        LocCall finished = std::move(call);
        loc_calls_.erase(finished.id);
        locator_finish(w, std::move(finished));
        return;
    }
    const ProcessId& server = descriptor_.locators[call.server_idx];
    json req = call.payload;
    req["op"] = call.op;
    req["call"] = call.id;
    req["last_seen"] = loc_last_seen_.count(server) ? loc_last_seen_[server] : 0;
    w.send(self_, server, "loc_req", req);
    w.set_timer(self_, config_.fail_timeout_ms, "loc_to",
                {{"call", call.id}, {"idx", call.server_idx}});
}

void InstanceNode::locator_finish(SimWorld& w, LocCall call) {
    (void)w;
    const size_t total = descriptor_.locators.size();
    const size_t majority = total / 2 + 1;
    QuorumOutcome out;

    if (call.op == "get_active" || call.op == "get_replicas") {
        // group responses by value; trust the majority-consistent one
        std::map<std::string, std::vector<size_t>> by_value;
        for (size_t i = 0; i < call.responses.size(); ++i) {
            const json& r = call.responses[i];
            if (r.is_null() || r.at("status") != "ok") continue;
            std::string key = call.op == "get_active"
                                  ? r.at("active").get<std::string>()
                                  : json(r.at("replicas")).dump();
            by_value[key].push_back(i);
        }
        for (const auto& [key, idxs] : by_value) {
            if (idxs.size() < majority) continue;
            out.status = QuorumOutcome::Ok;
            const json& r = call.responses[idxs.front()];
            if (call.op == "get_active") out.value = r.at("active").get<std::string>();
            else out.replicas = r.at("replicas").get<std::vector<std::string>>();
            for (size_t i : idxs) {
                out.update_number = std::max(out.update_number,
                                             call.responses[i].at("update_number").get<uint64_t>());
            }
            break;
        }
    } else {
        int oks = 0;
        bool any_stale = false, any_lock = false, any_lease = false;
        for (const auto& r : call.responses) {
            if (r.is_null()) continue;
            std::string status = r.at("status").get<std::string>();
            if (status == "ok") ++oks;
            if (status == "stale") any_stale = true;
            if (status == "lock_held") any_lock = true;
            if (status == "lease_held") any_lease = true;
            out.update_number = std::max(out.update_number, r.at("update_number").get<uint64_t>());
        }
        out.grants = oks;
        if (oks >= int(majority)) out.status = QuorumOutcome::Ok;
        else if (any_stale) out.status = QuorumOutcome::Stale;
        else if (any_lock) out.status = QuorumOutcome::LockHeld;
        else if (any_lease) out.status = QuorumOutcome::LeaseHeld;
        else out.status = QuorumOutcome::NoMajority;
    }
    if (call.done) call.done(out);
}

// --------------------------------------------------------------------------
// bootstrap: the four startup scenarios
// --------------------------------------------------------------------------

void InstanceNode::bootstrap_begin(SimWorld& w) {
    locator_call(w, "get_active", {}, [this, &w](const QuorumOutcome& out) {
        if (out.status != QuorumOutcome::Ok) {
            // a minority of locator servers are active
            finish_join(w, BootstrapOutcome::CannotJoin);
            return;
        }
        if (out.value.empty()) {
            bootstrap_try_create(w);
        } else if (out.value == self_) {
            // we are still the registered System Table (restart case):
            // reclaim the role from persisted state if we have it
            if (st_meta_) {
                st_ = st_meta_->second;
                ++st_epoch_;
                st_location_ = self_;
                finish_join(w, BootstrapOutcome::RestartedSystemTable);
            } else {
                bootstrap_try_create(w);
            }
        } else {
            bootstrap_try_join(w, out.value);
        }
    });
}

void InstanceNode::bootstrap_try_join(SimWorld& w, const std::string& st) {
    st_location_ = st;
    json body{{"instance", self_},
              {"eligible", config_.replica_target},
              {"cpu", config_.spec.cpu_capacity_mhz},
              {"mem", config_.spec.memory_mb},
              {"disk", config_.spec.disk_mb}};
    w.send(self_, st, "join_request", body);
    w.set_timer(self_, config_.fail_timeout_ms, "join_to", {{"st", st}});
}

void InstanceNode::bootstrap_try_restart_st(SimWorld& w, std::vector<std::string> holders,
                                            size_t idx) {
    // the known System Table is unresponsive: ask a state-replica holder to
    // recreate it
    while (idx < holders.size() && holders[idx] == st_location_) ++idx;
    if (idx >= holders.size()) {
        finish_join(w, BootstrapOutcome::CannotJoin);
        return;
    }
    w.send(self_, holders[idx], "recreate_st");
    w.set_timer(self_, 10 * config_.fail_timeout_ms, "recreate_to",
                {{"holders", holders}, {"idx", idx}});
}

void InstanceNode::bootstrap_try_create(SimWorld& w) {
    locator_call(w, "obtain_lock", {{"requester", self_}}, [this, &w](const QuorumOutcome& out) {
        if (out.status != QuorumOutcome::Ok) {
            // lost a creation race (or saw newer state): start over shortly
            if (out.status == QuorumOutcome::NoMajority) {
                finish_join(w, BootstrapOutcome::CannotJoin);
            } else {
                w.set_timer(self_, 500, "bootstrap_retry");
            }
            return;
        }
        // we hold the creation lock on a majority: create the System Table here
        locator_call(w, "commit_creation", {{"uri", self_}}, [this, &w](const QuorumOutcome& c) {
            if (c.status != QuorumOutcome::Ok) {
                w.set_timer(self_, 500, "bootstrap_retry");
                return;
            }
            st_.emplace();
            ++st_epoch_;
            st_->members = {self_};
            st_->st_meta_holders = {self_};
            st_->version = 1;
            st_location_ = self_;
            members_ = {self_};
            member_eligible_[self_] = config_.replica_target;
            st_statuses_[self_] = {config_.spec, ResourceSummary{}};
            st_persist(w);
            if (config_.ownership == OwnershipMode::Lease) {
                w.set_timer(self_, 0, "lease_renew");
            }
            finish_join(w, BootstrapOutcome::CreatedSystemTable);
        });
    });
}

void InstanceNode::finish_join(SimWorld& w, BootstrapOutcome outcome) {
    bootstrap_outcome_ = outcome;
    joined_ = outcome == BootstrapOutcome::Joined ||
              outcome == BootstrapOutcome::CreatedSystemTable ||
              outcome == BootstrapOutcome::RestartedSystemTable;
    w.trace().record(w.clock(), "bootstrap", self_ + ":" + to_string(outcome));
    if (!joined_) return;
    if (!st_ && !replicas_.empty()) {
        // restarted with persisted data: offer every replica back to its TM
        for (const auto& [table, rep] : replicas_) {
            w.set_timer(self_, 1, "rejoin_replica", {{"table", table}});
        }
    }
}

// --------------------------------------------------------------------------
// public driver surface
// --------------------------------------------------------------------------

void InstanceNode::execute(SimWorld& w, std::vector<Statement> stmts,
                           std::function<void(bool)> done) {
    exec_queue_.emplace_back(std::move(stmts), std::move(done));
    pump_exec(w);
}

void InstanceNode::pump_exec(SimWorld& w) {
    if (exec_busy_ || exec_queue_.empty()) return;
    auto [stmts, done] = std::move(exec_queue_.front());
    exec_queue_.pop_front();
    exec_busy_ = true;
    auto wrapped = [this, &w, done = std::move(done)](bool ok) {
        exec_busy_ = false;
        if (done) done(ok);
        pump_exec(w);
    };

    bool schema = false;
    for (const auto& s : stmts) {
        if (s.kind == StatementKind::CreateTable || s.kind == StatementKind::DropTable ||
            s.kind == StatementKind::MigrateSystemTable ||
            s.kind == StatementKind::MigrateTableManager) {
            schema = true;
        }
    }
    if (schema) {
        if (stmts.size() != 1) {
            wrapped(false);
            return;
        }
        schema_start(w, stmts[0], wrapped);
        return;
    }
    txn_start(w, std::move(stmts), wrapped, false);
}

void InstanceNode::prepopulate(SimWorld& w, const std::string& table, int rows, uint64_t seed,
                               std::function<void(bool)> done) {
    // seeded random rows, one bulk transaction
    std::string cols = "id int, str_a varchar(40), int_a bigint";
    auto meta = tm_meta_.find(table);
    if (meta != tm_meta_.end()) cols = meta->second.second.schema_cols;
    TableSchema schema = parse_schema_columns(table, cols);

    uint64_t state = seed;
    auto draw = [&state]() { return state = mix(state); };
    std::vector<Statement> stmts;
    for (int i = 0; i < rows; ++i) {
        Statement s;
        s.kind = StatementKind::Insert;
        s.table = table;
        for (const auto& [name, type] : schema.columns) {
            switch (type.kind) {
                case ColumnKind::Int:
                    s.literals.push_back(Value::of_int(int64_t(draw() % 1000000)));
                    break;
                case ColumnKind::BigInt:
                    s.literals.push_back(Value::of_int(int64_t(draw() >> 1)));
                    break;
                case ColumnKind::Varchar: {
                    size_t len = 8 + draw() % uint64_t(std::max(1, std::min(33, type.varchar_len - 7)));
                    std::string word;
                    for (size_t c = 0; c < len; ++c) word += char('a' + draw() % 26);
                    s.literals.push_back(Value::of_string(word));
                    break;
                }
            }
        }
        stmts.push_back(std::move(s));
    }
    if (exec_busy_) {
        exec_queue_.emplace_back(std::move(stmts), std::move(done));
        return;
    }
    exec_busy_ = true;
    auto wrapped = [this, &w, d = std::move(done)](bool ok) {
        exec_busy_ = false;
        if (d) d(ok);
        pump_exec(w);
    };
    txn_start(w, std::move(stmts), wrapped, true);
}

// --------------------------------------------------------------------------
// transaction state machine (data statements)
// --------------------------------------------------------------------------

void InstanceNode::txn_start(SimWorld& w, std::vector<Statement> stmts,
                             std::function<void(bool)> done, bool bulk) {
    Txn t;
    t.id = next_txn_id_++;
    t.bulk = bulk;
    t.done = std::move(done);
    std::set<std::string> tables;
    for (const auto& s : stmts) {
        if (s.kind == StatementKind::SetAutocommit || s.kind == StatementKind::Commit) continue;
        tables.insert(s.table);
        if (s.is_write()) t.has_writes = true;
        t.statement_texts.push_back(render_statement(s));
        t.stmts.push_back(s);
    }
    t.tables.assign(tables.begin(), tables.end());  // ascending: fixed lock order
    if (t.stmts.empty()) {
        auto cb = std::move(t.done);
        if (cb) cb(true);
        return;
    }
    txn_.emplace(std::move(t));
    txn_resolve_next(w);
}

void InstanceNode::txn_timer(SimWorld& w, SimTime delay, const std::string& what) {
    w.set_timer(self_, delay, "txn_to",
                {{"txn", txn_->id}, {"epoch", txn_->epoch}, {"what", what}});
}

void InstanceNode::txn_resolve_next(SimWorld& w) {
    Txn& t = *txn_;
    t.phase = Txn::Resolve;
    ++t.epoch;
    for (const auto& table : t.tables) {
        if (t.tm.count(table)) continue;
        if (tm_cache_.count(table)) {
            t.tm[table] = tm_cache_[table];
            continue;
        }
        if (st_location_.empty()) {
            txn_fail(w, "");
            return;
        }
        w.send(self_, st_location_, "st_lookup", {{"table", table}, {"txn", t.id}});
        txn_timer(w, config_.fail_timeout_ms, "lookup");
        return;
    }
    t.lock_idx = 0;
    txn_lock_next(w);
}

void InstanceNode::txn_lock_next(SimWorld& w) {
    Txn& t = *txn_;
    t.phase = Txn::Lock;
    ++t.epoch;
    if (t.lock_idx >= t.tables.size()) {
        t.stmt_idx = 0;
        txn_exec_next(w);
        return;
    }
    const std::string& table = t.tables[t.lock_idx];
    bool exclusive = false;
    for (const auto& s : t.stmts) {
        if (s.table == table && s.is_write()) exclusive = true;
    }
    w.send(self_, t.tm[table], "tm_lock",
           {{"table", table}, {"txn", t.id}, {"exclusive", exclusive}, {"owner", self_}});
    txn_timer(w, config_.fail_timeout_ms, "lock");
}

void InstanceNode::txn_exec_next(SimWorld& w) {
    Txn& t = *txn_;
    t.phase = Txn::Exec;
    ++t.epoch;
    ++t.exec_round;
    if (t.bulk) {
        // single fan-out round carrying every statement
        const std::string& table = t.tables[0];
        const auto& reps = t.replicas[table];
        if (reps.empty()) {
            txn_fail(w, "");
            return;
        }
        t.awaiting.clear();
        for (const auto& r : reps) {
            t.awaiting.insert(r);
            w.send(self_, r, "exec_bulk",
                   {{"table", table}, {"txn", t.id}, {"round", t.exec_round},
                    {"stmts", t.statement_texts}});
        }
        t.stmt_idx = t.stmts.size();
        txn_timer(w, config_.fail_timeout_ms + SimTime(t.stmts.size() / 5), "exec");
        return;
    }
    if (t.stmt_idx >= t.stmts.size()) {
        txn_begin_commit(w);
        return;
    }
    const Statement& s = t.stmts[t.stmt_idx];
    const auto& reps = t.replicas[s.table];
    if (reps.empty()) {
        txn_fail(w, "");  // no current replica anywhere: permanent failure
        return;
    }
    if (s.is_write()) {
        t.awaiting.clear();
        for (const auto& r : reps) {
            t.awaiting.insert(r);
            w.send(self_, r, "exec_write",
                   {{"table", s.table}, {"txn", t.id}, {"round", t.exec_round},
                    {"stmt", t.statement_texts[t.stmt_idx]}});
        }
        txn_timer(w, config_.fail_timeout_ms, "exec");
    } else {
        // reads go to the replica at the Table Manager's site when current,
        // else to a uniformly chosen current replica
        std::string choice = reps.front();
        const std::string& tm_host = t.tm[s.table];
        if (std::find(reps.begin(), reps.end(), tm_host) != reps.end()) {
            choice = tm_host;
        } else if (reps.size() > 1) {
            choice = reps[size_t(w.rng_below(reps.size()))];
        }
        t.awaiting = {choice};
        w.send(self_, choice, "exec_read",
               {{"table", s.table}, {"txn", t.id}, {"round", t.exec_round},
                {"stmt", t.statement_texts[t.stmt_idx]}});
        txn_timer(w, config_.fail_timeout_ms, "exec");
    }
}

void InstanceNode::txn_begin_commit(SimWorld& w) {
    Txn& t = *txn_;
    if (!t.has_writes && !t.bulk) {
        // read-only: strict 2PL just needs the locks dropped at the end
        ++t.epoch;
        for (const auto& table : t.locked) {
            w.send(self_, t.tm[table], "tm_abort_release", {{"table", table}, {"txn", t.id}});
        }
        auto cb = std::move(t.done);
        txn_.reset();
        w.trace().record(w.clock(), "txn_commit", self_);
        if (cb) cb(true);
        return;
    }
    t.phase = Txn::Prepare;
    ++t.epoch;
    t.participants.clear();
    for (const auto& table : t.tables) {
        for (const auto& r : t.executed_at.count(table) ? std::vector<std::string>(
                                                              t.executed_at[table].begin(),
                                                              t.executed_at[table].end())
                                                        : t.replicas[table]) {
            t.participants.insert(r);
        }
        t.participants.insert(t.tm[table]);
    }
    t.votes.clear();
    for (const auto& p : t.participants) {
        w.send(self_, p, "c_prepare", {{"txn", t.id}, {"paxos", config_.paxos_commit}});
    }
    SimTime fan = SimTime(t.participants.size()) * w.link().send_cost_ms;
    txn_timer(w, fan + config_.flush_ms + 10 * w.link().base_latency_ms, "votes");
}

void InstanceNode::txn_decide(SimWorld& w, bool commit) {
    Txn& t = *txn_;
    ++t.epoch;
    for (const auto& p : t.participants) {
        w.send(self_, p, commit ? "c_commit" : "c_rollback", {{"txn", t.id}});
    }
    if (commit) {
        // partial mode: replicas that did not finish are stale until caught up
        for (const auto& [table, lagging] : t.stragglers) {
            if (lagging.empty()) continue;
            w.send(self_, t.tm[table], "tm_mark_stale",
                   {{"table", table},
                    {"holders", std::vector<std::string>(lagging.begin(), lagging.end())}});
        }
    }
    t.phase = Txn::Done;
    auto cb = std::move(t.done);
    txn_.reset();
    if (commit) {
        w.trace().record(w.clock(), "txn_commit", self_);
    }
    if (cb) cb(commit);
}

void InstanceNode::txn_fail(SimWorld& w, const std::string& suspect) {
    if (!txn_) return;
    Txn& t = *txn_;
    ++t.epoch;
    // release whatever we hold and undo whatever executed
    for (const auto& table : t.locked) {
        w.send(self_, t.tm[table], "tm_abort_release", {{"table", table}, {"txn", t.id}});
    }
    for (const auto& [table, reached] : t.executed_at) {
        for (const auto& r : reached) {
            w.send(self_, r, "c_rollback", {{"txn", t.id}});
        }
    }
    auto cb = std::move(t.done);
    txn_.reset();
    w.trace().record(w.clock(), "txn_abort", self_);
    if (!suspect.empty() && suspect != self_) {
        report_suspect(w, suspect, nullptr);
    }
    if (cb) cb(false);
}

// --------------------------------------------------------------------------
// schema and migration operations
// --------------------------------------------------------------------------

void InstanceNode::schema_start(SimWorld& w, Statement stmt, std::function<void(bool)> done) {
    SchemaOp op;
    op.stmt = std::move(stmt);
    op.done = std::move(done);
    schema_op_.emplace(std::move(op));
    schema_send(w);
}

void InstanceNode::schema_send(SimWorld& w) {
    SchemaOp& op = *schema_op_;
    ++op.epoch;
    ++op.attempts;
    if (op.attempts > 12) {
        auto cb = std::move(op.done);
        schema_op_.reset();
        if (cb) cb(false);
        return;
    }
    const Statement& s = op.stmt;

    if (s.kind == StatementKind::MigrateSystemTable) {
        if (st_) {  // migrate to self: no-op success
            auto cb = std::move(op.done);
            schema_op_.reset();
            if (cb) cb(true);
            return;
        }
        if (st_location_.empty()) {
            schema_fail_retry(w);
            return;
        }
        w.send(self_, st_location_, "migrate_st_request",
               {{"target", self_}, {"no_replicate", s.no_replicate}});
        w.set_timer(self_, 10 * config_.fail_timeout_ms, "schema_to", {{"epoch", op.epoch}});
        return;
    }
    if (s.kind == StatementKind::MigrateTableManager) {
        if (tms_.count(s.table)) {  // already here
            auto cb = std::move(op.done);
            schema_op_.reset();
            if (cb) cb(true);
            return;
        }
        if (!tm_cache_.count(s.table)) {
            if (st_location_.empty()) {
                schema_fail_retry(w);
                return;
            }
            w.send(self_, st_location_, "st_lookup", {{"table", s.table}, {"schema_op", true}});
            w.set_timer(self_, config_.fail_timeout_ms, "schema_to", {{"epoch", op.epoch}});
            return;
        }
        w.send(self_, tm_cache_[s.table], "migrate_tm_request",
               {{"table", s.table}, {"target", self_}});
        w.set_timer(self_, 10 * config_.fail_timeout_ms, "schema_to", {{"epoch", op.epoch}});
        return;
    }
    // CREATE / DROP go to the System Table
    if (st_location_.empty()) {
        schema_fail_retry(w);
        return;
    }
    if (s.kind == StatementKind::CreateTable) {
        w.send(self_, st_location_, "st_create_table",
               {{"table", s.schema.table_name},
                {"cols", schema_to_cols(s.schema)},
                {"if_not_exists", s.if_not_exists},
                {"requester", self_}});
    } else {
        w.send(self_, st_location_, "st_drop_table",
               {{"table", s.table}, {"if_exists", s.if_exists}, {"requester", self_}});
    }
    w.set_timer(self_, 4 * config_.fail_timeout_ms, "schema_to", {{"epoch", op.epoch}});
}

void InstanceNode::schema_fail_retry(SimWorld& w) {
    // the System Table is unreachable: run the recovery path, then retry
    if (!schema_op_) return;
    ++schema_op_->epoch;
    recover_st_via_locators(w, [this, &w](bool ok) {
        (void)ok;
        if (!schema_op_) return;
        w.set_timer(self_, 20, "schema_retry", {{"epoch", schema_op_->epoch}});
    });
}

// --------------------------------------------------------------------------
// System Table role
// --------------------------------------------------------------------------

void InstanceNode::st_persist(SimWorld& w) {
    if (!st_) return;
    json j{{"version", st_->version}, {"state", st_->to_json()}};
    w.disk_write(self_, "st_meta", j.dump());
    st_meta_ = {st_->version, *st_};
    // also keep the line-oriented view for the on-disk interface
    std::ostringstream out;
    for (const auto& [table, tm] : st_->table_tm) {
        out << "ST\tTM\t" << table << "\t" << tm << "\t";
        const auto& hs = st_->tm_meta_holders.count(table) ? st_->tm_meta_holders.at(table)
                                                           : std::vector<std::string>{};
        for (size_t i = 0; i < hs.size(); ++i) out << (i ? "," : "") << hs[i];
        out << "\n";
    }
    for (const auto& m : st_->members) out << "ST\tINSTANCE\t" << m << "\n";
    w.disk_write(self_, "meta", out.str());
}

void InstanceNode::st_enqueue_commit(SimWorld& w, std::function<void()> apply,
                                     std::function<void()> committed) {
    st_queue_.emplace_back(std::move(apply), std::move(committed));
    st_pump(w);
}

void InstanceNode::st_pump(SimWorld& w) {
    if (!st_ || st_commit_inflight_ || st_queue_.empty() || st_migrating_) return;
    st_commit_inflight_ = true;
    SimTime confirm_start = w.clock();

    auto proceed = [this, &w, confirm_start]() {
        if (!st_) return;
        st_apply_and_replicate(w);
        w.trace().record(w.clock(), "st_commit_window",
                         self_ + "#" + std::to_string(st_epoch_) + ":" +
                             std::to_string(confirm_start) + ":" + std::to_string(w.clock()));
    };

    switch (config_.ownership) {
        case OwnershipMode::Disabled:
            proceed();
            break;
        case OwnershipMode::Lease:
            if (w.clock() < lease_expiry_) {
                proceed();
            } else {
                // lease lapsed: re-acquire before committing
                locator_call(w, "lease_acquire", {{"requester", self_}},
                             [this, &w, proceed](const QuorumOutcome& out) {
                                 if (!st_) return;
                                 if (out.status == QuorumOutcome::Ok) {
                                     lease_expiry_ = w.clock() + config_.lease_duration_ms;
                                     proceed();
                                 } else {
                                     st_commit_inflight_ = false;
                                     auto op = std::move(st_queue_.front());
                                     st_queue_.pop_front();
                                     (void)op;  // dropped; requester times out and retries
                                 }
                             });
            }
            break;
        case OwnershipMode::PerCommit:
            locator_call(w, "get_active", {}, [this, &w, proceed](const QuorumOutcome& out) {
                if (!st_) return;
                if (out.status == QuorumOutcome::Ok && out.value == self_) {
                    proceed();
                } else if (out.status == QuorumOutcome::Ok) {
                    // the quorum names another instance: stop committing now
                    st_abdicate(w);
                } else {
                    // possibly partitioned: refuse to commit
                    st_commit_inflight_ = false;
                    st_queue_.pop_front();
                }
            });
            break;
    }
}

void InstanceNode::st_apply_and_replicate(SimWorld& w) {
    auto [apply, committed] = std::move(st_queue_.front());
    st_queue_.pop_front();
    apply();
    ++st_->version;
    st_persist(w);
    for (const auto& h : st_->st_meta_holders) {
        if (h == self_) continue;
        w.send(self_, h, "st_meta_update",
               {{"version", st_->version}, {"state", st_->to_json()}});
    }
    if (committed) committed();
    st_commit_inflight_ = false;
    st_pump(w);
}

void InstanceNode::st_abdicate(SimWorld& w) {
    w.trace().record(w.clock(), "st_deposed", self_);
    st_.reset();
    st_queue_.clear();
    st_commit_inflight_ = false;
    st_location_.clear();
}

void InstanceNode::st_broadcast_membership(SimWorld& w) {
    if (!st_) return;
    json elig = json::object();
    for (const auto& [m, e] : member_eligible_) elig[m] = e;
    for (const auto& m : st_->members) {
        if (m == self_) continue;
        w.send(self_, m, "membership_update",
               {{"members", st_->members}, {"eligible", elig}, {"st", self_}});
    }
    members_ = st_->members;
}

std::vector<RankedMachine> InstanceNode::st_ranking() const {
    if (!st_) return {};
    std::map<std::string, MachineStatus> machines;
    for (const auto& m : st_->members) {
        auto it = st_statuses_.find(m);
        machines[m] = it != st_statuses_.end() ? it->second : MachineStatus{};
    }
    return rank_machines(machines, config_.metric);
}

std::vector<std::string> InstanceNode::eligible_members(
    const std::vector<std::string>& excluded) const {
    std::vector<std::string> out;
    for (const auto& m : members_) {
        if (std::find(excluded.begin(), excluded.end(), m) != excluded.end()) continue;
        auto it = member_eligible_.find(m);
        if (it != member_eligible_.end() && !it->second) continue;
        out.push_back(m);
    }
    return out;
}

void InstanceNode::st_handle_death(SimWorld& w, const std::string& dead) {
    if (!st_) return;
    if (std::find(st_->members.begin(), st_->members.end(), dead) == st_->members.end()) return;
    w.trace().record(w.clock(), "member_dead", dead);

    st_enqueue_commit(
        w,
        [this, dead]() {
            auto& m = st_->members;
            m.erase(std::remove(m.begin(), m.end(), dead), m.end());
            auto& sh = st_->st_meta_holders;
            sh.erase(std::remove(sh.begin(), sh.end(), dead), sh.end());
            for (auto& [table, holders] : st_->tm_meta_holders) {
                holders.erase(std::remove(holders.begin(), holders.end(), dead), holders.end());
            }
            st_statuses_.erase(dead);
        },
        [this, &w, dead]() {
            // recreate Table Managers that were active on the failed machine
            for (const auto& [table, tm_host] : st_->table_tm) {
                if (tm_host != dead) continue;
                const auto& holders = st_->tm_meta_holders[table];
                if (holders.empty()) {
                    w.trace().record(w.clock(), "tm_unrecoverable", table);
                    continue;
                }
                json elig = json::object();
                for (const auto& [mm, e] : member_eligible_) elig[mm] = e;
                w.send(self_, holders.front(), "recover_tm",
                       {{"table", table},
                        {"dead", dead},
                        {"members", st_->members},
                        {"eligible", elig}});
            }
            // tell surviving Table Managers to drop the dead holder
            for (const auto& [table, tm_host] : st_->table_tm) {
                if (tm_host == dead) continue;
                w.send(self_, tm_host, "tm_member_dead", {{"table", table}, {"dead", dead}});
            }
            st_broadcast_membership(w);
            // the locators track ST state holders
            locator_call(w, "set_replicas", {{"uris", st_ ? st_->st_meta_holders : std::vector<std::string>{}}},
                         [](const QuorumOutcome&) {});
        });
}

// --------------------------------------------------------------------------
// Table Manager role
// --------------------------------------------------------------------------

void InstanceNode::tm_persist(SimWorld& w, TableManagerState& tm) {
    json j{{"version", tm.version}, {"state", tm.to_json()}};
    w.disk_write(self_, "tm_meta_" + tm.table, j.dump());
    tm_meta_[tm.table] = {tm.version, tm};
    // line-oriented on-disk interface
    std::string line = "TM\t" + tm.table + "\t" + self_ + "\t";
    for (size_t i = 0; i < tm.holders.size(); ++i) line += (i ? "," : "") + tm.holders[i];
    w.disk_write(self_, "meta_tm_" + tm.table, line + "\n");
}

void InstanceNode::tm_sync_meta(SimWorld& w, TableManagerState& tm) {
    ++tm.version;
    tm_persist(w, tm);
    for (const auto& h : tm.meta_holders) {
        if (h == self_) continue;
        w.send(self_, h, "tm_meta_update",
               {{"table", tm.table}, {"version", tm.version}, {"state", tm.to_json()}});
    }
}

void InstanceNode::tm_pump_locks(SimWorld& w, TableManagerState& tm) {
    while (!tm.lock_queue.empty() && tm.can_grant(tm.lock_queue.front())) {
        TableManagerState::LockReq req = tm.lock_queue.front();
        tm.lock_queue.pop_front();
        tm.lock_holders.push_back(req);
        w.send(self_, req.owner, "tm_grant",
               {{"table", tm.table},
                {"txn", req.txn},
                {"replicas", tm.current_holders()},
                {"schema", tm.schema_cols}});
    }
}

void InstanceNode::tm_release(SimWorld& w, TableManagerState& tm, uint64_t txn) {
    auto& hs = tm.lock_holders;
    hs.erase(std::remove_if(hs.begin(), hs.end(),
                            [txn](const TableManagerState::LockReq& r) { return r.txn == txn; }),
             hs.end());
    auto& q = tm.lock_queue;
    q.erase(std::remove_if(q.begin(), q.end(),
                           [txn](const TableManagerState::LockReq& r) { return r.txn == txn; }),
            q.end());
    tm_pump_locks(w, tm);
}

void InstanceNode::tm_drop_table(SimWorld& w, const std::string& table) {
    auto it = tms_.find(table);
    if (it == tms_.end()) return;
    for (const auto& h : it->second.holders) {
        w.send(self_, h, "replica_drop", {{"table", table}});
    }
    for (const auto& h : it->second.meta_holders) {
        if (h != self_) w.send(self_, h, "tm_meta_drop", {{"table", table}});
    }
    tms_.erase(it);
    tm_meta_.erase(table);
    w.disk_erase(self_, "tm_meta_" + table);
    w.disk_erase(self_, "meta_tm_" + table);
}

// --------------------------------------------------------------------------
// replica role
// --------------------------------------------------------------------------

void InstanceNode::replica_persist(SimWorld& w, const std::string& table) {
    auto it = replicas_.find(table);
    if (it == replicas_.end()) return;
    w.disk_write(self_, "log_" + table, serialize_log(it->second.store.log));
    w.disk_write(self_, "schema_" + table, schema_to_cols(it->second.store.schema));
}

void InstanceNode::replica_apply_write(SimWorld& w, const std::string& table, uint64_t txn,
                                       const std::string& text, int* rows_out) {
    (void)w;
    LocalReplica& rep = replicas_.at(table);
    Statement stmt = parse_statement(text);
    int rows = 0;
    if (stmt.kind == StatementKind::Insert) {
        rows = apply_write(rep.store, stmt);
        rep.undo[txn].push_back({true, stmt.literals});
    } else if (stmt.kind == StatementKind::Delete) {
        std::vector<Row> removed;
        for (const Row& row : rep.store.rows) {
            if (!stmt.predicate || stmt.predicate->matches(rep.store.schema, row)) {
                removed.push_back(row);
            }
        }
        rows = apply_write(rep.store, stmt);
        for (auto& r : removed) rep.undo[txn].push_back({false, std::move(r)});
    }
    rep.pending_texts[txn].push_back(text);
    if (rows_out) *rows_out = rows;
}

// --------------------------------------------------------------------------
// flush modelling
// --------------------------------------------------------------------------

void InstanceNode::flush_then(SimWorld& w, std::function<void()> fn) {
    if (config_.write_delay) {
        // one fsync per window; votes do not wait for it
        fn();
        return;
    }
    ++pending_flushes_;
    delayed_flush_queue_.push_back(std::move(fn));
    w.set_timer(self_, config_.flush_ms, "flush_done");
}

// --------------------------------------------------------------------------
// maintenance, autonomics, ring
// --------------------------------------------------------------------------

void InstanceNode::maintenance_tick(SimWorld& w) {
    if (shutdown_requested_) return;
    // System Table state replication toward s
    if (st_ && int(st_->st_meta_holders.size()) < config_.repl.s && st_meta_action_.empty()) {
        auto candidates = eligible_members(st_->st_meta_holders);
        std::vector<RankedMachine> ranking = st_ranking();
        std::map<std::string, uint64_t> no_pattern;
        std::vector<std::string> excluded;
        for (const auto& m : members_) {
            if (std::find(candidates.begin(), candidates.end(), m) == candidates.end()) {
                excluded.push_back(m);
            }
        }
        try {
            std::string target = choose_replica_location(ranking, no_pattern, excluded);
            double& need = need_level_["__st__"];
            if (need == 0) need = config_.negotiation.level_of_need;
            st_meta_action_.insert(target);
            w.send(self_, target, "negotiate_request",
                   {{"kind", "st_meta"}, {"need", need}});
        } catch (const NoEligibleInstance&) {
        }
    }
    // hosted Table Managers: data replicas toward n, meta replicas toward t
    for (auto& [table, tm] : tms_) {
        maintain_table(w, tm);
    }
    w.set_timer(self_, config_.maintenance_period_ms, "maint_tick");
}

void InstanceNode::maintain_table(SimWorld& w, TableManagerState& tm) {
    // drop stale replicas outright; they are recreated from scratch
    if (!tm.stale.empty() && !replica_action_.count(tm.table)) {
        std::string victim = *tm.stale.begin();
        tm.stale.erase(tm.stale.begin());
        auto& hs = tm.holders;
        hs.erase(std::remove(hs.begin(), hs.end(), victim), hs.end());
        w.send(self_, victim, "replica_drop", {{"table", tm.table}});
        tm_sync_meta(w, tm);
    }
    auto current = tm.current_holders();
    if (int(current.size()) < config_.repl.n && !replica_action_.count(tm.table)) {
        // ask the System Table for fresh rankings; decide on the cached copy
        if (!st_location_.empty() && st_location_ != self_) {
            w.send(self_, st_location_, "st_get_ranking", {});
        } else if (st_) {
            ranking_cache_ = st_ranking();
        }
        std::vector<std::string> excluded = tm.holders;
        for (const auto& m : members_) {
            auto it = member_eligible_.find(m);
            if (it != member_eligible_.end() && !it->second) excluded.push_back(m);
        }
        try {
            std::vector<RankedMachine> ranking = ranking_cache_;
            if (ranking.empty()) {
                for (const auto& m : members_) ranking.push_back({m, 0});
            }
            std::string target = choose_replica_location(ranking, tm.query_pattern, excluded);
            double& need = need_level_[tm.table];
            if (need == 0) need = config_.negotiation.level_of_need;
            replica_action_.insert(tm.table);
            w.send(self_, target, "negotiate_request",
                   {{"kind", "replica"}, {"table", tm.table}, {"need", need}});
        } catch (const NoEligibleInstance&) {
            // no peers: deficit persists until an instance joins
        }
    }
    if (int(tm.meta_holders.size()) < config_.repl.t && !replica_action_.count("\1" + tm.table)) {
        auto candidates = eligible_members(tm.meta_holders);
        if (!candidates.empty()) {
            std::vector<std::string> excluded;
            for (const auto& m : members_) {
                if (std::find(candidates.begin(), candidates.end(), m) == candidates.end()) {
                    excluded.push_back(m);
                }
            }
            std::vector<RankedMachine> ranking = ranking_cache_;
            if (ranking.empty()) {
                for (const auto& m : members_) ranking.push_back({m, 0});
            }
            try {
                std::map<std::string, uint64_t> no_pattern;
                std::string target = choose_replica_location(ranking, no_pattern, excluded);
                replica_action_.insert("\1" + tm.table);
                w.send(self_, target, "tm_meta_update",
                       {{"table", tm.table},
                        {"version", tm.version},
                        {"state", tm.to_json()},
                        {"install", true}});
            } catch (const NoEligibleInstance&) {
            }
        }
    }
}

void InstanceNode::start_replica_create(SimWorld& w, const std::string& table,
                                        const std::string& target) {
    // CREATE REPLICA requires an exclusive write lock so the copy is consistent
    auto it = tms_.find(table);
    if (it == tms_.end()) {
        replica_action_.erase(table);
        return;
    }
    uint64_t txn = next_txn_id_++;
    w.send(self_, self_, "tm_lock",
           {{"table", table},
            {"txn", txn},
            {"exclusive", true},
            {"owner", self_},
            {"replica_create", target}});
}

void InstanceNode::sensor_tick(SimWorld& w) {
    auto p = config_.sensor.at(w.clock());
    window_cpu_.push_back(p.cpu);
    window_mem_.push_back(p.mem);
    window_disk_.push_back(p.disk);
    if (p.writes_per_s) window_writes_ = p.writes_per_s;
    w.set_timer(self_, config_.sensor_period_ms, "sensor_tick");
}

void InstanceNode::summary_tick(SimWorld& w) {
    if (!window_cpu_.empty()) {
        double rate = 60000.0 / double(config_.sensor_period_ms);
        latest_summary_ = summarize(window_cpu_, window_mem_, window_disk_, window_start_,
                                    w.clock(), rate);
        latest_summary_.disk_writes_per_s = window_writes_;
        have_summary_ = true;
        window_cpu_.clear();
        window_mem_.clear();
        window_disk_.clear();
        window_start_ = w.clock();

        auto events = check_thresholds(latest_summary_, config_.spec, config_.thresholds);
        for (const auto& e : events) {
            w.trace().record(w.clock(), "threshold_event",
                             self_ + ":" + e.resource + ":" + std::to_string(e.observed));
            // movement planning is computed and logged; execution stays gated
            std::string action = e.resource == "cpu" ? "move_managers" : "move_replicas";
            w.trace().record(w.clock(), "threshold_plan", self_ + ":" + action);
        }
        if (st_) {
            st_statuses_[self_] = {config_.spec, latest_summary_};
        } else if (!st_location_.empty()) {
            w.send(self_, st_location_, "st_summary",
                   {{"cpu", latest_summary_.cpu.mean},
                    {"mem", latest_summary_.mem.mean},
                    {"disk", latest_summary_.disk.mean},
                    {"spec_cpu", config_.spec.cpu_capacity_mhz},
                    {"spec_mem", config_.spec.memory_mb},
                    {"spec_disk", config_.spec.disk_mb}});
        }
    }
    w.set_timer(self_, config_.summary_period_ms, "summary_tick");
}

std::vector<std::string> InstanceNode::ring_order() const {
    std::vector<std::string> order = members_;
    std::sort(order.begin(), order.end(), [](const std::string& a, const std::string& b) {
        return stable_name_hash(a) < stable_name_hash(b);
    });
    return order;
}

bool InstanceNode::ring_between(uint64_t x, uint64_t a, uint64_t b) const {
    if (a < b) return x > a && x < b;
    return x > a || x < b;  // wraparound
}

void InstanceNode::ring_tick(SimWorld& w) {
    if (joined_ && members_.size() > 1) {
        auto order = ring_order();
        auto self_it = std::find(order.begin(), order.end(), self_);
        if (self_it != order.end()) {
            // walk the successor list past suspected-dead entries
            size_t idx = size_t(self_it - order.begin());
            ring_successor_.clear();
            for (int hop = 1; hop <= config_.successor_list_k; ++hop) {
                const std::string& candidate = order[(idx + size_t(hop)) % order.size()];
                if (candidate == self_) break;
                if (!ring_suspected_.count(candidate)) {
                    ring_successor_ = candidate;
                    break;
                }
            }
            if (!ring_successor_.empty()) {
                w.send(self_, ring_successor_, "ring_ping", {{"from", self_}});
                w.set_timer(self_, config_.fail_timeout_ms, "ring_ping_to",
                            {{"target", ring_successor_}});
            }
        }
    }
    w.set_timer(self_, config_.ring_period_ms, "ring_tick");
}

// --------------------------------------------------------------------------
// recovery helpers
// --------------------------------------------------------------------------

void InstanceNode::recover_st_via_locators(SimWorld& w, std::function<void(bool)> done) {
    locator_call(w, "get_active", {}, [this, &w, done](const QuorumOutcome& out) {
        if (out.status != QuorumOutcome::Ok) {
            if (done) done(false);
            return;
        }
        if (!out.value.empty() && out.value != st_location_) {
            // someone else already recreated it
            st_location_ = out.value;
            if (done) done(true);
            return;
        }
        locator_call(w, "get_replicas", {}, [this, &w, done](const QuorumOutcome& reps) {
            if (reps.status != QuorumOutcome::Ok || reps.replicas.empty()) {
                if (done) done(false);
                return;
            }
            // ask holders, in order, to recreate the System Table
            json body{{"holders", reps.replicas}, {"idx", 0}};
            for (size_t i = 0; i < reps.replicas.size(); ++i) {
                const std::string& h = reps.replicas[i];
                if (h == st_location_) continue;  // that one is the dead active
                if (h == self_ && st_meta_) {
                    // we hold a replica ourselves: recreate locally
                    w.send(self_, self_, "recreate_st", {});
                    if (done) done(true);
                    return;
                }
                w.send(self_, h, "recreate_st", {});
                if (done) done(true);
                return;
            }
            if (done) done(false);
        });
    });
}

void InstanceNode::report_suspect(SimWorld& w, const std::string& suspect,
                                  std::function<void(bool)> done) {
    if (st_) {
        // we are the System Table: probe directly
        if (!probe_waiting_.count(suspect)) {
            probe_waiting_.insert(suspect);
            w.send(self_, suspect, "st_probe", {});
            w.set_timer(self_, config_.fail_timeout_ms, "probe_to", {{"suspect", suspect}});
        }
        if (done) done(true);
        return;
    }
    if (st_location_.empty() || suspect == st_location_) {
        // the System Table itself is the suspect: recover it first, then let
        // the retry loop re-report
        recover_st_via_locators(w, nullptr);
        if (done) done(false);
        return;
    }
    w.send(self_, st_location_, "st_report_failure", {{"suspect", suspect}});
    if (done) done(true);
}

// --------------------------------------------------------------------------
// workload runner
// --------------------------------------------------------------------------

void InstanceNode::start_workload(SimWorld& w, Workload workload, SimTime duration_ms,
                                  uint64_t seed) {
    WorkloadRun run;
    run.workload = std::move(workload);
    run.stats.start = w.clock();
    run.stats.duration = duration_ms;
    run.stats.per_second.assign(size_t(duration_ms / 1000), 0);
    run.loop.rng_seed = seed;
    run.loop.iteration = 1;
    wl_.emplace(std::move(run));
    if (duration_ms == 0) {
        wl_->stats.finished = true;
        return;
    }
    w.set_timer(self_, 0, "wl_step", {{"epoch", wl_->epoch}});
}

void InstanceNode::suspend_workload() {
    if (wl_) wl_->suspended = true;
}

void InstanceNode::resume_workload(SimWorld& w) {
    if (!wl_ || !wl_->suspended) return;
    wl_->suspended = false;
    ++wl_->epoch;
    w.set_timer(self_, 0, "wl_step", {{"epoch", wl_->epoch}});
}

void InstanceNode::mark_failure(SimTime clock) {
    if (wl_) wl_->stats.failure_marks.push_back(clock);
}

const WorkloadStats* InstanceNode::workload_stats() const {
    return wl_ ? &wl_->stats : nullptr;
}

void InstanceNode::wl_step(SimWorld& w) {
    if (!wl_ || wl_->stats.finished) return;
    WorkloadRun& run = *wl_;
    if (w.clock() >= run.stats.start + run.stats.duration) {
        run.stats.finished = true;
        return;
    }
    if (run.suspended) return;  // resume_workload reschedules

    if (run.retrying) {
        wl_run_group(w, run.retry_stmts);
        return;
    }

    if (run.line_idx >= run.workload.lines.size()) {
        run.line_idx = 0;
        ++run.loop.iteration;
    }
    const WorkloadLine& line = run.workload.lines[run.line_idx];
    ++run.line_idx;

    if (line.kind == StatementKind::Sleep) {
        ++run.epoch;
        w.set_timer(self_, line.sleep_ms, "wl_step", {{"epoch", run.epoch}});
        return;
    }
    std::string text = expand_placeholders(line.template_text, run.loop);
    Statement stmt = parse_statement(text);
    if (stmt.kind == StatementKind::SetAutocommit) {
        run.autocommit = stmt.autocommit_on;
        w.set_timer(self_, 0, "wl_step", {{"epoch", run.epoch}});
        return;
    }
    if (stmt.kind == StatementKind::Commit) {
        std::vector<Statement> group = std::move(run.buffer);
        run.buffer.clear();
        wl_run_group(w, std::move(group));
        return;
    }
    if (!run.autocommit) {
        run.buffer.push_back(std::move(stmt));
        w.set_timer(self_, 0, "wl_step", {{"epoch", run.epoch}});
        return;
    }
    wl_run_group(w, {std::move(stmt)});
}

void InstanceNode::wl_run_group(SimWorld& w, std::vector<Statement> stmts) {
    if (!wl_) return;
    wl_->retry_stmts = stmts;
    execute(w, std::move(stmts), [this, &w](bool ok) {
        if (!wl_) return;
        WorkloadRun& run = *wl_;
        if (ok) {
            run.retrying = false;
            SimTime at = w.clock();
            w.trace().record(at, "wl_commit", self_);
            if (at < run.stats.start + run.stats.duration) {
                size_t second = size_t((at - run.stats.start) / 1000);
                if (second < run.stats.per_second.size()) {
                    ++run.stats.per_second[second];
                    ++run.stats.committed;
                }
            }
            ++run.epoch;
            w.set_timer(self_, 0, "wl_step", {{"epoch", run.epoch}});
        } else {
            // recover-and-re-execute: the engine has already kicked recovery
            run.retrying = true;
            w.trace().record(w.clock(), "wl_fail", self_);
            ++run.epoch;
            w.set_timer(self_, config_.retry_backoff_ms, "wl_step", {{"epoch", run.epoch}});
        }
    });
}

// --------------------------------------------------------------------------
// shutdown hand-off
// --------------------------------------------------------------------------

void InstanceNode::begin_shutdown(SimWorld& w) {
    shutdown_requested_ = true;
    // hand the System Table to a peer first, then Table Managers, then tell
    // the managers of locally held replicas to replace them
    std::vector<std::string> peers;
    for (const auto& m : members_) {
        if (m != self_) peers.push_back(m);
    }
    if (peers.empty()) {
        shutdown_complete_ = true;
        return;
    }
    json plan;
    plan["peers"] = peers;
    w.set_timer(self_, 0, "shutdown_step", plan);
}

// --------------------------------------------------------------------------
// message dispatch
// --------------------------------------------------------------------------

void InstanceNode::on_message(SimWorld& w, const Message& m) {
    const std::string& k = m.kind;

    // ---- timers and internal steps ----
    if (k == "bootstrap_retry") {
        bootstrap_begin(w);
        return;
    }
    if (k == "loc_to") {
        uint64_t id = m.body.at("call").get<uint64_t>();
        auto it = loc_calls_.find(id);
        if (it == loc_calls_.end()) return;
        if (it->second.server_idx != m.body.at("idx").get<size_t>()) return;
        it->second.responses.push_back(json());  // no answer from this server
        ++it->second.server_idx;
        locator_next(w, it->second);
        return;
    }
    if (k == "loc_resp") {
        uint64_t id = m.body.at("call").get<uint64_t>();
        auto it = loc_calls_.find(id);
        if (it == loc_calls_.end()) return;
        loc_last_seen_[m.from] = m.body.at("update_number").get<uint64_t>();
        it->second.responses.push_back(m.body);
        ++it->second.server_idx;
        locator_next(w, it->second);
        return;
    }
    if (k == "join_to") {
        if (bootstrap_outcome_ != BootstrapOutcome::Pending) return;
        // scenario 2: the registered System Table is unresponsive
        locator_call(w, "get_replicas", {}, [this, &w](const QuorumOutcome& out) {
            if (bootstrap_outcome_ != BootstrapOutcome::Pending) return;
            if (out.status != QuorumOutcome::Ok) {
                finish_join(w, BootstrapOutcome::CannotJoin);
                return;
            }
            bootstrap_try_restart_st(w, out.replicas, 0);
        });
        return;
    }
    if (k == "join_ack") {
        if (bootstrap_outcome_ != BootstrapOutcome::Pending) return;
        members_ = from_json_list(m.body.at("members"));
        for (auto it = m.body.at("eligible").begin(); it != m.body.at("eligible").end(); ++it) {
            member_eligible_[it.key()] = it.value().get<bool>();
        }
        st_location_ = m.from;
        finish_join(w, m.body.value("restarted", false) ? BootstrapOutcome::RestartedSystemTable
                                                        : BootstrapOutcome::Joined);
        return;
    }
    if (k == "recreate_to") {
        if (bootstrap_outcome_ != BootstrapOutcome::Pending) return;
        auto holders = from_json_list(m.body.at("holders"));
        size_t idx = m.body.at("idx").get<size_t>() + 1;
        bootstrap_try_restart_st(w, holders, idx);
        return;
    }
    if (k == "flush_done") {
        if (pending_flushes_ > 0) {
            --pending_flushes_;
            if (!delayed_flush_queue_.empty()) {
                auto fn = std::move(delayed_flush_queue_.front());
                delayed_flush_queue_.erase(delayed_flush_queue_.begin());
                fn();
            }
        }
        return;
    }
    if (k == "flush_window") {
        // batched fsync; everything queued is now durable
        w.set_timer(self_, config_.write_delay_window_ms, "flush_window");
        return;
    }
    if (k == "sensor_tick") {
        sensor_tick(w);
        return;
    }
    if (k == "summary_tick") {
        summary_tick(w);
        return;
    }
    if (k == "maint_tick") {
        maintenance_tick(w);
        return;
    }
    if (k == "ring_tick") {
        ring_tick(w);
        return;
    }
    if (k == "lease_renew") {
        if (!st_ || config_.ownership != OwnershipMode::Lease) return;
        locator_call(w, "lease_acquire", {{"requester", self_}},
                     [this, &w](const QuorumOutcome& out) {
                         if (!st_) return;
                         if (out.status == QuorumOutcome::Ok) {
                             lease_expiry_ = w.clock() + config_.lease_duration_ms;
                             w.set_timer(self_, config_.lease_duration_ms / 2, "lease_renew");
                         } else {
                             // cannot hold the lease: stop acting as the System Table
                             st_abdicate(w);
                         }
                     });
        return;
    }
    if (k == "wl_step") {
        if (wl_ && m.body.at("epoch").get<int>() == wl_->epoch) wl_step(w);
        return;
    }
    if (k == "txn_to") {
        if (!txn_ || txn_->id != m.body.at("txn").get<uint64_t>() ||
            txn_->epoch != m.body.at("epoch").get<int>()) {
            return;
        }
        std::string what = m.body.at("what").get<std::string>();
        std::string suspect;
        if (what == "lookup") {
            // System Table unreachable: recover, then fail this attempt
            recover_st_via_locators(w, nullptr);
            txn_fail(w, "");
            return;
        }
        if (what == "lock" && txn_->lock_idx < txn_->tables.size()) {
            suspect = txn_->tm.count(txn_->tables[txn_->lock_idx])
                          ? txn_->tm[txn_->tables[txn_->lock_idx]]
                          : "";
            if (!suspect.empty()) tm_cache_.erase(txn_->tables[txn_->lock_idx]);
        } else if (what == "exec" || what == "votes") {
            // whoever has not answered yet is the suspect
            for (const auto& p : (what == "exec" ? txn_->awaiting : txn_->participants)) {
                if (what == "votes" && txn_->votes.count(p)) continue;
                suspect = p;
                break;
            }
        }
        txn_fail(w, suspect);
        return;
    }
    if (k == "schema_to") {
        if (!schema_op_ || schema_op_->epoch != m.body.at("epoch").get<int>()) return;
        schema_fail_retry(w);
        return;
    }
    if (k == "schema_retry") {
        if (!schema_op_ || schema_op_->epoch != m.body.at("epoch").get<int>()) return;
        schema_send(w);
        return;
    }
    if (k == "rejoin_replica") {
        std::string table = m.body.at("table").get<std::string>();
        auto it = replicas_.find(table);
        if (it == replicas_.end() || it->second.current) return;
        if (tm_cache_.count(table)) {
            w.send(self_, tm_cache_[table], "replica_rejoin",
                   {{"table", table}, {"last_seq", it->second.store.next_seq() - 1}});
        } else if (!st_location_.empty()) {
            w.send(self_, st_location_, "st_lookup", {{"table", table}, {"rejoin", true}});
        }
        return;
    }
    if (k == "shutdown_step") {
        auto peers = from_json_list(m.body.at("peers"));
        if (st_ && !peers.empty()) {
            // push the System Table to the first peer
            st_migrating_ = true;
            w.send(self_, peers.front(), "st_transfer",
                   {{"state", st_->to_json()},
                    {"version", st_->version},
                    {"no_replicate", false},
                    {"handoff", true}});
            w.set_timer(self_, 50, "shutdown_step", m.body);
            return;
        }
        if (!tms_.empty() && !peers.empty()) {
            auto it = tms_.begin();
            std::string target = peers.front();
            for (const auto& p : peers) {
                auto e = member_eligible_.find(p);
                if (e == member_eligible_.end() || e->second) {
                    target = p;
                    break;
                }
            }
            w.send(self_, target, "tm_transfer",
                   {{"table", it->first},
                    {"version", it->second.version},
                    {"state", it->second.to_json()},
                    {"handoff", true}});
            tms_.erase(it);
            w.set_timer(self_, 20, "shutdown_step", m.body);
            return;
        }
        // tell the Table Managers of местных replicas so replacements appear
        for (const auto& [table, rep] : replicas_) {
            if (tm_cache_.count(table)) {
                w.send(self_, tm_cache_[table], "replica_departing",
                       {{"table", table}, {"holder", self_}});
            }
        }
        shutdown_complete_ = true;
        return;
    }

    // ---- locator-facing / ring / probes ----
    if (k == "ring_ping") {
        w.send(self_, m.from, "ring_pong", {{"from", self_}});
        // a ping names its sender as our predecessor candidate
        std::string old_pred = ring_predecessor_;
        ring_predecessor_ = m.from;
        if (!old_pred.empty() && old_pred != m.from && joined_) {
            uint64_t x = stable_name_hash(old_pred);
            uint64_t a = stable_name_hash(m.from);
            uint64_t b = stable_name_hash(self_);
            bool member = std::find(members_.begin(), members_.end(), old_pred) != members_.end();
            if (member && ring_between(x, a, b)) {
                // the previous predecessor was skipped over: it left the ring
                w.trace().record(w.clock(), "ring_suspicion", self_ + ">" + old_pred);
                report_suspect(w, old_pred, nullptr);
            }
        }
        return;
    }
    if (k == "ring_pong") {
        ring_suspected_.erase(m.from);
        return;
    }
    if (k == "ring_ping_to") {
        std::string target = m.body.at("target").get<std::string>();
        if (target == ring_successor_) ring_suspected_.insert(target);
        return;
    }
    if (k == "st_probe") {
        w.send(self_, m.from, "st_probe_ack", {});
        return;
    }
    if (k == "st_probe_ack") {
        // clears any pending death verdict for this instance
        probe_waiting_.erase(m.from);
        return;
    }
    if (k == "probe_to") {
        std::string suspect = m.body.at("suspect").get<std::string>();
        if (!st_ || !probe_waiting_.count(suspect)) return;
        probe_waiting_.erase(suspect);
        st_handle_death(w, suspect);
        return;
    }
    if (k == "st_report_failure") {
        if (!st_) return;
        std::string suspect = m.body.at("suspect").get<std::string>();
        if (std::find(st_->members.begin(), st_->members.end(), suspect) == st_->members.end()) {
            return;  // already removed
        }
        if (probe_waiting_.count(suspect)) return;
        probe_waiting_.insert(suspect);
        w.send(self_, suspect, "st_probe", {});
        w.set_timer(self_, config_.fail_timeout_ms, "probe_to", {{"suspect", suspect}});
        return;
    }

    // ---- System Table service ----
    if (k == "join_request") {
        if (!st_) return;  // stale location; sender will time out and recover
        std::string who = m.body.at("instance").get<std::string>();
        bool eligible = m.body.at("eligible").get<bool>();
        MachineSpec spec;
        spec.cpu_capacity_mhz = m.body.at("cpu").get<double>();
        spec.memory_mb = m.body.at("mem").get<double>();
        spec.disk_mb = m.body.at("disk").get<double>();
        member_eligible_[who] = eligible;
        st_statuses_[who] = {spec, ResourceSummary{}};
        st_enqueue_commit(
            w,
            [this, who]() {
                if (std::find(st_->members.begin(), st_->members.end(), who) == st_->members.end()) {
                    st_->members.push_back(who);
                }
            },
            [this, &w, who]() {
                json elig = json::object();
                for (const auto& [mm, e] : member_eligible_) elig[mm] = e;
                w.send(self_, who, "join_ack", {{"members", st_->members}, {"eligible", elig}});
                st_broadcast_membership(w);
            });
        return;
    }
    if (k == "membership_update") {
        members_ = from_json_list(m.body.at("members"));
        for (auto it = m.body.at("eligible").begin(); it != m.body.at("eligible").end(); ++it) {
            member_eligible_[it.key()] = it.value().get<bool>();
        }
        st_location_ = m.body.at("st").get<std::string>();
        for (auto it = ring_suspected_.begin(); it != ring_suspected_.end();) {
            if (std::find(members_.begin(), members_.end(), *it) == members_.end()) {
                it = ring_suspected_.erase(it);
            } else {
                ++it;
            }
        }
        // release locks owned by departed instances
        for (auto& [table, tm] : tms_) {
            std::vector<uint64_t> victims;
            for (const auto& h : tm.lock_holders) {
                if (std::find(members_.begin(), members_.end(), h.owner) == members_.end()) {
                    victims.push_back(h.txn);
                }
            }
            for (auto& qe : tm.lock_queue) {
                if (std::find(members_.begin(), members_.end(), qe.owner) == members_.end()) {
                    victims.push_back(qe.txn);
                }
            }
            for (uint64_t v : victims) tm_release(w, tm, v);
        }
        return;
    }
    if (k == "st_lookup") {
        if (!st_) return;
        std::string table = m.body.at("table").get<std::string>();
        json resp{{"table", table}};
        auto it = st_->table_tm.find(table);
        if (it == st_->table_tm.end() || it->second.empty()) {
            resp["found"] = false;
        } else {
            resp["found"] = true;
            resp["tm"] = it->second;
        }
        for (auto field : {"txn", "schema_op", "rejoin"}) {
            if (m.body.contains(field)) resp[field] = m.body.at(field);
        }
        w.send(self_, m.from, "st_lookup_resp", resp);
        return;
    }
    if (k == "st_lookup_resp") {
        std::string table = m.body.at("table").get<std::string>();
        bool found = m.body.at("found").get<bool>();
        if (found) tm_cache_[table] = m.body.at("tm").get<std::string>();
        if (m.body.contains("rejoin")) {
            if (found) {
                auto it = replicas_.find(table);
                if (it != replicas_.end() && !it->second.current) {
                    w.send(self_, tm_cache_[table], "replica_rejoin",
                           {{"table", table}, {"last_seq", it->second.store.next_seq() - 1}});
                }
            }
            return;
        }
        if (m.body.contains("schema_op")) {
            if (schema_op_) schema_send(w);
            return;
        }
        if (txn_ && txn_->phase == Txn::Resolve) {
            if (!found) {
                txn_fail(w, "");
                return;
            }
            txn_resolve_next(w);
        }
        return;
    }
    if (k == "st_create_table") {
        if (!st_) return;
        if (st_migrating_) return;  // requester retries against the new location
        std::string table = m.body.at("table").get<std::string>();
        std::string cols = m.body.at("cols").get<std::string>();
        std::string requester = m.body.at("requester").get<std::string>();
        bool if_not_exists = m.body.at("if_not_exists").get<bool>();
        if (st_->table_tm.count(table)) {
            w.send(self_, m.from, "st_create_resp",
                   {{"table", table}, {"status", if_not_exists ? "ok_existing" : "duplicate"}});
            return;
        }
        // the first replica lives on the requester unless it is excluded from
        // holding data, in which case the top-ranked eligible peer is used
        std::string first_holder = requester;
        auto elig = member_eligible_.find(requester);
        if (elig != member_eligible_.end() && !elig->second) {
            first_holder.clear();
            auto ranking = st_ranking();
            for (const auto& rm : ranking) {
                auto e = member_eligible_.find(rm.name);
                if (e != member_eligible_.end() && !e->second) continue;
                first_holder = rm.name;
                break;
            }
        }
        st_enqueue_commit(
            w,
            [this, table, cols, requester]() {
                st_->table_tm[table] = requester;
                st_->schemas[table] = cols;
                st_->tm_meta_holders[table] = {requester};
            },
            [this, &w, m, table, cols, first_holder, requester]() {
                w.send(self_, m.from, "st_create_resp",
                       {{"table", table},
                        {"status", "ok"},
                        {"cols", cols},
                        {"first_holder", first_holder},
                        {"requester", requester}});
            });
        return;
    }
    if (k == "st_create_resp") {
        if (!schema_op_) return;
        std::string status = m.body.at("status").get<std::string>();
        if (status == "duplicate") {
            auto cb = std::move(schema_op_->done);
            schema_op_.reset();
            if (cb) cb(false);
            return;
        }
        if (status == "ok_existing") {
            auto cb = std::move(schema_op_->done);
            schema_op_.reset();
            if (cb) cb(true);
            return;
        }
        // boot the Table Manager here (the requesting instance)
        std::string table = m.body.at("table").get<std::string>();
        std::string cols = m.body.at("cols").get<std::string>();
        std::string first_holder = m.body.at("first_holder").get<std::string>();
        TableManagerState tm;
        tm.table = table;
        tm.schema_cols = cols;
        tm.meta_holders = {self_};
        if (!first_holder.empty()) tm.holders = {first_holder};
        tms_[table] = tm;
        tm_cache_[table] = self_;
        auto& stored = tms_[table];
        tm_sync_meta(w, stored);
        if (first_holder == self_) {
            LocalReplica rep;
            rep.store.schema = parse_schema_columns(table, cols);
            replicas_[table] = std::move(rep);
            replica_persist(w, table);
            auto cb = std::move(schema_op_->done);
            schema_op_.reset();
            if (cb) cb(true);
        } else if (!first_holder.empty()) {
            w.send(self_, first_holder, "replica_install",
                   {{"table", table}, {"cols", cols}, {"rows", json::array()},
                    {"log", ""}, {"initial", true}});
            w.set_timer(self_, 4 * config_.fail_timeout_ms, "schema_to",
                        {{"epoch", schema_op_->epoch}});
        } else {
            // no eligible holder yet; the replication-factor loop will catch up
            auto cb = std::move(schema_op_->done);
            schema_op_.reset();
            if (cb) cb(true);
        }
        return;
    }
    if (k == "st_drop_table") {
        if (!st_) return;
        if (st_migrating_) return;
        std::string table = m.body.at("table").get<std::string>();
        bool if_exists = m.body.at("if_exists").get<bool>();
        auto it = st_->table_tm.find(table);
        if (it == st_->table_tm.end()) {
            w.send(self_, m.from, "st_drop_resp",
                   {{"table", table}, {"status", if_exists ? "ok_absent" : "missing"}});
            return;
        }
        std::string tm_host = it->second;
        st_enqueue_commit(
            w,
            [this, table]() {
                st_->table_tm.erase(table);
                st_->schemas.erase(table);
                st_->tm_meta_holders.erase(table);
            },
            [this, &w, m, table, tm_host]() {
                w.send(self_, m.from, "st_drop_resp",
                       {{"table", table}, {"status", "ok"}, {"tm", tm_host}});
            });
        return;
    }
    if (k == "st_drop_resp") {
        if (!schema_op_) return;
        std::string status = m.body.at("status").get<std::string>();
        std::string table = m.body.at("table").get<std::string>();
        tm_cache_.erase(table);
        if (status == "missing") {
            auto cb = std::move(schema_op_->done);
            schema_op_.reset();
            if (cb) cb(false);
            return;
        }
        if (status == "ok") {
            w.send(self_, m.body.at("tm").get<std::string>(), "tm_drop", {{"table", table}});
        }
        auto cb = std::move(schema_op_->done);
        schema_op_.reset();
        if (cb) cb(true);
        return;
    }
    if (k == "st_summary") {
        if (!st_) return;
        MachineSpec spec;
        spec.cpu_capacity_mhz = m.body.at("spec_cpu").get<double>();
        spec.memory_mb = m.body.at("spec_mem").get<double>();
        spec.disk_mb = m.body.at("spec_disk").get<double>();
        ResourceSummary sum;
        sum.cpu.mean = m.body.at("cpu").get<double>();
        sum.mem.mean = m.body.at("mem").get<double>();
        sum.disk.mean = m.body.at("disk").get<double>();
        st_statuses_[m.from] = {spec, sum};
        return;
    }
    if (k == "st_get_ranking") {
        if (!st_) return;
        json list = json::array();
        for (const auto& rm : st_ranking()) {
            list.push_back({{"name", rm.name}, {"score", rm.score}});
        }
        w.send(self_, m.from, "st_ranking", {{"ranking", list}});
        return;
    }
    if (k == "st_ranking") {
        ranking_cache_.clear();
        for (const auto& e : m.body.at("ranking")) {
            ranking_cache_.push_back({e.at("name").get<std::string>(), e.at("score").get<double>()});
        }
        return;
    }

    // ---- System Table meta replication / recovery / migration ----
    if (k == "st_meta_update") {
        uint64_t version = m.body.at("version").get<uint64_t>();
        st_meta_ = {version, SystemTableState::from_json(m.body.at("state"))};
        json j{{"version", version}, {"state", m.body.at("state")}};
        w.disk_write(self_, "st_meta", j.dump());
        w.send(self_, m.from, "st_meta_ack", {{"version", version}});
        return;
    }
    if (k == "st_meta_ack") {
        st_meta_action_.clear();
        if (st_) {
            // first ack from a fresh holder registers it
            std::string holder = m.from;
            if (std::find(st_->st_meta_holders.begin(), st_->st_meta_holders.end(), holder) ==
                st_->st_meta_holders.end()) {
                st_->st_meta_holders.push_back(holder);
                ++st_->version;
                st_persist(w);
                for (const auto& h : st_->st_meta_holders) {
                    if (h == self_ || h == holder) continue;
                    w.send(self_, h, "st_meta_update",
                           {{"version", st_->version}, {"state", st_->to_json()}});
                }
                locator_call(w, "set_replicas", {{"uris", st_->st_meta_holders}},
                             [](const QuorumOutcome&) {});
            }
            if (pending_recreate_requester_) {
                std::string requester = *pending_recreate_requester_;
                pending_recreate_requester_.reset();
                st_broadcast_membership(w);
                w.send(self_, requester, "recreate_st_ack", {{"ok", true}, {"st", self_}});
            }
        }
        return;
    }
    if (k == "st_meta_drop") {
        st_meta_.reset();
        w.disk_erase(self_, "st_meta");
        return;
    }
    if (k == "recreate_st") {
        if (st_) {  // already recreated here
            w.send(self_, m.from, "recreate_st_ack", {{"ok", true}, {"st", self_}});
            return;
        }
        if (!st_meta_) {
            w.send(self_, m.from, "recreate_st_ack", {{"ok", false}});
            return;
        }
        // recreate from the persisted replica, then claim the role via quorum
        SystemTableState candidate = st_meta_->second;
        locator_call(w, "get_active", {}, [this, &w, candidate, requester = m.from](
                                              const QuorumOutcome& cur) {
            if (st_) return;
            if (cur.status != QuorumOutcome::Ok) {
                w.send(self_, requester, "recreate_st_ack", {{"ok", false}});
                return;
            }
            if (!cur.value.empty() && cur.value != st_location_ && cur.value != self_) {
                // someone beat us to it
                st_location_ = cur.value;
                w.send(self_, requester, "recreate_st_ack", {{"ok", true}, {"st", cur.value}});
                return;
            }
            std::string dead_active = cur.value;
            locator_call(w, "set_active", {{"uri", self_}}, [this, &w, candidate, requester,
                                                             dead_active](const QuorumOutcome& out) {
                if (st_) return;
                if (out.status == QuorumOutcome::Stale) {
                    // racing recreation: re-read and defer
                    w.send(self_, requester, "recreate_st_ack", {{"ok", false}});
                    return;
                }
                if (out.status == QuorumOutcome::LeaseHeld) {
                    // must wait for the old lease to expire
                    w.set_timer(self_, 500, "recreate_lease_retry", {{"requester", requester}});
                    return;
                }
                if (out.status != QuorumOutcome::Ok) {
                    w.send(self_, requester, "recreate_st_ack", {{"ok", false}});
                    return;
                }
                st_ = candidate;
                ++st_epoch_;
                ++st_->version;
                st_location_ = self_;
                members_ = st_->members;
                auto& sh = st_->st_meta_holders;
                sh.erase(std::remove(sh.begin(), sh.end(), dead_active), sh.end());
                if (std::find(sh.begin(), sh.end(), self_) == sh.end()) sh.push_back(self_);
                st_persist(w);
                if (config_.ownership == OwnershipMode::Lease) {
                    w.set_timer(self_, 0, "lease_renew");
                }
                locator_call(w, "set_replicas", {{"uris", st_->st_meta_holders}},
                             [](const QuorumOutcome&) {});
                w.trace().record(w.clock(), "st_recovered", self_);
                // re-replicate state immediately when a machine is available;
                // schema traffic waits behind this copy
                std::string target;
                if (int(sh.size()) < config_.repl.s) {
                    for (const auto& mem : st_->members) {
                        if (mem == dead_active || mem == self_) continue;
                        if (std::find(sh.begin(), sh.end(), mem) != sh.end()) continue;
                        auto e = member_eligible_.find(mem);
                        if (e != member_eligible_.end() && !e->second) continue;
                        target = mem;
                        break;
                    }
                }
                if (!target.empty()) {
                    pending_recreate_requester_ = requester;
                    st_meta_action_.insert(target);
                    w.send(self_, target, "st_meta_update",
                           {{"version", st_->version}, {"state", st_->to_json()}});
                    w.set_timer(self_, 4 * config_.fail_timeout_ms, "recreate_finalize", {});
                } else {
                    st_broadcast_membership(w);
                    w.send(self_, requester, "recreate_st_ack", {{"ok", true}, {"st", self_}});
                }
            });
        });
        return;
    }
    if (k == "recreate_finalize") {
        if (!st_ || !pending_recreate_requester_) return;
        std::string requester = *pending_recreate_requester_;
        pending_recreate_requester_.reset();
        st_broadcast_membership(w);
        w.send(self_, requester, "recreate_st_ack", {{"ok", true}, {"st", self_}});
        return;
    }
    if (k == "recreate_lease_retry") {
        w.send(self_, self_, "recreate_st", {});
        return;
    }
    if (k == "recreate_st_ack") {
        if (bootstrap_outcome_ == BootstrapOutcome::Pending) {
            if (m.body.at("ok").get<bool>()) {
                std::string st = m.body.value("st", m.from);
                bootstrap_try_join(w, st);
            }
            return;
        }
        if (m.body.at("ok").get<bool>() && m.body.contains("st")) {
            st_location_ = m.body.at("st").get<std::string>();
        }
        return;
    }
    if (k == "recover_tm") {
        std::string table = m.body.at("table").get<std::string>();
        auto it = tm_meta_.find(table);
        if (it == tm_meta_.end()) {
            w.send(self_, m.from, "tm_recover_failed", {{"table", table}});
            return;
        }
        std::vector<std::string> fresh_members = from_json_list(m.body.at("members"));
        std::string dead = m.body.at("dead").get<std::string>();
        members_ = fresh_members;
        for (auto e = m.body.at("eligible").begin(); e != m.body.at("eligible").end(); ++e) {
            member_eligible_[e.key()] = e.value().get<bool>();
        }
        if (!tms_.count(table)) {
            TableManagerState tm = it->second.second;
            // lock state is never recovered; drop departed holders
            tm.lock_holders.clear();
            tm.lock_queue.clear();
            auto still_member = [&](const std::string& h) {
                return std::find(members_.begin(), members_.end(), h) != members_.end();
            };
            auto& hs = tm.holders;
            hs.erase(std::remove_if(hs.begin(), hs.end(),
                                    [&](const std::string& h) { return !still_member(h); }),
                     hs.end());
            auto& mh = tm.meta_holders;
            mh.erase(std::remove_if(mh.begin(), mh.end(),
                                    [&](const std::string& h) { return !still_member(h); }),
                     mh.end());
            if (std::find(mh.begin(), mh.end(), self_) == mh.end()) mh.push_back(self_);
            tms_[table] = std::move(tm);
            tm_sync_meta(w, tms_[table]);
            w.trace().record(w.clock(), "tm_recovered", table + "@" + self_);
        }
        tm_cache_[table] = self_;
        // a new replica is created immediately when a machine is available;
        // the recovered manager is announced once the copy lands, so queries
        // wait out the synchronous re-replication
        auto& tm = tms_[table];
        std::string target;
        if (int(tm.current_holders().size()) < config_.repl.n &&
            !replica_action_.count(table)) {
            for (const auto& mem : members_) {
                if (mem == dead) continue;
                if (std::find(tm.holders.begin(), tm.holders.end(), mem) != tm.holders.end()) {
                    continue;
                }
                auto e = member_eligible_.find(mem);
                if (e != member_eligible_.end() && !e->second) continue;
                target = mem;
                break;
            }
        }
        if (!target.empty()) {
            pending_recover_notify_[next_txn_id_] = table;  // matched by create-txn id
            replica_action_.insert(table);
            start_replica_create(w, table, target);
        } else {
            w.send(self_, m.from, "tm_recovered_notify", {{"table", table}, {"host", self_}});
        }
        return;
    }
    if (k == "tm_recovered_notify") {
        if (!st_) return;
        std::string table = m.body.at("table").get<std::string>();
        std::string host = m.body.at("host").get<std::string>();
        st_enqueue_commit(
            w, [this, table, host]() { st_->table_tm[table] = host; }, nullptr);
        return;
    }
    if (k == "tm_recover_failed") {
        if (!st_) return;
        std::string table = m.body.at("table").get<std::string>();
        w.trace().record(w.clock(), "tm_unrecoverable", table);
        return;
    }
    if (k == "migrate_st_request") {
        if (!st_ || st_migrating_) return;
        if (st_commit_inflight_ || !st_queue_.empty()) {
            // settle in-flight commits first
            json retry = m.body;
            w.set_timer(self_, 10, "migrate_st_retry", retry);
            return;
        }
        st_migrating_ = true;
        w.send(self_, m.body.at("target").get<std::string>(), "st_transfer",
               {{"state", st_->to_json()},
                {"version", st_->version},
                {"no_replicate", m.body.at("no_replicate").get<bool>()}});
        return;
    }
    if (k == "migrate_st_retry") {
        if (!st_) return;
        on_message(w, Message{self_, self_, "migrate_st_request", m.body, false});
        return;
    }
    if (k == "st_transfer") {
        bool no_replicate = m.body.at("no_replicate").get<bool>();
        SystemTableState incoming = SystemTableState::from_json(m.body.at("state"));
        uint64_t version = m.body.at("version").get<uint64_t>();
        std::vector<std::string> old_holders = incoming.st_meta_holders;
        locator_call(w, "get_active", {}, [this, &w, incoming, version, no_replicate, old_holders,
                                           sender = m.from](const QuorumOutcome& cur) mutable {
            if (cur.status != QuorumOutcome::Ok) return;  // cannot claim without a majority
            locator_call(w, "set_active", {{"uri", self_}},
                         [this, &w, incoming, version, no_replicate, old_holders,
                          sender](const QuorumOutcome& out) mutable {
                             if (out.status != QuorumOutcome::Ok) return;
                             st_ = incoming;
                             ++st_epoch_;
                             st_->version = version + 1;
                             if (no_replicate) {
                                 st_->st_meta_holders = {self_};
                             } else if (std::find(st_->st_meta_holders.begin(),
                                                  st_->st_meta_holders.end(),
                                                  self_) == st_->st_meta_holders.end()) {
                                 st_->st_meta_holders.push_back(self_);
                             }
                             st_location_ = self_;
                             members_ = st_->members;
                             st_persist(w);
                             locator_call(w, "set_replicas", {{"uris", st_->st_meta_holders}},
                                          [](const QuorumOutcome&) {});
                             if (config_.ownership == OwnershipMode::Lease) {
                                 w.set_timer(self_, 0, "lease_renew");
                             }
                             st_broadcast_membership(w);
                             w.send(self_, sender, "st_transfer_done",
                                    {{"no_replicate", no_replicate},
                                     {"old_holders", old_holders}});
                             w.trace().record(w.clock(), "st_migrated", self_);
                             if (schema_op_ &&
                                 schema_op_->stmt.kind == StatementKind::MigrateSystemTable) {
                                 auto cb = std::move(schema_op_->done);
                                 schema_op_.reset();
                                 if (cb) cb(true);
                             }
                         });
        });
        return;
    }
    if (k == "st_transfer_done") {
        bool no_replicate = m.body.at("no_replicate").get<bool>();
        st_migrating_ = false;
        st_.reset();
        st_queue_.clear();
        st_commit_inflight_ = false;
        st_location_ = m.from;
        if (no_replicate) {
            // the migrated System Table starts with a single state copy
            for (const auto& h : from_json_list(m.body.at("old_holders"))) {
                if (h == m.from) continue;
                if (h == self_) {
                    st_meta_.reset();
                    w.disk_erase(self_, "st_meta");
                } else {
                    w.send(self_, h, "st_meta_drop", {});
                }
            }
        }
        return;
    }
    if (k == "migrate_tm_request") {
        std::string table = m.body.at("table").get<std::string>();
        auto it = tms_.find(table);
        if (it == tms_.end()) return;  // stale cache at sender
        w.send(self_, m.body.at("target").get<std::string>(), "tm_transfer",
               {{"table", table}, {"version", it->second.version}, {"state", it->second.to_json()}});
        return;
    }
    if (k == "tm_transfer") {
        std::string table = m.body.at("table").get<std::string>();
        TableManagerState tm = TableManagerState::from_json(m.body.at("state"));
        tm.lock_holders.clear();
        tm.lock_queue.clear();
        if (std::find(tm.meta_holders.begin(), tm.meta_holders.end(), self_) ==
            tm.meta_holders.end()) {
            tm.meta_holders.push_back(self_);
        }
        tms_[table] = std::move(tm);
        tm_cache_[table] = self_;
        tm_sync_meta(w, tms_[table]);
        if (!st_location_.empty()) {
            w.send(self_, st_location_, "tm_recovered_notify", {{"table", table}, {"host", self_}});
        }
        w.send(self_, m.from, "tm_transfer_done", {{"table", table}});
        return;
    }
    if (k == "tm_transfer_done") {
        std::string table = m.body.at("table").get<std::string>();
        tms_.erase(table);
        tm_cache_[table] = m.from;
        if (schema_op_ && schema_op_->stmt.kind == StatementKind::MigrateTableManager &&
            schema_op_->stmt.table == table) {
            auto cb = std::move(schema_op_->done);
            schema_op_.reset();
            if (cb) cb(true);
        }
        return;
    }
    if (k == "tm_meta_update") {
        std::string table = m.body.at("table").get<std::string>();
        uint64_t version = m.body.at("version").get<uint64_t>();
        tm_meta_[table] = {version, TableManagerState::from_json(m.body.at("state"))};
        json j{{"version", version}, {"state", m.body.at("state")}};
        w.disk_write(self_, "tm_meta_" + table, j.dump());
        if (m.body.value("install", false)) {
            w.send(self_, m.from, "tm_meta_installed", {{"table", table}});
        }
        return;
    }
    if (k == "tm_meta_installed") {
        std::string table = m.body.at("table").get<std::string>();
        replica_action_.erase("\1" + table);
        auto it = tms_.find(table);
        if (it == tms_.end()) return;
        if (std::find(it->second.meta_holders.begin(), it->second.meta_holders.end(), m.from) ==
            it->second.meta_holders.end()) {
            it->second.meta_holders.push_back(m.from);
            tm_sync_meta(w, it->second);
        }
        return;
    }
    if (k == "tm_meta_drop") {
        std::string table = m.body.at("table").get<std::string>();
        tm_meta_.erase(table);
        w.disk_erase(self_, "tm_meta_" + table);
        return;
    }
    if (k == "tm_drop") {
        tm_drop_table(w, m.body.at("table").get<std::string>());
        return;
    }
    if (k == "tm_member_dead") {
        std::string table = m.body.at("table").get<std::string>();
        std::string dead = m.body.at("dead").get<std::string>();
        auto it = tms_.find(table);
        if (it == tms_.end()) return;
        auto& tm = it->second;
        auto& hs = tm.holders;
        if (std::find(hs.begin(), hs.end(), dead) != hs.end()) {
            hs.erase(std::remove(hs.begin(), hs.end(), dead), hs.end());
            tm.stale.erase(dead);
            tm_sync_meta(w, tm);
        }
        auto& mh = tm.meta_holders;
        if (std::find(mh.begin(), mh.end(), dead) != mh.end()) {
            mh.erase(std::remove(mh.begin(), mh.end(), dead), mh.end());
            tm_sync_meta(w, tm);
        }
        return;
    }

    // ---- Table Manager service ----
    if (k == "tm_lock") {
        std::string table = m.body.at("table").get<std::string>();
        auto it = tms_.find(table);
        if (it == tms_.end()) {
            w.send(self_, m.from, "tm_gone", {{"table", table}});
            return;
        }
        TableManagerState::LockReq req;
        req.txn = m.body.at("txn").get<uint64_t>();
        req.owner = m.body.at("owner").get<std::string>();
        req.exclusive = m.body.at("exclusive").get<bool>();
        ++it->second.query_pattern[req.owner];
        if (m.body.contains("replica_create")) {
            pending_replica_create_[req.txn] = m.body.at("replica_create").get<std::string>();
        }
        it->second.lock_queue.push_back(req);
        tm_pump_locks(w, it->second);
        return;
    }
    if (k == "tm_grant") {
        uint64_t txn = m.body.at("txn").get<uint64_t>();
        std::string table = m.body.at("table").get<std::string>();
        if (pending_replica_create_.count(txn)) {
            // our own exclusive lock for CREATE REPLICA
            std::string target = pending_replica_create_[txn];
            pending_replica_create_.erase(txn);
            auto it = tms_.find(table);
            if (it == tms_.end()) {
                replica_action_.erase(table);
                return;
            }
            // snapshot the current rows from a current holder (self if local)
            auto current = it->second.current_holders();
            if (current.empty() && !replicas_.count(table)) {
                // nothing to copy from; treat the new replica as the first
                w.send(self_, target, "replica_install",
                       {{"table", table}, {"cols", it->second.schema_cols},
                        {"rows", json::array()}, {"log", ""}, {"create_txn", txn}});
                return;
            }
            std::string source = replicas_.count(table) ? self_ : current.front();
            w.send(self_, source, "replica_fetch",
                   {{"table", table}, {"target", target}, {"create_txn", txn}});
            return;
        }
        if (!txn_ || txn_->id != txn) {
            // late grant for an aborted transaction: release it
            w.send(self_, m.from, "tm_abort_release", {{"table", table}, {"txn", txn}});
            return;
        }
        txn_->locked.insert(table);
        txn_->replicas[table] = from_json_list(m.body.at("replicas"));
        ++txn_->lock_idx;
        txn_lock_next(w);
        return;
    }
    if (k == "tm_gone") {
        std::string table = m.body.at("table").get<std::string>();
        tm_cache_.erase(table);
        if (txn_ && txn_->phase == Txn::Lock) txn_fail(w, "");
        return;
    }
    if (k == "tm_abort_release") {
        auto it = tms_.find(m.body.at("table").get<std::string>());
        if (it == tms_.end()) return;
        tm_release(w, it->second, m.body.at("txn").get<uint64_t>());
        return;
    }
    if (k == "replica_fetch") {
        std::string table = m.body.at("table").get<std::string>();
        auto it = replicas_.find(table);
        if (it == replicas_.end()) return;
        json rows = json::array();
        for (const Row& row : it->second.store.rows) {
            json jr = json::array();
            for (const Value& v : row) {
                if (v.kind == Value::IntLit) jr.push_back(v.integer);
                else jr.push_back(v.text);
            }
            rows.push_back(jr);
        }
        w.send(self_, m.body.at("target").get<std::string>(), "replica_install",
               {{"table", table},
                {"cols", schema_to_cols(it->second.store.schema)},
                {"rows", rows},
                {"log", serialize_log(it->second.store.log)},
                {"create_txn", m.body.at("create_txn")},
                {"tm", m.from}});
        return;
    }
    if (k == "replica_install") {
        // copying a table takes time proportional to its size
        json body = m.body;
        body["sender"] = m.from;
        SimTime delay = SimTime(m.body.at("rows").size()) * config_.per_row_install_cost_x10 / 10;
        w.set_timer(self_, delay + config_.flush_ms, "replica_install_done", body);
        return;
    }
    if (k == "replica_install_done") {
        std::string table = m.body.at("table").get<std::string>();
        LocalReplica rep;
        rep.store.schema = parse_schema_columns(table, m.body.at("cols").get<std::string>());
        for (const auto& jr : m.body.at("rows")) {
            Row row;
            for (const auto& v : jr) {
                if (v.is_number_integer()) row.push_back(Value::of_int(v.get<int64_t>()));
                else row.push_back(Value::of_string(v.get<std::string>()));
            }
            rep.store.rows.push_back(std::move(row));
        }
        rep.store.log = parse_log(m.body.at("log").get<std::string>());
        rep.current = true;
        replicas_[table] = std::move(rep);
        replica_persist(w, table);
        std::string sender = m.body.at("sender").get<std::string>();
        std::string tm_host = m.body.value("tm", sender);
        if (m.body.value("initial", false)) {
            w.send(self_, sender, "replica_installed", {{"table", table}, {"initial", true}});
        } else {
            w.send(self_, tm_host, "replica_installed",
                   {{"table", table}, {"create_txn", m.body.value("create_txn", uint64_t(0))}});
        }
        return;
    }
    if (k == "replica_installed") {
        std::string table = m.body.at("table").get<std::string>();
        if (m.body.value("initial", false)) {
            // first replica of a fresh table
            if (schema_op_ && schema_op_->stmt.kind == StatementKind::CreateTable) {
                auto cb = std::move(schema_op_->done);
                schema_op_.reset();
                if (cb) cb(true);
            }
            return;
        }
        auto it = tms_.find(table);
        if (it == tms_.end()) return;
        auto& tm = it->second;
        if (std::find(tm.holders.begin(), tm.holders.end(), m.from) == tm.holders.end()) {
            tm.holders.push_back(m.from);
            tm_sync_meta(w, tm);
            w.trace().record(w.clock(), "replica_created", table + "@" + m.from);
        }
        uint64_t txn = m.body.value("create_txn", uint64_t(0));
        if (txn != 0) {
            tm_release(w, tm, txn);
            replica_action_.erase(table);
            need_level_.erase(table);
            auto rec = pending_recover_notify_.find(txn);
            if (rec != pending_recover_notify_.end()) {
                // recovery finished only now that the copy landed
                pending_recover_notify_.erase(rec);
                if (!st_location_.empty()) {
                    w.send(self_, st_location_, "tm_recovered_notify",
                           {{"table", table}, {"host", self_}});
                }
            }
        }
        return;
    }
    if (k == "tm_mark_stale") {
        auto it = tms_.find(m.body.at("table").get<std::string>());
        if (it == tms_.end()) return;
        for (const auto& h : from_json_list(m.body.at("holders"))) {
            if (std::find(it->second.holders.begin(), it->second.holders.end(), h) !=
                it->second.holders.end()) {
                it->second.stale.insert(h);
                w.send(self_, h, "replica_stale", {{"table", it->second.table}});
            }
        }
        tm_sync_meta(w, it->second);
        return;
    }
    if (k == "replica_stale") {
        auto it = replicas_.find(m.body.at("table").get<std::string>());
        if (it != replicas_.end()) it->second.current = false;
        return;
    }
    if (k == "replica_drop") {
        std::string table = m.body.at("table").get<std::string>();
        replicas_.erase(table);
        w.disk_erase(self_, "log_" + table);
        w.disk_erase(self_, "schema_" + table);
        return;
    }
    if (k == "replica_departing") {
        std::string table = m.body.at("table").get<std::string>();
        auto it = tms_.find(table);
        if (it == tms_.end()) return;
        auto& hs = it->second.holders;
        std::string holder = m.body.at("holder").get<std::string>();
        hs.erase(std::remove(hs.begin(), hs.end(), holder), hs.end());
        it->second.stale.erase(holder);
        tm_sync_meta(w, it->second);
        return;
    }
    if (k == "replica_rejoin") {
        std::string table = m.body.at("table").get<std::string>();
        auto it = tms_.find(table);
        if (it == tms_.end()) return;
        auto& tm = it->second;
        uint64_t last_seq = m.body.at("last_seq").get<uint64_t>();
        // compare against a live current replica; identical logs are re-admitted,
        // outdated ones are dropped wholesale and recreated
        auto current = tm.current_holders();
        uint64_t authoritative = 0;
        if (replicas_.count(table)) {
            authoritative = replicas_[table].store.next_seq() - 1;
        } else if (!current.empty()) {
            w.send(self_, current.front(), "seq_query",
                   {{"table", table}, {"rejoiner", m.from}, {"last_seq", last_seq}});
            return;
        }
        bool match = last_seq == authoritative;
        if (match || current.empty()) {
            if (std::find(tm.holders.begin(), tm.holders.end(), m.from) == tm.holders.end()) {
                tm.holders.push_back(m.from);
                tm_sync_meta(w, tm);
            }
            tm.stale.erase(m.from);
            w.send(self_, m.from, "rejoin_resp", {{"table", table}, {"keep", true}});
        } else {
            w.send(self_, m.from, "rejoin_resp", {{"table", table}, {"keep", false}});
        }
        return;
    }
    if (k == "seq_query") {
        std::string table = m.body.at("table").get<std::string>();
        auto it = replicas_.find(table);
        uint64_t seq = it != replicas_.end() ? it->second.store.next_seq() - 1 : 0;
        w.send(self_, m.from, "seq_resp",
               {{"table", table}, {"rejoiner", m.body.at("rejoiner")},
                {"last_seq", m.body.at("last_seq")}, {"authoritative", seq}});
        return;
    }
    if (k == "seq_resp") {
        std::string table = m.body.at("table").get<std::string>();
        auto it = tms_.find(table);
        if (it == tms_.end()) return;
        auto& tm = it->second;
        std::string rejoiner = m.body.at("rejoiner").get<std::string>();
        bool match = m.body.at("last_seq").get<uint64_t>() ==
                     m.body.at("authoritative").get<uint64_t>();
        if (match) {
            if (std::find(tm.holders.begin(), tm.holders.end(), rejoiner) == tm.holders.end()) {
                tm.holders.push_back(rejoiner);
                tm_sync_meta(w, tm);
            }
            tm.stale.erase(rejoiner);
        }
        w.send(self_, rejoiner, "rejoin_resp", {{"table", table}, {"keep", match}});
        return;
    }
    if (k == "rejoin_resp") {
        std::string table = m.body.at("table").get<std::string>();
        auto it = replicas_.find(table);
        if (it == replicas_.end()) return;
        if (m.body.at("keep").get<bool>()) {
            it->second.current = true;
        } else {
            // outdated: dropped wholesale; a fresh copy arrives via maintenance
            replicas_.erase(it);
            w.disk_erase(self_, "log_" + table);
            w.disk_erase(self_, "schema_" + table);
        }
        return;
    }
    if (k == "negotiate_request") {
        double need = m.body.at("need").get<double>();
        bool accepted = negotiate_placement(need, config_.negotiation.willingness_to_help);
        json resp = m.body;
        resp["accepted"] = accepted;
        w.send(self_, m.from, "negotiate_resp", resp);
        return;
    }
    if (k == "negotiate_resp") {
        std::string kind = m.body.at("kind").get<std::string>();
        bool accepted = m.body.at("accepted").get<bool>();
        if (kind == "st_meta") {
            st_meta_action_.clear();
            if (!st_) return;
            if (accepted) {
                st_meta_action_.insert(m.from);
                w.send(self_, m.from, "st_meta_update",
                       {{"version", st_->version}, {"state", st_->to_json()}});
            } else {
                double& need = need_level_["\0st"];
                need = std::min(1.0, need + config_.negotiation.escalation_step);
            }
            return;
        }
        std::string table = m.body.at("table").get<std::string>();
        if (accepted) {
            start_replica_create(w, table, m.from);
        } else {
            replica_action_.erase(table);
            double& need = need_level_[table];
            need = std::min(1.0, need + config_.negotiation.escalation_step);
        }
        return;
    }

    // ---- statement execution at replicas ----
    if (k == "exec_write") {
        std::string table = m.body.at("table").get<std::string>();
        auto it = replicas_.find(table);
        if (it == replicas_.end() || !it->second.current) return;  // caller times out
        int rows = 0;
        replica_apply_write(w, table, m.body.at("txn").get<uint64_t>(),
                            m.body.at("stmt").get<std::string>(), &rows);
        w.send(self_, m.from, "exec_resp",
               {{"txn", m.body.at("txn")}, {"rows", rows}, {"table", table}});
        return;
    }
    if (k == "exec_bulk") {
        std::string table = m.body.at("table").get<std::string>();
        auto it = replicas_.find(table);
        if (it == replicas_.end() || !it->second.current) return;
        uint64_t txn = m.body.at("txn").get<uint64_t>();
        int total = 0;
        for (const auto& text : m.body.at("stmts")) {
            int rows = 0;
            replica_apply_write(w, table, txn, text.get<std::string>(), &rows);
            total += rows;
        }
        w.send(self_, m.from, "exec_resp", {{"txn", txn}, {"rows", total}, {"table", table}});
        return;
    }
    if (k == "exec_read") {
        std::string table = m.body.at("table").get<std::string>();
        auto it = replicas_.find(table);
        if (it == replicas_.end() || !it->second.current) return;
        Statement stmt = parse_statement(m.body.at("stmt").get<std::string>());
        auto rows = query_select(it->second.store, stmt);
        w.send(self_, m.from, "exec_resp",
               {{"txn", m.body.at("txn")}, {"rows", rows.size()}, {"table", table}});
        return;
    }
    if (k == "exec_resp") {
        if (!txn_ || txn_->id != m.body.at("txn").get<uint64_t>()) return;
        Txn& t = *txn_;
        if (t.phase != Txn::Exec) return;
        if (m.body.value("round", 0) != t.exec_round) return;  // straggler of a finished round
        if (!t.awaiting.count(m.from)) return;
        t.awaiting.erase(m.from);
        t.result_rows += m.body.at("rows").get<int>();
        std::string table = m.body.at("table").get<std::string>();
        bool write_round = t.bulk || (t.stmt_idx < t.stmts.size() && t.stmts[t.stmt_idx].is_write());
        if (write_round) t.executed_at[table].insert(m.from);
        bool round_complete = t.awaiting.empty();
        if (!round_complete && write_round && config_.partial_mode) {
            // partially synchronous replication: r replicas suffice; the rest
            // become stale and catch up out of band
            int acked = int(t.executed_at[table].size());
            if (acked >= config_.repl.r) {
                for (const auto& lagging : t.awaiting) t.stragglers[table].insert(lagging);
                t.awaiting.clear();
                round_complete = true;
            }
        }
        if (!round_complete) return;
        if (!t.bulk) ++t.stmt_idx;
        txn_exec_next(w);
        return;
    }

    // ---- commit protocol (engine transactions) ----
    if (k == "c_prepare") {
        uint64_t txn = m.body.at("txn").get<uint64_t>();
        bool paxos = m.body.value("paxos", false);
        // replicas append the transaction's statements to their logs before
        // voting; the vote rides on the durable write
        for (auto& [table, rep] : replicas_) {
            auto pend = rep.pending_texts.find(txn);
            if (pend == rep.pending_texts.end()) continue;
            rep.log_mark[txn] = rep.store.log.size();
            for (const auto& text : pend->second) rep.store.append_log(text);
            replica_persist(w, table);
        }
        auto reply = [this, &w, from = m.from, txn, paxos]() {
            if (paxos) {
                w.send(self_, self_, "pc_accept", {{"txn", txn}, {"coord", from}});
            } else {
                w.send(self_, from, "c_vote", {{"txn", txn}, {"prepared", true}});
            }
        };
        flush_then(w, reply);
        return;
    }
    if (k == "pc_accept") {
        // co-located acceptor for the paxos commit variant
        w.send(self_, m.body.at("coord").get<std::string>(), "c_vote",
               {{"txn", m.body.at("txn")}, {"prepared", true}});
        return;
    }
    if (k == "c_vote") {
        if (!txn_ || txn_->id != m.body.at("txn").get<uint64_t>()) return;
        Txn& t = *txn_;
        if (t.phase != Txn::Prepare) return;
        if (!m.body.at("prepared").get<bool>()) {
            txn_fail(w, "");
            return;
        }
        t.votes.insert(m.from);
        if (t.votes.size() < t.participants.size()) return;
        if (config_.commit_protocol == CommitProtocol::ThreePhase) {
            t.phase = Txn::PreCommitPhase;
            ++t.epoch;
            t.precommit_acks.clear();
            for (const auto& p : t.participants) {
                w.send(self_, p, "c_precommit", {{"txn", t.id}});
            }
            txn_timer(w, 10 * w.link().base_latency_ms +
                             SimTime(t.participants.size()) * w.link().send_cost_ms,
                      "precommit");
            return;
        }
        txn_decide(w, true);
        return;
    }
    if (k == "c_precommit") {
        w.send(self_, m.from, "c_precommit_ack", {{"txn", m.body.at("txn")}});
        return;
    }
    if (k == "c_precommit_ack") {
        if (!txn_ || txn_->id != m.body.at("txn").get<uint64_t>()) return;
        Txn& t = *txn_;
        if (t.phase != Txn::PreCommitPhase) return;
        t.precommit_acks.insert(m.from);
        if (t.precommit_acks.size() == t.participants.size()) txn_decide(w, true);
        return;
    }
    if (k == "c_commit" || k == "c_rollback") {
        uint64_t txn = m.body.at("txn").get<uint64_t>();
        bool commit = k == "c_commit";
        for (auto& [table, rep] : replicas_) {
            auto undo = rep.undo.find(txn);
            if (undo == rep.undo.end() && !rep.pending_texts.count(txn) &&
                !rep.log_mark.count(txn)) {
                continue;
            }
            if (!commit) {
                if (rep.log_mark.count(txn)) {
                    rep.store.log.resize(rep.log_mark[txn]);  // not yet committed
                }
                if (undo != rep.undo.end()) {
                    for (auto it2 = undo->second.rbegin(); it2 != undo->second.rend(); ++it2) {
                        auto& rows = rep.store.rows;
                        if (it2->first) {
                            auto pos = std::find(rows.begin(), rows.end(), it2->second);
                            if (pos != rows.end()) rows.erase(pos);
                        } else {
                            rows.push_back(it2->second);
                        }
                    }
                }
                replica_persist(w, table);
            }
            rep.undo.erase(txn);
            rep.pending_texts.erase(txn);
            rep.log_mark.erase(txn);
            if (commit) replica_persist(w, table);
        }
        for (auto& [table, tm] : tms_) {
            tm_release(w, tm, txn);
        }
        return;
    }

    // unknown kinds are ignored
}

// --------------------------------------------------------------------------
// inspection helpers
// --------------------------------------------------------------------------

bool InstanceNode::holds_current_data_replica(const std::string& table) const {
    auto it = replicas_.find(table);
    return it != replicas_.end() && it->second.current;
}

bool InstanceNode::holds_current_st_meta() const {
    if (st_) return true;
    if (!st_meta_) return false;
    // holders that the active set has dropped do not count
    const auto& holders = st_meta_->second.st_meta_holders;
    return std::find(holders.begin(), holders.end(), self_) != holders.end();
}

bool InstanceNode::holds_current_tm_meta(const std::string& table) const {
    auto it = tm_meta_.find(table);
    if (it == tm_meta_.end()) return false;
    const auto& holders = it->second.second.meta_holders;
    return std::find(holders.begin(), holders.end(), self_) != holders.end();
}

const TableManagerState* InstanceNode::table_manager(const std::string& table) const {
    auto it = tms_.find(table);
    return it == tms_.end() ? nullptr : &it->second;
}

std::vector<std::pair<uint64_t, uint64_t>> InstanceNode::lock_wait_edges() const {
    std::vector<std::pair<uint64_t, uint64_t>> edges;
    for (const auto& [table, tm] : tms_) {
        for (const auto& waiter : tm.lock_queue) {
            for (const auto& holder : tm.lock_holders) {
                edges.emplace_back(waiter.txn, holder.txn);
            }
        }
    }
    return edges;
}

const TableStore* InstanceNode::local_store(const std::string& table) const {
    auto it = replicas_.find(table);
    return it == replicas_.end() ? nullptr : &it->second.store;
}

}  // namespace d2o
