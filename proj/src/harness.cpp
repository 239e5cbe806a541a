#include "d2o/harness.hpp"

#include <algorithm>
#include <sstream>

namespace d2o {

namespace {

const char* kDefaultSchema = "id int, str_a varchar(40), int_a bigint";

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// parses key="value" attributes inside a {command ...} body
std::map<std::string, std::string> parse_attrs(const std::string& body, int line) {
    std::map<std::string, std::string> attrs;
    size_t pos = 0;
    while (pos < body.size()) {
        size_t eq = body.find('=', pos);
        if (eq == std::string::npos) break;
        size_t key_start = body.find_last_of(" \t", eq);
        std::string key = trim(body.substr(key_start == std::string::npos ? 0 : key_start + 1,
                                           eq - (key_start == std::string::npos ? 0 : key_start + 1)));
        size_t q1 = body.find('"', eq);
        if (q1 == std::string::npos) throw ScriptError("line " + std::to_string(line) + ": missing quote");
        size_t q2 = body.find('"', q1 + 1);
        if (q2 == std::string::npos) throw ScriptError("line " + std::to_string(line) + ": missing quote");
        attrs[key] = body.substr(q1 + 1, q2 - q1 - 1);
        pos = q2 + 1;
    }
    return attrs;
}

int attr_int(const std::map<std::string, std::string>& attrs, const std::string& key, int line) {
    auto it = attrs.find(key);
    if (it == attrs.end()) throw ScriptError("line " + std::to_string(line) + ": missing " + key);
    return std::stoi(it->second);
}

}  // namespace

Script parse_script(const std::string& text) {
    Script script;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    std::set<int> started;
    std::string pending;
    int pending_line = 0;

    auto brace_balance = [](const std::string& s) {
        int depth = 0;
        for (char c : s) {
            if (c == '{') ++depth;
            if (c == '}') --depth;
        }
        return depth;
    };

    auto handle = [&](const std::string& raw, int at_line) {
        std::string t = trim(raw);
        if (t.empty()) return;
        if (t[0] == '[') {
            // [Global Parameters: System-wide replication factor = k]
            size_t eq = t.find('=');
            if (eq == std::string::npos) throw ScriptError("line " + std::to_string(at_line) + ": bad header");
            std::string v = t.substr(eq + 1);
            v.erase(std::remove(v.begin(), v.end(), ']'), v.end());
            script.replication_factor = std::stoi(trim(v));
            return;
        }
        if (t[0] != '{') throw ScriptError("line " + std::to_string(at_line) + ": expected command");

        ScriptCommand cmd;
        cmd.line = at_line;

        // {N} <SQL> or {N} {execute_workload=...}
        size_t close = t.find('}');
        std::string head = trim(t.substr(1, close - 1));
        bool is_number = !head.empty() &&
                         head.find_first_not_of("0123456789") == std::string::npos;
        if (is_number) {
            cmd.machine = std::stoi(head);
            if (!started.count(cmd.machine)) {
                throw ScriptError("line " + std::to_string(at_line) + ": unknown machine id " + head);
            }
            std::string rest = trim(t.substr(close + 1));
            if (!rest.empty() && rest[0] == '{') {
                // nested command: {N} {execute_workload="f" duration="ms"}
                std::string body = rest.substr(1, rest.rfind('}') - 1);
                auto attrs = parse_attrs(body, at_line);
                cmd.kind = ScriptCommand::ExecuteWorkload;
                cmd.workload_file = attrs.at("execute_workload");
                cmd.duration_ms = attr_int(attrs, "duration", at_line);
                script.commands.push_back(cmd);
                return;
            }
            cmd.kind = ScriptCommand::SqlOn;
            if (!rest.empty() && rest.back() == ';') rest.pop_back();
            cmd.sql = rest;
            if (cmd.sql.empty()) throw ScriptError("line " + std::to_string(at_line) + ": empty SQL");
            script.commands.push_back(cmd);
            return;
        }

        std::string body = t.substr(1, t.rfind('}') - 1);
        size_t name_end = body.find_first_of(" \t=");
        std::string name = name_end == std::string::npos ? body : body.substr(0, name_end);
        auto attrs = parse_attrs(body, at_line);

        if (name == "start_machine") {
            cmd.kind = ScriptCommand::StartMachine;
            cmd.machine = attr_int(attrs, "id", at_line);
            auto bw = attrs.find("block-workloads");
            if (bw == attrs.end()) bw = attrs.find("block_workloads");
            cmd.block_workloads = bw != attrs.end() && bw->second == "true";
            started.insert(cmd.machine);
        } else if (name == "terminate_machine") {
            cmd.kind = ScriptCommand::TerminateMachine;
            cmd.machine = attr_int(attrs, "id", at_line);
            if (!started.count(cmd.machine)) {
                throw ScriptError("line " + std::to_string(at_line) + ": unknown machine id");
            }
        } else if (name == "sleep" || name.rfind("sleep", 0) == 0) {
            cmd.kind = ScriptCommand::Sleep;
            cmd.sleep_ms = attr_int(attrs, "sleep", at_line);
        } else if (name == "create_table") {
            cmd.kind = ScriptCommand::CreateTable;
            cmd.machine = attr_int(attrs, "id", at_line);
            if (!started.count(cmd.machine)) {
                throw ScriptError("line " + std::to_string(at_line) + ": unknown machine id");
            }
            cmd.table = attrs.at("name");
            if (attrs.count("schema")) cmd.schema_cols = trim(attrs.at("schema"));
            if (attrs.count("prepopulate_with")) cmd.prepopulate = std::stoi(attrs.at("prepopulate_with"));
        } else if (name == "check_repl_factor") {
            cmd.kind = ScriptCommand::CheckReplFactor;
            cmd.table = attrs.at("name");
            cmd.expected = attr_int(attrs, "expected", at_line);
        } else if (name == "check_meta_repl_factor") {
            cmd.kind = ScriptCommand::CheckMetaReplFactor;
            cmd.expected = attr_int(attrs, "expected", at_line);
            if (attrs.count("name")) {
                cmd.table = attrs.at("name");
                cmd.has_table = true;
            }
        } else {
            throw ScriptError("line " + std::to_string(at_line) + ": unknown command " + name);
        }
        script.commands.push_back(cmd);
    };

    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (pending.empty()) {
            pending = t;
            pending_line = line_no;
        } else {
            pending += " " + t;
        }
        if (pending[0] == '{' && brace_balance(pending) > 0) continue;  // command spans lines
        if (pending[0] == '{') {
            // a `{N} <SQL>` line is complete on its own line
            size_t close = pending.find('}');
            std::string head = trim(pending.substr(1, close - 1));
            bool is_number = !head.empty() &&
                             head.find_first_not_of("0123456789") == std::string::npos;
            if (is_number && close == pending.size() - 1) continue;  // SQL on next line
        }
        handle(pending, pending_line);
        pending.clear();
    }
    if (!pending.empty()) handle(pending, pending_line);
    if (script.commands.empty()) throw ScriptError("empty script");
    return script;
}

RecoveryReport compute_recovery(const ThroughputSeries& series) {
    if (series.failure_marks.empty()) throw NoFailureMark();
    RecoveryReport report;
    for (SimTime mark : series.failure_marks) {
        size_t mark_s = size_t(mark / 1000);
        if (mark_s >= series.per_second.size()) continue;
        // the zero-run beginning at the failure mark's second
        size_t i = mark_s;
        int64_t run = 0;
        while (i < series.per_second.size() && series.per_second[i] == 0) {
            ++run;
            ++i;
        }
        report.recovery_time_s = std::max(report.recovery_time_s, run);
        if (run > 0 && i == series.per_second.size()) report.recovered = false;
    }
    return report;
}

// --------------------------------------------------------------------------

namespace {

struct RunningWorkload {
    std::string instance;
    SimTime start = 0;
    SimTime duration = 0;
};

int count_data_replicas(SimWorld& w, const std::vector<std::string>& instances,
                        const std::string& table) {
    int n = 0;
    for (const auto& id : instances) {
        auto* node = w.node_as<InstanceNode>(id);
        if (node && node->holds_current_data_replica(table)) ++n;
    }
    return n;
}

int count_st_meta(SimWorld& w, const std::vector<std::string>& instances) {
    int n = 0;
    for (const auto& id : instances) {
        auto* node = w.node_as<InstanceNode>(id);
        if (node && node->holds_current_st_meta()) ++n;
    }
    return n;
}

int count_tm_meta(SimWorld& w, const std::vector<std::string>& instances,
                  const std::string& table) {
    int n = 0;
    for (const auto& id : instances) {
        auto* node = w.node_as<InstanceNode>(id);
        if (node && node->holds_current_tm_meta(table)) ++n;
    }
    return n;
}

}  // namespace

ScriptRunReport run_script(const Script& script, const ScriptRunConfig& config) {
    ClusterConfig cluster;
    cluster.locators = config.locators;
    cluster.seed = config.seed;
    cluster.base_latency_ms = config.base_latency_ms;
    cluster.jitter_ms = config.jitter_ms;
    cluster.send_cost_ms = config.send_cost_ms;
    cluster.engine.repl.n = script.replication_factor;
    cluster.engine.repl.t = script.replication_factor;
    cluster.engine.repl.s = script.replication_factor;
    cluster.engine.repl.r = config.partial_r;
    cluster.engine.partial_mode = config.partial_mode;
    cluster.engine.commit_protocol = config.commit_protocol;
    cluster.engine.paxos_commit = config.paxos_commit;
    cluster.engine.write_delay = config.write_delay;
    cluster.engine.ownership = config.ownership;

    SimWorld world(config.seed);
    add_locators(world, cluster);

    ScriptRunReport report;
    std::vector<std::string> instances;
    std::vector<RunningWorkload> workloads;
    bool first_machine = true;

    auto instance_name = [](int id) { return "m" + std::to_string(id); };

    auto run_for = [&](SimTime ms) { world.run_until(world.clock() + ms); };

    auto wait_until = [&](const std::function<bool()>& pred, SimTime budget_ms) {
        SimTime deadline = world.clock() + budget_ms;
        while (!pred() && world.clock() < deadline) {
            if (!world.step()) break;
        }
    };

    for (const auto& cmd : script.commands) {
        switch (cmd.kind) {
            case ScriptCommand::StartMachine: {
                std::string name = instance_name(cmd.machine);
                // the first machine is the workload host: no data lands there
                bool eligible = !first_machine;
                if (cmd.block_workloads) {
                    for (const auto& wl : workloads) {
                        auto* node = world.node_as<InstanceNode>(wl.instance);
                        if (node) node->suspend_workload();
                    }
                }
                add_instance(world, cluster, name, eligible);
                if (std::find(instances.begin(), instances.end(), name) == instances.end()) {
                    instances.push_back(name);
                }
                first_machine = false;
                // the script blocks until the instance has started
                wait_until(
                    [&] {
                        auto* node = world.node_as<InstanceNode>(name);
                        return node && node->bootstrap_outcome() != BootstrapOutcome::Pending;
                    },
                    30'000);
                if (cmd.block_workloads) {
                    for (const auto& wl : workloads) {
                        auto* node = world.node_as<InstanceNode>(wl.instance);
                        if (node) node->resume_workload(world);
                    }
                }
                break;
            }
            case ScriptCommand::TerminateMachine: {
                std::string name = instance_name(cmd.machine);
                for (const auto& wl : workloads) {
                    auto* node = world.node_as<InstanceNode>(wl.instance);
                    if (node) node->mark_failure(world.clock() - wl.start);
                }
                if (world.is_up(name)) world.kill(name);
                break;
            }
            case ScriptCommand::Sleep:
                run_for(cmd.sleep_ms);
                break;
            case ScriptCommand::CreateTable: {
                auto* node = world.node_as<InstanceNode>(instance_name(cmd.machine));
                if (!node) break;
                Statement stmt;
                stmt.kind = StatementKind::CreateTable;
                stmt.schema = parse_schema_columns(
                    cmd.table, cmd.schema_cols.empty() ? kDefaultSchema : cmd.schema_cols);
                stmt.table = cmd.table;
                bool done = false;
                node->execute(world, {stmt}, [&](bool) { done = true; });
                wait_until([&] { return done; }, 10'000);
                if (cmd.prepopulate > 0) {
                    bool filled = false;
                    node->prepopulate(world, cmd.table, cmd.prepopulate, config.seed ^ 0x5eed,
                                      [&](bool) { filled = true; });
                    wait_until([&] { return filled; }, 10'000);
                }
                break;
            }
            case ScriptCommand::ExecuteWorkload: {
                auto* node = world.node_as<InstanceNode>(instance_name(cmd.machine));
                if (!node) break;
                if (!config.workload_loader) throw ScriptError("no workload loader configured");
                Workload wl = parse_workload(config.workload_loader(cmd.workload_file));
                node->start_workload(world, std::move(wl), cmd.duration_ms,
                                     config.seed * 31 + uint64_t(cmd.machine));
                workloads.push_back({instance_name(cmd.machine), world.clock(), cmd.duration_ms});
                break;
            }
            case ScriptCommand::SqlOn: {
                auto* node = world.node_as<InstanceNode>(instance_name(cmd.machine));
                if (!node) break;
                Statement stmt = parse_statement(cmd.sql);
                bool done = false;
                node->execute(world, {stmt}, [&](bool) { done = true; });
                wait_until([&] { return done; }, 10'000);
                break;
            }
            case ScriptCommand::CheckReplFactor: {
                int observed = count_data_replicas(world, instances, cmd.table);
                bool ok = observed == cmd.expected;
                report.assertions.push_back({"check_repl_factor " + cmd.table, cmd.expected,
                                             observed, ok, world.clock()});
                if (!ok) report.all_checks_passed = false;
                break;
            }
            case ScriptCommand::CheckMetaReplFactor: {
                int observed = cmd.has_table ? count_tm_meta(world, instances, cmd.table)
                                             : count_st_meta(world, instances);
                std::string what = cmd.has_table ? "check_meta_repl_factor " + cmd.table
                                                 : "check_meta_repl_factor";
                bool ok = observed == cmd.expected;
                report.assertions.push_back({what, cmd.expected, observed, ok, world.clock()});
                if (!ok) report.all_checks_passed = false;
                break;
            }
        }
    }

    // run the remaining workloads to completion, plus a short drain
    SimTime latest_end = world.clock();
    for (const auto& wl : workloads) latest_end = std::max(latest_end, wl.start + wl.duration);
    world.run_until(latest_end + config.drain_ms);

    // collect series and recovery metrics
    for (const auto& wl : workloads) {
        auto* node = world.node_as<InstanceNode>(wl.instance);
        ThroughputSeries series;
        if (node && node->workload_stats()) {
            series.per_second = node->workload_stats()->per_second;
            series.failure_marks = node->workload_stats()->failure_marks;
        }
        report.workloads.push_back(series);

        RecoveryReport rec;
        if (!series.failure_marks.empty()) {
            rec = compute_recovery(series);
            // fine-grained gap from the trace: first failed attempt at/after
            // the mark to the next successful commit
            SimTime mark_abs = wl.start + series.failure_marks.front();
            SimTime first_fail = -1, next_commit = -1;
            for (const auto& e : world.trace().events()) {
                if (e.digest != wl.instance) continue;
                if (e.kind == "wl_fail" && first_fail < 0 && e.clock >= mark_abs) {
                    first_fail = e.clock;
                }
                if (e.kind == "wl_commit" && first_fail >= 0 && e.clock > first_fail) {
                    next_commit = e.clock;
                    break;
                }
            }
            if (first_fail < 0) {
                rec.fine_gap_ms = 0;  // no attempt ever failed after the mark
            } else if (next_commit < 0) {
                rec.fine_gap_finite = false;
                rec.fine_gap_ms = -1;
            } else {
                rec.fine_gap_ms = next_commit - first_fail;
            }
        }
        report.recoveries.push_back(rec);
    }

    report.trace_hash = world.trace().hash();
    report.final_clock = world.clock();
    return report;
}

std::string format_throughput_csv(const ThroughputSeries& series) {
    std::ostringstream out;
    out << "second,txns\n";
    for (size_t i = 0; i < series.per_second.size(); ++i) {
        out << i << "," << series.per_second[i] << "\n";
    }
    return out.str();
}

std::string format_report(const ScriptRunReport& report) {
    std::ostringstream out;
    for (size_t i = 0; i < report.workloads.size(); ++i) {
        out << "workload " << i << ": ";
        int64_t total = 0;
        for (int64_t c : report.workloads[i].per_second) total += c;
        out << total << " committed";
        if (!report.workloads[i].failure_marks.empty()) {
            const RecoveryReport& r = report.recoveries[i];
            out << ", recovery_time_s=" << r.recovery_time_s
                << ", recovered=" << (r.recovered ? "yes" : "no");
            if (r.fine_gap_finite) {
                out << ", gap_ms=" << r.fine_gap_ms;
            } else {
                out << ", gap_ms=inf";
            }
        }
        out << "\n";
    }
    for (const auto& a : report.assertions) {
        out << (a.passed ? "PASS" : "FAIL") << " " << a.what << " expected=" << a.expected
            << " observed=" << a.observed << " at=" << a.at << "ms\n";
    }
    out << (report.all_checks_passed ? "ALL CHECKS PASSED" : "CHECKS FAILED") << "\n";
    return out.str();
}

// --------------------------------------------------------------------------

std::vector<BenchPoint> run_bench(const BenchConfig& config) {
    // insert/select/delete transaction loop, the Table Manager workload shape
    const std::string workload_text =
        "SET AUTOCOMMIT OFF;\n"
        "INSERT INTO benchTable VALUES (<loop-counter/>, <generated-string/>, "
        "<generated-long/>);\n"
        "SELECT * FROM benchTable WHERE int_a > 679153090560;\n"
        "DELETE FROM benchTable WHERE id=<last-loop-counter/>\n"
        "COMMIT;\n"
        "SET AUTOCOMMIT ON;\n";

    std::vector<BenchPoint> out;
    for (int n : config.replica_counts) {
        ClusterConfig cluster;
        cluster.seed = config.seed;
        cluster.jitter_ms = 0;  // fixed link latency
        cluster.engine.repl.n = n;
        cluster.engine.repl.t = n;
        cluster.engine.repl.s = n;
        cluster.engine.repl.r = config.partial_r;
        cluster.engine.partial_mode = config.partial_mode;
        cluster.engine.commit_protocol = config.commit_protocol;
        cluster.engine.paxos_commit = config.paxos_commit;
        cluster.engine.write_delay = config.write_delay;
        // schema traffic is done before measuring; skip per-commit confirms
        cluster.engine.ownership = OwnershipMode::Disabled;

        SimWorld world(config.seed);
        add_locators(world, cluster);
        add_instance(world, cluster, "m0", false);
        world.run_until_idle();
        for (int i = 1; i <= n; ++i) {
            add_instance(world, cluster, "m" + std::to_string(i), true);
            world.run_until(world.clock() + 50);
        }
        auto* host = world.node_as<InstanceNode>("m0");
        auto* creator = world.node_as<InstanceNode>("m1");

        Statement create;
        create.kind = StatementKind::CreateTable;
        create.schema = parse_schema_columns("benchTable", kDefaultSchema);
        create.table = "benchTable";
        bool done = false;
        creator->execute(world, {create}, [&](bool) { done = true; });
        while (!done && world.step()) {
        }
        // let replication reach the requested factor before measuring
        world.run_until(world.clock() + 3000 + 1000 * n);

        Workload wl = parse_workload(workload_text);
        host->start_workload(world, std::move(wl), config.duration_ms, config.seed + 7);
        SimTime start = world.clock();
        world.run_until(start + config.duration_ms + 500);

        BenchPoint point;
        point.replicas = n;
        point.committed = host->workload_stats() ? host->workload_stats()->committed : 0;
        point.txns_per_s = double(point.committed) / (double(config.duration_ms) / 1000.0);
        out.push_back(point);
    }
    return out;
}

}  // namespace d2o
