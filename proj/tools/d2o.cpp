#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "d2o/commit.hpp"
#include "d2o/harness.hpp"
#include "d2o/paxos.hpp"

namespace fs = std::filesystem;
using namespace d2o;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void spit(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    out << content;
}

int cmd_run_script(const std::string& file, uint64_t seed, int repeats, const std::string& out_dir,
                   const std::string& workload_dir, const std::string& mode,
                   const std::string& commit, bool write_delay) {
    Script script = parse_script(slurp(file));

    fs::path wl_dir = workload_dir.empty() ? fs::path(file).parent_path() : fs::path(workload_dir);
    ScriptRunConfig config;
    config.workload_loader = [wl_dir](const std::string& name) { return slurp(wl_dir / name); };
    config.write_delay = write_delay;
    if (commit == "3pc") config.commit_protocol = CommitProtocol::ThreePhase;
    if (commit == "paxos") config.paxos_commit = true;
    if (mode.rfind("partial", 0) == 0) {
        config.partial_mode = true;
        size_t colon = mode.find(':');
        if (colon != std::string::npos) config.partial_r = std::stoi(mode.substr(colon + 1));
    }

    bool all_ok = true;
    for (int rep = 0; rep < repeats; ++rep) {
        config.seed = seed + uint64_t(rep);
        ScriptRunReport report = run_script(script, config);
        all_ok = all_ok && report.all_checks_passed;

        fs::path dir = repeats == 1 ? fs::path(out_dir) : fs::path(out_dir) / ("run" + std::to_string(rep));
        fs::create_directories(dir);
        for (size_t i = 0; i < report.workloads.size(); ++i) {
            std::string name = i == 0 ? "throughput.csv" : "throughput_" + std::to_string(i) + ".csv";
            spit(dir / name, format_throughput_csv(report.workloads[i]));
        }
        spit(dir / "report.txt", format_report(report));
        std::cout << "run " << rep << " (seed " << config.seed << "): "
                  << (report.all_checks_passed ? "ok" : "FAILED") << "\n";
    }
    return all_ok ? 0 : 1;
}

int cmd_bench(const std::string& replicas, const std::string& mode, const std::string& commit,
              const std::string& write_delay, uint64_t seed, SimTime duration) {
    BenchConfig config;
    config.seed = seed;
    config.duration_ms = duration;
    config.replica_counts.clear();
    std::istringstream in(replicas);
    std::string tok;
    while (std::getline(in, tok, ',')) config.replica_counts.push_back(std::stoi(tok));
    if (commit == "3pc") config.commit_protocol = CommitProtocol::ThreePhase;
    if (commit == "paxos") config.paxos_commit = true;
    if (mode.rfind("partial", 0) == 0) {
        config.partial_mode = true;
        size_t colon = mode.find(':');
        if (colon != std::string::npos) config.partial_r = std::stoi(mode.substr(colon + 1));
    }
    config.write_delay = write_delay == "on";

    std::cout << "replicas,committed,txns_per_s\n";
    for (const auto& p : run_bench(config)) {
        std::cout << p.replicas << "," << p.committed << "," << p.txns_per_s << "\n";
    }
    return 0;
}

int cmd_commit_sim(const std::string& protocol, int n, const std::string& kill_at) {
    CommitRunConfig config;
    config.participants = n;
    if (protocol == "3pc") config.protocol = CommitProtocol::ThreePhase;
    if (protocol == "paxos") {
        PaxosCommitConfig pc;
        pc.participants = n;
        auto report = run_paxos_commit(pc);
        std::cout << "outcome: " << (report.committed ? "committed" : "aborted")
                  << ", messages: " << report.messages_sent << "\n";
        return 0;
    }
    if (kill_at == "commit") config.kill_coordinator_after_commit_sends = n / 2;
    if (kill_at == "precommit") config.kill_coordinator_after_precommit_sends = (n - 1) / 2;
    if (kill_at == "decision") config.kill_coordinator_after_commit_sends = 0;

    CommitReport report = run_commit(config);
    std::cout << "coordinator: " << to_string(report.coordinator_decision) << "\n";
    for (const auto& [id, outcome] : report.participant_outcomes) {
        std::cout << id << ": " << to_string(outcome) << "\n";
    }
    std::cout << "messages: " << report.messages_sent << "\n";
    return 0;
}

int cmd_paxos_sim(int proposers, int acceptors, int schedules, uint64_t seed) {
    int violations = 0;
    int chosen_runs = 0;
    for (int i = 0; i < schedules; ++i) {
        PaxosConfig config;
        config.seed = seed + uint64_t(i);
        config.proposers = proposers;
        config.acceptors = acceptors;
        config.jitter_ms = 10;
        config.drop_probability = 0.15;
        for (int p = 0; p < proposers; ++p) {
            config.values.push_back(10 + p);
            config.start_delays.push_back(SimTime(i * 7 % 40));
        }
        PaxosReport report = run_paxos(config);
        if (report.safety_violated) ++violations;
        if (!report.chosen_values.empty()) ++chosen_runs;
    }
    std::cout << "schedules: " << schedules << ", chosen in " << chosen_runs
              << ", safety violations: " << violations << "\n";
    return violations == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic workstation-database cluster simulator"};
    app.require_subcommand(1);

    // run-script
    auto* rs = app.add_subcommand("run-script", "execute a co-ordination script");
    std::string script_file, out_dir = "d2o-out", workload_dir, rs_mode = "sync", rs_commit = "2pc";
    uint64_t seed = 1;
    int repeats = 1;
    bool rs_write_delay = false;
    rs->add_option("file", script_file, "script file")->required();
    rs->add_option("--seed", seed, "rng seed");
    rs->add_option("--repeats", repeats, "repeat count (seed varies per run)");
    rs->add_option("--out", out_dir, "output directory");
    rs->add_option("--workloads", workload_dir, "workload file directory (default: script dir)");
    rs->add_option("--mode", rs_mode, "sync | partial:r");
    rs->add_option("--commit", rs_commit, "2pc | 3pc | paxos");
    rs->add_flag("--write-delay", rs_write_delay, "batch fsync instead of per-commit flush");

    // bench
    auto* be = app.add_subcommand("bench", "replication-factor throughput sweep");
    std::string replicas = "1,2,3,5", be_mode = "sync", be_commit = "2pc", be_delay = "off";
    uint64_t be_seed = 1;
    SimTime be_duration = 20000;
    be->add_option("--replicas", replicas, "comma-separated replica counts");
    be->add_option("--mode", be_mode, "sync | partial:r");
    be->add_option("--commit", be_commit, "2pc | 3pc | paxos");
    be->add_option("--write-delay", be_delay, "on | off");
    be->add_option("--seed", be_seed, "rng seed");
    be->add_option("--duration", be_duration, "per-point duration, simulated ms");

    // commit-sim
    auto* cs = app.add_subcommand("commit-sim", "atomic commit protocol run");
    std::string cs_protocol = "2pc", kill_at;
    int cs_n = 3;
    cs->add_option("--protocol", cs_protocol, "2pc | 3pc | paxos");
    cs->add_option("--n", cs_n, "participant count");
    cs->add_option("--kill-at", kill_at, "decision | commit | precommit");

    // paxos-sim
    auto* ps = app.add_subcommand("paxos-sim", "randomized paxos safety runs");
    int proposers = 2, acceptors = 3, schedules = 1000;
    uint64_t ps_seed = 1;
    ps->add_option("--proposers", proposers, "proposer count");
    ps->add_option("--acceptors", acceptors, "acceptor count");
    ps->add_option("--schedules", schedules, "number of randomized schedules");
    ps->add_option("--seed", ps_seed, "rng seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (rs->parsed()) {
            return cmd_run_script(script_file, seed, repeats, out_dir, workload_dir, rs_mode,
                                  rs_commit, rs_write_delay);
        }
        if (be->parsed()) {
            return cmd_bench(replicas, be_mode, be_commit, be_delay, be_seed, be_duration);
        }
        if (cs->parsed()) return cmd_commit_sim(cs_protocol, cs_n, kill_at);
        if (ps->parsed()) return cmd_paxos_sim(proposers, acceptors, schedules, ps_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
