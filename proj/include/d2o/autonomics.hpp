#pragma once

// Monitoring summaries, the machine-ranking metric, threshold analysis,
// replica placement and the negotiation rule. Fed by a scripted synthetic
// resource sensor instead of real OS probes.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "d2o/simnet.hpp"

namespace d2o {

struct EmptyWindow : std::runtime_error {
    EmptyWindow() : std::runtime_error("empty sample window") {}
};
struct NoEligibleInstance : std::runtime_error {
    NoEligibleInstance() : std::runtime_error("no eligible instance") {}
};

struct MachineSpec {
    double cpu_capacity_mhz = 2400;
    int cpu_cores = 2;
    double memory_mb = 2048;
    double disk_mb = 20480;
    std::string os_name = "linux";
};

struct Stats {
    double min = 0, max = 0, mean = 0, median = 0;
};

struct ResourceSummary {
    Stats cpu, mem, disk;
    std::optional<double> disk_writes_per_s;  // optional extra feed (threshold analysis)
    double sampling_rate = 12;                // samples per minute
    SimTime window_start = 0;
    SimTime window_end = 0;
};

// Exact order statistics; the median of an even-length window is the lower
// middle value.
Stats summarize_samples(const std::vector<double>& samples);
ResourceSummary summarize(const std::vector<double>& cpu, const std::vector<double>& mem,
                          const std::vector<double>& disk, SimTime window_start,
                          SimTime window_end, double sampling_rate);

struct Metric {
    double cpu_weight = 1;
    double mem_weight = 1;
    double disk_weight = 1;
};

// key=value lines: cpu=..., mem=..., disk=...
Metric parse_metric(const std::string& text);

struct RankedMachine {
    std::string name;
    double score = 0;
};

struct MachineStatus {
    MachineSpec spec;
    ResourceSummary summary;
};

// score = sum over resources of (capacity / res_max) * (1 - utilization) * weighting,
// with utilization the mean of the latest summary and res_max the largest
// capacity among the ranked machines. Descending score, ties by ascending name.
std::vector<RankedMachine> rank_machines(const std::map<std::string, MachineStatus>& machines,
                                         const Metric& metric);

enum class MachineType { DedicatedServer, SharedServer, Workstation };

struct ThresholdConfig {
    MachineType machine_type = MachineType::Workstation;
    std::optional<double> cpu_util_max;
    std::optional<double> mem_util_max;
    std::optional<double> disk_free_min_mb;
    std::optional<double> disk_writes_max_per_s;

    static ThresholdConfig defaults(MachineType type);
};

ThresholdConfig parse_threshold_config(const std::string& text);

struct ThresholdEvent {
    std::string resource;
    double observed = 0;
    double threshold = 0;
};

std::vector<ThresholdEvent> check_thresholds(const ResourceSummary& summary,
                                             const MachineSpec& spec,
                                             const ThresholdConfig& config);

// Combined placement score: ranking score plus a query-pattern bonus of
// weight_q * (requests from that instance / total requests).
std::string choose_replica_location(const std::vector<RankedMachine>& ranking,
                                    const std::map<std::string, uint64_t>& query_pattern,
                                    const std::vector<std::string>& excluded,
                                    double weight_q = 0.5);

// Accepted iff level_of_need > 1 - willingness_to_help (strict).
bool negotiate_placement(double requester_need, double target_willingness);

struct NegotiationParams {
    double level_of_need = 0.5;
    double escalation_step = 0.25;
    double willingness_to_help = 0.8;
};

// Synthetic sensor timeline: CSV rows `clock_ms,cpu,mem,disk[,writes]`,
// interpreted as a step function over simulated time.
struct SensorTimeline {
    struct Point {
        SimTime clock_ms;
        double cpu, mem, disk;
        std::optional<double> writes_per_s;
    };
    std::vector<Point> points;

    Point at(SimTime clock) const;
};

SensorTimeline parse_sensor_csv(const std::string& text);

}  // namespace d2o
