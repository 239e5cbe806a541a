#include "d2o/autonomics.hpp"

#include <algorithm>
#include <sstream>

namespace d2o {

Stats summarize_samples(const std::vector<double>& samples) {
    if (samples.empty()) throw EmptyWindow();
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    Stats s;
    s.min = sorted.front();
    s.max = sorted.back();
    double sum = 0;
    for (double v : sorted) sum += v;
    s.mean = sum / double(sorted.size());
    s.median = sorted[(sorted.size() - 1) / 2];  // lower middle for even counts
    return s;
}

ResourceSummary summarize(const std::vector<double>& cpu, const std::vector<double>& mem,
                          const std::vector<double>& disk, SimTime window_start,
                          SimTime window_end, double sampling_rate) {
    ResourceSummary r;
    r.cpu = summarize_samples(cpu);
    r.mem = summarize_samples(mem);
    r.disk = summarize_samples(disk);
    r.window_start = window_start;
    r.window_end = window_end;
    r.sampling_rate = sampling_rate;
    return r;
}

Metric parse_metric(const std::string& text) {
    Metric m;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        double value = std::stod(line.substr(eq + 1));
        if (key == "cpu") m.cpu_weight = value;
        if (key == "mem") m.mem_weight = value;
        if (key == "disk") m.disk_weight = value;
    }
    return m;
}

std::vector<RankedMachine> rank_machines(const std::map<std::string, MachineStatus>& machines,
                                         const Metric& metric) {
    double cpu_max = 0, mem_max = 0, disk_max = 0;
    for (const auto& [name, st] : machines) {
        cpu_max = std::max(cpu_max, st.spec.cpu_capacity_mhz);
        mem_max = std::max(mem_max, st.spec.memory_mb);
        disk_max = std::max(disk_max, st.spec.disk_mb);
    }
    std::vector<RankedMachine> out;
    for (const auto& [name, st] : machines) {
        auto calc = [](double capacity, double res_max, double utilization, double weighting) {
            if (res_max <= 0) return 0.0;
            return (capacity / res_max) * (1.0 - utilization) * weighting;
        };
        double score = calc(st.spec.cpu_capacity_mhz, cpu_max, st.summary.cpu.mean, metric.cpu_weight) +
                       calc(st.spec.memory_mb, mem_max, st.summary.mem.mean, metric.mem_weight) +
                       calc(st.spec.disk_mb, disk_max, st.summary.disk.mean, metric.disk_weight);
        out.push_back({name, score});
    }
    std::sort(out.begin(), out.end(), [](const RankedMachine& a, const RankedMachine& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.name < b.name;
    });
    return out;
}

ThresholdConfig ThresholdConfig::defaults(MachineType type) {
    ThresholdConfig c;
    c.machine_type = type;
    switch (type) {
        case MachineType::Workstation:
            c.cpu_util_max = 0.70;
            c.mem_util_max = 0.80;
            c.disk_free_min_mb = 4096;
            c.disk_writes_max_per_s = 4000;
            break;
        case MachineType::SharedServer:
            // workstation limits relaxed by 1.25x
            c.cpu_util_max = 0.70 * 1.25;
            c.mem_util_max = 1.0;
            c.disk_free_min_mb = 4096 / 1.25;
            c.disk_writes_max_per_s = 4000 * 1.25;
            break;
        case MachineType::DedicatedServer:
            break;  // no limits on resources
    }
    return c;
}

ThresholdConfig parse_threshold_config(const std::string& text) {
    ThresholdConfig c;
    c.machine_type = MachineType::Workstation;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        if (key == "machine_type") {
            if (value == "dedicated") c = ThresholdConfig::defaults(MachineType::DedicatedServer);
            if (value == "shared") c = ThresholdConfig::defaults(MachineType::SharedServer);
            if (value == "workstation") c = ThresholdConfig::defaults(MachineType::Workstation);
            continue;
        }
        double v = std::stod(value);
        if (key == "cpu_util_max") c.cpu_util_max = v;
        if (key == "mem_util_max") c.mem_util_max = v;
        if (key == "disk_free_min_mb") c.disk_free_min_mb = v;
        if (key == "disk_writes_max_per_s") c.disk_writes_max_per_s = v;
    }
    return c;
}

std::vector<ThresholdEvent> check_thresholds(const ResourceSummary& summary,
                                             const MachineSpec& spec,
                                             const ThresholdConfig& config) {
    std::vector<ThresholdEvent> events;
    if (config.cpu_util_max && summary.cpu.mean > *config.cpu_util_max) {
        events.push_back({"cpu", summary.cpu.mean, *config.cpu_util_max});
    }
    if (config.mem_util_max && summary.mem.mean > *config.mem_util_max) {
        events.push_back({"memory", summary.mem.mean, *config.mem_util_max});
    }
    if (config.disk_free_min_mb) {
        double free_mb = spec.disk_mb * (1.0 - summary.disk.mean);
        if (free_mb < *config.disk_free_min_mb) {
            events.push_back({"disk_free", free_mb, *config.disk_free_min_mb});
        }
    }
    if (config.disk_writes_max_per_s && summary.disk_writes_per_s &&
        *summary.disk_writes_per_s > *config.disk_writes_max_per_s) {
        events.push_back({"disk_writes", *summary.disk_writes_per_s, *config.disk_writes_max_per_s});
    }
    return events;
}

std::string choose_replica_location(const std::vector<RankedMachine>& ranking,
                                    const std::map<std::string, uint64_t>& query_pattern,
                                    const std::vector<std::string>& excluded,
                                    double weight_q) {
    uint64_t total_requests = 0;
    for (const auto& [name, count] : query_pattern) total_requests += count;

    std::optional<RankedMachine> best;
    for (const auto& rm : ranking) {
        if (std::find(excluded.begin(), excluded.end(), rm.name) != excluded.end()) continue;
        double bonus = 0;
        if (total_requests > 0) {
            auto it = query_pattern.find(rm.name);
            if (it != query_pattern.end()) {
                bonus = weight_q * (double(it->second) / double(total_requests));
            }
        }
        double combined = rm.score + bonus;
        if (!best || combined > best->score ||
            (combined == best->score && rm.name < best->name)) {
            best = RankedMachine{rm.name, combined};
        }
    }
    if (!best) throw NoEligibleInstance();
    return best->name;
}

bool negotiate_placement(double requester_need, double target_willingness) {
    return requester_need > 1.0 - target_willingness;
}

SensorTimeline::Point SensorTimeline::at(SimTime clock) const {
    Point current{0, 0.1, 0.15, 0.2, std::nullopt};  // idle defaults
    for (const auto& p : points) {
        if (p.clock_ms <= clock) current = p;
    }
    return current;
}

SensorTimeline parse_sensor_csv(const std::string& text) {
    SensorTimeline t;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() < 4) continue;
        SensorTimeline::Point p{};
        p.clock_ms = std::stoll(cells[0]);
        p.cpu = std::stod(cells[1]);
        p.mem = std::stod(cells[2]);
        p.disk = std::stod(cells[3]);
        if (cells.size() > 4) p.writes_per_s = std::stod(cells[4]);
        t.points.push_back(p);
    }
    return t;
}

}  // namespace d2o
