#pragma once

// Deterministic discrete-event replay of a trace over the three-layer fabric.
//
// Time is integer microseconds. Events are ordered by (time, enqueue seq), so
// equal configs and seeds give identical reports. Servers execute without
// contention: a task's completion time is the plain sum of its hashing,
// lookup, link and execution costs.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgereuse/config.hpp"
#include "edgereuse/core.hpp"

namespace edgereuse {

enum class EventKind { TaskArrival, LinkDelivery, ExecutionDone, LookupDone, ControlWindow };

std::string_view to_string(EventKind kind) noexcept;

struct EventLogRow {
  std::uint64_t seq = 0;
  SimTime time_us = 0;
  EventKind kind = EventKind::TaskArrival;
  std::optional<TaskId> task_id;
  std::string node;
  std::string action;
  SimTime cost_us = 0;  // time since the task's previous row
};

struct TaskRecord {
  TaskId task_id = 0;
  std::string device_id;
  std::string service_id;
  std::string server_id;  // empty when served before reaching a server
  ReuseLayer reuse_layer = ReuseLayer::None;
  SimTime created_us = 0;
  SimTime completed_us = 0;
  std::optional<double> similarity;
  std::optional<bool> accurate;  // set only for reused tasks
  int hash_computations = 0;

  SimTime completion_us() const noexcept { return completed_us - created_us; }
};

struct LayerStats {
  std::size_t count = 0;
  double mean_completion_ms = 0.0;
  double pct = 0.0;
};

struct ServerWindow {
  SimTime start_us = 0;
  double busy_fraction = 0.0;
  std::size_t stored_bytes = 0;
};

struct ServerMetrics {
  std::string id;
  std::uint64_t executed = 0;
  std::uint64_t reused = 0;
  SimTime busy_us = 0;
  double busy_fraction = 0.0;  // busy_us over the run's span
  std::size_t stored_bytes = 0;
  std::size_t peak_stored_bytes = 0;
  std::vector<ServerWindow> windows;
};

struct TableChange {
  SimTime time_us = 0;
  std::uint64_t version = 0;
  std::vector<HashRange> ranges;
};

struct MetricsReport {
  std::uint64_t seed = 0;
  std::vector<TaskRecord> tasks;
  double mean_completion_ms = 0.0;
  std::map<ReuseLayer, LayerStats> layers;  // every layer present, possibly empty
  LayerStats device_network;                // Device and Network combined
  LayerStats reused;                        // every layer except None
  double reuse_pct = 0.0;
  double no_reuse_pct = 0.0;
  std::optional<double> accuracy_pct;
  std::optional<double> speedup;  // mean no-reuse / mean reused completion
  std::vector<ServerMetrics> servers;
  double mean_busy_fraction = 0.0;
  SimTime span_us = 0;
  std::vector<TableChange> table_history;
};

/// Replays config.trace. Fills `log` when given.
MetricsReport run(const ExperimentConfig& config, std::vector<EventLogRow>* log = nullptr);

struct SweepRow {
  double threshold = 0.0;
  double reuse_pct = 0.0;
  std::optional<double> accuracy_pct;
  double mean_completion_ms = 0.0;
  double mean_busy_fraction = 0.0;
};

/// One run per threshold, overriding every task's threshold. Thresholds must
/// be sorted ascending.
std::vector<SweepRow> sweep_thresholds(const ExperimentConfig& config, const std::vector<double>& thresholds,
                                       unsigned jobs = 1);

void write_per_task_csv(std::ostream& out, const MetricsReport& report);
void write_event_log_csv(std::ostream& out, const std::vector<EventLogRow>& log);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
nlohmann::json metrics_json(const MetricsReport& report);

}  // namespace edgereuse
