#pragma once

// The three node layers and the hash-space controller.
//
// Node operations are transitions: given a task and the current time they
// return what happened and how much simulated time it cost. The caller (the
// simulator) decides when follow-up work happens, which keeps store inserts
// at the instant results actually become available.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "edgereuse/core.hpp"
#include "edgereuse/hashing.hpp"
#include "edgereuse/reuse_store.hpp"
#include "edgereuse/services.hpp"

namespace edgereuse {

// ---------------------------------------------------------------------------
// Hash-space partitioning

struct HashRange {
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;  // inclusive
  std::string server_id;

  std::uint32_t width() const noexcept { return hi - lo + 1; }
  friend bool operator==(const HashRange&, const HashRange&) = default;
};

/// Contiguous ranges covering [0, 65535] exactly once, one range per server.
class ForwardingTable {
 public:
  ForwardingTable(std::vector<HashRange> ranges, std::uint64_t version);

  const std::vector<HashRange>& ranges() const noexcept { return ranges_; }
  std::uint64_t version() const noexcept { return version_; }

  /// Index of the range containing h. Throws Errc::HashOutOfRange above 65535.
  std::size_t range_index(ForwardingHash h) const;
  const std::string& owner(ForwardingHash h) const { return ranges_[range_index(h)].server_id; }
  std::optional<std::size_t> index_of(const std::string& server_id) const;

  /// Throws std::logic_error if coverage, ordering or ownership is broken.
  void validate() const;

  friend bool operator==(const ForwardingTable&, const ForwardingTable&) = default;

 private:
  std::vector<HashRange> ranges_;
  std::uint64_t version_;
};

/// N contiguous ranges of floor(65536/N), the remainder going to the last;
/// servers in ascending id order; version 1.
ForwardingTable partition_hash_space(std::vector<std::string> servers);

struct ServerLoad {
  std::uint64_t executed = 0;
  std::uint64_t reused = 0;
  std::size_t stored_bytes = 0;
};

struct LoadReport {
  std::map<std::string, ServerLoad> servers;
};

/// Moves part of the busiest server's range to a less loaded neighbour.
/// Returns the input unchanged when executed counts differ by at most one.
ForwardingTable rebalance(const ForwardingTable& table, const LoadReport& report, double step_fraction);

/// Owns the current table; rebalances once per window when enabled.
class Controller {
 public:
  Controller(ForwardingTable table, SimTime window_us, double step_fraction);

  const ForwardingTable& table() const noexcept { return table_; }
  SimTime window_us() const noexcept { return window_us_; }
  bool enabled() const noexcept { return window_us_ > 0; }

  /// Rebalances from the given window report. Returns true if the table changed.
  bool on_window(const LoadReport& report);

 private:
  ForwardingTable table_;
  SimTime window_us_;
  double step_fraction_;
};

// ---------------------------------------------------------------------------
// Nodes

struct CostModel {
  SimTime hash_time_us = 1800;
  SimTime lookup_time_us = 1000;
};

struct StoreSettings {
  StoreLimits limits;
  std::shared_ptr<const EvictionPolicy> policy;
  int probe_radius = 0;

  bool enabled() const noexcept { return limits.max_entries > 0 && limits.max_bytes > 0; }
};

/// What a device or router decided about a task.
struct HopOutcome {
  std::optional<TaskResult> local;  // served from this node's store
  ServiceOutput payload;            // valid when local is set
  SimTime cost_us = 0;
  bool hashed = false;              // this node computed the forwarding hash
  std::optional<double> similarity;
  std::string destination;          // routers only: owning server, empty on a hit
};

ReuseEntry make_entry(const TaskEnvelope& task, const ServiceOutput& payload);

class DeviceNode {
 public:
  DeviceNode(std::string id, bool can_hash, std::optional<ReuseStore> store);

  const std::string& id() const noexcept { return id_; }
  bool can_hash() const noexcept { return can_hash_; }
  ReuseStore* store() noexcept { return store_ ? &*store_ : nullptr; }
  const ReuseStore* store() const noexcept { return store_ ? &*store_ : nullptr; }

  /// A device with a store hashes first (its store is LSH-indexed), then looks
  /// up; on a miss the task leaves with the hash attached. A device that
  /// cannot hash forwards the bare task.
  HopOutcome offload(TaskEnvelope& task, SimTime now, const LshFamily& family, const CostModel& cost);

  /// Caches a result arriving from the network. No-op without a store.
  void cache_response(const TaskEnvelope& task, const ServiceOutput& payload, SimTime now);

 private:
  std::string id_;
  bool can_hash_;
  std::optional<ReuseStore> store_;
};

class RouterNode {
 public:
  RouterNode(std::string id, std::optional<ReuseStore> store);

  const std::string& id() const noexcept { return id_; }
  ReuseStore* store() noexcept { return store_ ? &*store_ : nullptr; }
  const ReuseStore* store() const noexcept { return store_ ? &*store_ : nullptr; }

  /// Attaches the hash if absent, checks the local store, and otherwise names
  /// the owning server for the task's hash under `table`.
  HopOutcome forward(TaskEnvelope& task, SimTime now, const LshFamily& family, const ForwardingTable& table,
                     const CostModel& cost);

  void cache_response(const TaskEnvelope& task, const ServiceOutput& payload, SimTime now);

 private:
  std::string id_;
  std::optional<ReuseStore> store_;
};

struct ServerOutcome {
  TaskResult result;
  ServiceOutput payload;
  SimTime cost_us = 0;       // lookups + execution
  SimTime exec_us = 0;       // execution only
  std::size_t stages_reused = 0;
  std::size_t stages_executed = 0;
  std::optional<double> similarity;
  std::optional<ReuseEntry> pending;  // to insert once execution finishes
};

class ServerNode {
 public:
  ServerNode(std::string id, std::optional<ReuseStore> store);

  const std::string& id() const noexcept { return id_; }
  ReuseStore* store() noexcept { return store_ ? &*store_ : nullptr; }
  const ReuseStore* store() const noexcept { return store_ ? &*store_ : nullptr; }
  std::uint64_t executed_count() const noexcept { return executed_; }
  std::uint64_t reused_count() const noexcept { return reused_; }

  /// Full-result lookup, then per-stage reuse along the pipeline prefix, then
  /// execution of whatever is left. Throws Errc::UnknownService.
  ServerOutcome handle(const TaskEnvelope& task, SimTime now, const ServiceCatalog& catalog, const CostModel& cost);

  /// Stores an executed task's results. Oversized entries are dropped.
  void commit(ReuseEntry entry, SimTime now);

  /// handle() followed immediately by commit().
  ServerOutcome serve(const TaskEnvelope& task, SimTime now, const ServiceCatalog& catalog, const CostModel& cost);

 private:
  std::string id_;
  std::optional<ReuseStore> store_;
  std::uint64_t executed_ = 0;
  std::uint64_t reused_ = 0;
};

std::optional<ReuseStore> make_store(const StoreSettings& settings, std::shared_ptr<const LshFamily> family);

}  // namespace edgereuse
