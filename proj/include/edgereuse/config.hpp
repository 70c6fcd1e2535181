#pragma once

// Experiment description: topology, service catalog, trace, LSH and cost
// parameters. Loaded from one JSON file whose file references are resolved
// relative to that file.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgereuse/core.hpp"
#include "edgereuse/fabric.hpp"
#include "edgereuse/services.hpp"
#include "edgereuse/trace_io.hpp"
#include "edgereuse/workload.hpp"

namespace edgereuse {

enum class NodeKind { Device, Router, Server };

struct NodeConfig {
  std::string id;
  NodeKind kind = NodeKind::Device;
  StoreLimits store;  // zero = no store at this node
  bool can_hash = true;
};

struct LinkConfig {
  std::string a;
  std::string b;
  SimTime delay_us = 0;  // one way
  std::optional<std::pair<SimTime, SimTime>> delay_range_us;  // drawn per run from the seed
};

struct TopologyConfig {
  std::vector<NodeConfig> nodes;
  std::vector<LinkConfig> links;
  SimTime controller_window_us = 0;  // 0 = static split
  double step_fraction = 0.25;
};

struct LshParams {
  int bits = LshFamily::kForwardingBits;
  int tables = 4;
  int probe_radius = 1;
  std::optional<std::uint64_t> seed;  // defaults to a child of the experiment seed
};

enum class AccuracyMode { Label, Exact };

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t dim = 64;
  LshParams lsh;
  CostModel cost;
  TopologyConfig topology;
  std::vector<ServiceSpec> services;
  std::vector<TraceRow> trace;
  VectorTable vectors;
  std::map<std::string, double> service_thresholds;
  double default_threshold = 0.9;
  std::optional<double> threshold_override;
  std::string eviction = "lru";
  AccuracyMode accuracy = AccuracyMode::Label;
  SimTime metrics_window_us = 1'000'000;
};

/// Two devices, two routers, two servers; every router reaches both servers.
/// Per-hop one-way delay drawn in [3000, 4000] us, so device-server RTT is 12-16 ms.
TopologyConfig default_topology();

TopologyConfig parse_topology(const nlohmann::json& j, const std::string& where = "topology");
nlohmann::json topology_to_json(const TopologyConfig& t);

std::vector<ServiceSpec> parse_services(const nlohmann::json& j, const std::string& where = "services");
nlohmann::json services_to_json(const std::vector<ServiceSpec>& specs);

/// Parses the experiment JSON. File references ("topology", "services",
/// "trace", "vectors") are read relative to base_dir. Errors carry the field path.
ExperimentConfig parse_experiment(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Checks cross references (trace devices/services/vectors, links, dims).
void validate(const ExperimentConfig& config);

/// Workload profile JSON; every field optional except where noted in the README.
WorkloadProfile parse_profile(const nlohmann::json& j, const std::string& where = "profile");
nlohmann::json profile_to_json(const WorkloadProfile& p);

SimilarityThreshold threshold_for(const ExperimentConfig& config, const TraceRow& row);

}  // namespace edgereuse
