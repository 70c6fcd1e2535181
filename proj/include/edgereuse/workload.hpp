#pragma once

// Synthetic workloads standing in for image datasets of different
// redundancy: clustered feature vectors with per-cluster spread, a fraction
// of one-off inputs, and a seeded arrival schedule per device.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "edgereuse/core.hpp"
#include "edgereuse/services.hpp"
#include "edgereuse/trace_io.hpp"

namespace edgereuse {

enum class ArrivalKind { Fixed, Exponential };

struct WeightedService {
  std::string service_id;
  double weight = 1.0;
};

struct WorkloadProfile {
  std::string name = "custom";
  std::size_t dim = 64;
  std::size_t clusters = 16;
  // Each cluster draws its target mean pairwise cosine uniformly from this range.
  double min_cosine = 0.9;
  double max_cosine = 0.99;
  double unique_fraction = 0.0;  // tasks whose input belongs to no cluster
  std::size_t devices = 2;
  std::size_t tasks_per_device = 1000;
  std::vector<WeightedService> services;
  ArrivalKind arrival = ArrivalKind::Exponential;
  SimTime mean_interarrival_us = 200'000;
  std::optional<double> threshold;  // written to the trace's threshold column
  // Candidate centers drawn per cluster; the one whose members get the most
  // stable labels from every service is kept. 1 = plain random centers.
  std::size_t center_candidates = 1;
};

struct ClusterStats {
  double target_cosine = 0.0;
  double measured_cosine = 0.0;  // mean pairwise cosine over sampled members
  std::size_t members = 0;
};

struct GeneratedWorkload {
  std::vector<TraceRow> trace;
  VectorTable vectors;
  std::vector<ClusterStats> clusters;
  double mean_inter_cluster_cosine = 0.0;
};

/// Noise variance that gives two members of a cluster the target expected cosine.
double noise_variance_for(double target_cosine);

/// `catalog` is only consulted for center selection (center_candidates > 1).
GeneratedWorkload generate_trace(const WorkloadProfile& profile, std::uint64_t seed,
                                 const std::vector<ServiceSpec>& catalog = default_service_specs());

/// cctv-like, mobile-ar-like, pandaset-like, mnist-like.
std::vector<std::string> builtin_profile_names();
std::optional<WorkloadProfile> builtin_profile(std::string_view name);

}  // namespace edgereuse
