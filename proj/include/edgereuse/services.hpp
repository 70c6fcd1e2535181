#pragma once

// Synthetic edge services: pipelines of named stages, each a seeded
// tanh(M x) transform, ending in a seeded linear classifier. A stage id names
// one computation everywhere it appears, which is what makes sharing
// intermediate results across services sound.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "edgereuse/core.hpp"

namespace edgereuse {

struct StageSpec {
  std::string stage_id;
  std::uint64_t transform_seed = 0;
  std::size_t out_dim = 0;
  SimTime exec_time_us = 0;

  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

struct ServiceSpec {
  std::string service_id;
  std::vector<StageSpec> stages;
  int label_classes = 10;
  std::uint64_t label_seed = 0;
  std::vector<double> label_biases;  // empty = all zero
};

/// A stage with its transform matrix materialized for a given input dim.
class Stage {
 public:
  Stage(StageSpec spec, std::size_t in_dim);

  const StageSpec& spec() const noexcept { return spec_; }
  std::size_t in_dim() const noexcept { return in_dim_; }
  std::size_t out_dim() const noexcept { return spec_.out_dim; }

  FeatureVector execute(const FeatureVector& input) const;

 private:
  StageSpec spec_;
  std::size_t in_dim_;
  std::vector<double> matrix_;  // out_dim x in_dim, row-major
};

/// Pure stage evaluation; the matrix is derived from the spec on every call.
FeatureVector execute_stage(const StageSpec& stage, const FeatureVector& input);

struct ServiceOutput {
  FeatureVector output;
  int label = 0;
  std::map<std::string, FeatureVector, std::less<>> stage_outputs;
};

class Service {
 public:
  Service(ServiceSpec spec, std::size_t input_dim);
  Service(ServiceSpec spec, std::vector<std::shared_ptr<const Stage>> stages);

  const ServiceSpec& spec() const noexcept { return spec_; }
  const std::string& id() const noexcept { return spec_.service_id; }
  std::size_t input_dim() const noexcept { return stages_.front()->in_dim(); }
  std::size_t stage_count() const noexcept { return stages_.size(); }
  const Stage& stage(std::size_t i) const { return *stages_.at(i); }
  SimTime total_exec_time() const noexcept;

  ServiceOutput execute(const FeatureVector& input) const;

  /// Runs stages [first, end) on `intermediate`, the output of stage first-1
  /// (or the raw input when first == 0).
  ServiceOutput resume(std::size_t first, const FeatureVector& intermediate) const;

  int classify(const FeatureVector& final_output) const;
  std::vector<double> class_scores(const FeatureVector& final_output) const;

  /// Distance from final_output to the nearest decision boundary of its
  /// label, relative to |final_output|. Small means a nudge can flip it.
  double boundary_margin(const FeatureVector& final_output) const;

 private:
  void build_classifier();

  ServiceSpec spec_;
  std::vector<std::shared_ptr<const Stage>> stages_;
  std::vector<double> class_projection_;  // label_classes x out_dim
};

TaskResult to_result(const ServiceOutput& out, TaskId task_id, std::string service_id);

/// Pure service evaluation (no caching of matrices).
ServiceOutput execute_service(const ServiceSpec& svc, const FeatureVector& input);

class ServiceCatalog {
 public:
  ServiceCatalog() = default;

  /// Validates stage sharing: equal stage ids must have equal specs, equal
  /// input dims, and the same upstream stage chain.
  ServiceCatalog(std::vector<ServiceSpec> specs, std::size_t input_dim);

  const Service& get(std::string_view service_id) const;
  bool contains(std::string_view service_id) const;
  std::vector<std::string> service_ids() const;
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t size() const noexcept { return services_.size(); }

  /// Ground-truth result for accuracy measurement. Same function as execution.
  TaskResult oracle(std::string_view service_id, const FeatureVector& input, TaskId task_id = 0) const;

 private:
  std::size_t input_dim_ = 0;
  std::map<std::string, std::shared_ptr<const Service>, std::less<>> services_;
};

/// Four services after common edge pipelines: two share an object-detection
/// stage, one single-stage voice-command service, one two-stage renderer.
/// Every pipeline costs 100 ms of execution in total.
std::vector<ServiceSpec> default_service_specs();

}  // namespace edgereuse
