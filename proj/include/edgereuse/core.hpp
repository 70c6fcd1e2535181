#pragma once

// Shared domain types for the reuse fabric: feature vectors, thresholds,
// task envelopes and results, and the cosine similarity used at every layer.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace edgereuse {

enum class Errc {
  DimensionMismatch,
  ZeroVector,
  NonFinite,
  InvalidArgument,
  Oversized,
  UnknownService,
  ServiceMismatch,
  HashOutOfRange,
  Config,
  Parse,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Simulated time in integer microseconds.
using SimTime = std::int64_t;
using TaskId = std::uint64_t;

/// Fixed-dimension real vector with finite entries. Immutable once built.
class FeatureVector {
 public:
  FeatureVector() = default;
  explicit FeatureVector(std::vector<double> values);
  FeatureVector(std::initializer_list<double> values) : FeatureVector(std::vector<double>(values)) {}

  static FeatureVector zeros(std::size_t dim);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  const double* data() const noexcept { return values_.data(); }
  double operator[](std::size_t i) const { return values_[i]; }
  bool empty() const noexcept { return values_.empty(); }

  bool is_zero() const noexcept;
  double norm() const noexcept;
  FeatureVector scaled(double c) const;

  /// Storage cost under the 8-bytes-per-element accounting model.
  std::size_t byte_size() const noexcept { return values_.size() * sizeof(double); }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::vector<double> values_;
};

/// Minimum similarity in [0,1] for reuse to be allowed.
class SimilarityThreshold {
 public:
  constexpr SimilarityThreshold() = default;
  explicit SimilarityThreshold(double value);

  /// Accepts either a fraction (<= 1) or a percentage (> 1, divided by 100).
  static SimilarityThreshold from_user(double value);

  constexpr double value() const noexcept { return value_; }
  bool admits(double similarity) const noexcept { return similarity >= value_; }

 private:
  double value_ = 1.0;
};

/// 16-bit canonical routing hash.
struct ForwardingHash {
  static constexpr std::uint32_t kMax = 65535;
  std::uint32_t value = 0;

  friend constexpr bool operator==(ForwardingHash, ForwardingHash) = default;
};

enum class ReuseLayer { None, Device, Network, Server, PartialServer };

std::string_view to_string(ReuseLayer layer) noexcept;
std::optional<ReuseLayer> parse_reuse_layer(std::string_view name) noexcept;

struct TaskEnvelope {
  TaskId task_id = 0;
  std::string device_id;
  std::string service_id;
  FeatureVector input;
  SimilarityThreshold threshold;
  std::optional<ForwardingHash> forwarding_hash;
  SimTime created_at = 0;
};

struct TaskResult {
  TaskId task_id = 0;
  std::string service_id;
  FeatureVector output;
  int label = 0;
  ReuseLayer reuse_layer = ReuseLayer::None;
  SimTime completed_at = 0;
};

/// max(0, cos(a, b)). Throws on dimension mismatch or an all-zero operand.
double similarity(const FeatureVector& a, const FeatureVector& b);

inline constexpr double kResultTolerance = 1e-9;

/// Labels equal and outputs element-wise within kResultTolerance.
bool results_equal(const TaskResult& r1, const TaskResult& r2);

/// Labels equal. The reuse-accuracy predicate for near-duplicate inputs.
bool answers_match(const TaskResult& r1, const TaskResult& r2);

void require_same_dim(const FeatureVector& a, const FeatureVector& b);
void require_nonzero(const FeatureVector& v);

}  // namespace edgereuse
