#include "edgereuse/core.hpp"

#include <algorithm>
#include <cmath>

#include "edgereuse/kernels.hpp"

namespace edgereuse {

FeatureVector::FeatureVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw Error(Errc::InvalidArgument, "feature vector must have dim >= 1");
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(Errc::NonFinite, "feature vector contains NaN or Inf");
  }
}

FeatureVector FeatureVector::zeros(std::size_t dim) {
  return FeatureVector(std::vector<double>(dim, 0.0));
}

bool FeatureVector::is_zero() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

double FeatureVector::norm() const noexcept { return std::sqrt(simd::dot(values_, values_)); }

FeatureVector FeatureVector::scaled(double c) const {
  std::vector<double> out(values_);
  for (double& v : out) v *= c;
  return FeatureVector(std::move(out));
}

SimilarityThreshold::SimilarityThreshold(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw Error(Errc::InvalidArgument, "similarity threshold must be in [0,1], got " + std::to_string(value));
  }
}

SimilarityThreshold SimilarityThreshold::from_user(double value) {
  return SimilarityThreshold(value > 1.0 ? value / 100.0 : value);
}

std::string_view to_string(ReuseLayer layer) noexcept {
  switch (layer) {
    case ReuseLayer::None: return "none";
    case ReuseLayer::Device: return "device";
    case ReuseLayer::Network: return "network";
    case ReuseLayer::Server: return "server";
    case ReuseLayer::PartialServer: return "partial_server";
  }
  return "?";
}

std::optional<ReuseLayer> parse_reuse_layer(std::string_view name) noexcept {
  for (ReuseLayer l : {ReuseLayer::None, ReuseLayer::Device, ReuseLayer::Network, ReuseLayer::Server,
                       ReuseLayer::PartialServer}) {
    if (to_string(l) == name) return l;
  }
  return std::nullopt;
}

void require_same_dim(const FeatureVector& a, const FeatureVector& b) {
  if (a.dim() != b.dim()) {
    throw Error(Errc::DimensionMismatch,
                "dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
}

void require_nonzero(const FeatureVector& v) {
  if (v.empty() || v.is_zero()) throw Error(Errc::ZeroVector, "all-zero vector has no direction");
}

double similarity(const FeatureVector& a, const FeatureVector& b) {
  require_same_dim(a, b);
  require_nonzero(a);
  require_nonzero(b);
  const auto& k = simd::active();
  const double ab = k.dot(a.data(), b.data(), a.dim());
  const double aa = k.dot(a.data(), a.data(), a.dim());
  const double bb = k.dot(b.data(), b.data(), b.dim());
  const double cos = ab / (std::sqrt(aa) * std::sqrt(bb));
  return std::clamp(cos, 0.0, 1.0);
}

bool results_equal(const TaskResult& r1, const TaskResult& r2) {
  if (r1.service_id != r2.service_id) {
    throw Error(Errc::ServiceMismatch, "comparing results of services '" + r1.service_id + "' and '" +
                                           r2.service_id + "'");
  }
  if (r1.label != r2.label) return false;
  if (r1.output.dim() != r2.output.dim()) return false;
  for (std::size_t i = 0; i < r1.output.dim(); ++i) {
    if (std::abs(r1.output[i] - r2.output[i]) > kResultTolerance) return false;
  }
  return true;
}

bool answers_match(const TaskResult& r1, const TaskResult& r2) {
  if (r1.service_id != r2.service_id) {
    throw Error(Errc::ServiceMismatch, "comparing results of services '" + r1.service_id + "' and '" +
                                           r2.service_id + "'");
  }
  return r1.label == r2.label;
}

}  // namespace edgereuse
