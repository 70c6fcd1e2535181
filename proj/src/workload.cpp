#include "edgereuse/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "edgereuse/kernels.hpp"
#include "edgereuse/rng.hpp"
#include "edgereuse/services.hpp"

namespace edgereuse {

namespace {

constexpr std::size_t kMaxSampledPairs = 2000;

std::vector<double> gaussian(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (double& x : v) x = rng.normal();
  return v;
}

void normalize(std::vector<double>& v) {
  const double n = std::sqrt(simd::dot(v, v));
  for (double& x : v) x /= n;
}

std::vector<double> member_of(const std::vector<double>& center, double sd, Rng& rng) {
  const double scale = std::sqrt(static_cast<double>(center.size()));
  auto v = gaussian(rng, center.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = scale * (center[i] + sd * v[i]);
  return v;
}

// Worst-service angular room between the center's output and a label boundary.
double label_stability(const std::vector<double>& center, const std::vector<const Service*>& services) {
  Rng unused(0);
  const FeatureVector c(member_of(center, 0.0, unused));
  double worst = std::numeric_limits<double>::infinity();
  for (const Service* s : services) worst = std::min(worst, s->boundary_margin(s->execute(c).output));
  return worst;
}

// Orthonormal when count <= dim (Gram-Schmidt), otherwise independent random
// unit vectors, which are nearly orthogonal in high dimension.
std::vector<std::vector<double>> make_centers(Rng& rng, std::size_t count, std::size_t dim, std::size_t candidates,
                                              const std::vector<const Service*>& services) {
  std::vector<std::vector<double>> centers;
  for (std::size_t c = 0; c < count; ++c) {
    std::vector<double> best;
    double best_score = -1.0;
    for (std::size_t k = 0; k < std::max<std::size_t>(candidates, 1); ++k) {
      auto v = gaussian(rng, dim);
      if (count <= dim) {
        for (const auto& prev : centers) {
          const double p = simd::dot(v, prev);
          for (std::size_t i = 0; i < dim; ++i) v[i] -= p * prev[i];
        }
      }
      normalize(v);
      if (candidates <= 1 || services.empty()) {
        best = std::move(v);
        break;
      }
      const double score = label_stability(v, services);
      if (score > best_score) {
        best_score = score;
        best = std::move(v);
      }
    }
    centers.push_back(std::move(best));
  }
  return centers;
}

std::string vector_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "v%07zu", i);
  return buf;
}

}  // namespace

double noise_variance_for(double target_cosine) {
  if (!(target_cosine > 0.0 && target_cosine <= 1.0)) {
    throw Error(Errc::InvalidArgument, "cluster cosine target must be in (0, 1], got " + format_double(target_cosine));
  }
  // Members are c + n with |c| = 1 and E|n|^2 = s^2; in high dimension
  // cos(m1, m2) concentrates at 1 / (1 + s^2).
  return 1.0 / target_cosine - 1.0;
}

GeneratedWorkload generate_trace(const WorkloadProfile& p, std::uint64_t seed, const std::vector<ServiceSpec>& catalog) {
  if (p.dim == 0) throw Error(Errc::InvalidArgument, "profile dim must be >= 1");
  if (p.min_cosine > p.max_cosine) throw Error(Errc::InvalidArgument, "profile min_cosine exceeds max_cosine");
  noise_variance_for(p.min_cosine);
  noise_variance_for(p.max_cosine);
  if (p.unique_fraction < 0.0 || p.unique_fraction > 1.0) {
    throw Error(Errc::InvalidArgument, "unique_fraction must be in [0,1]");
  }
  if (p.clusters == 0 && p.unique_fraction < 1.0) {
    throw Error(Errc::InvalidArgument, "profile has no clusters but unique_fraction < 1");
  }
  std::vector<WeightedService> services = p.services;
  if (services.empty()) {
    for (const auto& s : default_service_specs()) services.push_back({s.service_id, 1.0});
  }
  const double total_weight = std::accumulate(services.begin(), services.end(), 0.0,
                                              [](double a, const WeightedService& s) { return a + s.weight; });
  if (!(total_weight > 0.0)) throw Error(Errc::InvalidArgument, "service weights must sum to a positive value");

  Rng center_rng(derive_seed(seed, 1));
  Rng spread_rng(derive_seed(seed, 2));
  Rng member_rng(derive_seed(seed, 3));
  Rng schedule_rng(derive_seed(seed, 4));

  std::vector<double> noise_sd(p.clusters);
  GeneratedWorkload out;
  out.clusters.resize(p.clusters);
  for (std::size_t c = 0; c < p.clusters; ++c) {
    const double target = spread_rng.uniform(p.min_cosine, p.max_cosine);
    out.clusters[c].target_cosine = target;
    noise_sd[c] = std::sqrt(noise_variance_for(target) / static_cast<double>(p.dim));
  }

  std::vector<Service> guides;
  if (p.center_candidates > 1) {
    for (const auto& ws : services) {
      auto it = std::find_if(catalog.begin(), catalog.end(),
                             [&](const ServiceSpec& s) { return s.service_id == ws.service_id; });
      if (it != catalog.end()) guides.emplace_back(*it, p.dim);
    }
  }
  std::vector<const Service*> guide_ptrs;
  for (const auto& g : guides) guide_ptrs.push_back(&g);
  const auto centers = make_centers(center_rng, p.clusters, p.dim, p.center_candidates, guide_ptrs);

  const double scale = std::sqrt(static_cast<double>(p.dim));
  std::vector<std::vector<std::size_t>> members(p.clusters);
  std::size_t next_vector = 0;

  struct Pending {
    SimTime time;
    std::size_t device;
    std::size_t seq;
    TraceRow row;
  };
  std::vector<Pending> pending;
  pending.reserve(p.devices * p.tasks_per_device);

  for (std::size_t d = 0; d < p.devices; ++d) {
    SimTime t = 0;
    const std::string device_id = "device-" + std::to_string(d);
    for (std::size_t k = 0; k < p.tasks_per_device; ++k) {
      const double gap = p.arrival == ArrivalKind::Fixed
                             ? static_cast<double>(p.mean_interarrival_us)
                             : schedule_rng.exponential(static_cast<double>(p.mean_interarrival_us));
      t += std::max<SimTime>(1, static_cast<SimTime>(std::llround(gap)));

      double pick = schedule_rng.uniform(0.0, total_weight);
      std::size_t s = 0;
      while (s + 1 < services.size() && pick >= services[s].weight) pick -= services[s++].weight;

      std::vector<double> v;
      const bool unique = p.clusters == 0 || member_rng.uniform() < p.unique_fraction;
      if (unique) {
        v = gaussian(member_rng, p.dim);
        normalize(v);
        for (double& x : v) x *= scale;
      } else {
        const std::size_t c = member_rng.below(p.clusters);
        v = member_of(centers[c], noise_sd[c], member_rng);
        members[c].push_back(next_vector);
      }
      const std::string vid = vector_name(next_vector++);
      out.vectors.emplace(vid, FeatureVector(std::move(v)));
      pending.push_back({t, d, k, TraceRow{t, device_id, services[s].service_id, vid, p.threshold}});
    }
  }

  std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    return a.time != b.time ? a.time < b.time : a.device < b.device;
  });
  for (auto& e : pending) out.trace.push_back(std::move(e.row));

  // Post-hoc check of the realized spread.
  Rng sample_rng(derive_seed(seed, 5));
  auto vec_of = [&](std::size_t i) -> const FeatureVector& { return out.vectors.find(vector_name(i))->second; };
  for (std::size_t c = 0; c < p.clusters; ++c) {
    const auto& m = members[c];
    out.clusters[c].members = m.size();
    if (m.size() < 2) {
      out.clusters[c].measured_cosine = out.clusters[c].target_cosine;
      continue;
    }
    const std::size_t all_pairs = m.size() * (m.size() - 1) / 2;
    double sum = 0.0;
    std::size_t n = 0;
    if (all_pairs <= kMaxSampledPairs) {
      for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = i + 1; j < m.size(); ++j, ++n) sum += similarity(vec_of(m[i]), vec_of(m[j]));
      }
    } else {
      for (; n < kMaxSampledPairs; ++n) {
        const auto i = sample_rng.below(m.size());
        auto j = sample_rng.below(m.size() - 1);
        if (j >= i) ++j;
        sum += similarity(vec_of(m[i]), vec_of(m[j]));
      }
    }
    out.clusters[c].measured_cosine = sum / static_cast<double>(n);
  }
  if (p.clusters >= 2) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t a = 0; a < p.clusters; ++a) {
      for (std::size_t b = a + 1; b < p.clusters; ++b, ++n) sum += simd::dot(centers[a], centers[b]);
    }
    out.mean_inter_cluster_cosine = sum / static_cast<double>(n);
  }
  return out;
}

std::vector<std::string> builtin_profile_names() {
  return {"cctv-like", "mobile-ar-like", "pandaset-like", "mnist-like"};
}

std::optional<WorkloadProfile> builtin_profile(std::string_view name) {
  WorkloadProfile p;
  p.name = std::string(name);
  p.tasks_per_device = 5000;
  p.threshold = 0.9;
  p.center_candidates = 1024;
  if (name == "cctv-like") {
    p.clusters = 24;
    p.min_cosine = 0.90;
    p.max_cosine = 0.99;
    p.unique_fraction = 0.05;
  } else if (name == "mobile-ar-like") {
    p.clusters = 48;
    p.min_cosine = 0.75;
    p.max_cosine = 0.97;
    p.unique_fraction = 0.45;
  } else if (name == "pandaset-like") {
    p.clusters = 48;
    p.min_cosine = 0.60;
    p.max_cosine = 0.97;
    p.unique_fraction = 0.65;
  } else if (name == "mnist-like") {
    p.clusters = 10;
    p.min_cosine = 0.55;
    p.max_cosine = 0.96;
    p.unique_fraction = 0.45;
  } else {
    return std::nullopt;
  }
  return p;
}

}  // namespace edgereuse
