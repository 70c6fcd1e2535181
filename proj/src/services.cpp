#include "edgereuse/services.hpp"

#include <cmath>
#include <limits>

#include "edgereuse/hashing.hpp"
#include "edgereuse/kernels.hpp"
#include "edgereuse/rng.hpp"

namespace edgereuse {

namespace {

constexpr std::uint64_t kStageTag = 0x5354414745;  // "STAGE"
constexpr std::uint64_t kClassTag = 0x434c415353;  // "CLASS"

std::vector<double> gaussian_matrix(std::uint64_t seed, std::size_t rows, std::size_t cols) {
  Rng rng(seed);
  std::vector<double> m(rows * cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (double& v : m) v = rng.normal() * scale;
  return m;
}

}  // namespace

Stage::Stage(StageSpec spec, std::size_t in_dim) : spec_(std::move(spec)), in_dim_(in_dim) {
  if (spec_.stage_id.empty()) throw Error(Errc::InvalidArgument, "stage id must not be empty");
  if (spec_.out_dim == 0 || in_dim_ == 0) {
    throw Error(Errc::InvalidArgument, "stage '" + spec_.stage_id + "' needs positive dims");
  }
  if (spec_.exec_time_us < 0) throw Error(Errc::InvalidArgument, "stage '" + spec_.stage_id + "' has negative cost");
  matrix_ = gaussian_matrix(derive_seed(spec_.transform_seed, kStageTag), spec_.out_dim, in_dim_);
}

FeatureVector Stage::execute(const FeatureVector& input) const {
  if (input.dim() != in_dim_) {
    throw Error(Errc::DimensionMismatch, "stage '" + spec_.stage_id + "' expects dim " + std::to_string(in_dim_) +
                                             ", got " + std::to_string(input.dim()));
  }
  std::vector<double> out(spec_.out_dim);
  simd::matvec(matrix_, spec_.out_dim, in_dim_, input.values(), out);
  for (double& v : out) v = std::tanh(v);
  return FeatureVector(std::move(out));
}

FeatureVector execute_stage(const StageSpec& stage, const FeatureVector& input) {
  return Stage(stage, input.dim()).execute(input);
}

Service::Service(ServiceSpec spec, std::size_t input_dim) : spec_(std::move(spec)) {
  if (spec_.stages.empty()) throw Error(Errc::InvalidArgument, "service '" + spec_.service_id + "' has no stages");
  std::size_t dim = input_dim;
  for (const auto& s : spec_.stages) {
    stages_.push_back(std::make_shared<const Stage>(s, dim));
    dim = s.out_dim;
  }
  build_classifier();
}

Service::Service(ServiceSpec spec, std::vector<std::shared_ptr<const Stage>> stages)
    : spec_(std::move(spec)), stages_(std::move(stages)) {
  if (stages_.empty()) throw Error(Errc::InvalidArgument, "service '" + spec_.service_id + "' has no stages");
  for (std::size_t i = 1; i < stages_.size(); ++i) {
    if (stages_[i]->in_dim() != stages_[i - 1]->out_dim()) {
      throw Error(Errc::InvalidArgument, "service '" + spec_.service_id + "': stage dims do not chain at '" +
                                             stages_[i]->spec().stage_id + "'");
    }
  }
  build_classifier();
}

void Service::build_classifier() {
  if (spec_.service_id.empty()) throw Error(Errc::InvalidArgument, "service id must not be empty");
  if (spec_.label_classes < 2) {
    throw Error(Errc::InvalidArgument, "service '" + spec_.service_id + "' needs at least 2 label classes");
  }
  if (!spec_.label_biases.empty() && spec_.label_biases.size() != static_cast<std::size_t>(spec_.label_classes)) {
    throw Error(Errc::InvalidArgument, "service '" + spec_.service_id + "' has the wrong number of label biases");
  }
  class_projection_ =
      gaussian_matrix(derive_seed(spec_.label_seed, kClassTag), spec_.label_classes, stages_.back()->out_dim());
}

SimTime Service::total_exec_time() const noexcept {
  SimTime total = 0;
  for (const auto& s : stages_) total += s->spec().exec_time_us;
  return total;
}

std::vector<double> Service::class_scores(const FeatureVector& final_output) const {
  const std::size_t classes = static_cast<std::size_t>(spec_.label_classes);
  std::vector<double> scores(classes);
  simd::matvec(class_projection_, classes, final_output.dim(), final_output.values(), scores);
  if (!spec_.label_biases.empty()) {
    for (std::size_t c = 0; c < classes; ++c) scores[c] += spec_.label_biases[c];
  }
  return scores;
}

int Service::classify(const FeatureVector& final_output) const {
  const auto scores = class_scores(final_output);
  int best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = static_cast<int>(c);
  }
  return best;
}

double Service::boundary_margin(const FeatureVector& final_output) const {
  const auto scores = class_scores(final_output);
  const std::size_t best = static_cast<std::size_t>(classify(final_output));
  const std::size_t dim = final_output.dim();
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (c == best) continue;
    double w2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = class_projection_[best * dim + i] - class_projection_[c * dim + i];
      w2 += d * d;
    }
    margin = std::min(margin, (scores[best] - scores[c]) / std::sqrt(w2));
  }
  return margin / final_output.norm();
}

ServiceOutput Service::resume(std::size_t first, const FeatureVector& intermediate) const {
  if (first > stages_.size()) throw Error(Errc::InvalidArgument, "resume index past the last stage");
  ServiceOutput out;
  FeatureVector current = intermediate;
  for (std::size_t i = first; i < stages_.size(); ++i) {
    current = stages_[i]->execute(current);
    out.stage_outputs.emplace(stages_[i]->spec().stage_id, current);
  }
  out.label = classify(current);
  out.output = std::move(current);
  return out;
}

ServiceOutput Service::execute(const FeatureVector& input) const { return resume(0, input); }

TaskResult to_result(const ServiceOutput& out, TaskId task_id, std::string service_id) {
  TaskResult r;
  r.task_id = task_id;
  r.service_id = std::move(service_id);
  r.output = out.output;
  r.label = out.label;
  return r;
}

ServiceOutput execute_service(const ServiceSpec& svc, const FeatureVector& input) {
  return Service(svc, input.dim()).execute(input);
}

ServiceCatalog::ServiceCatalog(std::vector<ServiceSpec> specs, std::size_t input_dim) : input_dim_(input_dim) {
  if (input_dim == 0) throw Error(Errc::Config, "service catalog needs input dim >= 1");
  struct Known {
    std::shared_ptr<const Stage> stage;
    std::vector<std::string> upstream;
  };
  std::map<std::string, Known> known;
  for (auto& spec : specs) {
    if (services_.count(spec.service_id)) throw Error(Errc::Config, "duplicate service id '" + spec.service_id + "'");
    if (spec.stages.empty()) throw Error(Errc::Config, "service '" + spec.service_id + "' has no stages");
    std::vector<std::shared_ptr<const Stage>> stages;
    std::vector<std::string> upstream;
    std::size_t dim = input_dim;
    for (const auto& s : spec.stages) {
      auto it = known.find(s.stage_id);
      if (it != known.end()) {
        const auto& prev = it->second;
        if (!(prev.stage->spec() == s)) {
          throw Error(Errc::Config, "stage '" + s.stage_id + "' is declared with different parameters");
        }
        if (prev.stage->in_dim() != dim || prev.upstream != upstream) {
          throw Error(Errc::Config, "stage '" + s.stage_id + "' is shared with a different upstream pipeline");
        }
        stages.push_back(prev.stage);
      } else {
        auto stage = std::make_shared<const Stage>(s, dim);
        known.emplace(s.stage_id, Known{stage, upstream});
        stages.push_back(std::move(stage));
      }
      upstream.push_back(s.stage_id);
      dim = s.out_dim;
    }
    auto id = spec.service_id;
    services_.emplace(std::move(id), std::make_shared<const Service>(std::move(spec), std::move(stages)));
  }
}

const Service& ServiceCatalog::get(std::string_view service_id) const {
  auto it = services_.find(service_id);
  if (it == services_.end()) throw Error(Errc::UnknownService, "unknown service '" + std::string(service_id) + "'");
  return *it->second;
}

bool ServiceCatalog::contains(std::string_view service_id) const { return services_.find(service_id) != services_.end(); }

std::vector<std::string> ServiceCatalog::service_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, svc] : services_) out.push_back(id);
  return out;
}

TaskResult ServiceCatalog::oracle(std::string_view service_id, const FeatureVector& input, TaskId task_id) const {
  const Service& svc = get(service_id);
  return to_result(svc.execute(input), task_id, svc.id());
}

std::vector<ServiceSpec> default_service_specs() {
  const StageSpec objdet{"objdet", 101, 128, 60'000};
  return {
      {"vehicle-count", {objdet, {"count-head", 102, 64, 40'000}}, 5, 201, {}},
      {"driving-assist", {objdet, {"hazard-head", 103, 64, 40'000}}, 4, 202, {}},
      {"voice-command", {{"speech-intent", 104, 64, 100'000}}, 8, 203, {}},
      {"ar-render", {{"scene-graph", 105, 128, 50'000}, {"render", 106, 64, 50'000}}, 6, 204, {}},
  };
}

}  // namespace edgereuse
