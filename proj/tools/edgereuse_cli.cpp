// edgereuse: generate workloads, replay them, sweep thresholds, summarize.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "edgereuse/config.hpp"
#include "edgereuse/kernels.hpp"
#include "edgereuse/simulator.hpp"
#include "edgereuse/workload.hpp"

namespace fs = std::filesystem;
using namespace edgereuse;
using nlohmann::json;

namespace {

constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void make_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory '" + dir.string() + "'");
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

void write_json(const fs::path& path, const json& j) { open_out(path) << j.dump(2) << '\n'; }

WorkloadProfile resolve_profile(const std::string& arg) {
  if (auto p = builtin_profile(arg)) return *p;
  if (fs::is_regular_file(arg)) {
    std::ifstream in(arg);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw UsageError("profile file '" + arg + "' is not valid JSON: " + e.what());
    }
    return parse_profile(j, "profile");
  }
  std::string names;
  for (const auto& n : builtin_profile_names()) names += (names.empty() ? "" : ", ") + n;
  throw UsageError("unknown profile '" + arg + "' (built-in: " + names + ", or a JSON file)");
}

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto v = parse_double(item);
    if (!v) throw UsageError("bad threshold '" + item + "'");
    try {
      out.push_back(SimilarityThreshold::from_user(*v).value());
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  if (out.empty()) throw UsageError("no thresholds given");
  if (!std::is_sorted(out.begin(), out.end())) throw UsageError("thresholds must be sorted ascending");
  return out;
}

std::string pct(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", *v);
  return buf;
}

std::string ms(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f ms", v);
  return buf;
}

int cmd_generate(const std::string& profile_arg, std::uint64_t seed, const fs::path& out) {
  const WorkloadProfile profile = resolve_profile(profile_arg);
  make_out_dir(out);
  const GeneratedWorkload w = generate_trace(profile, seed);
  {
    auto f = open_out(out / "trace.csv");
    write_trace_csv(f, w.trace);
  }
  {
    auto f = open_out(out / "vectors.csv");
    write_vectors_csv(f, w.vectors);
  }
  write_json(out / "profile.json", profile_to_json(profile));
  write_json(out / "topology.json", topology_to_json(default_topology()));
  write_json(out / "services.json", services_to_json(default_service_specs()));
  write_json(out / "experiment.json", json{{"seed", seed},
                                           {"dim", profile.dim},
                                           {"topology", "topology.json"},
                                           {"services", "services.json"},
                                           {"trace", "trace.csv"},
                                           {"vectors", "vectors.csv"}});

  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (const auto& c : w.clusters) {
    lo = std::min(lo, c.measured_cosine);
    hi = std::max(hi, c.measured_cosine);
    sum += c.measured_cosine;
  }
  std::cout << "profile " << profile.name << ": " << w.trace.size() << " tasks, " << w.vectors.size()
            << " vectors, " << w.clusters.size() << " clusters\n";
  if (!w.clusters.empty()) {
    std::printf("intra-cluster cosine: mean %.4f min %.4f max %.4f; inter-cluster mean %.4f\n",
                sum / static_cast<double>(w.clusters.size()), lo, hi, w.mean_inter_cluster_cosine);
  }
  std::cout << "wrote " << (out / "experiment.json").string() << '\n';
  return 0;
}

ExperimentConfig load_config(const std::string& path) {
  if (!fs::is_regular_file(path)) throw UsageError("config: cannot open '" + path + "'");
  return load_experiment(path);
}

int cmd_run(const std::string& config_path, const fs::path& out, bool event_log) {
  const ExperimentConfig config = load_config(config_path);
  make_out_dir(out);
  std::vector<EventLogRow> log;
  const MetricsReport rep = run(config, event_log ? &log : nullptr);
  write_json(out / "metrics.json", metrics_json(rep));
  {
    auto f = open_out(out / "per_task.csv");
    write_per_task_csv(f, rep);
  }
  if (event_log) {
    auto f = open_out(out / "events.csv");
    write_event_log_csv(f, log);
  }
  std::cout << rep.tasks.size() << " tasks, mean completion " << ms(rep.mean_completion_ms) << ", reuse "
            << pct(rep.reuse_pct) << ", accuracy " << pct(rep.accuracy_pct) << '\n';
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& thresholds_arg, const fs::path& out,
              unsigned jobs) {
  const auto thresholds = parse_thresholds(thresholds_arg);
  const ExperimentConfig config = load_config(config_path);
  make_out_dir(out);
  const auto rows = sweep_thresholds(config, thresholds, jobs);
  {
    auto f = open_out(out / "sweep.csv");
    write_sweep_csv(f, rows);
  }
  std::printf("%-10s %10s %12s\n", "threshold", "reuse", "accuracy");
  for (const auto& r : rows) {
    std::printf("%-10.0f %10s %12s\n", r.threshold * 100.0, pct(r.reuse_pct).c_str(), pct(r.accuracy_pct).c_str());
  }
  return 0;
}

int cmd_report(const fs::path& in) {
  const fs::path metrics = in / "metrics.json";
  std::ifstream f(metrics);
  if (!f) throw UsageError("report: cannot open '" + metrics.string() + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw UsageError("report: '" + metrics.string() + "' is not valid JSON");
  }
  auto row = [](const std::string& name, const json& s) {
    std::printf("  %-22s %8zu  %7.2f%%  %10.2f ms\n", name.c_str(), s.at("count").get<std::size_t>(),
                s.at("pct").get<double>(), s.at("mean_completion_ms").get<double>());
  };
  std::printf("tasks: %zu   mean completion: %.2f ms\n", j.at("tasks").get<std::size_t>(),
              j.at("mean_completion_ms").get<double>());
  std::printf("  %-22s %8s  %8s  %13s\n", "layer", "tasks", "share", "completion");
  const json& layers = j.at("layers");
  row("no reuse", layers.at("none"));
  row("device/network reuse", j.at("device_network"));
  row("server reuse", layers.at("server"));
  row("partial server reuse", layers.at("partial_server"));
  const json& acc = j.at("accuracy_pct");
  const json& speed = j.at("speedup");
  std::printf("reuse accuracy: %s   speedup: %s\n", acc.is_null() ? "n/a" : pct(acc.get<double>()).c_str(),
              speed.is_null() ? "n/a" : (std::to_string(speed.get<double>()).substr(0, 5) + "x").c_str());
  for (const auto& s : j.at("servers")) {
    std::printf("  %s: executed %llu, reused %llu, busy %.2f%%, stored %zu bytes\n",
                s.at("id").get<std::string>().c_str(), s.at("executed").get<unsigned long long>(),
                s.at("reused").get<unsigned long long>(), 100.0 * s.at("busy_fraction").get<double>(),
                s.at("stored_bytes").get<std::size_t>());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Similarity-based computation reuse at the edge: workload generation and simulation"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", "edgereuse 0.1 (" + std::string(simd::to_string(simd::active_isa())) + ")");

  std::string profile;
  std::uint64_t seed = 1;
  std::string out_dir;
  auto* gen = app.add_subcommand("generate", "write a synthetic trace and experiment files");
  gen->add_option("--profile", profile, "built-in profile name or JSON file")->required();
  gen->add_option("--seed", seed, "RNG seed");
  gen->add_option("--out", out_dir, "output directory")->required();

  std::string config;
  bool event_log = false;
  auto* runc = app.add_subcommand("run", "replay an experiment");
  runc->add_option("--config", config, "experiment JSON")->required();
  runc->add_option("--out", out_dir, "output directory")->required();
  runc->add_flag("--event-log", event_log, "also write events.csv");

  std::string thresholds = "0.6,0.7,0.8,0.9";
  unsigned jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "replay once per similarity threshold");
  sweep->add_option("--config", config, "experiment JSON")->required();
  sweep->add_option("--thresholds", thresholds, "ascending list, fractions or percentages");
  sweep->add_option("--out", out_dir, "output directory")->required();
  sweep->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);

  std::string in_dir;
  auto* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("--in", in_dir, "directory written by run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    if (*gen) return cmd_generate(profile, seed, out_dir);
    if (*runc) return cmd_run(config, out_dir, event_log);
    if (*sweep) return cmd_sweep(config, thresholds, out_dir, jobs);
    if (*report) return cmd_report(in_dir);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    const bool usage = e.code() == Errc::Config || e.code() == Errc::Parse || e.code() == Errc::InvalidArgument;
    return usage ? kUsageError : kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}
