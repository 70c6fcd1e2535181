#include <doctest.h>

#include <algorithm>
#include <array>
#include <set>
#include <sstream>

#include "edgereuse/simulator.hpp"
#include "oracles.hpp"

using namespace edgereuse;

namespace {

constexpr SimTime kHop = 3500;

// d0 - r0 - s0 with fixed 3.5 ms links.
ExperimentConfig line_config(StoreLimits device, StoreLimits router, StoreLimits server) {
  ExperimentConfig c;
  c.seed = 11;
  c.dim = 64;
  c.services = default_service_specs();
  c.topology.nodes = {{"d0", NodeKind::Device, device, true},
                      {"r0", NodeKind::Router, router, true},
                      {"s0", NodeKind::Server, server, true}};
  c.topology.links = {{"d0", "r0", kHop, std::nullopt}, {"r0", "s0", kHop, std::nullopt}};
  return c;
}

const StoreLimits kNone{0, 0};
const StoreLimits kSome{1000, std::size_t{1} << 24};

void add_task(ExperimentConfig& c, SimTime t, const std::string& vec, const std::string& service = "voice-command",
              const std::string& device = "d0") {
  c.trace.push_back({t, device, service, vec, std::nullopt});
}

std::string per_task_text(const MetricsReport& r) {
  std::ostringstream os;
  write_per_task_csv(os, r);
  return os.str();
}

ExperimentConfig generated_config(std::uint64_t seed, std::size_t per_device) {
  WorkloadProfile p = *builtin_profile("mobile-ar-like");
  p.tasks_per_device = per_device;
  p.center_candidates = 8;
  const auto w = generate_trace(p, seed);
  ExperimentConfig c;
  c.seed = seed;
  c.dim = p.dim;
  c.services = default_service_specs();
  c.topology = default_topology();
  c.trace = w.trace;
  c.vectors = w.vectors;
  return c;
}

}  // namespace

TEST_CASE("no-reuse completion is hash + lookup + four hops + execution") {
  auto c = line_config(kNone, kNone, kSome);
  Rng rng(81);
  c.vectors["x"] = FeatureVector(oracle::random_vector(rng, 64));
  add_task(c, 0, "x");
  const auto r = run(c);
  REQUIRE(r.tasks.size() == 1);
  CHECK(r.tasks[0].reuse_layer == ReuseLayer::None);
  CHECK(r.tasks[0].completion_us() == 1800 + 1000 + 4 * kHop + 100'000);
  CHECK(r.tasks[0].completion_us() == 116'800);
  CHECK(r.tasks[0].server_id == "s0");
  CHECK_FALSE(r.tasks[0].accurate);
  CHECK(r.mean_completion_ms == doctest::Approx(116.8));
}

TEST_CASE("completion time per reuse layer") {
  Rng rng(82);
  const FeatureVector x(oracle::random_vector(rng, 64));

  SUBCASE("server hit") {
    auto c = line_config(kNone, kNone, kSome);
    c.vectors["x"] = x;
    add_task(c, 0, "x");
    add_task(c, 1'000'000, "x");
    const auto r = run(c);
    CHECK(r.tasks[1].reuse_layer == ReuseLayer::Server);
    CHECK(r.tasks[1].completion_us() == 16'800);
    CHECK(r.tasks[1].similarity == doctest::Approx(1.0));
    CHECK(r.tasks[1].accurate == true);
    CHECK(r.tasks[1].server_id == "s0");
    REQUIRE(r.speedup);
    CHECK(*r.speedup == doctest::Approx(116.8 / 16.8));
  }
  SUBCASE("device hit") {
    auto c = line_config(kSome, kSome, kSome);
    c.vectors["x"] = x;
    add_task(c, 0, "x");
    add_task(c, 1'000'000, "x");
    const auto r = run(c);
    // with a device store the first task also pays one device lookup
    CHECK(r.tasks[0].completion_us() == 1800 + 1000 + 1000 + 4 * kHop + 1000 + 100'000);
    CHECK(r.tasks[1].reuse_layer == ReuseLayer::Device);
    CHECK(r.tasks[1].completion_us() == 1800 + 1000);
    CHECK(r.tasks[1].server_id.empty());
  }
  SUBCASE("router hit") {
    auto c = line_config(kNone, kSome, kSome);
    c.vectors["x"] = x;
    add_task(c, 0, "x");
    add_task(c, 1'000'000, "x");
    const auto r = run(c);
    CHECK(r.tasks[1].reuse_layer == ReuseLayer::Network);
    CHECK(r.tasks[1].completion_us() == 1800 + kHop + 1000 + kHop);
    CHECK(r.tasks[1].server_id.empty());
  }
  SUBCASE("partial reuse of a shared stage") {
    auto c = line_config(kNone, kNone, kSome);
    c.vectors["x"] = x;
    add_task(c, 0, "x", "vehicle-count");
    add_task(c, 1'000'000, "x", "driving-assist");
    const auto r = run(c);
    CHECK(r.tasks[1].reuse_layer == ReuseLayer::PartialServer);
    CHECK(r.tasks[1].completion_us() == 1800 + 4 * kHop + 1000 + 1000 + 40'000);
    CHECK(r.tasks[1].accurate == true);
  }
  SUBCASE("concurrent duplicates both execute") {
    auto c = line_config(kNone, kNone, kSome);
    c.vectors["x"] = x;
    add_task(c, 0, "x");
    add_task(c, 10, "x");
    const auto r = run(c);
    CHECK(r.tasks[0].reuse_layer == ReuseLayer::None);
    CHECK(r.tasks[1].reuse_layer == ReuseLayer::None);
    CHECK(r.tasks[1].completion_us() == 116'800);
  }
}

TEST_CASE("a device that cannot hash leaves it to the router") {
  auto c = line_config(kNone, kNone, kSome);
  c.topology.nodes[0].can_hash = false;
  Rng rng(83);
  c.vectors["x"] = FeatureVector(oracle::random_vector(rng, 64));
  add_task(c, 0, "x");
  add_task(c, 1'000'000, "x");
  const auto r = run(c);
  for (const auto& t : r.tasks) CHECK(t.hash_computations == 1);
  CHECK(r.tasks[0].completion_us() == 116'800);
  CHECK(r.tasks[1].completion_us() == 16'800);
}

TEST_CASE("event log costs add up to each completion time") {
  auto c = generated_config(5, 300);
  std::vector<EventLogRow> log;
  const auto r = run(c, &log);
  REQUIRE_FALSE(log.empty());
  std::map<TaskId, SimTime> sums;
  std::map<TaskId, SimTime> last;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (i) CHECK(log[i].time_us >= log[i - 1].time_us);
    if (!log[i].task_id) continue;
    sums[*log[i].task_id] += log[i].cost_us;
    last[*log[i].task_id] = log[i].time_us;
  }
  REQUIRE(sums.size() == r.tasks.size());
  for (const auto& t : r.tasks) {
    CHECK(sums[t.task_id] == t.completion_us());
    CHECK(last[t.task_id] == t.completed_us);
  }
}

TEST_CASE("same config and seed give byte-identical outputs") {
  const auto c = generated_config(6, 400);
  std::vector<EventLogRow> la, lb;
  const auto a = run(c, &la);
  const auto b = run(c, &lb);
  CHECK(per_task_text(a) == per_task_text(b));
  std::ostringstream ea, eb;
  write_event_log_csv(ea, la);
  write_event_log_csv(eb, lb);
  CHECK(ea.str() == eb.str());
  CHECK(metrics_json(a).dump() == metrics_json(b).dump());

  auto other = c;
  other.seed = 7;
  CHECK(per_task_text(run(other)) != per_task_text(a));
}

TEST_CASE("every task completes exactly once and percentages close") {
  const auto c = generated_config(8, 500);
  const auto r = run(c);
  CHECK(r.tasks.size() == c.trace.size());
  std::set<TaskId> ids;
  std::size_t counted = 0;
  for (const auto& t : r.tasks) {
    CHECK(ids.insert(t.task_id).second);
    CHECK(t.completed_us > t.created_us);
    CHECK(t.hash_computations == 1);
    CHECK(t.accurate.has_value() == (t.reuse_layer != ReuseLayer::None));
  }
  for (const auto& [layer, s] : r.layers) counted += s.count;
  CHECK(counted == r.tasks.size());
  CHECK(r.reuse_pct + r.no_reuse_pct == doctest::Approx(100.0));
  CHECK(r.device_network.count == r.layers.at(ReuseLayer::Device).count + r.layers.at(ReuseLayer::Network).count);
  CHECK(r.reused.count == r.tasks.size() - r.layers.at(ReuseLayer::None).count);
  std::uint64_t executed = 0;
  for (const auto& s : r.servers) {
    executed += s.executed;
    CHECK(s.busy_fraction >= 0.0);
    CHECK(s.busy_us > 0);
  }
  CHECK(executed == r.layers.at(ReuseLayer::None).count + r.layers.at(ReuseLayer::PartialServer).count);
}

TEST_CASE("exact accuracy never exceeds label accuracy") {
  auto c = generated_config(9, 400);
  const auto label = run(c);
  c.accuracy = AccuracyMode::Exact;
  const auto exact = run(c);
  REQUIRE(label.accuracy_pct);
  REQUIRE(exact.accuracy_pct);
  CHECK(*exact.accuracy_pct <= *label.accuracy_pct);
  CHECK(exact.reuse_pct == label.reuse_pct);
}

TEST_CASE("empty trace gives an empty report") {
  auto c = line_config(kNone, kNone, kSome);
  const auto r = run(c);
  CHECK(r.tasks.empty());
  CHECK(r.mean_completion_ms == 0.0);
  CHECK(r.reuse_pct == 0.0);
  CHECK_FALSE(r.accuracy_pct);
  CHECK_FALSE(r.speedup);
  std::ostringstream os;
  write_per_task_csv(os, r);
  CHECK(os.str() == "task_id,device_id,service_id,server_id,reuse_layer,created_us,completed_us,completion_us,"
                    "similarity,accurate\n");
}

TEST_CASE("threshold sweep edge cases") {
  Rng rng(84);
  SUBCASE("threshold 1.0 on orthogonal inputs reuses nothing") {
    auto c = line_config(kSome, kSome, kSome);
    for (int i = 0; i < 64; ++i) {
      std::vector<double> e(64, 0.0);
      e[i] = 1.0;
      c.vectors["e" + std::to_string(i)] = FeatureVector(e);
      add_task(c, i * 200'000, "e" + std::to_string(i));
    }
    const auto rows = sweep_thresholds(c, {1.0});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].reuse_pct == 0.0);
  }
  SUBCASE("threshold 0 with every input repeated reuses at least half") {
    auto c = line_config(kNone, kNone, kSome);
    for (int i = 0; i < 50; ++i) c.vectors["v" + std::to_string(i)] = FeatureVector(oracle::random_vector(rng, 64));
    for (int i = 0; i < 100; ++i) add_task(c, i * 200'000, "v" + std::to_string(i % 50));
    const auto rows = sweep_thresholds(c, {0.0});
    CHECK(rows[0].reuse_pct >= 50.0);
  }
  SUBCASE("unsorted thresholds are rejected") {
    auto c = line_config(kNone, kNone, kSome);
    CHECK_THROWS_AS(sweep_thresholds(c, {0.9, 0.8}), Error);
  }
  SUBCASE("parallel sweep equals sequential") {
    const auto c = generated_config(10, 200);
    const auto a = sweep_thresholds(c, {0.6, 0.7, 0.8, 0.9}, 1);
    const auto b = sweep_thresholds(c, {0.6, 0.7, 0.8, 0.9}, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].reuse_pct == b[i].reuse_pct);
      CHECK(a[i].accuracy_pct == b[i].accuracy_pct);
      CHECK(a[i].mean_completion_ms == b[i].mean_completion_ms);
    }
    // more permissive thresholds never reuse less on this fixed trace
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i].reuse_pct <= a[i - 1].reuse_pct + 1.0);
  }
}

TEST_CASE("controller evens out a skewed hash distribution") {
  ExperimentConfig c;
  c.seed = 12;
  c.dim = 32;
  c.lsh.seed = 99;
  c.services = default_service_specs();
  c.topology.nodes = {{"d0", NodeKind::Device, {0, 0}, true},
                      {"r0", NodeKind::Router, {0, 0}, true},
                      {"sa", NodeKind::Server, {0, 0}, true},
                      {"sb", NodeKind::Server, {0, 0}, true}};
  c.topology.links = {{"d0", "r0", 1000, std::nullopt}, {"r0", "sa", 1000, std::nullopt},
                      {"r0", "sb", 1000, std::nullopt}};
  c.topology.controller_window_us = 1'000'000;
  c.topology.step_fraction = 0.25;

  // every input hashes into the lower half, which starts out owned by sa
  const LshFamily fam(99, 32);
  Rng rng(85);
  const int per_window = 100;
  const int windows = 40;
  int made = 0;
  while (made < per_window * windows) {
    FeatureVector v(oracle::random_vector(rng, 32));
    if (forwarding_hash(fam, v).value >= 32768) continue;
    const std::string id = "v" + std::to_string(made);
    c.vectors[id] = std::move(v);
    add_task(c, static_cast<SimTime>(made) * (1'000'000 / per_window), id);
    ++made;
  }
  const auto r = run(c);

  std::vector<std::array<int, 2>> load(windows, {0, 0});
  for (const auto& t : r.tasks) load[t.created_us / 1'000'000][t.server_id == "sa" ? 0 : 1]++;
  std::vector<double> ratio;
  for (const auto& w : load) ratio.push_back(static_cast<double>(std::max(w[0], w[1])) / std::max(1, std::min(w[0], w[1])));
  std::ostringstream traj;
  for (double x : ratio) traj << x << ' ';
  MESSAGE("max/min per-window load: " << traj.str());

  CHECK(ratio.front() > 2.0);
  // non-increasing (within one task of noise) until it first drops under 2x
  std::size_t settled = ratio.size();
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    if (ratio[i] <= 2.0) {
      settled = i;
      break;
    }
    if (i) CHECK(ratio[i] <= ratio[i - 1] * 1.05 + 0.05);
  }
  CHECK(settled < ratio.size() / 2);

  REQUIRE(r.table_history.size() >= 2);
  for (std::size_t i = 1; i < r.table_history.size(); ++i) {
    CHECK(r.table_history[i].version >= r.table_history[i - 1].version);
    ForwardingTable(r.table_history[i].ranges, r.table_history[i].version).validate();
  }
  CHECK(r.table_history.back().ranges[0].hi < 32767);
}
