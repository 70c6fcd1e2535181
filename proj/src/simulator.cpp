#include "edgereuse/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <queue>
#include <thread>

#include "edgereuse/rng.hpp"

namespace edgereuse {

std::string_view to_string(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::TaskArrival: return "TaskArrival";
    case EventKind::LinkDelivery: return "LinkDelivery";
    case EventKind::ExecutionDone: return "ExecutionDone";
    case EventKind::LookupDone: return "LookupDone";
    case EventKind::ControlWindow: return "ControlWindow";
  }
  return "?";
}

namespace {

constexpr std::size_t kNoTask = std::numeric_limits<std::size_t>::max();
constexpr std::uint64_t kLinkTag = 0x4c494e4b;  // "LINK"
constexpr std::uint64_t kLshTag = 0x4c5348;

struct Event {
  SimTime time = 0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::TaskArrival;
  std::size_t task = kNoTask;
  std::string node;
  bool response = false;

  bool operator>(const Event& o) const noexcept { return time != o.time ? time > o.time : seq > o.seq; }
};

struct Flight {
  TaskEnvelope env;
  std::vector<std::string> path;  // nodes visited on the request path
  std::string server;
  std::optional<TaskResult> result;
  ServiceOutput payload;
  std::optional<double> similarity;
  std::optional<ReuseEntry> pending;
  std::string hit_node;
  SimTime last_row = 0;
  int hashes = 0;
  bool done = false;
};

struct ServerTrack {
  std::vector<std::pair<SimTime, SimTime>> busy;         // execution intervals
  std::vector<std::pair<SimTime, std::size_t>> stored;   // (time, bytes) after each change
  std::uint64_t window_executed = 0;
  std::uint64_t window_reused = 0;
};

class Simulation {
 public:
  Simulation(const ExperimentConfig& config, std::vector<EventLogRow>* log)
      : config_(config), log_(log), catalog_(config.services, config.dim) {
    family_ = std::make_shared<const LshFamily>(config.lsh.seed.value_or(derive_seed(config.seed, kLshTag)),
                                                config.dim, config.lsh.bits, config.lsh.tables);
    build_topology();
  }

  MetricsReport run();

 private:
  void build_topology();
  void compute_routes();
  SimTime delay(const std::string& a, const std::string& b) const;

  void schedule(SimTime t, EventKind kind, std::size_t task, std::string node, bool response = false);
  void log_row(const Event& ev, const std::string& action);

  void on_arrival(const Event& ev);
  void on_lookup_done(const Event& ev);
  void on_delivery(const Event& ev);
  void on_execution_done(const Event& ev);
  void on_control_window(const Event& ev);

  void respond_from(std::size_t task, SimTime now);
  void complete(std::size_t task, SimTime now);
  NodeKind kind_of(const std::string& id) const { return kinds_.at(id); }
  void note_stored(const std::string& server, SimTime now);

  MetricsReport summarize();

  const ExperimentConfig& config_;
  std::vector<EventLogRow>* log_;
  ServiceCatalog catalog_;
  std::shared_ptr<const LshFamily> family_;
  std::optional<Controller> controller_;

  std::map<std::string, NodeKind> kinds_;
  std::map<std::string, DeviceNode> devices_;
  std::map<std::string, RouterNode> routers_;
  std::map<std::string, ServerNode> servers_;
  std::map<std::pair<std::string, std::string>, SimTime> delays_;
  std::map<std::string, std::string> device_router_;
  std::map<std::string, std::map<std::string, std::string>> next_hop_;  // router -> server -> neighbour

  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  std::uint64_t seq_ = 0;
  std::size_t task_events_pending_ = 0;
  std::vector<Flight> flights_;
  std::vector<TaskRecord> records_;
  std::map<std::string, ServerTrack> tracks_;
  std::vector<TableChange> table_history_;
  SimTime last_time_ = 0;
};

void Simulation::build_topology() {
  const auto& topo = config_.topology;
  auto policy = make_eviction_policy(config_.eviction);
  std::vector<std::string> server_ids;
  for (const auto& n : topo.nodes) {
    kinds_[n.id] = n.kind;
    StoreSettings settings{n.store, policy, config_.lsh.probe_radius};
    switch (n.kind) {
      case NodeKind::Device:
        devices_.emplace(n.id, DeviceNode(n.id, n.can_hash, make_store(settings, family_)));
        break;
      case NodeKind::Router:
        routers_.emplace(n.id, RouterNode(n.id, make_store(settings, family_)));
        break;
      case NodeKind::Server:
        servers_.emplace(n.id, ServerNode(n.id, make_store(settings, family_)));
        tracks_[n.id];
        server_ids.push_back(n.id);
        break;
    }
  }
  if (server_ids.empty()) throw Error(Errc::Config, "topology has no servers");

  Rng link_rng(derive_seed(config_.seed, kLinkTag));
  for (const auto& l : topo.links) {
    SimTime d = l.delay_us;
    if (l.delay_range_us) d = link_rng.between(l.delay_range_us->first, l.delay_range_us->second);
    if (d <= 0) throw Error(Errc::Config, "link " + l.a + "-" + l.b + " has a non-positive delay");
    delays_[{l.a, l.b}] = d;
    delays_[{l.b, l.a}] = d;
  }
  for (const auto& [id, dev] : devices_) {
    for (const auto& l : topo.links) {
      const std::string* peer = l.a == id ? &l.b : (l.b == id ? &l.a : nullptr);
      if (peer && kind_of(*peer) == NodeKind::Router) {
        device_router_[id] = *peer;
        break;
      }
    }
    if (!device_router_.count(id)) throw Error(Errc::Config, "device '" + id + "' has no link to a router");
  }
  compute_routes();
  controller_.emplace(partition_hash_space(server_ids), topo.controller_window_us, topo.step_fraction);
  table_history_.push_back({0, controller_->table().version(), controller_->table().ranges()});
}

// Shortest-delay next hops from every router to every server, routing only
// through routers. Ties go to the smaller neighbour id.
void Simulation::compute_routes() {
  std::map<std::string, std::vector<std::pair<std::string, SimTime>>> adj;
  for (const auto& [ends, d] : delays_) {
    const auto ka = kind_of(ends.first);
    const auto kb = kind_of(ends.second);
    if (ka == NodeKind::Router && kb != NodeKind::Device) adj[ends.first].push_back({ends.second, d});
  }
  for (auto& [id, list] : adj) std::sort(list.begin(), list.end());

  for (const auto& [server, s] : servers_) {
    // Dijkstra backwards from the server over router links.
    std::map<std::string, SimTime> dist{{server, 0}};
    using Item = std::pair<SimTime, std::string>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    pq.push({0, server});
    while (!pq.empty()) {
      auto [d, node] = pq.top();
      pq.pop();
      if (d > dist[node]) continue;
      for (const auto& [router, r] : routers_) {
        auto it = delays_.find({router, node});
        if (it == delays_.end()) continue;
        const SimTime nd = d + it->second;
        auto cur = dist.find(router);
        if (cur == dist.end() || nd < cur->second) {
          dist[router] = nd;
          pq.push({nd, router});
        }
      }
    }
    for (const auto& [router, r] : routers_) {
      if (!dist.count(router)) {
        throw Error(Errc::Config, "router '" + router + "' cannot reach server '" + server + "'");
      }
      std::string best;
      SimTime best_d = std::numeric_limits<SimTime>::max();
      for (const auto& [peer, d] : adj[router]) {
        auto it = dist.find(peer);
        if (it == dist.end()) continue;
        if (kind_of(peer) == NodeKind::Server && peer != server) continue;
        const SimTime total = d + it->second;
        if (total < best_d) {
          best_d = total;
          best = peer;
        }
      }
      next_hop_[router][server] = best;
    }
  }
}

SimTime Simulation::delay(const std::string& a, const std::string& b) const {
  auto it = delays_.find({a, b});
  if (it == delays_.end()) throw Error(Errc::Config, "no link between '" + a + "' and '" + b + "'");
  return it->second;
}

void Simulation::schedule(SimTime t, EventKind kind, std::size_t task, std::string node, bool response) {
  queue_.push(Event{t, seq_++, kind, task, std::move(node), response});
  if (task != kNoTask) ++task_events_pending_;
}

void Simulation::log_row(const Event& ev, const std::string& action) {
  if (!log_) return;
  EventLogRow row;
  row.seq = ev.seq;
  row.time_us = ev.time;
  row.kind = ev.kind;
  row.node = ev.node;
  row.action = action;
  if (ev.task != kNoTask) {
    Flight& f = flights_[ev.task];
    row.task_id = f.env.task_id;
    row.cost_us = ev.time - f.last_row;
    f.last_row = ev.time;
  }
  log_->push_back(std::move(row));
}

MetricsReport Simulation::run() {
  const auto& trace = config_.trace;
  flights_.resize(trace.size());
  records_.resize(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& row = trace[i];
    Flight& f = flights_[i];
    f.env.task_id = i;
    f.env.device_id = row.device_id;
    f.env.service_id = row.service_id;
    f.env.input = config_.vectors.at(row.vector_id);
    f.env.threshold = threshold_for(config_, row);
    f.env.created_at = row.time_us;
    f.last_row = row.time_us;
    schedule(row.time_us, EventKind::TaskArrival, i, row.device_id);
  }
  if (controller_->enabled() && !trace.empty()) {
    schedule(controller_->window_us(), EventKind::ControlWindow, kNoTask, "controller");
  }

  while (!queue_.empty()) {
    Event ev = queue_.top();
    queue_.pop();
    if (ev.time < last_time_) throw std::logic_error("simulation clock moved backwards");
    last_time_ = ev.time;
    if (ev.task != kNoTask) --task_events_pending_;
    switch (ev.kind) {
      case EventKind::TaskArrival: on_arrival(ev); break;
      case EventKind::LookupDone: on_lookup_done(ev); break;
      case EventKind::LinkDelivery: on_delivery(ev); break;
      case EventKind::ExecutionDone: on_execution_done(ev); break;
      case EventKind::ControlWindow: on_control_window(ev); break;
    }
  }
  for (std::size_t i = 0; i < flights_.size(); ++i) {
    if (!flights_[i].done) throw std::logic_error("task " + std::to_string(i) + " never completed");
  }
  return summarize();
}

void Simulation::on_arrival(const Event& ev) {
  Flight& f = flights_[ev.task];
  f.path.push_back(ev.node);
  log_row(ev, "arrive");
  DeviceNode& dev = devices_.at(ev.node);
  const auto out = dev.offload(f.env, ev.time, *family_, config_.cost);
  f.hashes += out.hashed;
  f.similarity = out.similarity;
  if (out.local) {
    f.result = out.local;
    f.payload = out.payload;
    f.hit_node = ev.node;
  }
  schedule(ev.time + out.cost_us, EventKind::LookupDone, ev.task, ev.node);
}

void Simulation::on_lookup_done(const Event& ev) {
  Flight& f = flights_[ev.task];
  const bool hit_here = f.result && f.hit_node == ev.node;
  switch (kind_of(ev.node)) {
    case NodeKind::Device:
      if (hit_here) {
        log_row(ev, "device_hit");
        complete(ev.task, ev.time);
      } else {
        log_row(ev, "device_forward");
        const auto& router = device_router_.at(ev.node);
        schedule(ev.time + delay(ev.node, router), EventKind::LinkDelivery, ev.task, router);
      }
      break;
    case NodeKind::Router:
      if (hit_here) {
        log_row(ev, "router_hit");
        respond_from(ev.task, ev.time);
      } else {
        log_row(ev, "router_forward");
        const auto& next = next_hop_.at(ev.node).at(f.server);
        schedule(ev.time + delay(ev.node, next), EventKind::LinkDelivery, ev.task, next);
      }
      break;
    case NodeKind::Server:
      log_row(ev, "server_hit");
      respond_from(ev.task, ev.time);
      break;
  }
}

void Simulation::on_delivery(const Event& ev) {
  Flight& f = flights_[ev.task];
  if (ev.response) {
    // Walking back along the request path; path.back() is the sender.
    f.path.pop_back();
    if (kind_of(ev.node) == NodeKind::Device) {
      devices_.at(ev.node).cache_response(f.env, f.payload, ev.time);
      log_row(ev, "deliver");
      complete(ev.task, ev.time);
      return;
    }
    routers_.at(ev.node).cache_response(f.env, f.payload, ev.time);
    log_row(ev, "relay_response");
    respond_from(ev.task, ev.time);
    return;
  }

  f.path.push_back(ev.node);
  switch (kind_of(ev.node)) {
    case NodeKind::Router: {
      const auto out = routers_.at(ev.node).forward(f.env, ev.time, *family_, controller_->table(), config_.cost);
      f.hashes += out.hashed;
      log_row(ev, out.hashed ? "router_hash" : "router_receive");
      if (out.similarity) f.similarity = out.similarity;
      if (out.local) {
        f.result = out.local;
        f.payload = out.payload;
        f.hit_node = ev.node;
      } else if (f.server.empty()) {
        f.server = out.destination;
      }
      schedule(ev.time + out.cost_us, EventKind::LookupDone, ev.task, ev.node);
      break;
    }
    case NodeKind::Server: {
      log_row(ev, "server_receive");
      ServerNode& server = servers_.at(ev.node);
      auto out = server.handle(f.env, ev.time, catalog_, config_.cost);
      if (out.similarity) f.similarity = out.similarity;
      f.result = out.result;
      f.payload = std::move(out.payload);
      f.hit_node = ev.node;
      f.pending = std::move(out.pending);
      auto& track = tracks_.at(ev.node);
      if (out.stages_executed > 0) {
        ++track.window_executed;
        const SimTime end = ev.time + out.cost_us;
        track.busy.push_back({end - out.exec_us, end});
        if (out.stages_reused > 0) ++track.window_reused;
        schedule(end, EventKind::ExecutionDone, ev.task, ev.node);
      } else {
        ++track.window_reused;
        schedule(ev.time + out.cost_us, EventKind::LookupDone, ev.task, ev.node);
      }
      break;
    }
    case NodeKind::Device:
      throw std::logic_error("request delivered to a device");
  }
}

void Simulation::on_execution_done(const Event& ev) {
  Flight& f = flights_[ev.task];
  log_row(ev, "execute");
  if (f.pending) {
    servers_.at(ev.node).commit(std::move(*f.pending), ev.time);
    f.pending.reset();
    note_stored(ev.node, ev.time);
  }
  respond_from(ev.task, ev.time);
}

void Simulation::on_control_window(const Event& ev) {
  LoadReport report;
  for (auto& [id, track] : tracks_) {
    const ServerNode& s = servers_.at(id);
    report.servers[id] = {track.window_executed, track.window_reused, s.store() ? s.store()->bytes_used() : 0};
    track.window_executed = 0;
    track.window_reused = 0;
  }
  const bool changed = controller_->on_window(report);
  log_row(ev, changed ? "rebalance" : "window");
  if (changed) {
    table_history_.push_back({ev.time, controller_->table().version(), controller_->table().ranges()});
  }
  if (task_events_pending_ > 0) {
    schedule(ev.time + controller_->window_us(), EventKind::ControlWindow, kNoTask, "controller");
  }
}

void Simulation::respond_from(std::size_t task, SimTime now) {
  Flight& f = flights_[task];
  if (f.path.size() < 2) {
    complete(task, now);
    return;
  }
  const auto& from = f.path[f.path.size() - 1];
  const auto& to = f.path[f.path.size() - 2];
  schedule(now + delay(from, to), EventKind::LinkDelivery, task, to, true);
}

void Simulation::complete(std::size_t task, SimTime now) {
  Flight& f = flights_[task];
  if (f.done) throw std::logic_error("task completed twice");
  f.done = true;
  if (f.hashes > 1) throw std::logic_error("forwarding hash computed more than once");
  TaskRecord& r = records_[task];
  r.task_id = f.env.task_id;
  r.device_id = f.env.device_id;
  r.service_id = f.env.service_id;
  r.server_id = f.server;
  if (f.result && kind_of(f.hit_node) != NodeKind::Server) r.server_id.clear();
  r.reuse_layer = f.result ? f.result->reuse_layer : ReuseLayer::None;
  r.created_us = f.env.created_at;
  r.completed_us = now;
  r.similarity = f.similarity;
  r.hash_computations = f.hashes;
  if (r.reuse_layer != ReuseLayer::None) {
    const TaskResult truth = catalog_.oracle(f.env.service_id, f.env.input, f.env.task_id);
    TaskResult got = *f.result;
    got.service_id = f.env.service_id;
    r.accurate = config_.accuracy == AccuracyMode::Label ? answers_match(got, truth) : results_equal(got, truth);
  }
}

void Simulation::note_stored(const std::string& server, SimTime now) {
  const ServerNode& s = servers_.at(server);
  tracks_.at(server).stored.push_back({now, s.store() ? s.store()->bytes_used() : 0});
}

double mean_ms(SimTime total_us, std::size_t n) { return n ? static_cast<double>(total_us) / 1000.0 / n : 0.0; }

MetricsReport Simulation::summarize() {
  MetricsReport rep;
  rep.seed = config_.seed;
  rep.tasks = records_;
  const std::size_t n = records_.size();

  std::map<ReuseLayer, std::pair<std::size_t, SimTime>> per_layer;
  for (ReuseLayer l : {ReuseLayer::None, ReuseLayer::Device, ReuseLayer::Network, ReuseLayer::Server,
                       ReuseLayer::PartialServer}) {
    per_layer[l] = {0, 0};
  }
  SimTime total = 0;
  std::size_t accurate = 0;
  std::size_t judged = 0;
  SimTime first_arrival = std::numeric_limits<SimTime>::max();
  SimTime last_completion = 0;
  for (const auto& r : records_) {
    auto& [count, sum] = per_layer[r.reuse_layer];
    ++count;
    sum += r.completion_us();
    total += r.completion_us();
    if (r.accurate) {
      ++judged;
      accurate += *r.accurate;
    }
    first_arrival = std::min(first_arrival, r.created_us);
    last_completion = std::max(last_completion, r.completed_us);
  }
  auto pct = [n](std::size_t k) { return n ? 100.0 * static_cast<double>(k) / static_cast<double>(n) : 0.0; };
  rep.mean_completion_ms = mean_ms(total, n);
  for (const auto& [layer, cs] : per_layer) {
    rep.layers[layer] = {cs.first, mean_ms(cs.second, cs.first), pct(cs.first)};
  }
  auto combine = [&](std::initializer_list<ReuseLayer> ls) {
    std::size_t c = 0;
    SimTime s = 0;
    for (auto l : ls) {
      c += per_layer[l].first;
      s += per_layer[l].second;
    }
    return LayerStats{c, mean_ms(s, c), pct(c)};
  };
  rep.device_network = combine({ReuseLayer::Device, ReuseLayer::Network});
  rep.reused = combine({ReuseLayer::Device, ReuseLayer::Network, ReuseLayer::Server, ReuseLayer::PartialServer});
  rep.reuse_pct = rep.reused.pct;
  rep.no_reuse_pct = rep.layers[ReuseLayer::None].pct;
  if (judged) rep.accuracy_pct = 100.0 * static_cast<double>(accurate) / static_cast<double>(judged);
  if (rep.reused.count && rep.layers[ReuseLayer::None].count && rep.reused.mean_completion_ms > 0.0) {
    rep.speedup = rep.layers[ReuseLayer::None].mean_completion_ms / rep.reused.mean_completion_ms;
  }

  rep.span_us = n ? last_completion - first_arrival : 0;
  const SimTime window = config_.metrics_window_us;
  const SimTime horizon = n ? last_completion : 0;
  const std::size_t windows = horizon > 0 ? static_cast<std::size_t>((horizon + window - 1) / window) : 0;
  double busy_sum = 0.0;
  for (const auto& [id, server] : servers_) {
    const auto& track = tracks_.at(id);
    ServerMetrics m;
    m.id = id;
    m.executed = server.executed_count();
    m.reused = server.reused_count();
    for (const auto& [b, e] : track.busy) m.busy_us += e - b;
    m.busy_fraction = rep.span_us > 0 ? static_cast<double>(m.busy_us) / static_cast<double>(rep.span_us) : 0.0;
    m.stored_bytes = server.store() ? server.store()->bytes_used() : 0;
    for (const auto& [t, bytes] : track.stored) m.peak_stored_bytes = std::max(m.peak_stored_bytes, bytes);
    m.windows.resize(windows);
    for (std::size_t w = 0; w < windows; ++w) m.windows[w].start_us = static_cast<SimTime>(w) * window;
    for (const auto& [b, e] : track.busy) {
      for (auto w = static_cast<std::size_t>(b / window); w < windows && static_cast<SimTime>(w) * window < e; ++w) {
        const SimTime lo = std::max(b, static_cast<SimTime>(w) * window);
        const SimTime hi = std::min(e, static_cast<SimTime>(w + 1) * window);
        if (hi > lo) m.windows[w].busy_fraction += static_cast<double>(hi - lo) / static_cast<double>(window);
      }
    }
    std::size_t k = 0;
    std::size_t bytes = 0;
    for (std::size_t w = 0; w < windows; ++w) {
      const SimTime end = static_cast<SimTime>(w + 1) * window;
      while (k < track.stored.size() && track.stored[k].first < end) bytes = track.stored[k++].second;
      m.windows[w].stored_bytes = bytes;
    }
    busy_sum += m.busy_fraction;
    rep.servers.push_back(std::move(m));
  }
  rep.mean_busy_fraction = rep.servers.empty() ? 0.0 : busy_sum / static_cast<double>(rep.servers.size());
  rep.table_history = table_history_;
  return rep;
}

}  // namespace

MetricsReport run(const ExperimentConfig& config, std::vector<EventLogRow>* log) {
  Simulation sim(config, log);
  return sim.run();
}

std::vector<SweepRow> sweep_thresholds(const ExperimentConfig& config, const std::vector<double>& thresholds,
                                       unsigned jobs) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw Error(Errc::InvalidArgument, "sweep thresholds must be sorted ascending");
  }
  for (double t : thresholds) SimilarityThreshold{t};
  std::vector<SweepRow> rows(thresholds.size());
  auto one = [&](std::size_t i) {
    ExperimentConfig c = config;
    c.threshold_override = thresholds[i];
    const auto rep = run(c);
    rows[i] = {thresholds[i], rep.reuse_pct, rep.accuracy_pct, rep.mean_completion_ms, rep.mean_busy_fraction};
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(thresholds.size())));
  if (jobs == 1) {
    for (std::size_t i = 0; i < thresholds.size(); ++i) one(i);
    return rows;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(jobs);
  for (unsigned w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < thresholds.size(); i += jobs) one(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

namespace {

std::string opt_double(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

nlohmann::json layer_json(const LayerStats& s) {
  return {{"count", s.count}, {"mean_completion_ms", s.mean_completion_ms}, {"pct", s.pct}};
}

}  // namespace

void write_per_task_csv(std::ostream& out, const MetricsReport& report) {
  out << "task_id,device_id,service_id,server_id,reuse_layer,created_us,completed_us,completion_us,similarity,"
         "accurate\n";
  for (const auto& r : report.tasks) {
    out << r.task_id << ',' << r.device_id << ',' << r.service_id << ',' << r.server_id << ','
        << to_string(r.reuse_layer) << ',' << r.created_us << ',' << r.completed_us << ',' << r.completion_us() << ','
        << opt_double(r.similarity) << ',' << (r.accurate ? (*r.accurate ? "1" : "0") : "na") << '\n';
  }
}

void write_event_log_csv(std::ostream& out, const std::vector<EventLogRow>& log) {
  out << "seq,time_us,kind,task_id,node,action,cost_us\n";
  for (const auto& r : log) {
    out << r.seq << ',' << r.time_us << ',' << to_string(r.kind) << ',';
    if (r.task_id) out << *r.task_id;
    out << ',' << r.node << ',' << r.action << ',' << r.cost_us << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "threshold,reuse_pct,accuracy_pct\n";
  for (const auto& r : rows) {
    out << format_double(r.threshold) << ',' << format_double(r.reuse_pct) << ',' << opt_double(r.accuracy_pct)
        << '\n';
  }
}

nlohmann::json metrics_json(const MetricsReport& rep) {
  using nlohmann::json;
  json layers = json::object();
  for (const auto& [l, s] : rep.layers) layers[std::string(to_string(l))] = layer_json(s);
  json servers = json::array();
  for (const auto& s : rep.servers) {
    json windows = json::array();
    for (const auto& w : s.windows) {
      windows.push_back({{"start_us", w.start_us}, {"busy_fraction", w.busy_fraction}, {"stored_bytes", w.stored_bytes}});
    }
    servers.push_back({{"id", s.id},
                       {"executed", s.executed},
                       {"reused", s.reused},
                       {"busy_us", s.busy_us},
                       {"busy_fraction", s.busy_fraction},
                       {"stored_bytes", s.stored_bytes},
                       {"peak_stored_bytes", s.peak_stored_bytes},
                       {"windows", windows}});
  }
  json tables = json::array();
  for (const auto& t : rep.table_history) {
    json ranges = json::array();
    for (const auto& r : t.ranges) ranges.push_back({{"lo", r.lo}, {"hi", r.hi}, {"server", r.server_id}});
    tables.push_back({{"time_us", t.time_us}, {"version", t.version}, {"ranges", ranges}});
  }
  return {{"seed", rep.seed},
          {"tasks", rep.tasks.size()},
          {"mean_completion_ms", rep.mean_completion_ms},
          {"layers", layers},
          {"device_network", layer_json(rep.device_network)},
          {"reused", layer_json(rep.reused)},
          {"reuse_pct", rep.reuse_pct},
          {"no_reuse_pct", rep.no_reuse_pct},
          {"accuracy_pct", rep.accuracy_pct ? json(*rep.accuracy_pct) : json(nullptr)},
          {"speedup", rep.speedup ? json(*rep.speedup) : json(nullptr)},
          {"span_us", rep.span_us},
          {"mean_busy_fraction", rep.mean_busy_fraction},
          {"servers", servers},
          {"forwarding_tables", tables}};
}

}  // namespace edgereuse
