#include "edgereuse/config.hpp"

#include <fstream>
#include <set>

namespace edgereuse {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  throw Error(Errc::Config, path + ": " + what);
}

const json* field(const json& j, const std::string& key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

template <typename T>
T get_as(const json& v, const std::string& path) {
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    config_error(path, std::string("wrong type (") + e.what() + ")");
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& path) {
  const json* v = field(j, key);
  return v ? get_as<T>(*v, path + "." + key) : fallback;
}

template <typename T>
T require(const json& j, const std::string& key, const std::string& path) {
  const json* v = field(j, key);
  if (!v) config_error(path + "." + key, "required field is missing");
  return get_as<T>(*v, path + "." + key);
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) config_error(path, "expected an object");
}

json read_json_file(const std::filesystem::path& file, const std::string& path) {
  std::ifstream in(file);
  if (!in) config_error(path, "cannot open '" + file.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    config_error(path, "'" + file.string() + "' is not valid JSON (" + e.what() + ")");
  }
}

std::string kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Device: return "device";
    case NodeKind::Router: return "router";
    case NodeKind::Server: return "server";
  }
  return "?";
}

StoreLimits parse_store(const json& j, const std::string& path) {
  require_object(j, path);
  StoreLimits s;
  s.max_entries = get_or<std::size_t>(j, "max_entries", 0, path);
  s.max_bytes = get_or<std::size_t>(j, "max_bytes", 0, path);
  return s;
}

double fraction(const json& v, const std::string& path) {
  const double x = get_as<double>(v, path);
  if (!(x >= 0.0 && x <= 1.0)) config_error(path, "threshold must be a fraction in [0,1]");
  return x;
}

}  // namespace

TopologyConfig default_topology() {
  TopologyConfig t;
  const StoreLimits device_store{64, 256 * 1024};
  const StoreLimits router_store{256, 1024 * 1024};
  const StoreLimits server_store{200'000, std::size_t{1} << 30};
  for (int i = 0; i < 2; ++i) {
    t.nodes.push_back({"device-" + std::to_string(i), NodeKind::Device, device_store, true});
  }
  for (int i = 0; i < 2; ++i) t.nodes.push_back({"router-" + std::to_string(i), NodeKind::Router, router_store, true});
  for (int i = 0; i < 2; ++i) t.nodes.push_back({"server-" + std::to_string(i), NodeKind::Server, server_store, true});
  const std::pair<SimTime, SimTime> hop{3000, 4000};
  for (int i = 0; i < 2; ++i) {
    t.links.push_back({"device-" + std::to_string(i), "router-" + std::to_string(i), 0, hop});
    for (int s = 0; s < 2; ++s) {
      t.links.push_back({"router-" + std::to_string(i), "server-" + std::to_string(s), 0, hop});
    }
  }
  return t;
}

TopologyConfig parse_topology(const json& j, const std::string& where) {
  require_object(j, where);
  TopologyConfig t;
  const json* nodes = field(j, "nodes");
  if (!nodes || !nodes->is_array() || nodes->empty()) config_error(where + ".nodes", "expected a non-empty array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < nodes->size(); ++i) {
    const std::string path = where + ".nodes[" + std::to_string(i) + "]";
    const json& n = (*nodes)[i];
    require_object(n, path);
    NodeConfig node;
    node.id = require<std::string>(n, "id", path);
    if (node.id.empty()) config_error(path + ".id", "must not be empty");
    if (!ids.insert(node.id).second) config_error(path + ".id", "duplicate node id '" + node.id + "'");
    const auto kind = require<std::string>(n, "kind", path);
    if (kind == "device") node.kind = NodeKind::Device;
    else if (kind == "router") node.kind = NodeKind::Router;
    else if (kind == "server") node.kind = NodeKind::Server;
    else config_error(path + ".kind", "unknown node kind '" + kind + "'");
    node.can_hash = get_or<bool>(n, "can_hash", true, path);
    if (const json* s = field(n, "store")) node.store = parse_store(*s, path + ".store");
    t.nodes.push_back(std::move(node));
  }
  const json* links = field(j, "links");
  if (!links || !links->is_array()) config_error(where + ".links", "expected an array");
  for (std::size_t i = 0; i < links->size(); ++i) {
    const std::string path = where + ".links[" + std::to_string(i) + "]";
    const json& l = (*links)[i];
    require_object(l, path);
    LinkConfig link;
    link.a = require<std::string>(l, "a", path);
    link.b = require<std::string>(l, "b", path);
    if (!ids.count(link.a)) config_error(path + ".a", "unknown node '" + link.a + "'");
    if (!ids.count(link.b)) config_error(path + ".b", "unknown node '" + link.b + "'");
    if (const json* r = field(l, "delay_us_range")) {
      const auto range = get_as<std::vector<SimTime>>(*r, path + ".delay_us_range");
      if (range.size() != 2 || range[0] <= 0 || range[1] < range[0]) {
        config_error(path + ".delay_us_range", "expected [lo, hi] with 0 < lo <= hi");
      }
      link.delay_range_us = std::make_pair(range[0], range[1]);
    } else {
      link.delay_us = require<SimTime>(l, "delay_us", path);
      if (link.delay_us <= 0) config_error(path + ".delay_us", "link delay must be positive");
    }
    t.links.push_back(std::move(link));
  }
  if (const json* c = field(j, "controller")) {
    require_object(*c, where + ".controller");
    t.controller_window_us = get_or<SimTime>(*c, "window_us", 0, where + ".controller");
    t.step_fraction = get_or<double>(*c, "step_fraction", 0.25, where + ".controller");
    if (t.controller_window_us < 0) config_error(where + ".controller.window_us", "must be >= 0");
    if (!(t.step_fraction > 0.0 && t.step_fraction <= 0.5)) {
      config_error(where + ".controller.step_fraction", "must be in (0, 0.5]");
    }
  }
  return t;
}

json topology_to_json(const TopologyConfig& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    json node{{"id", n.id}, {"kind", kind_name(n.kind)}, {"can_hash", n.can_hash}};
    if (n.store.max_entries || n.store.max_bytes) {
      node["store"] = {{"max_entries", n.store.max_entries}, {"max_bytes", n.store.max_bytes}};
    }
    nodes.push_back(std::move(node));
  }
  json links = json::array();
  for (const auto& l : t.links) {
    json link{{"a", l.a}, {"b", l.b}};
    if (l.delay_range_us) link["delay_us_range"] = {l.delay_range_us->first, l.delay_range_us->second};
    else link["delay_us"] = l.delay_us;
    links.push_back(std::move(link));
  }
  return {{"nodes", nodes},
          {"links", links},
          {"controller", {{"window_us", t.controller_window_us}, {"step_fraction", t.step_fraction}}}};
}

std::vector<ServiceSpec> parse_services(const json& j, const std::string& where) {
  const json* list = &j;
  std::string base = where;
  if (j.is_object()) {
    list = field(j, "services");
    base = where + ".services";
    if (!list) config_error(base, "required field is missing");
  }
  if (!list->is_array() || list->empty()) config_error(base, "expected a non-empty array of services");
  std::vector<ServiceSpec> out;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const std::string path = base + "[" + std::to_string(i) + "]";
    const json& s = (*list)[i];
    require_object(s, path);
    ServiceSpec spec;
    spec.service_id = require<std::string>(s, "service_id", path);
    spec.label_classes = get_or<int>(s, "label_classes", 10, path);
    if (spec.label_classes < 2) config_error(path + ".label_classes", "must be >= 2");
    spec.label_seed = get_or<std::uint64_t>(s, "label_seed", string_hash(spec.service_id, 0), path);
    spec.label_biases = get_or<std::vector<double>>(s, "label_biases", {}, path);
    if (!spec.label_biases.empty() && spec.label_biases.size() != static_cast<std::size_t>(spec.label_classes)) {
      config_error(path + ".label_biases", "needs one bias per label class");
    }
    const json* stages = field(s, "stages");
    if (!stages || !stages->is_array() || stages->empty()) config_error(path + ".stages", "expected a non-empty array");
    for (std::size_t k = 0; k < stages->size(); ++k) {
      const std::string spath = path + ".stages[" + std::to_string(k) + "]";
      const json& st = (*stages)[k];
      require_object(st, spath);
      StageSpec stage;
      stage.stage_id = require<std::string>(st, "stage_id", spath);
      stage.transform_seed = require<std::uint64_t>(st, "transform_seed", spath);
      stage.out_dim = require<std::size_t>(st, "out_dim", spath);
      stage.exec_time_us = require<SimTime>(st, "exec_time_us", spath);
      if (stage.out_dim == 0) config_error(spath + ".out_dim", "must be >= 1");
      if (stage.exec_time_us < 0) config_error(spath + ".exec_time_us", "must be >= 0");
      spec.stages.push_back(std::move(stage));
    }
    out.push_back(std::move(spec));
  }
  return out;
}

json services_to_json(const std::vector<ServiceSpec>& specs) {
  json list = json::array();
  for (const auto& s : specs) {
    json stages = json::array();
    for (const auto& st : s.stages) {
      stages.push_back({{"stage_id", st.stage_id},
                        {"transform_seed", st.transform_seed},
                        {"out_dim", st.out_dim},
                        {"exec_time_us", st.exec_time_us}});
    }
    json svc{{"service_id", s.service_id}, {"label_classes", s.label_classes}, {"label_seed", s.label_seed},
             {"stages", stages}};
    if (!s.label_biases.empty()) svc["label_biases"] = s.label_biases;
    list.push_back(std::move(svc));
  }
  return {{"services", list}};
}

ExperimentConfig parse_experiment(const json& j, const std::filesystem::path& base_dir) {
  const std::string root = "config";
  require_object(j, root);
  ExperimentConfig c;
  c.seed = get_or<std::uint64_t>(j, "seed", 1, root);
  c.dim = get_or<std::size_t>(j, "dim", 64, root);
  if (c.dim == 0) config_error(root + ".dim", "must be >= 1");

  if (const json* l = field(j, "lsh")) {
    const std::string path = root + ".lsh";
    require_object(*l, path);
    c.lsh.bits = get_or<int>(*l, "bits", 16, path);
    c.lsh.tables = get_or<int>(*l, "tables", 4, path);
    c.lsh.probe_radius = get_or<int>(*l, "probe_radius", 1, path);
    if (const json* s = field(*l, "seed")) c.lsh.seed = get_as<std::uint64_t>(*s, path + ".seed");
    if (c.lsh.bits != LshFamily::kForwardingBits) config_error(path + ".bits", "forwarding requires 16 bits");
    if (c.lsh.tables < 1) config_error(path + ".tables", "must be >= 1");
    if (c.lsh.probe_radius < 0 || c.lsh.probe_radius > c.lsh.bits) config_error(path + ".probe_radius", "must be in [0, bits]");
  }
  if (const json* k = field(j, "cost")) {
    const std::string path = root + ".cost";
    require_object(*k, path);
    c.cost.hash_time_us = get_or<SimTime>(*k, "hash_time_us", 1800, path);
    c.cost.lookup_time_us = get_or<SimTime>(*k, "lookup_time_us", 1000, path);
    if (c.cost.hash_time_us < 0) config_error(path + ".hash_time_us", "must be >= 0");
    if (c.cost.lookup_time_us < 0) config_error(path + ".lookup_time_us", "must be >= 0");
  }

  auto resolve = [&](const std::string& key) {
    const auto rel = require<std::string>(j, key, root);
    return (base_dir / rel).lexically_normal();
  };

  if (const json* t = field(j, "topology")) {
    c.topology = t->is_string() ? parse_topology(read_json_file(base_dir / t->get<std::string>(), root + ".topology"),
                                                 root + ".topology")
                                : parse_topology(*t, root + ".topology");
  } else {
    c.topology = default_topology();
  }
  if (const json* s = field(j, "services")) {
    c.services = s->is_string() ? parse_services(read_json_file(base_dir / s->get<std::string>(), root + ".services"),
                                                 root + ".services")
                                : parse_services(*s, root + ".services");
  } else {
    c.services = default_service_specs();
  }

  const auto trace_path = resolve("trace");
  const auto vectors_path = resolve("vectors");
  if (!std::filesystem::exists(trace_path)) config_error(root + ".trace", "trace file not found: " + trace_path.string());
  if (!std::filesystem::exists(vectors_path)) {
    config_error(root + ".vectors", "vector file not found: " + vectors_path.string());
  }
  c.trace = read_trace_file(trace_path.string());
  c.vectors = read_vectors_file(vectors_path.string());

  if (const json* th = field(j, "thresholds")) {
    require_object(*th, root + ".thresholds");
    for (const auto& [svc, v] : th->items()) c.service_thresholds[svc] = fraction(v, root + ".thresholds." + svc);
  }
  if (const json* d = field(j, "default_threshold")) c.default_threshold = fraction(*d, root + ".default_threshold");
  c.eviction = get_or<std::string>(j, "eviction", "lru", root);
  if (c.eviction != "lru" && c.eviction != "lfu") config_error(root + ".eviction", "expected 'lru' or 'lfu'");
  const auto acc = get_or<std::string>(j, "accuracy", "label", root);
  if (acc == "label") c.accuracy = AccuracyMode::Label;
  else if (acc == "exact") c.accuracy = AccuracyMode::Exact;
  else config_error(root + ".accuracy", "expected 'label' or 'exact'");
  c.metrics_window_us = get_or<SimTime>(j, "metrics_window_us", 1'000'000, root);
  if (c.metrics_window_us <= 0) config_error(root + ".metrics_window_us", "must be positive");

  validate(c);
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  const json j = read_json_file(path, "config");
  return parse_experiment(j, path.parent_path());
}

void validate(const ExperimentConfig& c) {
  std::map<std::string, NodeKind> kinds;
  for (const auto& n : c.topology.nodes) kinds[n.id] = n.kind;
  std::size_t servers = 0;
  for (const auto& n : c.topology.nodes) {
    if (n.kind == NodeKind::Server) ++servers;
    if (n.kind == NodeKind::Device && (n.store.max_entries || n.store.max_bytes) && !n.can_hash) {
      config_error("topology.nodes." + n.id, "a device store needs can_hash = true");
    }
  }
  if (servers == 0) config_error("topology.nodes", "at least one server is required");
  for (const auto& n : c.topology.nodes) {
    if (n.kind != NodeKind::Device) continue;
    bool has_router = false;
    for (const auto& l : c.topology.links) {
      const std::string* peer = l.a == n.id ? &l.b : (l.b == n.id ? &l.a : nullptr);
      if (peer && kinds[*peer] == NodeKind::Router) has_router = true;
    }
    if (!has_router) config_error("topology.nodes." + n.id, "device has no link to a router");
  }

  ServiceCatalog catalog(c.services, c.dim);  // validates stage sharing
  for (std::size_t i = 0; i < c.trace.size(); ++i) {
    const auto& row = c.trace[i];
    const std::string path = "trace row " + std::to_string(i + 2);
    auto k = kinds.find(row.device_id);
    if (k == kinds.end() || k->second != NodeKind::Device) config_error(path, "unknown device '" + row.device_id + "'");
    if (!catalog.contains(row.service_id)) config_error(path, "unknown service '" + row.service_id + "'");
    auto v = c.vectors.find(row.vector_id);
    if (v == c.vectors.end()) config_error(path, "unknown vector '" + row.vector_id + "'");
    if (v->second.dim() != c.dim) {
      config_error(path, "vector '" + row.vector_id + "' has dim " + std::to_string(v->second.dim()) +
                             ", experiment dim is " + std::to_string(c.dim));
    }
    if (v->second.is_zero()) config_error(path, "vector '" + row.vector_id + "' is all zero");
  }
}

WorkloadProfile parse_profile(const json& j, const std::string& where) {
  require_object(j, where);
  WorkloadProfile p;
  p.name = get_or<std::string>(j, "name", "custom", where);
  p.dim = get_or<std::size_t>(j, "dim", p.dim, where);
  p.clusters = get_or<std::size_t>(j, "clusters", p.clusters, where);
  p.min_cosine = get_or<double>(j, "min_cosine", p.min_cosine, where);
  p.max_cosine = get_or<double>(j, "max_cosine", p.max_cosine, where);
  p.unique_fraction = get_or<double>(j, "unique_fraction", p.unique_fraction, where);
  p.devices = get_or<std::size_t>(j, "devices", p.devices, where);
  p.tasks_per_device = get_or<std::size_t>(j, "tasks_per_device", p.tasks_per_device, where);
  p.mean_interarrival_us = get_or<SimTime>(j, "mean_interarrival_us", p.mean_interarrival_us, where);
  p.center_candidates = get_or<std::size_t>(j, "center_candidates", p.center_candidates, where);
  const auto arrival = get_or<std::string>(j, "arrival", "exponential", where);
  if (arrival == "exponential") p.arrival = ArrivalKind::Exponential;
  else if (arrival == "fixed") p.arrival = ArrivalKind::Fixed;
  else config_error(where + ".arrival", "expected 'fixed' or 'exponential'");
  if (const json* t = field(j, "threshold")) p.threshold = fraction(*t, where + ".threshold");
  if (const json* s = field(j, "services")) {
    if (!s->is_array()) config_error(where + ".services", "expected an array");
    for (std::size_t i = 0; i < s->size(); ++i) {
      const std::string path = where + ".services[" + std::to_string(i) + "]";
      const json& e = (*s)[i];
      if (e.is_string()) {
        p.services.push_back({e.get<std::string>(), 1.0});
      } else {
        require_object(e, path);
        p.services.push_back({require<std::string>(e, "service_id", path), get_or<double>(e, "weight", 1.0, path)});
      }
    }
  }
  if (p.dim == 0) config_error(where + ".dim", "must be >= 1");
  if (p.devices == 0) config_error(where + ".devices", "must be >= 1");
  if (p.mean_interarrival_us <= 0) config_error(where + ".mean_interarrival_us", "must be positive");
  try {
    noise_variance_for(p.min_cosine);
    noise_variance_for(p.max_cosine);
  } catch (const Error& e) {
    config_error(where + ".min_cosine", e.what());
  }
  if (p.min_cosine > p.max_cosine) config_error(where + ".min_cosine", "exceeds max_cosine");
  if (p.unique_fraction < 0.0 || p.unique_fraction > 1.0) config_error(where + ".unique_fraction", "must be in [0,1]");
  return p;
}

json profile_to_json(const WorkloadProfile& p) {
  json services = json::array();
  for (const auto& s : p.services) services.push_back({{"service_id", s.service_id}, {"weight", s.weight}});
  json j{{"name", p.name},
         {"dim", p.dim},
         {"clusters", p.clusters},
         {"min_cosine", p.min_cosine},
         {"max_cosine", p.max_cosine},
         {"unique_fraction", p.unique_fraction},
         {"devices", p.devices},
         {"tasks_per_device", p.tasks_per_device},
         {"arrival", p.arrival == ArrivalKind::Fixed ? "fixed" : "exponential"},
         {"mean_interarrival_us", p.mean_interarrival_us},
         {"center_candidates", p.center_candidates},
         {"services", services}};
  if (p.threshold) j["threshold"] = *p.threshold;
  return j;
}

SimilarityThreshold threshold_for(const ExperimentConfig& c, const TraceRow& row) {
  if (c.threshold_override) return SimilarityThreshold(*c.threshold_override);
  if (row.threshold) return SimilarityThreshold(*row.threshold);
  if (auto it = c.service_thresholds.find(row.service_id); it != c.service_thresholds.end()) {
    return SimilarityThreshold(it->second);
  }
  return SimilarityThreshold(c.default_threshold);
}

}  // namespace edgereuse
