#include "edgereuse/fabric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace edgereuse {

// ---------------------------------------------------------------------------
// ForwardingTable

ForwardingTable::ForwardingTable(std::vector<HashRange> ranges, std::uint64_t version)
    : ranges_(std::move(ranges)), version_(version) {
  validate();
}

void ForwardingTable::validate() const {
  auto fail = [](const std::string& what) { throw std::logic_error("forwarding table: " + what); };
  if (ranges_.empty()) fail("no ranges");
  std::uint32_t expected = 0;
  for (const auto& r : ranges_) {
    if (r.lo != expected) fail("gap or overlap at " + std::to_string(r.lo));
    if (r.hi < r.lo) fail("empty range");
    if (r.server_id.empty()) fail("range without owner");
    expected = r.hi + 1;
  }
  if (expected != ForwardingHash::kMax + 1) fail("ranges do not end at 65535");
  std::vector<std::string> owners;
  for (const auto& r : ranges_) owners.push_back(r.server_id);
  std::sort(owners.begin(), owners.end());
  if (std::adjacent_find(owners.begin(), owners.end()) != owners.end()) fail("server owns more than one range");
}

std::size_t ForwardingTable::range_index(ForwardingHash h) const {
  if (h.value > ForwardingHash::kMax) {
    throw Error(Errc::HashOutOfRange, "forwarding hash " + std::to_string(h.value) + " outside [0,65535]");
  }
  auto it = std::upper_bound(ranges_.begin(), ranges_.end(), h.value,
                             [](std::uint32_t v, const HashRange& r) { return v < r.lo; });
  return static_cast<std::size_t>(std::distance(ranges_.begin(), it)) - 1;
}

std::optional<std::size_t> ForwardingTable::index_of(const std::string& server_id) const {
  for (std::size_t i = 0; i < ranges_.size(); ++i) {
    if (ranges_[i].server_id == server_id) return i;
  }
  return std::nullopt;
}

ForwardingTable partition_hash_space(std::vector<std::string> servers) {
  if (servers.empty()) throw Error(Errc::InvalidArgument, "cannot partition the hash space among zero servers");
  std::sort(servers.begin(), servers.end());
  if (std::adjacent_find(servers.begin(), servers.end()) != servers.end()) {
    throw Error(Errc::InvalidArgument, "duplicate server id in partition");
  }
  constexpr std::uint32_t space = ForwardingHash::kMax + 1;
  const auto n = static_cast<std::uint32_t>(servers.size());
  if (n > space) throw Error(Errc::InvalidArgument, "more servers than hash values");
  const std::uint32_t width = space / n;
  std::vector<HashRange> ranges;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t lo = i * width;
    const std::uint32_t hi = (i + 1 == n) ? ForwardingHash::kMax : lo + width - 1;
    ranges.push_back({lo, hi, servers[i]});
  }
  return ForwardingTable(std::move(ranges), 1);
}

ForwardingTable rebalance(const ForwardingTable& table, const LoadReport& report, double step_fraction) {
  if (!(step_fraction > 0.0 && step_fraction <= 0.5)) {
    throw Error(Errc::InvalidArgument, "rebalance step fraction must be in (0, 0.5]");
  }
  const auto& ranges = table.ranges();
  std::vector<std::uint64_t> load(ranges.size());
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    auto it = report.servers.find(ranges[i].server_id);
    if (it == report.servers.end()) {
      throw Error(Errc::InvalidArgument, "load report is missing server '" + ranges[i].server_id + "'");
    }
    load[i] = it->second.executed;
  }
  if (ranges.size() < 2) return table;

  const auto busiest = static_cast<std::size_t>(std::distance(load.begin(), std::max_element(load.begin(), load.end())));
  const auto idlest = static_cast<std::size_t>(std::distance(load.begin(), std::min_element(load.begin(), load.end())));
  if (load[busiest] - load[idlest] <= 1) return table;

  std::size_t neighbour;
  if (busiest + 1 == idlest || idlest + 1 == busiest) {
    neighbour = idlest;
  } else if (busiest == 0) {
    neighbour = 1;
  } else if (busiest + 1 == ranges.size()) {
    neighbour = busiest - 1;
  } else {
    neighbour = load[busiest + 1] < load[busiest - 1] ? busiest + 1 : busiest - 1;
  }

  const std::uint32_t width = ranges[busiest].width();
  if (width < 2) return table;
  auto amount = static_cast<std::uint32_t>(std::floor(step_fraction * width));
  amount = std::clamp<std::uint32_t>(amount, 1, width - 1);

  std::vector<HashRange> next = ranges;
  if (neighbour > busiest) {
    next[busiest].hi -= amount;
    next[neighbour].lo -= amount;
  } else {
    next[busiest].lo += amount;
    next[neighbour].hi += amount;
  }
  return ForwardingTable(std::move(next), table.version() + 1);
}

Controller::Controller(ForwardingTable table, SimTime window_us, double step_fraction)
    : table_(std::move(table)), window_us_(window_us), step_fraction_(step_fraction) {
  if (window_us_ < 0) throw Error(Errc::InvalidArgument, "controller window must be >= 0");
  if (enabled() && !(step_fraction_ > 0.0 && step_fraction_ <= 0.5)) {
    throw Error(Errc::InvalidArgument, "controller step fraction must be in (0, 0.5]");
  }
}

bool Controller::on_window(const LoadReport& report) {
  if (!enabled()) return false;
  auto next = rebalance(table_, report, step_fraction_);
  const bool changed = next.version() != table_.version();
  table_ = std::move(next);
  return changed;
}

// ---------------------------------------------------------------------------
// Nodes

std::optional<ReuseStore> make_store(const StoreSettings& settings, std::shared_ptr<const LshFamily> family) {
  if (!settings.enabled()) return std::nullopt;
  return ReuseStore(std::move(family), settings.limits,
                    settings.policy ? settings.policy : std::make_shared<LruPolicy>(), settings.probe_radius);
}

ReuseEntry make_entry(const TaskEnvelope& task, const ServiceOutput& payload) {
  ReuseEntry e;
  e.service_id = task.service_id;
  e.key_input = task.input;
  e.stage_outputs = payload.stage_outputs;
  e.final_output = payload.output;
  e.label = payload.label;
  return e;
}

namespace {

ServiceOutput payload_of(const ReuseEntry& e) { return {e.final_output, e.label, e.stage_outputs}; }

TaskResult local_result(const TaskEnvelope& task, const ReuseEntry& e, ReuseLayer layer) {
  TaskResult r;
  r.task_id = task.task_id;
  r.service_id = task.service_id;
  r.output = e.final_output;
  r.label = e.label;
  r.reuse_layer = layer;
  return r;
}

void cache_into(ReuseStore* store, const TaskEnvelope& task, const ServiceOutput& payload, SimTime now) {
  if (!store) return;
  try {
    store->insert(make_entry(task, payload), now);
  } catch (const Error& e) {
    if (e.code() != Errc::Oversized) throw;
  }
}

}  // namespace

DeviceNode::DeviceNode(std::string id, bool can_hash, std::optional<ReuseStore> store)
    : id_(std::move(id)), can_hash_(can_hash), store_(std::move(store)) {
  if (store_ && !can_hash_) {
    throw Error(Errc::Config, "device '" + id_ + "' has a reuse store but cannot hash");
  }
}

HopOutcome DeviceNode::offload(TaskEnvelope& task, SimTime now, const LshFamily& family, const CostModel& cost) {
  if (task.device_id != id_) {
    throw Error(Errc::InvalidArgument, "task " + std::to_string(task.task_id) + " belongs to device '" +
                                           task.device_id + "', not '" + id_ + "'");
  }
  HopOutcome out;
  if (can_hash_ && !task.forwarding_hash) {
    task.forwarding_hash = forwarding_hash(family, task.input);
    out.hashed = true;
    out.cost_us += cost.hash_time_us;
  }
  if (store_) {
    out.cost_us += cost.lookup_time_us;
    const auto found = store_->lookup(task.input, task.threshold, now + out.cost_us, task.service_id);
    out.similarity = found.similarity;
    if (found.hit) {
      const ReuseEntry& e = *store_->find(*found.entry_id);
      out.local = local_result(task, e, ReuseLayer::Device);
      out.payload = payload_of(e);
    }
  }
  return out;
}

void DeviceNode::cache_response(const TaskEnvelope& task, const ServiceOutput& payload, SimTime now) {
  cache_into(store(), task, payload, now);
}

RouterNode::RouterNode(std::string id, std::optional<ReuseStore> store) : id_(std::move(id)), store_(std::move(store)) {}

HopOutcome RouterNode::forward(TaskEnvelope& task, SimTime now, const LshFamily& family, const ForwardingTable& table,
                               const CostModel& cost) {
  HopOutcome out;
  if (!task.forwarding_hash) {
    task.forwarding_hash = forwarding_hash(family, task.input);
    out.hashed = true;
    out.cost_us += cost.hash_time_us;
  }
  if (store_) {
    out.cost_us += cost.lookup_time_us;
    const auto found = store_->lookup(task.input, task.threshold, now + out.cost_us, task.service_id);
    out.similarity = found.similarity;
    if (found.hit) {
      const ReuseEntry& e = *store_->find(*found.entry_id);
      out.local = local_result(task, e, ReuseLayer::Network);
      out.payload = payload_of(e);
      return out;
    }
  }
  out.destination = table.owner(*task.forwarding_hash);
  return out;
}

void RouterNode::cache_response(const TaskEnvelope& task, const ServiceOutput& payload, SimTime now) {
  cache_into(store(), task, payload, now);
}

ServerNode::ServerNode(std::string id, std::optional<ReuseStore> store) : id_(std::move(id)), store_(std::move(store)) {}

ServerOutcome ServerNode::handle(const TaskEnvelope& task, SimTime now, const ServiceCatalog& catalog,
                                 const CostModel& cost) {
  const Service& svc = catalog.get(task.service_id);
  ServerOutcome out;
  out.result.task_id = task.task_id;
  out.result.service_id = task.service_id;

  if (store_) {
    out.cost_us += cost.lookup_time_us;
    const auto found = store_->lookup(task.input, task.threshold, now + out.cost_us, task.service_id);
    out.similarity = found.similarity;
    if (found.hit) {
      const ReuseEntry& e = *store_->find(*found.entry_id);
      out.payload = payload_of(e);
      out.result.output = e.final_output;
      out.result.label = e.label;
      out.result.reuse_layer = ReuseLayer::Server;
      out.stages_reused = svc.stage_count();
      ++reused_;
      return out;
    }
  }

  // Reuse the longest pipeline prefix whose stages are stored. A stage id fixes
  // its upstream chain, so a stored stage output is a function of the raw input.
  std::size_t first_exec = 0;
  FeatureVector current = task.input;
  std::map<std::string, FeatureVector, std::less<>> reused_outputs;
  if (store_) {
    for (; first_exec < svc.stage_count(); ++first_exec) {
      const auto& stage_id = svc.stage(first_exec).spec().stage_id;
      const auto found = store_->lookup_stage(stage_id, task.input, task.threshold, now + out.cost_us);
      if (!found.hit) break;
      out.cost_us += cost.lookup_time_us;
      const ReuseEntry& e = *store_->find(*found.entry_id);
      current = e.stage_outputs.find(stage_id)->second;
      reused_outputs.emplace(stage_id, current);
      if (!out.similarity || found.similarity > out.similarity) out.similarity = found.similarity;
    }
  }

  out.payload = svc.resume(first_exec, current);
  out.payload.stage_outputs.insert(reused_outputs.begin(), reused_outputs.end());
  for (std::size_t i = first_exec; i < svc.stage_count(); ++i) out.exec_us += svc.stage(i).spec().exec_time_us;
  out.cost_us += out.exec_us;
  out.stages_reused = first_exec;
  out.stages_executed = svc.stage_count() - first_exec;
  out.result.output = out.payload.output;
  out.result.label = out.payload.label;

  if (out.stages_executed == 0) {
    out.result.reuse_layer = ReuseLayer::Server;
    ++reused_;
  } else {
    out.result.reuse_layer = out.stages_reused > 0 ? ReuseLayer::PartialServer : ReuseLayer::None;
    ++executed_;
    if (out.stages_reused > 0) ++reused_;
    if (store_) out.pending = make_entry(task, out.payload);
  }
  return out;
}

void ServerNode::commit(ReuseEntry entry, SimTime now) {
  if (!store_) return;
  try {
    store_->insert(std::move(entry), now);
  } catch (const Error& e) {
    if (e.code() != Errc::Oversized) throw;
  }
}

ServerOutcome ServerNode::serve(const TaskEnvelope& task, SimTime now, const ServiceCatalog& catalog,
                                const CostModel& cost) {
  auto out = handle(task, now, catalog, cost);
  if (out.pending) commit(std::move(*out.pending), now + out.cost_us);
  out.pending.reset();
  return out;
}

}  // namespace edgereuse
