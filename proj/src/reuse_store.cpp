#include "edgereuse/reuse_store.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "edgereuse/kernels.hpp"

namespace edgereuse {

std::size_t accounted_size(const ReuseEntry& entry) noexcept {
  std::size_t bytes = entry.key_input.byte_size() + kEntryOverheadBytes;
  for (const auto& [id, out] : entry.stage_outputs) bytes += out.byte_size();
  return bytes;
}

EvictionRank LruPolicy::rank(const AccessStats& s) const noexcept {
  return {s.last_access, static_cast<std::int64_t>(s.access_seq), 0};
}

EvictionRank LfuPolicy::rank(const AccessStats& s) const noexcept {
  return {static_cast<std::int64_t>(s.hit_count), s.last_access, static_cast<std::int64_t>(s.access_seq)};
}

std::shared_ptr<const EvictionPolicy> make_eviction_policy(std::string_view name) {
  if (name == "lru") return std::make_shared<LruPolicy>();
  if (name == "lfu") return std::make_shared<LfuPolicy>();
  throw Error(Errc::InvalidArgument, "unknown eviction policy '" + std::string(name) + "'");
}

ReuseStore::ReuseStore(std::shared_ptr<const LshFamily> family, StoreLimits limits,
                       std::shared_ptr<const EvictionPolicy> policy, int probe_radius)
    : family_(std::move(family)), limits_(limits), policy_(std::move(policy)), probe_radius_(probe_radius) {
  if (!family_) throw Error(Errc::InvalidArgument, "reuse store needs an lsh family");
  if (!policy_) throw Error(Errc::InvalidArgument, "reuse store needs an eviction policy");
  if (limits_.max_entries == 0 || limits_.max_bytes == 0) {
    throw Error(Errc::InvalidArgument, "reuse store capacity must be positive");
  }
  if (probe_radius_ < 0 || probe_radius_ > family_->bits()) {
    throw Error(Errc::InvalidArgument, "probe radius outside [0, bits]");
  }
  tables_.resize(family_->tables());
}

EntryId ReuseStore::insert(ReuseEntry entry, SimTime now) {
  if (entry.key_input.dim() != family_->dim()) {
    throw Error(Errc::DimensionMismatch, "entry input dim " + std::to_string(entry.key_input.dim()) +
                                             " does not match store dim " + std::to_string(family_->dim()));
  }
  const std::size_t size = accounted_size(entry);
  if (size > limits_.max_bytes) {
    throw Error(Errc::Oversized, "entry of " + std::to_string(size) + " bytes exceeds store capacity of " +
                                     std::to_string(limits_.max_bytes));
  }
  const auto sigs = family_->signatures(entry.key_input);
  evict(size, 1);

  const EntryId id = next_id_++;
  Record rec;
  rec.bucket_keys.reserve(sigs.size());
  for (const auto& s : sigs) {
    rec.bucket_keys.push_back(s.bits);
    tables_[s.table_index][s.bits].push_back(id);
  }
  rec.norm2 = simd::dot(entry.key_input.values(), entry.key_input.values());
  entry.size_bytes = size;
  entry.insert_time = now;
  entry.last_access = now;
  entry.hit_count = 0;
  rec.stats = {now, now, ++clock_, 0};
  rec.entry = std::move(entry);

  eviction_order_.emplace(policy_->rank(rec.stats), id);
  bytes_used_ += size;
  entries_.emplace(id, std::move(rec));
  return id;
}

template <typename Pred>
LookupOutcome ReuseStore::search(const FeatureVector& query, SimilarityThreshold threshold,
                                 Pred&& accept) const {
  if (query.dim() != family_->dim()) {
    throw Error(Errc::DimensionMismatch, "query dim " + std::to_string(query.dim()) +
                                             " does not match store dim " + std::to_string(family_->dim()));
  }
  LookupOutcome out;
  const auto sigs = family_->signatures(query);
  std::vector<EntryId> candidates;
  for (const auto& sig : sigs) {
    const auto& table = tables_[sig.table_index];
    for (const auto& probe : probe_sequence(sig, family_->bits(), probe_radius_)) {
      ++out.probes_used;
      if (auto it = table.find(probe.bits); it != table.end()) {
        candidates.insert(candidates.end(), it->second.begin(), it->second.end());
      }
    }
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  const auto& k = simd::active();
  const double qq = k.dot(query.data(), query.data(), query.dim());
  const double qnorm = std::sqrt(qq);
  std::optional<EntryId> best;
  double best_sim = -1.0;
  for (EntryId id : candidates) {
    const Record& rec = entries_.at(id);
    if (!accept(rec.entry)) continue;
    ++out.candidates;
    const double ab = k.dot(query.data(), rec.entry.key_input.data(), query.dim());
    const double sim = std::clamp(ab / (qnorm * std::sqrt(rec.norm2)), 0.0, 1.0);
    // ids ascend, so strict > keeps the smallest id on ties
    if (sim > best_sim) {
      best_sim = sim;
      best = id;
    }
  }
  if (best) {
    out.similarity = best_sim;
    if (threshold.admits(best_sim)) {
      out.hit = true;
      out.entry_id = best;
    }
  }
  return out;
}

LookupOutcome ReuseStore::nearest(const FeatureVector& query, SimilarityThreshold threshold,
                                  std::string_view service) const {
  return search(query, threshold,
                [service](const ReuseEntry& e) { return service.empty() || e.service_id == service; });
}

LookupOutcome ReuseStore::nearest_stage(std::string_view stage_id, const FeatureVector& query,
                                        SimilarityThreshold threshold) const {
  return search(query, threshold, [stage_id](const ReuseEntry& e) {
    return e.stage_outputs.find(stage_id) != e.stage_outputs.end();
  });
}

LookupOutcome ReuseStore::lookup(const FeatureVector& query, SimilarityThreshold threshold, SimTime now,
                                 std::string_view service) {
  auto out = nearest(query, threshold, service);
  if (out.hit) touch(*out.entry_id, now);
  return out;
}

LookupOutcome ReuseStore::lookup_stage(std::string_view stage_id, const FeatureVector& query,
                                       SimilarityThreshold threshold, SimTime now) {
  auto out = nearest_stage(stage_id, query, threshold);
  if (out.hit) touch(*out.entry_id, now);
  return out;
}

void ReuseStore::touch(EntryId id, SimTime now) {
  Record& rec = entries_.at(id);
  eviction_order_.erase({policy_->rank(rec.stats), id});
  rec.stats.last_access = std::max(rec.stats.last_access, now);
  rec.stats.access_seq = ++clock_;
  ++rec.stats.hit_count;
  rec.entry.last_access = rec.stats.last_access;
  rec.entry.hit_count = rec.stats.hit_count;
  eviction_order_.emplace(policy_->rank(rec.stats), id);
}

void ReuseStore::unindex(EntryId id, Record& rec) {
  for (std::size_t t = 0; t < tables_.size(); ++t) {
    auto it = tables_[t].find(rec.bucket_keys[t]);
    if (it == tables_[t].end()) continue;
    auto& bucket = it->second;
    bucket.erase(std::remove(bucket.begin(), bucket.end(), id), bucket.end());
    if (bucket.empty()) tables_[t].erase(it);
  }
  eviction_order_.erase({policy_->rank(rec.stats), id});
  bytes_used_ -= rec.entry.size_bytes;
}

bool ReuseStore::erase(EntryId id) {
  auto it = entries_.find(id);
  if (it == entries_.end()) return false;
  unindex(id, it->second);
  entries_.erase(it);
  return true;
}

std::vector<EntryId> ReuseStore::evict(std::size_t needed_bytes, std::size_t needed_entries) {
  std::vector<EntryId> evicted;
  auto fits = [&] {
    return bytes_used_ + needed_bytes <= limits_.max_bytes && entries_.size() + needed_entries <= limits_.max_entries;
  };
  while (!fits() && !eviction_order_.empty()) {
    const EntryId victim = eviction_order_.begin()->second;
    erase(victim);
    evicted.push_back(victim);
  }
  return evicted;
}

const ReuseEntry* ReuseStore::find(EntryId id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second.entry;
}

std::vector<EntryId> ReuseStore::ids() const {
  std::vector<EntryId> out;
  out.reserve(entries_.size());
  for (const auto& [id, rec] : entries_) out.push_back(id);
  return out;
}

void ReuseStore::audit() const {
  auto fail = [](const std::string& what) { throw std::logic_error("reuse store audit: " + what); };
  std::size_t bytes = 0;
  for (const auto& [id, rec] : entries_) {
    bytes += rec.entry.size_bytes;
    if (rec.entry.size_bytes != accounted_size(rec.entry)) fail("size accounting drift");
    if (rec.bucket_keys.size() != tables_.size()) fail("missing bucket keys");
    for (std::size_t t = 0; t < tables_.size(); ++t) {
      std::size_t seen = 0;
      for (const auto& [key, bucket] : tables_[t]) {
        const auto n = static_cast<std::size_t>(std::count(bucket.begin(), bucket.end(), id));
        if (n && key != rec.bucket_keys[t]) fail("entry indexed in the wrong bucket");
        seen += n;
      }
      if (seen != 1) fail("entry " + std::to_string(id) + " not in exactly one bucket of table " + std::to_string(t));
    }
    if (!eviction_order_.count({policy_->rank(rec.stats), id})) fail("eviction order out of sync");
  }
  if (bytes != bytes_used_) fail("byte counter drift");
  if (eviction_order_.size() != entries_.size()) fail("eviction order size mismatch");
  if (bytes_used_ > limits_.max_bytes) fail("byte capacity exceeded");
  if (entries_.size() > limits_.max_entries) fail("entry capacity exceeded");
}

void ReuseStore::write_snapshot_csv(std::ostream& out) const {
  out << "id";
  for (std::size_t t = 0; t < tables_.size(); ++t) out << ",table" << t;
  out << ",size_bytes,hit_count\n";
  for (const auto& [id, rec] : entries_) {
    out << id;
    for (auto key : rec.bucket_keys) out << ',' << key;
    out << ',' << rec.entry.size_bytes << ',' << rec.stats.hit_count << '\n';
  }
}

}  // namespace edgereuse
