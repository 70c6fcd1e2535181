#pragma once

// Similarity-indexed reuse cache shared by devices, routers and servers.
//
// Entries are indexed in L LSH tables. A lookup gathers the buckets along the
// probe sequence of each table, scores every candidate with exact cosine
// similarity, and reports the best one; it is a hit only when that similarity
// clears the caller's threshold.
//
// Thread-safety: nearest() and nearest_stage() are const and may run
// concurrently. insert(), lookup(), lookup_stage() and evict() mutate and
// need exclusive access.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "edgereuse/core.hpp"
#include "edgereuse/hashing.hpp"

namespace edgereuse {

using EntryId = std::uint64_t;

inline constexpr std::size_t kEntryOverheadBytes = 64;

struct ReuseEntry {
  std::string service_id;
  FeatureVector key_input;
  std::map<std::string, FeatureVector, std::less<>> stage_outputs;
  FeatureVector final_output;
  int label = 0;
  // Filled in by the store.
  std::size_t size_bytes = 0;
  SimTime insert_time = 0;
  SimTime last_access = 0;
  std::uint64_t hit_count = 0;
};

/// bytes(key_input) + sum of bytes(stage_outputs) + fixed overhead.
std::size_t accounted_size(const ReuseEntry& entry) noexcept;

struct AccessStats {
  SimTime insert_time = 0;
  SimTime last_access = 0;
  std::uint64_t access_seq = 0;  // store-local logical clock, strictly increasing
  std::uint64_t hit_count = 0;
};

/// Smaller rank is evicted first.
using EvictionRank = std::array<std::int64_t, 3>;

class EvictionPolicy {
 public:
  virtual ~EvictionPolicy() = default;
  virtual std::string_view name() const noexcept = 0;
  virtual EvictionRank rank(const AccessStats& stats) const noexcept = 0;
};

/// Oldest last_access first.
class LruPolicy final : public EvictionPolicy {
 public:
  std::string_view name() const noexcept override { return "lru"; }
  EvictionRank rank(const AccessStats& s) const noexcept override;
};

/// Lowest hit_count first, ties by oldest last_access.
class LfuPolicy final : public EvictionPolicy {
 public:
  std::string_view name() const noexcept override { return "lfu"; }
  EvictionRank rank(const AccessStats& s) const noexcept override;
};

/// "lru" or "lfu".
std::shared_ptr<const EvictionPolicy> make_eviction_policy(std::string_view name);

struct StoreLimits {
  std::size_t max_entries = 0;
  std::size_t max_bytes = 0;
};

struct LookupOutcome {
  bool hit = false;
  std::optional<EntryId> entry_id;   // set on hit
  std::optional<double> similarity;  // best candidate, even on a miss
  std::size_t probes_used = 0;
  std::size_t candidates = 0;
};

class ReuseStore {
 public:
  ReuseStore(std::shared_ptr<const LshFamily> family, StoreLimits limits,
             std::shared_ptr<const EvictionPolicy> policy, int probe_radius = 0);

  /// Indexes the entry in every table, evicting first if needed. Throws
  /// Errc::Oversized (and changes nothing) if the entry alone exceeds max_bytes.
  EntryId insert(ReuseEntry entry, SimTime now);

  /// Best match among entries of `service` (any service when empty).
  /// Updates access stats on a hit.
  LookupOutcome lookup(const FeatureVector& query, SimilarityThreshold threshold, SimTime now,
                       std::string_view service = {});

  /// Like lookup, restricted to entries that carry an output for stage_id.
  LookupOutcome lookup_stage(std::string_view stage_id, const FeatureVector& query,
                             SimilarityThreshold threshold, SimTime now);

  LookupOutcome nearest(const FeatureVector& query, SimilarityThreshold threshold,
                        std::string_view service = {}) const;
  LookupOutcome nearest_stage(std::string_view stage_id, const FeatureVector& query,
                              SimilarityThreshold threshold) const;

  /// Evicts in policy order until needed_bytes and needed_entries both fit.
  std::vector<EntryId> evict(std::size_t needed_bytes, std::size_t needed_entries);

  bool erase(EntryId id);

  const ReuseEntry* find(EntryId id) const;
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t bytes_used() const noexcept { return bytes_used_; }
  const StoreLimits& limits() const noexcept { return limits_; }
  int probe_radius() const noexcept { return probe_radius_; }
  const LshFamily& family() const noexcept { return *family_; }
  const EvictionPolicy& policy() const noexcept { return *policy_; }
  std::vector<EntryId> ids() const;

  /// Walks every index and counter; throws std::logic_error on any violation.
  void audit() const;

  /// id,table0..table{L-1},size_bytes,hit_count
  void write_snapshot_csv(std::ostream& out) const;

 private:
  struct Record {
    ReuseEntry entry;
    std::vector<std::uint32_t> bucket_keys;  // one per table
    double norm2 = 0.0;
    AccessStats stats;
  };

  template <typename Pred>
  LookupOutcome search(const FeatureVector& query, SimilarityThreshold threshold, Pred&& accept) const;
  void touch(EntryId id, SimTime now);
  void unindex(EntryId id, Record& rec);

  std::shared_ptr<const LshFamily> family_;
  StoreLimits limits_;
  std::shared_ptr<const EvictionPolicy> policy_;
  int probe_radius_;

  std::vector<std::unordered_map<std::uint32_t, std::vector<EntryId>>> tables_;
  std::map<EntryId, Record> entries_;
  std::set<std::pair<EvictionRank, EntryId>> eviction_order_;
  std::size_t bytes_used_ = 0;
  EntryId next_id_ = 1;
  std::uint64_t clock_ = 0;
};

}  // namespace edgereuse
