#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "duogate/core.hpp"

namespace duogate {

struct StoreEntry {
  std::int64_t entry_id = 0;
  Eigen::VectorXf vector;  // unit norm, 32-bit
  Decision decision = Decision::Allow;
  std::int64_t last_match_time = 0;
  std::int64_t merge_count = 1;
};

struct StoreConfig {
  std::optional<std::int64_t> capacity;  // nullopt = unbounded
  double merge_similarity = 0.90;        // in (0,1)
  std::int64_t chunk_size = 4096;        // > 0
};

// Exact-match vector memory. Queries are brute-force scans in fixed chunks;
// similarity is the dot product of unit vectors accumulated in double, in
// element order, so results are reproducible bit-for-bit.
class VectorStore {
 public:
  VectorStore(int dim, StoreConfig cfg);

  // (max similarity, entry id); empty store returns (-inf, nullopt).
  // Ties break toward the smallest entry id. Throws std::invalid_argument
  // ("query not unit norm") when | |q| - 1 | > 1e-3.
  std::pair<double, std::optional<std::int64_t>> query_top1(const Eigen::VectorXf& q) const;

  // Number of entries with similarity strictly above tau.
  std::int64_t query_topk_count(const Eigen::VectorXf& q, double tau) const;

  // Entry ids with similarity strictly above tau, ascending id.
  std::vector<std::int64_t> matches_above(const Eigen::VectorXf& q, double tau) const;

  // Appends an entry (merge_count 1, last_match_time = time) and returns its
  // id. When bounded and full, evict_merge runs first.
  std::int64_t insert(const Eigen::VectorXf& v, Decision decision, std::int64_t time);

  // Collapses every single-linkage group of entries with pairwise similarity
  // strictly above merge_similarity into one representative: renormalized
  // arithmetic mean, id = smallest member id, Block-dominant decision,
  // last_match_time = max over members, merge_count = sum. When no group has
  // two or more members, evicts the entry with the smallest last_match_time
  // (ties toward the smallest id). Returns the net size reduction (>= 1).
  // Throws std::logic_error("premature eviction") unless the store is at
  // capacity.
  std::int64_t evict_merge();

  // Refreshes last_match_time. Throws on unknown id or time moving backward.
  void touch(std::int64_t entry_id, std::int64_t time);

  std::size_t size() const { return entries_.size(); }
  int dim() const { return dim_; }
  const StoreConfig& config() const { return cfg_; }
  const std::vector<StoreEntry>& entries() const { return entries_; }
  const StoreEntry* find(std::int64_t entry_id) const;

  // Mass accounting: live + dropped == inserted, always.
  std::int64_t total_inserted() const { return total_inserted_; }
  std::int64_t dropped_mass() const { return dropped_mass_; }
  std::int64_t live_mass() const;

  // Binary snapshot: magic "TWGS", u32 version, u64 count, u32 dim; per entry
  // u64 id, u8 decision, i64 last_match_time, u64 merge_count, float32 vector.
  // Little-endian. Config is not part of the snapshot.
  void save(const std::string& path) const;
  static VectorStore load(const std::string& path, StoreConfig cfg);

 private:
  void check_query(const Eigen::VectorXf& q) const;

  int dim_;
  StoreConfig cfg_;
  std::vector<StoreEntry> entries_;  // ascending entry_id
  std::int64_t next_id_ = 0;
  std::int64_t total_inserted_ = 0;
  std::int64_t dropped_mass_ = 0;
};

// Sequential double-accumulation dot product; the one true similarity.
double dot_f32(const Eigen::VectorXf& a, const Eigen::VectorXf& b);

}  // namespace duogate
