#include "duogate/vecstore.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace duogate {

double dot_f32(const Eigen::VectorXf& a, const Eigen::VectorXf& b) {
  double acc = 0.0;
  const float* pa = a.data();
  const float* pb = b.data();
  const Eigen::Index n = a.size();
  for (Eigen::Index i = 0; i < n; ++i) acc += static_cast<double>(pa[i]) * static_cast<double>(pb[i]);
  return acc;
}

VectorStore::VectorStore(int dim, StoreConfig cfg) : dim_(dim), cfg_(cfg) {
  if (dim <= 0) throw std::invalid_argument("store dim must be positive");
  if (cfg.capacity && *cfg.capacity < 1) throw std::invalid_argument("capacity must be >= 1");
  if (!(cfg.merge_similarity > 0.0 && cfg.merge_similarity < 1.0))
    throw std::invalid_argument("merge_similarity outside (0,1)");
  if (cfg.chunk_size <= 0) throw std::invalid_argument("chunk_size must be positive");
}

void VectorStore::check_query(const Eigen::VectorXf& q) const {
  if (q.size() != dim_) throw std::invalid_argument("query dim mismatch");
  double n = std::sqrt(dot_f32(q, q));
  if (std::abs(n - 1.0) > 1e-3) throw std::invalid_argument("query not unit norm");
}

std::pair<double, std::optional<std::int64_t>> VectorStore::query_top1(
    const Eigen::VectorXf& q) const {
  check_query(q);
  double best = -std::numeric_limits<double>::infinity();
  std::optional<std::int64_t> best_id;
  const std::size_t n = entries_.size();
  const std::size_t chunk = static_cast<std::size_t>(cfg_.chunk_size);
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t end = std::min(n, start + chunk);
    for (std::size_t i = start; i < end; ++i) {
      double sim = dot_f32(entries_[i].vector, q);
      if (sim > best || (sim == best && (!best_id || entries_[i].entry_id < *best_id))) {
        best = sim;
        best_id = entries_[i].entry_id;
      }
    }
  }
  return {best, best_id};
}

std::int64_t VectorStore::query_topk_count(const Eigen::VectorXf& q, double tau) const {
  check_query(q);
  std::int64_t count = 0;
  const std::size_t n = entries_.size();
  const std::size_t chunk = static_cast<std::size_t>(cfg_.chunk_size);
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t end = std::min(n, start + chunk);
    for (std::size_t i = start; i < end; ++i)
      if (dot_f32(entries_[i].vector, q) > tau) ++count;
  }
  return count;
}

std::vector<std::int64_t> VectorStore::matches_above(const Eigen::VectorXf& q, double tau) const {
  check_query(q);
  std::vector<std::int64_t> out;
  for (const auto& e : entries_)
    if (dot_f32(e.vector, q) > tau) out.push_back(e.entry_id);
  return out;
}

std::int64_t VectorStore::insert(const Eigen::VectorXf& v, Decision decision, std::int64_t time) {
  if (v.size() != dim_) throw std::invalid_argument("insert dim mismatch");
  if (cfg_.capacity && static_cast<std::int64_t>(entries_.size()) >= *cfg_.capacity) evict_merge();
  StoreEntry e;
  e.entry_id = next_id_++;
  e.vector = v;
  e.decision = decision;
  e.last_match_time = time;
  e.merge_count = 1;
  entries_.push_back(std::move(e));
  ++total_inserted_;
  return entries_.back().entry_id;
}

std::int64_t VectorStore::evict_merge() {
  if (!cfg_.capacity || static_cast<std::int64_t>(entries_.size()) < *cfg_.capacity)
    throw std::logic_error("premature eviction");
  const std::size_t n = entries_.size();

  // pairwise similarity via one double matmul; grouping only compares
  // against the threshold, so blocked summation order is immaterial here
  Eigen::MatrixXd V(dim_, n);
  for (std::size_t i = 0; i < n; ++i) V.col(i) = entries_[i].vector.cast<double>();
  Eigen::MatrixXd S = V.transpose() * V;

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (S(i, j) > cfg_.merge_similarity) parent[find(i)] = find(j);

  std::vector<std::vector<std::size_t>> groups(n);
  for (std::size_t i = 0; i < n; ++i) groups[find(i)].push_back(i);

  bool merged_any = false;
  std::vector<StoreEntry> result;
  result.reserve(n);
  for (const auto& g : groups) {
    if (g.empty()) continue;
    if (g.size() == 1) {
      result.push_back(entries_[g[0]]);
      continue;
    }
    merged_any = true;
    StoreEntry rep;
    rep.entry_id = std::numeric_limits<std::int64_t>::max();
    rep.merge_count = 0;
    rep.last_match_time = std::numeric_limits<std::int64_t>::min();
    rep.decision = Decision::Allow;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim_);
    // members in ascending entry_id order for a reproducible mean
    std::vector<std::size_t> members = g;
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return entries_[a].entry_id < entries_[b].entry_id;
    });
    for (std::size_t m : members) {
      const StoreEntry& e = entries_[m];
      rep.entry_id = std::min(rep.entry_id, e.entry_id);
      rep.merge_count += e.merge_count;
      rep.last_match_time = std::max(rep.last_match_time, e.last_match_time);
      if (e.decision == Decision::Block) rep.decision = Decision::Block;
      mean += e.vector.cast<double>();
    }
    mean /= static_cast<double>(members.size());
    double nrm = mean.norm();
    if (nrm == 0.0) {
      mean.setZero();
      mean[0] = 1.0;
    } else {
      mean /= nrm;
    }
    rep.vector = mean.cast<float>();
    result.push_back(std::move(rep));
  }

  if (!merged_any) {
    // plain LRU: drop the stalest entry (ties toward the smallest id)
    std::size_t victim = 0;
    for (std::size_t i = 1; i < n; ++i) {
      const auto& a = entries_[i];
      const auto& b = entries_[victim];
      if (a.last_match_time < b.last_match_time ||
          (a.last_match_time == b.last_match_time && a.entry_id < b.entry_id))
        victim = i;
    }
    dropped_mass_ += entries_[victim].merge_count;
    entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(victim));
    return 1;
  }

  std::sort(result.begin(), result.end(),
            [](const StoreEntry& a, const StoreEntry& b) { return a.entry_id < b.entry_id; });
  std::int64_t removed = static_cast<std::int64_t>(n - result.size());
  entries_ = std::move(result);
  return removed;
}

void VectorStore::touch(std::int64_t entry_id, std::int64_t time) {
  for (auto& e : entries_) {
    if (e.entry_id == entry_id) {
      if (time < e.last_match_time) throw std::invalid_argument("touch time moved backward");
      e.last_match_time = time;
      return;
    }
  }
  throw std::invalid_argument("touch: unknown entry id");
}

const StoreEntry* VectorStore::find(std::int64_t entry_id) const {
  for (const auto& e : entries_)
    if (e.entry_id == entry_id) return &e;
  return nullptr;
}

std::int64_t VectorStore::live_mass() const {
  std::int64_t m = 0;
  for (const auto& e : entries_) m += e.merge_count;
  return m;
}

void VectorStore::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write("TWGS", 4);
  std::uint32_t version = 1;
  os.write(reinterpret_cast<const char*>(&version), sizeof(version));
  std::uint64_t count = entries_.size();
  os.write(reinterpret_cast<const char*>(&count), sizeof(count));
  std::uint32_t dim = static_cast<std::uint32_t>(dim_);
  os.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  for (const auto& e : entries_) {
    std::uint64_t id = static_cast<std::uint64_t>(e.entry_id);
    os.write(reinterpret_cast<const char*>(&id), sizeof(id));
    std::uint8_t dec = static_cast<std::uint8_t>(e.decision);
    os.write(reinterpret_cast<const char*>(&dec), sizeof(dec));
    os.write(reinterpret_cast<const char*>(&e.last_match_time), sizeof(e.last_match_time));
    std::uint64_t mc = static_cast<std::uint64_t>(e.merge_count);
    os.write(reinterpret_cast<const char*>(&mc), sizeof(mc));
    os.write(reinterpret_cast<const char*>(e.vector.data()),
             static_cast<std::streamsize>(sizeof(float) * e.vector.size()));
  }
  if (!os) throw std::runtime_error("short write: " + path);
}

VectorStore VectorStore::load(const std::string& path, StoreConfig cfg) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[4] = {};
  is.read(magic, 4);
  if (std::string_view(magic, 4) != "TWGS") throw std::runtime_error("bad snapshot magic");
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != 1) throw std::runtime_error("unsupported snapshot version");
  std::uint64_t count = 0;
  is.read(reinterpret_cast<char*>(&count), sizeof(count));
  std::uint32_t dim = 0;
  is.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  VectorStore store(static_cast<int>(dim), cfg);
  store.entries_.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    StoreEntry e;
    std::uint64_t id = 0;
    is.read(reinterpret_cast<char*>(&id), sizeof(id));
    e.entry_id = static_cast<std::int64_t>(id);
    std::uint8_t dec = 0;
    is.read(reinterpret_cast<char*>(&dec), sizeof(dec));
    e.decision = dec ? Decision::Block : Decision::Allow;
    is.read(reinterpret_cast<char*>(&e.last_match_time), sizeof(e.last_match_time));
    std::uint64_t mc = 0;
    is.read(reinterpret_cast<char*>(&mc), sizeof(mc));
    e.merge_count = static_cast<std::int64_t>(mc);
    e.vector.resize(dim);
    is.read(reinterpret_cast<char*>(e.vector.data()),
            static_cast<std::streamsize>(sizeof(float) * dim));
    store.entries_.push_back(std::move(e));
  }
  if (!is) throw std::runtime_error("short read: " + path);
  for (const auto& e : store.entries_) store.next_id_ = std::max(store.next_id_, e.entry_id + 1);
  store.total_inserted_ = store.live_mass();
  return store;
}

}  // namespace duogate
