#pragma once

#include <deque>
#include <map>
#include <vector>

#include "duogate/core.hpp"
#include "duogate/encoders.hpp"
#include "duogate/vecstore.hpp"

namespace duogate {

struct EngineConfig {
  Thresholds thresholds;
  bool stage1_enabled = true;
  // Relaxed visibility: the write-back of request u becomes visible to the
  // query of request t only when t - u > write_lag. 0 = sequentially
  // consistent, which is what every correctness test runs with.
  int write_lag = 0;
};

// Two-stage stateful gate. Stage 1 looks for a near-duplicate in the semantic
// store and inherits that entry's stored decision. Stage 2 blocks when at
// least k intent-store entries sit strictly above tau_int. Both embeddings
// are written back after every verdict, inherited ones included.
class Engine {
 public:
  Engine(FrozenEncoder frozen, IntentHead head, StoreConfig sem_cfg, StoreConfig int_cfg,
         EngineConfig cfg);

  EmbeddingPair embed(const std::string& text) const;

  // Requests must arrive with strictly increasing arrival_index; anything
  // else throws std::invalid_argument("causality violation").
  Verdict adjudicate(const Request& request);
  Verdict adjudicate(const Request& request, const EmbeddingPair& emb);

  const VectorStore& semantic_store() const { return sem_store_; }
  const VectorStore& intent_store() const { return int_store_; }
  VectorStore& mutable_semantic_store() { return sem_store_; }
  VectorStore& mutable_intent_store() { return int_store_; }
  const EngineConfig& config() const { return cfg_; }
  const FrozenEncoder& frozen() const { return frozen_; }
  const IntentHead& head() const { return head_; }
  const std::map<std::int64_t, Verdict>& verdict_log() const { return verdict_log_; }
  std::int64_t last_arrival() const { return last_arrival_; }

  // Applies every pending write-back (relaxed mode only does anything here).
  void flush_pending();

 private:
  struct PendingWrite {
    std::int64_t time;
    EmbeddingPair emb;
    Decision decision;
  };
  void flush_visible(std::int64_t now);

  FrozenEncoder frozen_;
  IntentHead head_;
  EngineConfig cfg_;
  VectorStore sem_store_;
  VectorStore int_store_;
  std::map<std::int64_t, Verdict> verdict_log_;  // semantic entry id -> verdict
  std::deque<PendingWrite> pending_;
  std::int64_t last_arrival_ = 0;
};

std::vector<Verdict> run_stream(Engine& engine, const std::vector<Request>& stream);
std::vector<Verdict> run_stream(Engine& engine, const std::vector<Request>& stream,
                                const std::vector<EmbeddingPair>& embeddings);

// Embeds a whole stream at once (batched matrix products).
std::vector<EmbeddingPair> embed_stream(const FrozenEncoder& frozen, const IntentHead& head,
                                        const std::vector<Request>& stream);

// Everything needed to spin up fresh engines that differ only in thresholds.
struct EngineFactory {
  FrozenEncoder frozen;
  IntentHead head;
  StoreConfig sem_cfg;
  StoreConfig int_cfg;
  int k = 1;
  bool stage1_enabled = true;
  int write_lag = 0;

  Engine make(double tau_sem, double tau_int) const;
};

}  // namespace duogate
