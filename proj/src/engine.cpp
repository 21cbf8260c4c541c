#include "duogate/engine.hpp"

#include <stdexcept>

#include "duogate/featurizer.hpp"

namespace duogate {

Engine::Engine(FrozenEncoder frozen, IntentHead head, StoreConfig sem_cfg, StoreConfig int_cfg,
               EngineConfig cfg)
    : frozen_(std::move(frozen)),
      head_(std::move(head)),
      cfg_(cfg),
      sem_store_(static_cast<int>(frozen_.projection.rows()), sem_cfg),
      int_store_(head_.out_dim(), int_cfg) {
  if (head_.in_dim() != frozen_.projection.cols())
    throw std::invalid_argument("encoder feature dims disagree");
  if (cfg.write_lag < 0) throw std::invalid_argument("write_lag must be >= 0");
}

EmbeddingPair Engine::embed(const std::string& text) const {
  FeatureVector f = featurize(text, static_cast<int>(frozen_.projection.cols()));
  EmbeddingPair e;
  e.semantic = encode_semantic(frozen_, f).cast<float>();
  e.intent = encode_intent(head_, f).cast<float>();
  return e;
}

void Engine::flush_visible(std::int64_t now) {
  while (!pending_.empty() && now - pending_.front().time > cfg_.write_lag) {
    const PendingWrite& w = pending_.front();
    std::int64_t sem_id = sem_store_.insert(w.emb.semantic, w.decision, w.time);
    int_store_.insert(w.emb.intent, w.decision, w.time);
    (void)sem_id;
    pending_.pop_front();
  }
}

void Engine::flush_pending() {
  while (!pending_.empty()) {
    const PendingWrite& w = pending_.front();
    sem_store_.insert(w.emb.semantic, w.decision, w.time);
    int_store_.insert(w.emb.intent, w.decision, w.time);
    pending_.pop_front();
  }
}

Verdict Engine::adjudicate(const Request& request) { return adjudicate(request, embed(request.text)); }

Verdict Engine::adjudicate(const Request& request, const EmbeddingPair& emb) {
  if (request.arrival_index <= last_arrival_) throw std::invalid_argument("causality violation");
  last_arrival_ = request.arrival_index;
  const std::int64_t now = request.arrival_index;
  flush_visible(now);

  Verdict v;
  bool decided = false;

  if (cfg_.stage1_enabled) {
    auto [sim, id] = sem_store_.query_top1(emb.semantic);
    if (id && sim > cfg_.thresholds.tau_sem) {
      const StoreEntry* hit = sem_store_.find(*id);
      v.decision = hit->decision;
      v.stage = Stage::Inherited;
      v.matched_entry_id = *id;
      v.similarity = sim;
      sem_store_.touch(*id, now);
      decided = true;
    }
  }

  if (!decided) {
    if (sem_store_.size() == 0 && int_store_.size() == 0) {
      v.decision = Decision::Allow;
      v.stage = Stage::EmptyHistory;
    } else {
      auto hits = int_store_.matches_above(emb.intent, cfg_.thresholds.tau_int);
      if (static_cast<std::int64_t>(hits.size()) >= cfg_.thresholds.k) {
        v.decision = Decision::Block;
        v.stage = Stage::IntentBlocked;
        auto [top_sim, top_id] = int_store_.query_top1(emb.intent);
        v.matched_entry_id = top_id;
        v.similarity = top_sim;
        for (std::int64_t id : hits) int_store_.touch(id, now);
      } else {
        v.decision = Decision::Allow;
        v.stage = Stage::IntentPassed;
      }
    }
  }

  if (cfg_.write_lag == 0) {
    std::int64_t sem_id = sem_store_.insert(emb.semantic, v.decision, now);
    int_store_.insert(emb.intent, v.decision, now);
    verdict_log_[sem_id] = v;
  } else {
    pending_.push_back({now, emb, v.decision});
  }
  return v;
}

std::vector<Verdict> run_stream(Engine& engine, const std::vector<Request>& stream) {
  std::vector<Verdict> out;
  out.reserve(stream.size());
  for (const auto& r : stream) out.push_back(engine.adjudicate(r));
  engine.flush_pending();
  return out;
}

std::vector<Verdict> run_stream(Engine& engine, const std::vector<Request>& stream,
                                const std::vector<EmbeddingPair>& embeddings) {
  if (stream.size() != embeddings.size()) throw std::invalid_argument("stream/embedding length mismatch");
  std::vector<Verdict> out;
  out.reserve(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) out.push_back(engine.adjudicate(stream[i], embeddings[i]));
  engine.flush_pending();
  return out;
}

std::vector<EmbeddingPair> embed_stream(const FrozenEncoder& frozen, const IntentHead& head,
                                        const std::vector<Request>& stream) {
  const int d_feat = static_cast<int>(frozen.projection.cols());
  Eigen::MatrixXd F(d_feat, static_cast<Eigen::Index>(stream.size()));
  for (std::size_t i = 0; i < stream.size(); ++i)
    F.col(static_cast<Eigen::Index>(i)) = featurize(stream[i].text, d_feat).values;
  Eigen::MatrixXd S = encode_semantic_batch(frozen, F);
  Eigen::MatrixXd Z = encode_intent_batch(head, F);
  std::vector<EmbeddingPair> out(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) {
    out[i].semantic = S.col(static_cast<Eigen::Index>(i)).cast<float>();
    out[i].intent = Z.col(static_cast<Eigen::Index>(i)).cast<float>();
  }
  return out;
}

Engine EngineFactory::make(double tau_sem, double tau_int) const {
  EngineConfig cfg;
  cfg.thresholds.tau_sem = tau_sem;
  cfg.thresholds.tau_int = tau_int;
  cfg.thresholds.k = k;
  cfg.stage1_enabled = stage1_enabled;
  cfg.write_lag = write_lag;
  return Engine(frozen, head, sem_cfg, int_cfg, cfg);
}

}  // namespace duogate
