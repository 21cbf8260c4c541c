#include "duogate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "duogate/vecstore.hpp"

namespace duogate {

ScoreReport score(const std::vector<Request>& stream, const std::vector<Verdict>& verdicts) {
  if (stream.size() != verdicts.size())
    throw std::invalid_argument("score: stream/verdict length mismatch");
  ScoreReport rep;
  std::map<std::int64_t, int> frag_ordinal;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const auto& role = stream[i].role;
    if (role.kind == RoleKind::MaliciousFragment || role.kind == RoleKind::MaliciousAnchor) {
      const int ordinal = ++frag_ordinal[role.intent_id];
      auto& first = rep.first_intercept[role.intent_id];
      if (!first && verdicts[i].decision == Decision::Block) first = ordinal;
    } else {
      ++rep.n_benign;
      if (verdicts[i].decision == Decision::Block) ++rep.n_benign_blocked;
    }
  }
  rep.n_malicious_intents = static_cast<int>(rep.first_intercept.size());
  double ordinal_sum = 0.0;
  for (const auto& [id, first] : rep.first_intercept) {
    (void)id;
    if (first) {
      ++rep.n_intercepted;
      ordinal_sum += *first;
    }
  }
  rep.recall = rep.n_malicious_intents == 0
                   ? 0.0
                   : static_cast<double>(rep.n_intercepted) / rep.n_malicious_intents;
  rep.fpr = rep.n_benign == 0 ? 0.0 : static_cast<double>(rep.n_benign_blocked) / rep.n_benign;
  rep.mean_first_intercept = rep.n_intercepted == 0 ? 0.0 : ordinal_sum / rep.n_intercepted;
  return rep;
}

std::vector<double> GridSpec::values() const {
  if (!(step > 0) || hi < lo) throw std::invalid_argument("bad threshold grid");
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double v = lo + i * step;
    if (v > hi + step * 1e-6) break;
    out.push_back(std::min(v, hi));
  }
  return out;
}

namespace {

// Threshold-independent replay tables. With unbounded stores and immediate
// write-back, the stored vectors at time i are exactly the embeddings of
// requests 0..i-1 regardless of thresholds, so one O(T^2) similarity pass
// supports every grid point.
struct ReplayTables {
  std::vector<double> best_sem_sim;       // top-1 semantic sim against the prefix
  std::vector<std::size_t> best_sem_arg;  // its index (earliest wins ties)
  std::vector<std::vector<double>> int_prefix_sorted;  // ascending sims per position
};

ReplayTables build_tables(const std::vector<EmbeddingPair>& embs) {
  const std::size_t n = embs.size();
  ReplayTables t;
  t.best_sem_sim.assign(n, 0.0);
  t.best_sem_arg.assign(n, 0);
  t.int_prefix_sorted.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    auto& sorted = t.int_prefix_sorted[i];
    sorted.reserve(i);
    for (std::size_t j = 0; j < i; ++j) {
      const double s = dot_f32(embs[i].semantic, embs[j].semantic);
      if (s > best) { best = s; arg = j; }
      sorted.push_back(dot_f32(embs[i].intent, embs[j].intent));
    }
    std::sort(sorted.begin(), sorted.end());
    t.best_sem_sim[i] = best;
    t.best_sem_arg[i] = arg;
  }
  return t;
}

std::vector<Verdict> replay_decisions(const ReplayTables& t, double tau_sem, double tau_int,
                                      int k, bool stage1_enabled) {
  const std::size_t n = t.best_sem_sim.size();
  std::vector<Verdict> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Verdict v;
    if (stage1_enabled && i > 0 && t.best_sem_sim[i] > tau_sem) {
      v.decision = out[t.best_sem_arg[i]].decision;
      v.stage = Stage::Inherited;
    } else if (i == 0) {
      v.decision = Decision::Allow;
      v.stage = Stage::EmptyHistory;
    } else {
      const auto& sims = t.int_prefix_sorted[i];
      const auto over = sims.end() - std::upper_bound(sims.begin(), sims.end(), tau_int);
      if (over >= k) {
        v.decision = Decision::Block;
        v.stage = Stage::IntentBlocked;
      } else {
        v.decision = Decision::Allow;
        v.stage = Stage::IntentPassed;
      }
    }
    out[i] = v;
  }
  return out;
}

bool replay_eligible(const EngineFactory& f) {
  return f.write_lag == 0 && !f.sem_cfg.capacity && !f.int_cfg.capacity;
}

// recall desc, then tau_int desc, then tau_sem desc.
bool better_feasible(const CalibrationPoint& a, const CalibrationPoint& b) {
  if (a.recall != b.recall) return a.recall > b.recall;
  if (a.tau_int != b.tau_int) return a.tau_int > b.tau_int;
  return a.tau_sem > b.tau_sem;
}

// fpr asc, then recall desc, then higher thresholds.
bool better_infeasible(const CalibrationPoint& a, const CalibrationPoint& b) {
  if (a.fpr != b.fpr) return a.fpr < b.fpr;
  if (a.recall != b.recall) return a.recall > b.recall;
  if (a.tau_int != b.tau_int) return a.tau_int > b.tau_int;
  return a.tau_sem > b.tau_sem;
}

}  // namespace

CalibrationResult calibrate(const EngineFactory& factory, const std::vector<Request>& stream,
                            const GridSpec& sem_grid, const GridSpec& int_grid,
                            double fpr_budget) {
  if (stream.empty()) throw std::invalid_argument("calibrate: empty stream");
  const auto sem_values = sem_grid.values();
  const auto int_values = int_grid.values();

  const auto embs = embed_stream(factory.frozen, factory.head, stream);

  std::optional<ReplayTables> tables;
  if (replay_eligible(factory)) tables = build_tables(embs);

  CalibrationResult result;
  std::optional<CalibrationPoint> best_feasible, best_infeasible;
  for (const double ts : sem_values) {
    for (const double ti : int_values) {
      std::vector<Verdict> verdicts;
      if (tables) {
        verdicts = replay_decisions(*tables, ts, ti, factory.k, factory.stage1_enabled);
      } else {
        auto eng = factory.make(ts, ti);
        verdicts = run_stream(eng, stream, embs);
      }
      const auto rep = score(stream, verdicts);
      const CalibrationPoint pt{ts, ti, rep.recall, rep.fpr};
      ++result.n_evaluated;
      if (pt.fpr <= fpr_budget) {
        if (!best_feasible || better_feasible(pt, *best_feasible)) best_feasible = pt;
      } else if (!best_infeasible || better_infeasible(pt, *best_infeasible)) {
        best_infeasible = pt;
      }
    }
  }
  if (best_feasible) {
    result.best = *best_feasible;
    result.feasible = true;
  } else {
    result.best = *best_infeasible;
    result.feasible = false;
  }
  return result;
}

std::vector<CalibrationPoint> recall_fpr_curve(const EngineFactory& factory,
                                               const std::vector<Request>& stream,
                                               double tau_sem,
                                               const std::vector<double>& tau_ints) {
  if (stream.empty()) throw std::invalid_argument("recall_fpr_curve: empty stream");
  const auto embs = embed_stream(factory.frozen, factory.head, stream);
  std::optional<ReplayTables> tables;
  if (replay_eligible(factory)) tables = build_tables(embs);

  std::vector<CalibrationPoint> curve;
  curve.reserve(tau_ints.size());
  for (const double ti : tau_ints) {
    std::vector<Verdict> verdicts;
    if (tables) {
      verdicts = replay_decisions(*tables, tau_sem, ti, factory.k, factory.stage1_enabled);
    } else {
      auto eng = factory.make(tau_sem, ti);
      verdicts = run_stream(eng, stream, embs);
    }
    const auto rep = score(stream, verdicts);
    curve.push_back({tau_sem, ti, rep.recall, rep.fpr});
  }
  return curve;
}

double curve_auc(const std::vector<CalibrationPoint>& curve, bool* degenerate) {
  if (curve.empty()) throw std::invalid_argument("curve_auc: empty curve");
  // Dedupe by FPR keeping the best recall, then integrate over the span.
  std::vector<CalibrationPoint> pts = curve;
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.fpr != b.fpr ? a.fpr < b.fpr : a.recall > b.recall;
  });
  std::vector<CalibrationPoint> dedup;
  for (const auto& p : pts)
    if (dedup.empty() || p.fpr != dedup.back().fpr) dedup.push_back(p);

  const double span = dedup.back().fpr - dedup.front().fpr;
  if (span < 1e-12) {
    if (degenerate) *degenerate = true;
    double mean = 0.0;
    for (const auto& p : dedup) mean += p.recall;
    return mean / static_cast<double>(dedup.size());
  }
  if (degenerate) *degenerate = false;
  double area = 0.0;
  for (std::size_t i = 1; i < dedup.size(); ++i)
    area += 0.5 * (dedup[i].recall + dedup[i - 1].recall) * (dedup[i].fpr - dedup[i - 1].fpr);
  return area / span;
}

double relative_auc(const std::vector<CalibrationPoint>& curve,
                    const std::vector<CalibrationPoint>& reference) {
  const double ref = curve_auc(reference);
  if (!(ref > 0)) throw std::invalid_argument("relative_auc: reference curve has zero area");
  return curve_auc(curve) / ref;
}

}  // namespace duogate
