#include "duogate/acl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace duogate {

double HeadGradient::norm() const {
  double s = w1.squaredNorm() + b1.squaredNorm() + w2.squaredNorm() + b2.squaredNorm();
  return std::sqrt(s);
}

void ContrastiveBatch::validate() const {
  std::set<std::int64_t> mal_labels;
  std::map<std::int64_t, int> mal_counts;
  bool has_benign = false;
  for (const auto& it : items) {
    if (it.label.kind == BatchLabel::Kind::Malicious) {
      mal_labels.insert(it.label.id);
      mal_counts[it.label.id]++;
    } else {
      has_benign = true;
    }
  }
  if (mal_labels.size() < 2) throw std::invalid_argument("batch needs two malicious intents");
  if (!has_benign) throw std::invalid_argument("batch needs a benign item");
  for (const auto& [id, n] : mal_counts)
    if (n < 2) throw std::invalid_argument("malicious item without a same-label partner");
}

namespace {

struct ForwardCache {
  Eigen::MatrixXd F;   // d_feat x B
  Eigen::MatrixXd A1;  // hidden x B
  Eigen::MatrixXd G;   // hidden x B
  Eigen::MatrixXd U;   // out x B
  std::vector<double> unorm;
  Eigen::MatrixXd Z;  // out x B, unit columns
};

ForwardCache forward_batch(const IntentHead& head, const ContrastiveBatch& batch) {
  const Eigen::Index B = static_cast<Eigen::Index>(batch.items.size());
  ForwardCache c;
  c.F.resize(head.in_dim(), B);
  for (Eigen::Index j = 0; j < B; ++j) {
    const auto& f = batch.items[static_cast<std::size_t>(j)].features.values;
    if (f.size() != head.in_dim()) throw std::invalid_argument("feature dim mismatch");
    c.F.col(j) = f;
  }
  c.A1 = (head.w1 * c.F).colwise() + head.b1;
  c.G = c.A1.unaryExpr([](double x) { return gelu(x); });
  c.U = (head.w2 * c.G).colwise() + head.b2;
  c.unorm.resize(static_cast<std::size_t>(B));
  c.Z.resize(head.out_dim(), B);
  for (Eigen::Index j = 0; j < B; ++j) {
    double n = c.U.col(j).norm();
    c.unorm[static_cast<std::size_t>(j)] = n;
    if (n == 0.0) {
      c.Z.col(j).setZero();
      c.Z(0, j) = 1.0;
    } else {
      c.Z.col(j) = c.U.col(j) / n;
    }
  }
  return c;
}

bool anchor_eligible(const BatchLabel& label, bool symmetric) {
  if (label.kind == BatchLabel::Kind::Malicious) return true;
  return symmetric && label.kind == BatchLabel::Kind::BenignIntent;
}

struct LossTerms {
  double total = 0.0;
  std::vector<double> per_anchor;    // aligned with items; 0 for non-anchors
  Eigen::MatrixXd dZ;                // out x B
};

LossTerms loss_on_z(const Eigen::MatrixXd& Z, const std::vector<BatchLabel>& labels,
                    double temperature, bool symmetric, bool want_grad) {
  if (temperature <= 0.0) throw std::invalid_argument("temperature must be positive");
  const Eigen::Index B = Z.cols();
  Eigen::MatrixXd logits = (Z.transpose() * Z) / temperature;

  std::vector<std::vector<Eigen::Index>> positives(static_cast<std::size_t>(B));
  std::vector<Eigen::Index> anchors;
  for (Eigen::Index i = 0; i < B; ++i) {
    if (!anchor_eligible(labels[static_cast<std::size_t>(i)], symmetric)) continue;
    for (Eigen::Index j = 0; j < B; ++j)
      if (j != i && labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)])
        positives[static_cast<std::size_t>(i)].push_back(j);
    if (!positives[static_cast<std::size_t>(i)].empty()) anchors.push_back(i);
  }
  if (anchors.empty()) throw std::invalid_argument("no anchors");

  LossTerms out;
  out.per_anchor.assign(static_cast<std::size_t>(B), 0.0);
  if (want_grad) out.dZ = Eigen::MatrixXd::Zero(Z.rows(), B);

  const double inv_a = 1.0 / static_cast<double>(anchors.size());
  for (Eigen::Index i : anchors) {
    const auto& pos = positives[static_cast<std::size_t>(i)];
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < B; ++j)
      if (j != i) m = std::max(m, logits(i, j));
    double denom = 0.0;
    for (Eigen::Index j = 0; j < B; ++j)
      if (j != i) denom += std::exp(logits(i, j) - m);
    double lse = m + std::log(denom);

    double li = 0.0;
    for (Eigen::Index p : pos) li += lse - logits(i, p);
    li /= static_cast<double>(pos.size());
    out.per_anchor[static_cast<std::size_t>(i)] = li;
    out.total += li * inv_a;

    if (want_grad) {
      const double inv_p = 1.0 / static_cast<double>(pos.size());
      for (Eigen::Index j = 0; j < B; ++j) {
        if (j == i) continue;
        double w = std::exp(logits(i, j) - lse);
        double coef = inv_a * w;
        bool is_pos = std::find(pos.begin(), pos.end(), j) != pos.end();
        if (is_pos) coef -= inv_a * inv_p;
        if (coef == 0.0) continue;
        out.dZ.col(i) += (coef / temperature) * Z.col(j);
        out.dZ.col(j) += (coef / temperature) * Z.col(i);
      }
    }
  }
  return out;
}

std::vector<BatchLabel> batch_labels(const ContrastiveBatch& batch) {
  std::vector<BatchLabel> labels;
  labels.reserve(batch.items.size());
  for (const auto& it : batch.items) labels.push_back(it.label);
  return labels;
}

}  // namespace

std::pair<double, std::vector<double>> acl_loss(const IntentHead& head,
                                                const ContrastiveBatch& batch, double temperature,
                                                bool symmetric) {
  if (batch.items.empty()) throw std::invalid_argument("no anchors");
  ForwardCache c = forward_batch(head, batch);
  LossTerms t = loss_on_z(c.Z, batch_labels(batch), temperature, symmetric, false);
  return {t.total, std::move(t.per_anchor)};
}

std::pair<double, HeadGradient> acl_gradient(const IntentHead& head, const ContrastiveBatch& batch,
                                             double temperature, bool symmetric) {
  if (batch.items.empty()) throw std::invalid_argument("no anchors");
  ForwardCache c = forward_batch(head, batch);
  LossTerms t = loss_on_z(c.Z, batch_labels(batch), temperature, symmetric, true);

  const Eigen::Index B = c.Z.cols();
  Eigen::MatrixXd dU(c.U.rows(), B);
  for (Eigen::Index j = 0; j < B; ++j) {
    double n = c.unorm[static_cast<std::size_t>(j)];
    if (n == 0.0) {
      dU.col(j).setZero();  // zero-vector guard has no useful gradient
      continue;
    }
    const auto z = c.Z.col(j);
    dU.col(j) = (t.dZ.col(j) - z * z.dot(t.dZ.col(j))) / n;
  }

  HeadGradient g;
  g.w2 = dU * c.G.transpose();
  g.b2 = dU.rowwise().sum();
  Eigen::MatrixXd dG = head.w2.transpose() * dU;
  Eigen::MatrixXd dA1 = dG.cwiseProduct(c.A1.unaryExpr([](double x) { return gelu_grad(x); }));
  g.w1 = dA1 * c.F.transpose();
  g.b1 = dA1.rowwise().sum();
  return {t.total, std::move(g)};
}

IntentDataset semantic_prune(const IntentDataset& dataset, const FrozenEncoder& frozen,
                             double threshold) {
  const std::size_t n = dataset.samples.size();
  IntentDataset out;
  out.split = dataset.split;
  out.synth_blob = dataset.synth_blob;
  if (n == 0) return out;

  const int d_feat = static_cast<int>(frozen.projection.cols());
  Eigen::MatrixXd F(d_feat, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    F.col(static_cast<Eigen::Index>(i)) = featurize(dataset.samples[i].text, d_feat).values;
  Eigen::MatrixXd S = encode_semantic_batch(frozen, F);

  // contrastive label for pruning: malicious intent id, or one shared benign id
  auto prune_label = [&](const Sample& s) -> std::int64_t {
    return s.role.malicious() ? s.role.intent_id : -1;
  };

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i) {
    bool drop = false;
    for (std::size_t k : kept) {
      if (prune_label(dataset.samples[k]) == prune_label(dataset.samples[i])) continue;
      double sim = S.col(static_cast<Eigen::Index>(k)).dot(S.col(static_cast<Eigen::Index>(i)));
      if (sim > threshold) {
        drop = true;
        break;
      }
    }
    if (!drop) kept.push_back(i);
  }
  for (std::size_t k : kept) out.samples.push_back(dataset.samples[k]);
  return out;
}

namespace {

struct Pool {
  std::vector<std::size_t> by_label_order;                 // all malicious indices
  std::map<std::int64_t, std::vector<std::size_t>> mal;    // intent -> item indices
  std::vector<std::size_t> benign_noise;                   // independents
  std::map<std::int64_t, std::vector<std::size_t>> ben;    // benign intent -> items
};

Pool group_pool(const std::vector<BatchLabel>& labels) {
  Pool p;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    switch (labels[i].kind) {
      case BatchLabel::Kind::Malicious:
        p.mal[labels[i].id].push_back(i);
        p.by_label_order.push_back(i);
        break;
      case BatchLabel::Kind::BenignIntent: p.ben[labels[i].id].push_back(i); break;
      case BatchLabel::Kind::BenignNoise: p.benign_noise.push_back(i); break;
    }
  }
  return p;
}

}  // namespace

std::vector<std::vector<std::size_t>> plan_epoch_batches(const std::vector<BatchLabel>& labels,
                                                         Rng& rng, bool symmetric) {
  Pool pool = group_pool(labels);
  if (pool.mal.size() < 2) throw std::invalid_argument("need two malicious intents");
  for (const auto& [id, members] : pool.mal)
    if (members.size() < 2) throw std::invalid_argument("malicious intent with a single member");
  std::size_t benign_total = pool.benign_noise.size();
  for (const auto& [id, members] : pool.ben) benign_total += members.size();
  if (benign_total == 0) throw std::invalid_argument("no benign samples");

  std::vector<std::size_t> queue = pool.by_label_order;
  rng.shuffle(queue);
  std::vector<bool> used(labels.size(), false);

  std::vector<std::size_t> noise_cycle = pool.benign_noise;
  rng.shuffle(noise_cycle);
  std::size_t noise_pos = 0;
  std::vector<std::int64_t> ben_intent_cycle;
  for (const auto& [id, members] : pool.ben) ben_intent_cycle.push_back(id);
  rng.shuffle(ben_intent_cycle);
  std::size_t ben_intent_pos = 0;

  auto take_group = [&](std::int64_t intent, std::size_t queue_from, std::size_t cap) {
    std::vector<std::size_t> grp;
    for (std::size_t q = queue_from; q < queue.size() && grp.size() < cap; ++q) {
      std::size_t idx = queue[q];
      if (!used[idx] && labels[idx].id == intent &&
          labels[idx].kind == BatchLabel::Kind::Malicious) {
        grp.push_back(idx);
        used[idx] = true;
      }
    }
    // top up from the full member list so every item has a partner
    for (std::size_t idx : pool.mal[intent]) {
      if (grp.size() >= 2) break;
      if (std::find(grp.begin(), grp.end(), idx) == grp.end()) grp.push_back(idx);
    }
    return grp;
  };

  std::vector<std::vector<std::size_t>> batches;
  for (;;) {
    std::size_t qa = queue.size();
    for (std::size_t q = 0; q < queue.size(); ++q)
      if (!used[queue[q]]) {
        qa = q;
        break;
      }
    if (qa == queue.size()) break;

    std::int64_t intent_a = labels[queue[qa]].id;
    std::vector<std::size_t> batch = take_group(intent_a, qa, 4);

    std::int64_t intent_b = -1;
    for (std::size_t q = qa + 1; q < queue.size(); ++q)
      if (!used[queue[q]] && labels[queue[q]].id != intent_a) {
        intent_b = labels[queue[q]].id;
        break;
      }
    if (intent_b < 0) {
      for (const auto& [id, members] : pool.mal)
        if (id != intent_a) {
          intent_b = id;
          break;
        }
    }
    for (std::size_t idx : take_group(intent_b, 0, 4)) batch.push_back(idx);

    // benign slots
    std::size_t benign_budget = 8;
    if (symmetric && !pool.ben.empty()) {
      for (int bi = 0; bi < 2 && benign_budget > 0; ++bi) {
        std::int64_t bid = ben_intent_cycle[ben_intent_pos % ben_intent_cycle.size()];
        ++ben_intent_pos;
        const auto& members = pool.ben[bid];
        for (std::size_t m = 0; m < members.size() && m < 2 && benign_budget > 0; ++m) {
          batch.push_back(members[m]);
          --benign_budget;
        }
      }
    }
    std::set<std::size_t> in_batch(batch.begin(), batch.end());
    std::size_t guard = 0;
    while (benign_budget > 0 && !noise_cycle.empty() && guard < 2 * noise_cycle.size()) {
      std::size_t idx = noise_cycle[noise_pos % noise_cycle.size()];
      ++noise_pos;
      ++guard;
      if (in_batch.insert(idx).second) {
        batch.push_back(idx);
        --benign_budget;
      }
    }
    if (benign_budget == 8) {
      // no benign picked yet (e.g. symmetric with empty noise pool): force one
      for (const auto& [id, members] : pool.ben) {
        if (!members.empty() && in_batch.insert(members[0]).second) {
          batch.push_back(members[0]);
          break;
        }
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

TrainResult train(const IntentDataset& dataset, const FrozenEncoder& frozen,
                  const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (cfg.learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");

  auto validate = [&](const IntentDataset& ds) {
    std::map<std::int64_t, int> members;
    std::size_t benign = 0;
    for (const auto& s : ds.samples) {
      if (s.role.kind == RoleKind::MaliciousFragment) members[s.role.intent_id]++;
      else if (s.role.kind == RoleKind::MaliciousAnchor && cfg.include_anchor)
        members[s.role.intent_id]++;
      else if (!s.role.malicious()) ++benign;
    }
    if (members.size() < 2)
      throw std::invalid_argument("dataset violates preconditions: need two malicious intents");
    for (const auto& [id, n] : members)
      if (n < 2)
        throw std::invalid_argument("dataset violates preconditions: intent with fewer than two members");
    if (benign == 0)
      throw std::invalid_argument("dataset violates preconditions: no benign samples");
  };
  validate(dataset);

  IntentDataset pruned = semantic_prune(dataset, frozen, cfg.prune_threshold);
  validate(pruned);

  const int d_feat = static_cast<int>(frozen.projection.cols());
  std::vector<std::size_t> pool_sample;  // pruned sample index per pool item
  std::vector<BatchLabel> pool_labels;
  for (std::size_t i = 0; i < pruned.samples.size(); ++i) {
    const Role& r = pruned.samples[i].role;
    if (r.kind == RoleKind::MaliciousAnchor && !cfg.include_anchor) continue;
    BatchLabel label;
    if (r.malicious()) label = {BatchLabel::Kind::Malicious, r.intent_id};
    else if (r.kind == RoleKind::BenignFragment) label = {BatchLabel::Kind::BenignIntent, r.intent_id};
    else label = {BatchLabel::Kind::BenignNoise, -1};
    pool_sample.push_back(i);
    pool_labels.push_back(label);
  }

  Eigen::MatrixXd F(d_feat, static_cast<Eigen::Index>(pool_sample.size()));
  for (std::size_t i = 0; i < pool_sample.size(); ++i)
    F.col(static_cast<Eigen::Index>(i)) = featurize(pruned.samples[pool_sample[i]].text, d_feat).values;

  TrainResult result;
  result.pruned_away = dataset.samples.size() - pruned.samples.size();
  result.head = make_intent_head(cfg.seed, d_feat, cfg.hidden_dim, cfg.out_dim);

  Rng plan_rng(cfg.seed ^ 0x5e11a9d8c3b7f021ULL);
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto batches = plan_epoch_batches(pool_labels, plan_rng, cfg.symmetric_cl);
    for (const auto& idxs : batches) {
      ContrastiveBatch batch;
      batch.items.reserve(idxs.size());
      for (std::size_t idx : idxs) {
        BatchItem item;
        item.features.values = F.col(static_cast<Eigen::Index>(idx));
        item.label = pool_labels[idx];
        batch.items.push_back(std::move(item));
      }
      auto [loss, grad] = acl_gradient(result.head, batch, cfg.temperature, cfg.symmetric_cl);
      result.head.w1 -= cfg.learning_rate * grad.w1;
      result.head.b1 -= cfg.learning_rate * grad.b1;
      result.head.w2 -= cfg.learning_rate * grad.w2;
      result.head.b2 -= cfg.learning_rate * grad.b2;
      result.steps.push_back({step++, loss, grad.norm()});
    }
  }
  return result;
}

std::string train_log_to_text(const std::vector<TrainStep>& steps) {
  std::string out = "step\tloss\tgrad_norm\n";
  char buf[96];
  for (const auto& s : steps) {
    std::snprintf(buf, sizeof(buf), "%d\t%.9g\t%.9g\n", s.step, s.loss, s.grad_norm);
    out += buf;
  }
  return out;
}

}  // namespace duogate
