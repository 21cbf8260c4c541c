#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <utility>
#include <vector>

#include "duogate/core.hpp"
#include "duogate/encoders.hpp"
#include "duogate/featurizer.hpp"
#include "duogate/rng.hpp"

namespace duogate {

// Contrastive label of one batch item. Malicious items cluster per intent;
// benign traffic participates as negatives only (unless the symmetric
// ablation is on, in which case labeled benign intents also anchor).
struct BatchLabel {
  enum class Kind { Malicious, BenignIntent, BenignNoise };
  Kind kind = Kind::BenignNoise;
  std::int64_t id = -1;
  bool operator==(const BatchLabel&) const = default;
};

struct BatchItem {
  FeatureVector features;
  BatchLabel label;
};

struct ContrastiveBatch {
  std::vector<BatchItem> items;
  // >= 2 distinct malicious labels, >= 1 benign item, and every malicious
  // item has at least one same-label partner. Throws on violation.
  void validate() const;
};

struct TrainConfig {
  double temperature = 0.1;
  double learning_rate = 0.05;
  int epochs = 3;
  double prune_threshold = 0.95;
  std::uint64_t seed = 1;
  bool include_anchor = true;  // off: anchors excluded from training data
  bool symmetric_cl = false;   // on: every labeled item anchors (ablation)
  int hidden_dim = kDefaultHiddenDim;
  int out_dim = kDefaultIntentDim;
};

struct HeadGradient {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
  double norm() const;
};

// Anchored contrastive loss. Per anchor i with positives P(i):
//   L_i = -(1/|P(i)|) sum_{p in P(i)} log( exp(z_i.z_p/t) / sum_{j != i} exp(z_i.z_j/t) )
// where the denominator runs over every other batch item, same-label ones
// included. Total is the mean of L_i over anchors. Anchors are malicious
// items with a nonempty P(i); with symmetric=true every labeled item with a
// partner anchors. Log-sum-exp is evaluated with max subtraction.
// Throws std::invalid_argument("no anchors") when no anchor qualifies.
// Returns (total, per-anchor losses in item order).
std::pair<double, std::vector<double>> acl_loss(const IntentHead& head,
                                                const ContrastiveBatch& batch, double temperature,
                                                bool symmetric = false);

// Analytic gradient of the same objective through the output normalization,
// GELU and both linear layers. Returns (loss, gradient).
std::pair<double, HeadGradient> acl_gradient(const IntentHead& head, const ContrastiveBatch& batch,
                                             double temperature, bool symmetric = false);

// Greedy scan in dataset order: drops a sample when an already-kept sample
// with a different contrastive label sits above `threshold` frozen-encoder
// cosine. Same-label near-duplicates are kept.
IntentDataset semantic_prune(const IntentDataset& dataset, const FrozenEncoder& frozen,
                             double threshold);

// Deterministic epoch plan over a labeled pool: each batch takes two intents
// x up to 4 members plus 8 benign items; every malicious (pool) sample is
// consumed at least once per epoch. Returned batches are item-index lists.
std::vector<std::vector<std::size_t>> plan_epoch_batches(const std::vector<BatchLabel>& labels,
                                                         Rng& rng, bool symmetric);

struct TrainStep {
  int step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  IntentHead head;
  std::vector<TrainStep> steps;
  std::size_t pruned_away = 0;  // samples removed by semantic_prune
};

// Full pipeline: validate, prune, then cfg.epochs passes of plain SGD at a
// fixed learning rate. Deterministic for a fixed seed.
TrainResult train(const IntentDataset& dataset, const FrozenEncoder& frozen,
                  const TrainConfig& cfg);

std::string train_log_to_text(const std::vector<TrainStep>& steps);

}  // namespace duogate
