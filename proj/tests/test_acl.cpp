#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "duogate/acl.hpp"
#include "duogate/encoders.hpp"
#include "duogate/rng.hpp"

using namespace duogate;

namespace {

constexpr int kFeat = 24;
constexpr int kHidden = 16;
constexpr int kOut = 8;

BatchItem random_item(Rng& rng, BatchLabel label) {
  Eigen::VectorXd v(kFeat);
  for (int i = 0; i < kFeat; ++i) v[i] = rng.normal();
  v.normalize();
  return BatchItem{FeatureVector{v}, label};
}

// 3 malicious intents x 3 members, 2 benign-intent pairs, 3 noise items.
ContrastiveBatch random_batch(std::uint64_t seed) {
  Rng rng(seed);
  ContrastiveBatch b;
  for (std::int64_t m = 0; m < 3; ++m)
    for (int j = 0; j < 3; ++j) b.items.push_back(random_item(rng, {BatchLabel::Kind::Malicious, m}));
  for (std::int64_t g = 0; g < 2; ++g)
    for (int j = 0; j < 2; ++j)
      b.items.push_back(random_item(rng, {BatchLabel::Kind::BenignIntent, 100 + g}));
  for (int j = 0; j < 3; ++j) b.items.push_back(random_item(rng, {BatchLabel::Kind::BenignNoise, -1}));
  rng.shuffle(b.items);
  return b;
}

bool is_anchor_label(const BatchLabel& label, bool symmetric) {
  if (label.kind == BatchLabel::Kind::Malicious) return true;
  return symmetric && label.kind == BatchLabel::Kind::BenignIntent;
}

// Straight-line long-double evaluation of the anchored objective; no
// max-subtraction, denominators summed term by term. The per-item vector
// mirrors the product layout: one slot per batch item, zero for non-anchors.
std::pair<long double, std::vector<long double>> ref_loss(const IntentHead& head,
                                                          const ContrastiveBatch& batch,
                                                          double temperature, bool symmetric) {
  const std::size_t n = batch.items.size();
  std::vector<Eigen::VectorXd> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = encode_intent(head, batch.items[i].features);
  std::vector<long double> per(n, 0.0L);
  long double total = 0.0L;
  int n_anchors = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_anchor_label(batch.items[i].label, symmetric)) continue;
    std::vector<std::size_t> pos;
    for (std::size_t p = 0; p < n; ++p)
      if (p != i && batch.items[p].label == batch.items[i].label) pos.push_back(p);
    if (pos.empty()) continue;
    long double denom = 0.0L;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) denom += expl(static_cast<long double>(z[i].dot(z[j]) / temperature));
    long double li = 0.0L;
    for (std::size_t p : pos)
      li += -logl(expl(static_cast<long double>(z[i].dot(z[p]) / temperature)) / denom);
    per[i] = li / static_cast<long double>(pos.size());
    total += per[i];
    ++n_anchors;
  }
  REQUIRE(n_anchors > 0);
  return {total / n_anchors, per};
}

}  // namespace

TEST_CASE("loss matches a straight-line independent evaluation") {
  IntentHead head = make_intent_head(3, kFeat, kHidden, kOut);
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    ContrastiveBatch batch = random_batch(seed);
    bool symmetric = (seed % 2 == 0);
    auto [loss, per_anchor] = acl_loss(head, batch, 0.1, symmetric);
    auto [want, want_per] = ref_loss(head, batch, 0.1, symmetric);
    CHECK(std::abs(loss - static_cast<double>(want)) <=
          1e-10 * std::max(1.0, std::abs(static_cast<double>(want))));
    REQUIRE(per_anchor.size() == batch.items.size());
    for (std::size_t i = 0; i < per_anchor.size(); ++i) {
      double w = static_cast<double>(want_per[i]);
      CHECK(std::abs(per_anchor[i] - w) <= 1e-10 * std::max(1.0, std::abs(w)));
    }
  }
}

TEST_CASE("analytic gradient matches central finite differences") {
  auto t0 = std::chrono::steady_clock::now();
  const double eps = 1e-5;
  double max_rel = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    IntentHead head = make_intent_head(seed, kFeat, kHidden, kOut);
    ContrastiveBatch batch = random_batch(1000 + seed);
    bool symmetric = (seed % 2 == 0);
    auto [loss, grad] = acl_gradient(head, batch, 0.1, symmetric);
    CHECK(std::abs(loss - acl_loss(head, batch, 0.1, symmetric).first) <= 1e-12);
    auto probe = [&](double& param, double analytic) {
      double save = param;
      param = save + eps;
      double lp = acl_loss(head, batch, 0.1, symmetric).first;
      param = save - eps;
      double lm = acl_loss(head, batch, 0.1, symmetric).first;
      param = save;
      double fd = (lp - lm) / (2.0 * eps);
      double rel = std::abs(fd - analytic) / std::max(1e-8, std::abs(fd) + std::abs(analytic));
      max_rel = std::max(max_rel, rel);
    };
    for (int i = 0; i < head.w1.rows(); ++i)
      for (int j = 0; j < head.w1.cols(); ++j) probe(head.w1(i, j), grad.w1(i, j));
    for (int i = 0; i < head.b1.size(); ++i) probe(head.b1[i], grad.b1[i]);
    for (int i = 0; i < head.w2.rows(); ++i)
      for (int j = 0; j < head.w2.cols(); ++j) probe(head.w2(i, j), grad.w2(i, j));
    for (int i = 0; i < head.b2.size(); ++i) probe(head.b2[i], grad.b2[i]);
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(max_rel <= 1e-4);
  CHECK(secs < 10.0);
}

TEST_CASE("batch validation rejects degenerate compositions") {
  Rng rng(9);
  ContrastiveBatch ok = random_batch(1);
  CHECK_NOTHROW(ok.validate());

  ContrastiveBatch one_intent;
  for (int j = 0; j < 3; ++j) one_intent.items.push_back(random_item(rng, {BatchLabel::Kind::Malicious, 0}));
  one_intent.items.push_back(random_item(rng, {BatchLabel::Kind::BenignNoise, -1}));
  CHECK_THROWS_AS(one_intent.validate(), std::invalid_argument);

  ContrastiveBatch no_benign;
  for (std::int64_t m = 0; m < 2; ++m)
    for (int j = 0; j < 2; ++j) no_benign.items.push_back(random_item(rng, {BatchLabel::Kind::Malicious, m}));
  CHECK_THROWS_AS(no_benign.validate(), std::invalid_argument);

  ContrastiveBatch lonely = random_batch(2);
  lonely.items.push_back(random_item(rng, {BatchLabel::Kind::Malicious, 77}));  // no partner
  CHECK_THROWS_AS(lonely.validate(), std::invalid_argument);
}

TEST_CASE("loss requires at least one anchor") {
  Rng rng(11);
  ContrastiveBatch b;
  for (int j = 0; j < 2; ++j) b.items.push_back(random_item(rng, {BatchLabel::Kind::BenignIntent, 5}));
  for (int j = 0; j < 2; ++j) b.items.push_back(random_item(rng, {BatchLabel::Kind::BenignNoise, -1}));
  IntentHead head = make_intent_head(1, kFeat, kHidden, kOut);
  CHECK_THROWS_WITH_AS(acl_loss(head, b, 0.1, false), "no anchors", std::invalid_argument);
  // the same items anchor under the symmetric variant
  CHECK_NOTHROW(acl_loss(head, b, 0.1, true));
}

TEST_CASE("semantic prune drops cross-label near-duplicates only") {
  IntentDataset ds;
  ds.split = "train";
  ds.synth_blob = "blob";
  ds.samples = {
      {"alpha beta gamma", {RoleKind::MaliciousFragment, 0}},
      {"alpha beta gamma", {RoleKind::MaliciousFragment, 1}},  // cross-label duplicate
      {"alpha beta gamma", {RoleKind::MaliciousFragment, 0}},  // same-label duplicate
      {"zulu yankee xray", {RoleKind::BenignIndependent, -1}},
      {"zulu yankee xray", {RoleKind::BenignIndependent, -1}},  // same-label duplicate
      {"zulu yankee xray", {RoleKind::BenignFragment, 5}},      // benign roles share one label
      {"totally different words", {RoleKind::MaliciousFragment, 1}},
      {"alpha beta gamma", {RoleKind::BenignIndependent, -1}},  // benign dup of malicious text
  };
  FrozenEncoder frozen = make_frozen_encoder(7, 32, 64);
  IntentDataset pruned = semantic_prune(ds, frozen, 0.95);
  REQUIRE(pruned.samples.size() == 6);
  CHECK(pruned.samples[0] == ds.samples[0]);
  CHECK(pruned.samples[1] == ds.samples[2]);
  CHECK(pruned.samples[2] == ds.samples[3]);
  CHECK(pruned.samples[3] == ds.samples[4]);
  CHECK(pruned.samples[4] == ds.samples[5]);
  CHECK(pruned.samples[5] == ds.samples[6]);
  CHECK(pruned.split == "train");
  CHECK(pruned.synth_blob == "blob");
}

TEST_CASE("epoch plan covers every malicious sample with bounded batches") {
  std::vector<BatchLabel> labels;
  for (std::int64_t m = 0; m < 3; ++m)
    for (int j = 0; j < 2 + static_cast<int>(m); ++j) labels.push_back({BatchLabel::Kind::Malicious, m});
  for (std::int64_t g = 0; g < 2; ++g)
    for (int j = 0; j < 2; ++j) labels.push_back({BatchLabel::Kind::BenignIntent, 50 + g});
  for (int j = 0; j < 5; ++j) labels.push_back({BatchLabel::Kind::BenignNoise, -1});

  Rng rng(3);
  auto batches = plan_epoch_batches(labels, rng, false);
  REQUIRE(!batches.empty());
  std::set<std::size_t> covered;
  for (const auto& batch : batches) {
    std::set<std::int64_t> intents;
    std::map<std::int64_t, int> per_intent;
    int benign = 0;
    std::set<std::size_t> uniq(batch.begin(), batch.end());
    CHECK(uniq.size() == batch.size());
    for (std::size_t idx : batch) {
      REQUIRE(idx < labels.size());
      const BatchLabel& lab = labels[idx];
      if (lab.kind == BatchLabel::Kind::Malicious) {
        intents.insert(lab.id);
        ++per_intent[lab.id];
        covered.insert(idx);
      } else {
        ++benign;
      }
    }
    CHECK(intents.size() <= 2);
    CHECK(intents.size() >= 1);
    for (const auto& [id, cnt] : per_intent) CHECK(cnt <= 4);
    CHECK(benign >= 1);
    CHECK(benign <= 8);
  }
  std::size_t n_malicious = 0;
  for (const auto& lab : labels)
    if (lab.kind == BatchLabel::Kind::Malicious) ++n_malicious;
  CHECK(covered.size() == n_malicious);

  // deterministic for a fixed seed
  Rng rng2(3);
  CHECK(plan_epoch_batches(labels, rng2, false) == batches);
}

namespace {

IntentDataset tiny_corpus() {
  IntentDataset ds;
  ds.split = "train";
  const char* mal[4][3] = {
      {"bada bidi bodo ruru", "bada bodo lima", "bidi bodo bada sese"},
      {"cace cici coco tete", "cace coco vuvu", "cici coco cace wuwu"},
      {"dade didi dodo lulu", "dade dodo mimi", "didi dodo dade nunu"},
      {"babe bibi bobo pupu", "babe bobo rara", "bibi bobo babe syse"},
  };
  for (std::int64_t m = 0; m < 4; ++m) {
    ds.samples.push_back({std::string(mal[m][0]) + " extra", {RoleKind::MaliciousAnchor, m}});
    for (int j = 0; j < 3; ++j) ds.samples.push_back({mal[m][j], {RoleKind::MaliciousFragment, m}});
  }
  const char* ben[3] = {"fafa gigi haka", "fefe gogo hyky", "fifi gaga hoko"};
  for (std::int64_t b = 0; b < 3; ++b)
    for (int j = 0; j < 2; ++j)
      ds.samples.push_back({std::string(ben[b]) + (j ? " lulu" : " vyvy"), {RoleKind::BenignFragment, 10 + b}});
  const char* ind[] = {"lala mumu nunu", "papa rese tata", "vyvy wawa zuzu", "lilo mame nyne",
                       "pese roro tutu", "vovo wywy zaza"};
  for (const char* t : ind) ds.samples.push_back({t, {RoleKind::BenignIndependent, -1}});
  return ds;
}

}  // namespace

TEST_CASE("training lowers the loss deterministically") {
  IntentDataset ds = tiny_corpus();
  FrozenEncoder frozen = make_frozen_encoder(7, 32, 256);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.hidden_dim = 32;
  cfg.out_dim = 16;
  cfg.seed = 5;
  TrainResult a = train(ds, frozen, cfg);
  REQUIRE(!a.steps.empty());
  CHECK(a.steps.back().loss < a.steps.front().loss);
  CHECK(a.head.in_dim() == 256);
  CHECK(a.head.hidden_dim() == 32);
  CHECK(a.head.out_dim() == 16);
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].step == static_cast<int>(i));
    CHECK(std::isfinite(a.steps[i].loss));
    CHECK(a.steps[i].grad_norm >= 0.0);
  }

  TrainResult b = train(ds, frozen, cfg);
  REQUIRE(b.steps.size() == a.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) CHECK(a.steps[i].loss == b.steps[i].loss);
  CHECK(a.head.w1 == b.head.w1);
  CHECK(a.head.b1 == b.head.b1);
  CHECK(a.head.w2 == b.head.w2);
  CHECK(a.head.b2 == b.head.b2);

  // ablation switches actually change the outcome
  TrainConfig sym = cfg;
  sym.symmetric_cl = true;
  CHECK(train(ds, frozen, sym).head.w1 != a.head.w1);
  TrainConfig noanchor = cfg;
  noanchor.include_anchor = false;
  CHECK(train(ds, frozen, noanchor).head.w1 != a.head.w1);
}

TEST_CASE("train log is tab-separated with one row per step") {
  IntentDataset ds = tiny_corpus();
  FrozenEncoder frozen = make_frozen_encoder(7, 32, 256);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.hidden_dim = 16;
  cfg.out_dim = 8;
  TrainResult r = train(ds, frozen, cfg);
  std::string log = train_log_to_text(r.steps);
  CHECK(log.rfind("step\tloss\tgrad_norm\n", 0) == 0);
  std::size_t lines = 0;
  for (char c : log)
    if (c == '\n') ++lines;
  CHECK(lines == r.steps.size() + 1);
}
