#include "duogate/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "duogate/rng.hpp"
#include "duogate/vecstore.hpp"

namespace duogate {

PackingBound packing_limit(double tau_int, int d_int, double r_mal) {
  if (!(tau_int > -1.0 && tau_int < 1.0)) throw std::invalid_argument("tau_int must be in (-1,1)");
  if (d_int < 1) throw std::invalid_argument("dimension must be positive");
  if (!(r_mal > 0.0)) throw std::invalid_argument("radius must be positive");
  PackingBound b;
  b.cap_angle = std::acos(tau_int);
  b.small_angle = b.cap_angle < 0.3;
  b.limit = std::pow(2.0 * r_mal / b.cap_angle, static_cast<double>(d_int));
  return b;
}

std::vector<double> feasibility_curve(double gamma, int max_attempts) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("gamma must be in [0,1)");
  if (max_attempts < 1) throw std::invalid_argument("need at least one attempt");
  std::vector<double> out(static_cast<std::size_t>(max_attempts));
  const double base = 1.0 / (1.0 - gamma);
  double v = 1.0;
  for (int i = 0; i < max_attempts; ++i) {
    out[static_cast<std::size_t>(i)] = v;
    v *= base;
  }
  return out;
}

int greedy_cap_packing(double tau_int, int d_int, double r_mal, int n_samples,
                       std::uint64_t seed) {
  if (!(tau_int > -1.0 && tau_int < 1.0)) throw std::invalid_argument("tau_int must be in (-1,1)");
  if (d_int < 1) throw std::invalid_argument("dimension must be positive");
  if (!(r_mal > 0.0)) throw std::invalid_argument("radius must be positive");
  if (n_samples < 1) throw std::invalid_argument("need at least one sample");
  if (!(r_mal < 3.14159)) throw std::invalid_argument("cap exceeds hemisphere pair");
  Rng rng(seed);
  // Uniform points in the cap of angular radius r_mal around the pole of
  // S^{d_int}: angle density ~ sin^{d-1}(theta), sampled by rejection against
  // the flat-cone proposal theta = R u^{1/d} (acceptance (sin t / t)^{d-1}).
  std::vector<Eigen::VectorXd> kept;
  const double cos_sep = tau_int;  // separation >= arccos(tau_int) <=> dot <= tau_int
  for (int s = 0; s < n_samples; ++s) {
    double theta;
    for (;;) {
      theta = r_mal * std::pow(rng.uniform(), 1.0 / static_cast<double>(d_int));
      const double ratio = theta == 0.0 ? 1.0 : std::sin(theta) / theta;
      if (rng.uniform() <= std::pow(ratio, static_cast<double>(d_int - 1))) break;
    }
    Eigen::VectorXd p = Eigen::VectorXd::Zero(d_int + 1);
    if (d_int == 1) {
      p[1] = rng.below(2) == 0 ? 1.0 : -1.0;
    } else {
      double nsq = 0.0;
      do {
        for (int j = 1; j <= d_int; ++j) p[j] = rng.normal();
        nsq = p.squaredNorm();
      } while (!(nsq > 0.0));
      p /= std::sqrt(nsq);
    }
    p *= std::sin(theta);
    p[0] = std::cos(theta);
    bool ok = true;
    for (const auto& q : kept)
      if (p.dot(q) > cos_sep) {
        ok = false;
        break;
      }
    if (ok) kept.push_back(std::move(p));
  }
  return static_cast<int>(kept.size());
}

namespace {

std::vector<Eigen::VectorXf> variant_intent_embeddings(const Engine& probe,
                                                       const SynthModel& model,
                                                       std::int64_t intent, int n_variants,
                                                       std::uint64_t seed) {
  const auto texts = fragment_variants(model, intent, n_variants, seed);
  std::vector<Eigen::VectorXf> z;
  z.reserve(texts.size());
  for (const auto& t : texts) z.push_back(probe.embed(t).intent);
  return z;
}

}  // namespace

GammaEstimate estimate_gamma(const Engine& probe, const SynthModel& model,
                             const std::vector<std::int64_t>& intents, int n_variants,
                             double tau_int, std::uint64_t seed) {
  if (n_variants < 100) throw std::invalid_argument("too few variants");
  if (intents.empty()) throw std::invalid_argument("no intents to estimate");
  GammaEstimate est;
  est.n_variants = n_variants;
  double sum = 0.0;
  for (const auto intent : intents) {
    const auto z = variant_intent_embeddings(probe, model, intent, n_variants, seed);
    std::int64_t hits = 0, pairs = 0;
    for (std::size_t a = 0; a < z.size(); ++a)
      for (std::size_t b = a + 1; b < z.size(); ++b) {
        ++pairs;
        if (dot_f32(z[a], z[b]) > tau_int) ++hits;
      }
    const double g = pairs == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(pairs);
    est.per_intent[intent] = g;
    sum += g;
  }
  est.mean = sum / static_cast<double>(intents.size());
  return est;
}

namespace {

double cloud_radius(const std::vector<Eigen::VectorXf>& z) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(z.front().size());
  for (const auto& v : z) mean += v.cast<double>();
  const double norm = mean.norm();
  if (!(norm > 0)) throw std::runtime_error("degenerate variant cloud");
  mean /= norm;
  double radius = 0.0;
  for (const auto& v : z) {
    const double c = std::clamp(v.cast<double>().dot(mean), -1.0, 1.0);
    radius = std::max(radius, std::acos(c));
  }
  return radius;
}

}  // namespace

RadiusEstimate intent_radius(const Engine& probe, const SynthModel& model,
                             const std::vector<std::int64_t>& intents, int n_variants,
                             std::uint64_t seed) {
  if (n_variants < 2) throw std::invalid_argument("too few variants");
  if (intents.empty()) throw std::invalid_argument("no intents to measure");
  RadiusEstimate est;
  for (const auto intent : intents) {
    const auto z = variant_intent_embeddings(probe, model, intent, n_variants, seed);
    const double radius = cloud_radius(z);
    est.per_intent[intent] = radius;
    est.max_radius = std::max(est.max_radius, radius);
  }
  return est;
}

RadiusEstimate intent_radius(const Engine& probe, const IntentDataset& dataset) {
  RadiusEstimate est;
  for (const auto intent : dataset.malicious_intent_ids()) {
    const auto idx = dataset.fragment_indices(intent);
    if (idx.size() < 2) continue;
    std::vector<Eigen::VectorXf> z;
    z.reserve(idx.size());
    for (auto i : idx) z.push_back(probe.embed(dataset.samples[i].text).intent);
    const double radius = cloud_radius(z);
    est.per_intent[intent] = radius;
    est.max_radius = std::max(est.max_radius, radius);
  }
  if (est.per_intent.empty()) throw std::invalid_argument("no intents to measure");
  return est;
}

}  // namespace duogate
