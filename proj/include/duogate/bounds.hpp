#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "duogate/engine.hpp"
#include "duogate/simulator.hpp"

namespace duogate {

// Capacity bound for distinguishable intent clusters: caps of angular radius
// arccos(tau_int) packed into a ball of angular radius r_mal admit at most
// (2 r_mal / arccos(tau_int))^d centers. The bound is only meaningful while
// the cap angle stays small; small_angle flags arccos(tau_int) < 0.3 rad.
struct PackingBound {
  double limit = 0.0;
  double cap_angle = 0.0;
  bool small_angle = false;
};
PackingBound packing_limit(double tau_int, int d_int, double r_mal);

// Monte-Carlo check of the cap bound: sample n points uniformly in the cap of
// angular radius r_mal on S^{d_int}, greedily keep those at angle >=
// arccos(tau_int) from every kept point, and report how many survive.
int greedy_cap_packing(double tau_int, int d_int, double r_mal, int n_samples,
                       std::uint64_t seed);

// Expected attacker work multiplier per attempt index: entry i-1 holds
// (1 - gamma)^-(i-1), the inflation once i-1 prior variants are stored.
std::vector<double> feasibility_curve(double gamma, int max_attempts);

// Exclusion mass gamma: probability that two independent fragment variants
// of one intent land within tau_int of each other, estimated over all
// variant pairs. Requires at least 100 variants per intent.
struct GammaEstimate {
  std::map<std::int64_t, double> per_intent;
  double mean = 0.0;
  int n_variants = 0;
};
GammaEstimate estimate_gamma(const Engine& probe, const SynthModel& model,
                             const std::vector<std::int64_t>& intents, int n_variants,
                             double tau_int, std::uint64_t seed);

// Angular radius of each intent's variant cloud around its normalized mean,
// plus the conservative maximum across intents.
struct RadiusEstimate {
  std::map<std::int64_t, double> per_intent;
  double max_radius = 0.0;
};
RadiusEstimate intent_radius(const Engine& probe, const SynthModel& model,
                             const std::vector<std::int64_t>& intents, int n_variants,
                             std::uint64_t seed);

// Same measurement over a dataset's actual malicious fragments (anchors
// excluded). Intents with fewer than two fragments are skipped.
RadiusEstimate intent_radius(const Engine& probe, const IntentDataset& dataset);

}  // namespace duogate
