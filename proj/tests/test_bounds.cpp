#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "duogate/bench.hpp"
#include "duogate/bounds.hpp"
#include "duogate/rng.hpp"
#include "duogate/simulator.hpp"

using namespace duogate;

TEST_CASE("packing limit follows its closed form") {
  double tau = std::cos(0.15);
  PackingBound b = packing_limit(tau, 3, 0.6);
  CHECK(b.cap_angle == doctest::Approx(0.15).epsilon(1e-9));
  CHECK(b.limit == doctest::Approx(std::pow(2.0 * 0.6 / 0.15, 3)).epsilon(1e-9));
  CHECK(b.small_angle);

  PackingBound wide = packing_limit(std::cos(0.5), 3, 0.6);
  CHECK(!wide.small_angle);

  // monotone in radius, dimension and threshold
  CHECK(packing_limit(tau, 3, 0.8).limit > packing_limit(tau, 3, 0.6).limit);
  CHECK(packing_limit(tau, 4, 0.6).limit > packing_limit(tau, 3, 0.6).limit);
  CHECK(packing_limit(std::cos(0.10), 3, 0.6).limit > packing_limit(std::cos(0.15), 3, 0.6).limit);

  // any cosine inside (-1,1) is a valid threshold; the endpoints are not
  CHECK(packing_limit(0.0, 3, 0.6).cap_angle == doctest::Approx(std::acos(0.0)));
  CHECK_THROWS_AS(packing_limit(1.0, 3, 0.6), std::invalid_argument);
  CHECK_THROWS_AS(packing_limit(-1.0, 3, 0.6), std::invalid_argument);
  CHECK_THROWS_AS(packing_limit(tau, 0, 0.6), std::invalid_argument);
  CHECK_THROWS_AS(packing_limit(tau, 3, 0.0), std::invalid_argument);
}

TEST_CASE("greedy packing respects the cap bound") {
  for (auto [d, ratio] : std::vector<std::pair<int, double>>{{2, 6.0}, {3, 4.0}, {4, 8.0}}) {
    double cap = 0.15;
    double tau = std::cos(cap);
    double r_mal = ratio * cap / 2.0;
    PackingBound bound = packing_limit(tau, d, r_mal);
    REQUIRE(bound.small_angle);
    int kept = greedy_cap_packing(tau, d, r_mal, 3000, 17);
    CHECK(kept >= 1);
    CHECK(static_cast<double>(kept) <= bound.limit);
    CHECK(greedy_cap_packing(tau, d, r_mal, 3000, 17) == kept);  // deterministic
  }
}

TEST_CASE("feasibility curve is the geometric work inflation") {
  auto curve = feasibility_curve(0.3, 10);
  REQUIRE(curve.size() == 10);
  CHECK(curve[0] == 1.0);
  for (int i = 0; i < 10; ++i)
    CHECK(curve[static_cast<std::size_t>(i)] ==
          doctest::Approx(std::pow(1.0 - 0.3, -i)).epsilon(1e-12));
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] > curve[i - 1]);

  auto flat = feasibility_curve(0.0, 5);
  for (double v : flat) CHECK(v == 1.0);

  CHECK_THROWS_AS(feasibility_curve(1.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(feasibility_curve(-0.1, 5), std::invalid_argument);
}

namespace {

struct ProbeFixture {
  SynthConfig cfg;
  SynthModel model;
  Engine probe;

  ProbeFixture()
      : cfg(make_cfg()),
        model(build_synth_model(cfg)),
        probe(make_frozen_encoder(7, 32, 256), make_intent_head(1, 256, 32, 16), StoreConfig{},
              StoreConfig{}, EngineConfig{}) {}

  static SynthConfig make_cfg() {
    SynthConfig c;
    c.n_malicious_intents = 3;
    c.n_benign_intents = 4;
    c.n_benign_independent = 10;
    c.vocab_size = 300;
    c.topic_tokens_per_intent = 6;
    c.noise_tokens_per_fragment = 3;
    c.seed = 6;
    return c;
  }
};

}  // namespace

TEST_CASE("exclusion mass estimates hit their extremes") {
  ProbeFixture fx;
  std::vector<std::int64_t> intents = {0, 1};

  GammaEstimate all = estimate_gamma(fx.probe, fx.model, intents, 100, -1.0, 4);
  CHECK(all.n_variants == 100);
  REQUIRE(all.per_intent.size() == 2);
  for (const auto& [id, g] : all.per_intent) CHECK(g == 1.0);  // every pair clears tau = -1
  CHECK(all.mean == 1.0);

  GammaEstimate none = estimate_gamma(fx.probe, fx.model, intents, 100, 1.5, 4);
  for (const auto& [id, g] : none.per_intent) CHECK(g == 0.0);
  CHECK(none.mean == 0.0);

  GammaEstimate mid = estimate_gamma(fx.probe, fx.model, intents, 120, 0.5, 4);
  CHECK(mid.mean >= 0.0);
  CHECK(mid.mean <= 1.0);
  double sum = 0.0;
  for (const auto& [id, g] : mid.per_intent) sum += g;
  CHECK(mid.mean == doctest::Approx(sum / 2.0).epsilon(1e-12));
  // determinism
  GammaEstimate mid2 = estimate_gamma(fx.probe, fx.model, intents, 120, 0.5, 4);
  CHECK(mid2.mean == mid.mean);

  CHECK_THROWS_AS(estimate_gamma(fx.probe, fx.model, intents, 50, 0.5, 4), std::invalid_argument);
}

TEST_CASE("intent radius covers sampled variants and dataset fragments") {
  ProbeFixture fx;
  std::vector<std::int64_t> intents = {0, 2};
  RadiusEstimate r = intent_radius(fx.probe, fx.model, intents, 100, 9);
  REQUIRE(r.per_intent.size() == 2);
  double max_seen = 0.0;
  for (const auto& [id, rad] : r.per_intent) {
    CHECK(rad >= 0.0);
    CHECK(rad <= M_PI);
    max_seen = std::max(max_seen, rad);
  }
  CHECK(r.max_radius == max_seen);

  IntentDataset ds;
  ds.samples = {
      {"lonely fragment", {RoleKind::MaliciousFragment, 0}},  // one fragment: skipped
      {"bada bidi bodo", {RoleKind::MaliciousFragment, 1}},
      {"bada bodo lulu", {RoleKind::MaliciousFragment, 1}},
      {"bidi bodo mimi", {RoleKind::MaliciousFragment, 1}},
      {"bada bidi anchor", {RoleKind::MaliciousAnchor, 1}},  // anchors never count
  };
  RadiusEstimate dr = intent_radius(fx.probe, ds);
  CHECK(dr.per_intent.size() == 1);
  CHECK(dr.per_intent.count(1) == 1);
  CHECK(dr.max_radius == dr.per_intent.at(1));

  IntentDataset empty;
  empty.samples = {{"solo", {RoleKind::MaliciousFragment, 3}}};
  CHECK_THROWS_AS(intent_radius(fx.probe, empty), std::invalid_argument);
}

TEST_CASE("latency summaries use the nearest-rank percentile") {
  std::vector<double> samples;
  for (int i = 1; i <= 100; ++i) samples.push_back(static_cast<double>(i));
  Rng rng(4);
  rng.shuffle(samples);
  LatencyStats s = summarize_latencies(samples);
  CHECK(s.n == 100);
  CHECK(s.mean_us == doctest::Approx(50.5).epsilon(1e-12));
  // index round(p * (n-1)) into the sorted samples
  CHECK(s.p50_us == 51.0);
  CHECK(s.p95_us == 95.0);
  CHECK(s.p99_us == 99.0);

  LatencyStats one = summarize_latencies({7.0});
  CHECK(one.p50_us == 7.0);
  CHECK(one.p99_us == 7.0);
  CHECK(one.mean_us == 7.0);

  CHECK_THROWS(summarize_latencies({}));
}

TEST_CASE("store query benchmark reports sane latencies") {
  LatencyStats s = bench_store_query(200, 16, 10, 1);
  CHECK(s.n == 10);
  CHECK(s.p50_us > 0.0);
  CHECK(s.p99_us >= s.p50_us);
  CHECK(s.p95_us >= s.p50_us);
  CHECK(s.mean_us > 0.0);
}

TEST_CASE("engine throughput model reports service and sojourn times") {
  ProbeFixture fx;
  IntentDataset ds = generate_dataset(fx.cfg);
  auto stream = make_stream(ds, InterleavePolicy{}, 2);
  Engine eng(make_frozen_encoder(7, 32, 256), make_intent_head(1, 256, 32, 16), StoreConfig{},
             StoreConfig{}, EngineConfig{});
  ThroughputStats t = bench_engine(eng, stream, 1000.0, 5);
  CHECK(t.lambda_per_sec == 1000.0);
  CHECK(t.requests_per_sec > 0.0);
  CHECK(t.service.n == stream.size());
  CHECK(t.service.mean_us > 0.0);
  // queueing can only add to service time
  CHECK(t.mean_sojourn_us >= t.service.mean_us * 0.99);
  CHECK(t.p99_sojourn_us >= t.service.p99_us * 0.99);
}
