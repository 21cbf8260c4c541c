#include "duogate/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "duogate/rng.hpp"
#include "duogate/vecstore.hpp"

namespace duogate {
namespace {

Eigen::VectorXf random_unit(Rng& rng, int dim) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  const double n = v.norm();
  if (!(n > 0)) { Eigen::VectorXf e = Eigen::VectorXf::Zero(dim); e[0] = 1.0f; return e; }
  return (v / n).cast<float>();
}

double now_us() {
  return std::chrono::duration<double, std::micro>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

LatencyStats summarize_latencies(std::vector<double> samples_us) {
  if (samples_us.empty()) throw std::invalid_argument("no latency samples");
  std::sort(samples_us.begin(), samples_us.end());
  const auto pct = [&](double p) {
    const auto idx = static_cast<std::size_t>(p * (samples_us.size() - 1) + 0.5);
    return samples_us[std::min(idx, samples_us.size() - 1)];
  };
  LatencyStats s;
  s.n = samples_us.size();
  double sum = 0.0;
  for (double v : samples_us) sum += v;
  s.mean_us = sum / static_cast<double>(samples_us.size());
  s.p50_us = pct(0.50);
  s.p95_us = pct(0.95);
  s.p99_us = pct(0.99);
  return s;
}

LatencyStats bench_store_query(std::int64_t n_entries, int dim, int n_queries,
                               std::uint64_t seed) {
  if (n_entries < 1 || n_queries < 1) throw std::invalid_argument("bench sizes must be positive");
  Rng rng(seed);
  VectorStore store(dim, StoreConfig{});
  for (std::int64_t i = 0; i < n_entries; ++i)
    store.insert(random_unit(rng, dim), Decision::Allow, i + 1);
  std::vector<Eigen::VectorXf> queries;
  queries.reserve(static_cast<std::size_t>(n_queries));
  for (int q = 0; q < n_queries; ++q) queries.push_back(random_unit(rng, dim));

  std::vector<double> samples;
  samples.reserve(queries.size());
  volatile double sink = 0.0;  // keep the scan from being optimized away
  for (const auto& q : queries) {
    const double t0 = now_us();
    sink = sink + store.query_top1(q).first;
    samples.push_back(now_us() - t0);
  }
  (void)sink;
  return summarize_latencies(std::move(samples));
}

ThroughputStats bench_engine(Engine& engine, const std::vector<Request>& stream,
                             double lambda_per_sec, std::uint64_t seed) {
  if (stream.empty()) throw std::invalid_argument("bench_engine: empty stream");
  if (!(lambda_per_sec > 0)) throw std::invalid_argument("arrival rate must be positive");

  std::vector<double> service_us;
  service_us.reserve(stream.size());
  for (const auto& r : stream) {
    const double t0 = now_us();
    engine.adjudicate(r);
    service_us.push_back(now_us() - t0);
  }

  ThroughputStats out;
  out.lambda_per_sec = lambda_per_sec;
  out.service = summarize_latencies(service_us);
  double total_us = 0.0;
  for (double v : service_us) total_us += v;
  out.requests_per_sec = 1e6 * static_cast<double>(service_us.size()) / total_us;

  // Virtual-time single-server queue with the measured service times.
  Rng rng(seed);
  const double mean_gap_us = 1e6 / lambda_per_sec;
  std::vector<double> sojourn_us;
  sojourn_us.reserve(service_us.size());
  double arrival = 0.0, server_free = 0.0;
  for (double svc : service_us) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    arrival += -std::log(u) * mean_gap_us;
    const double start = std::max(arrival, server_free);
    server_free = start + svc;
    sojourn_us.push_back(server_free - arrival);
  }
  const auto soj = summarize_latencies(std::move(sojourn_us));
  out.mean_sojourn_us = soj.mean_us;
  out.p99_sojourn_us = soj.p99_us;
  return out;
}

}  // namespace duogate
