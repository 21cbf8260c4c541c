#pragma once

#include <cstdint>
#include <vector>

#include "duogate/core.hpp"
#include "duogate/engine.hpp"

namespace duogate {

struct LatencyStats {
  double mean_us = 0.0;
  double p50_us = 0.0;
  double p95_us = 0.0;
  double p99_us = 0.0;
  std::size_t n = 0;
};

LatencyStats summarize_latencies(std::vector<double> samples_us);

// Top-1 scan latency against a store of n random unit vectors.
LatencyStats bench_store_query(std::int64_t n_entries, int dim, int n_queries,
                               std::uint64_t seed);

struct ThroughputStats {
  double requests_per_sec = 0.0;
  LatencyStats service;        // adjudicate wall time
  double mean_sojourn_us = 0.0;  // queueing + service under Poisson arrivals
  double p99_sojourn_us = 0.0;
  double lambda_per_sec = 0.0;
};

// Adjudicates the stream back-to-back measuring per-request service time,
// then models an M/D-ish single-server queue in virtual time: arrival gaps
// are Exp(lambda), service times are the measured ones, sojourn = completion
// minus arrival. No wall-clock sleeping.
ThroughputStats bench_engine(Engine& engine, const std::vector<Request>& stream,
                             double lambda_per_sec, std::uint64_t seed);

}  // namespace duogate
