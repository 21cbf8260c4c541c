#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Core>
#include <cctype>
#include <string>
#include <string_view>

#include "duogate/featurizer.hpp"
#include "duogate/rng.hpp"

using namespace duogate;

namespace {

// Independent FNV-1a 64 for cross-checking the library's.
std::uint64_t ref_fnv(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string ref_normalize(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

// Straight-line re-implementation of the hashing contract.
Eigen::VectorXd ref_featurize(std::string_view text, int dim) {
  std::string norm = ref_normalize(text);
  REQUIRE(!norm.empty());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  for (std::size_t n : {2u, 3u, 4u}) {
    for (std::size_t i = 0; i + n <= norm.size(); ++i) {
      std::uint64_t h = ref_fnv(std::string_view(norm).substr(i, n));
      auto idx = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim));
      double sign = ((h * 0x9e3779b97f4a7c15ull) >> 63) ? -1.0 : 1.0;
      v[idx] += sign;
    }
  }
  double nrm = v.norm();
  if (nrm == 0.0) {
    v.setZero();
    v[0] = 1.0;
  } else {
    v /= nrm;
  }
  return v;
}

std::string random_text(Rng& rng) {
  static const char alphabet[] = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.,;:!? \t\n";
  std::size_t len = 1 + rng.below(60);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng.below(sizeof(alphabet) - 1)]);
  return s;
}

}  // namespace

TEST_CASE("fnv1a64 matches published vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
  CHECK(fnv1a64("a") == ref_fnv("a"));
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    std::string s = random_text(rng);
    CHECK(fnv1a64(s) == ref_fnv(s));
  }
}

TEST_CASE("normalize_text lowercases, collapses whitespace, trims") {
  CHECK(normalize_text("  Hello\t\nWORLD  ") == "hello world");
  CHECK(normalize_text("a  b") == "a b");
  CHECK(normalize_text("ABC") == "abc");
  CHECK(normalize_text("\t\n  ") == "");
  CHECK(normalize_text("one") == "one");
  Rng rng(13);
  for (int i = 0; i < 300; ++i) {
    std::string s = random_text(rng);
    CHECK(normalize_text(s) == ref_normalize(s));
  }
}

TEST_CASE("featurize agrees with an independent implementation") {
  Rng rng(42);
  for (int dim : {32, 257, 2048}) {
    for (int i = 0; i < 60; ++i) {
      std::string s = random_text(rng);
      if (ref_normalize(s).empty()) continue;
      FeatureVector f = featurize(s, dim);
      Eigen::VectorXd want = ref_featurize(s, dim);
      REQUIRE(f.values.size() == dim);
      CHECK((f.values - want).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("featurize output is unit norm and deterministic") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    std::string s = random_text(rng);
    if (ref_normalize(s).empty()) continue;
    FeatureVector a = featurize(s, 128);
    FeatureVector b = featurize(s, 128);
    CHECK(a.values == b.values);
    CHECK(std::abs(a.values.norm() - 1.0) <= 1e-12);
  }
}

TEST_CASE("featurize rejects text that normalizes to nothing") {
  CHECK_THROWS_WITH_AS(featurize("", 64), "empty input", std::invalid_argument);
  CHECK_THROWS_WITH_AS(featurize("   \t\n ", 64), "empty input", std::invalid_argument);
}

TEST_CASE("full sign cancellation falls back to e0") {
  // At dim=1 every n-gram lands on index 0; hunt for a string whose six
  // n-gram signs cancel exactly, and one whose raw sum is negative.
  auto signed_sum = [](const std::string& s) {
    int sum = 0;
    for (std::size_t n : {2u, 3u, 4u})
      for (std::size_t i = 0; i + n <= s.size(); ++i) {
        std::uint64_t h = ref_fnv(std::string_view(s).substr(i, n));
        sum += ((h * 0x9e3779b97f4a7c15ull) >> 63) ? -1 : 1;
      }
    return sum;
  };
  std::string canceling, negative;
  for (char a = 'a'; a <= 'z' && (canceling.empty() || negative.empty()); ++a)
    for (char b = 'a'; b <= 'z' && (canceling.empty() || negative.empty()); ++b)
      for (char c = 'a'; c <= 'z' && (canceling.empty() || negative.empty()); ++c)
        for (char d = 'a'; d <= 'z'; ++d) {
          std::string s{a, b, c, d};
          int sum = signed_sum(s);
          if (sum == 0 && canceling.empty()) canceling = s;
          if (sum < 0 && negative.empty()) negative = s;
          if (!canceling.empty() && !negative.empty()) break;
        }
  REQUIRE(!canceling.empty());
  REQUIRE(!negative.empty());
  CHECK(featurize(canceling, 1).values[0] == 1.0);   // zero raw vector -> e0
  CHECK(featurize(negative, 1).values[0] == -1.0);   // nonzero raw vector keeps its sign
}
