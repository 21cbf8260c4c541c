#include "duogate/featurizer.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

namespace duogate {

namespace {
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
constexpr std::uint64_t kSignMultiplier = 0x9e3779b97f4a7c15ULL;
}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

FeatureVector featurize(std::string_view text, int dim) {
  if (dim <= 0) throw std::invalid_argument("feature dim must be positive");
  std::string norm = normalize_text(text);
  if (norm.empty()) throw std::invalid_argument("empty input");

  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  const std::size_t len = norm.size();
  for (int n = 2; n <= 4; ++n) {
    if (len < static_cast<std::size_t>(n)) break;
    for (std::size_t i = 0; i + n <= len; ++i) {
      std::uint64_t h = fnv1a64(std::string_view(norm).substr(i, n));
      std::size_t idx = static_cast<std::size_t>(h % static_cast<std::uint64_t>(dim));
      std::uint64_t s = h * kSignMultiplier;
      v[static_cast<Eigen::Index>(idx)] += (s >> 63) ? -1.0 : 1.0;
    }
  }

  double norm2 = v.squaredNorm();
  if (norm2 == 0.0) {
    v[0] = 1.0;
    return {v};
  }
  v /= std::sqrt(norm2);
  return {v};
}

}  // namespace duogate
