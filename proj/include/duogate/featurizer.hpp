#pragma once

#include <Eigen/Core>
#include <string>
#include <string_view>

namespace duogate {

inline constexpr int kDefaultFeatureDim = 2048;

// Signed hashed bag of character n-grams, n in {2,3,4}.
//
// Pipeline: lowercase (ASCII), collapse whitespace runs to single spaces,
// trim; every contiguous n-gram of the normalized text contributes +-1 at
// index fnv1a64(ngram) % dim; the sign is the top bit of
// fnv1a64(ngram) * 0x9e3779b97f4a7c15 (0 -> +1, 1 -> -1). The result is
// L2-normalized. A raw all-zero vector (no n-grams, or full cancellation)
// maps to the basis vector e0.
//
// FNV-1a 64: offset 0xcbf29ce484222325, prime 0x100000001b3. These constants
// are fixed: independent implementations must agree bit-for-bit.
struct FeatureVector {
  Eigen::VectorXd values;
};

std::string normalize_text(std::string_view text);

// Throws std::invalid_argument("empty input") when nothing survives
// normalization.
FeatureVector featurize(std::string_view text, int dim = kDefaultFeatureDim);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace duogate
