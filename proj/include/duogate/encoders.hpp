#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include "duogate/featurizer.hpp"

namespace duogate {

inline constexpr int kDefaultSemanticDim = 256;
inline constexpr int kDefaultHiddenDim = 512;
inline constexpr int kDefaultIntentDim = 128;

// Seeded random projection with orthonormal rows (modified Gram-Schmidt over
// Gaussian rows). Never updated after construction.
struct FrozenEncoder {
  Eigen::MatrixXd projection;  // d_sem x d_feat
  std::uint64_t seed = 0;
};

FrozenEncoder make_frozen_encoder(std::uint64_t seed, int d_sem = kDefaultSemanticDim,
                                  int d_feat = kDefaultFeatureDim);

// FNV-1a over the projection bytes; cheap tamper check for the frozen params.
std::uint64_t frozen_param_hash(const FrozenEncoder& enc);

// Unit-norm projection of a feature vector; an exactly-zero projection maps
// to e0. Throws on dimension mismatch.
Eigen::VectorXd encode_semantic(const FrozenEncoder& enc, const FeatureVector& f);

// Columns of F are feature vectors; returns unit-norm columns.
Eigen::MatrixXd encode_semantic_batch(const FrozenEncoder& enc, const Eigen::MatrixXd& F);

// Two-layer MLP with exact-erf GELU, output L2-normalized.
struct IntentHead {
  Eigen::MatrixXd w1;  // hidden x d_feat
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd w2;  // d_out x hidden
  Eigen::VectorXd b2;  // d_out

  int in_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }
  int out_dim() const { return static_cast<int>(w2.rows()); }
};

// Gaussian init scaled for unit-L2 inputs (see encoders.cpp), zero biases.
IntentHead make_intent_head(std::uint64_t seed, int d_feat = kDefaultFeatureDim,
                            int hidden = kDefaultHiddenDim, int d_out = kDefaultIntentDim);

double gelu(double x);
double gelu_grad(double x);

Eigen::VectorXd encode_intent(const IntentHead& head, const FeatureVector& f);
Eigen::MatrixXd encode_intent_batch(const IntentHead& head, const Eigen::MatrixXd& F);

// Binary snapshot: magic "TWGH", u32 version, u32 d_feat, u32 hidden,
// u32 d_out, then row-major float32 W1, b1, W2, b2. Little-endian.
void save_intent_head(const IntentHead& head, const std::string& path);
IntentHead load_intent_head(const std::string& path);

}  // namespace duogate
