#include "duogate/encoders.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "duogate/rng.hpp"

static_assert(std::endian::native == std::endian::little, "snapshot io assumes little-endian");

namespace duogate {

namespace {

Eigen::VectorXd normalized_or_e0(Eigen::VectorXd v) {
  double n2 = v.squaredNorm();
  if (n2 == 0.0) {
    v.setZero();
    v[0] = 1.0;
    return v;
  }
  return v / std::sqrt(n2);
}

void write_u32(std::ofstream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

// Row-major float32 dump of a matrix stored in Eigen's default column-major.
void write_matrix(std::ofstream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      float f = static_cast<float>(m(r, c));
      os.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
}

Eigen::MatrixXd read_matrix(std::ifstream& is, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      float f = 0;
      is.read(reinterpret_cast<char*>(&f), sizeof(f));
      m(r, c) = static_cast<double>(f);
    }
  return m;
}

}  // namespace

FrozenEncoder make_frozen_encoder(std::uint64_t seed, int d_sem, int d_feat) {
  if (d_sem <= 0 || d_feat <= 0 || d_sem > d_feat)
    throw std::invalid_argument("bad frozen encoder dims");
  Rng rng(seed);
  Eigen::MatrixXd m(d_sem, d_feat);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.normal();

  // modified Gram-Schmidt over rows
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index p = 0; p < r; ++p) {
      double dot = m.row(r).dot(m.row(p));
      m.row(r) -= dot * m.row(p);
    }
    double n = m.row(r).norm();
    if (n < 1e-12) throw std::runtime_error("degenerate row in frozen encoder init");
    m.row(r) /= n;
  }
  return {std::move(m), seed};
}

std::uint64_t frozen_param_hash(const FrozenEncoder& enc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index r = 0; r < enc.projection.rows(); ++r)
    for (Eigen::Index c = 0; c < enc.projection.cols(); ++c) {
      std::uint64_t bits = 0;
      double v = enc.projection(r, c);
      std::memcpy(&bits, &v, sizeof(bits));
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    }
  return h;
}

Eigen::VectorXd encode_semantic(const FrozenEncoder& enc, const FeatureVector& f) {
  if (f.values.size() != enc.projection.cols())
    throw std::invalid_argument("feature dim mismatch");
  return normalized_or_e0(enc.projection * f.values);
}

Eigen::MatrixXd encode_semantic_batch(const FrozenEncoder& enc, const Eigen::MatrixXd& F) {
  if (F.rows() != enc.projection.cols()) throw std::invalid_argument("feature dim mismatch");
  Eigen::MatrixXd out = enc.projection * F;
  for (Eigen::Index c = 0; c < out.cols(); ++c) out.col(c) = normalized_or_e0(out.col(c));
  return out;
}

IntentHead make_intent_head(std::uint64_t seed, int d_feat, int hidden, int d_out) {
  if (d_feat <= 0 || hidden <= 0 || d_out <= 0) throw std::invalid_argument("bad head dims");
  Rng rng(seed);
  IntentHead head;
  head.w1.resize(hidden, d_feat);
  // Inputs are unit L2 vectors, not unit-variance coordinates: row scale 1
  // gives unit-variance pre-activations regardless of d_feat.
  double s1 = 1.0;
  for (Eigen::Index r = 0; r < head.w1.rows(); ++r)
    for (Eigen::Index c = 0; c < head.w1.cols(); ++c) head.w1(r, c) = s1 * rng.normal();
  head.b1 = Eigen::VectorXd::Zero(hidden);
  head.w2.resize(d_out, hidden);
  // Scaled so the pre-normalization output norm starts at unit order: large
  // enough that the normalization Jacobian does not freeze training, small
  // enough that SGD at the reference learning rate stays in the stable
  // regime (both failure modes show up within a factor of ~2 either way).
  double s2 = 0.5 / std::sqrt(static_cast<double>(hidden));
  for (Eigen::Index r = 0; r < head.w2.rows(); ++r)
    for (Eigen::Index c = 0; c < head.w2.cols(); ++c) head.w2(r, c) = s2 * rng.normal();
  head.b2 = Eigen::VectorXd::Zero(d_out);
  return head;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
  double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  double Phi = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  return Phi + x * phi;
}

Eigen::VectorXd encode_intent(const IntentHead& head, const FeatureVector& f) {
  if (f.values.size() != head.w1.cols()) throw std::invalid_argument("feature dim mismatch");
  Eigen::VectorXd a = head.w1 * f.values + head.b1;
  Eigen::VectorXd g = a.unaryExpr([](double x) { return gelu(x); });
  return normalized_or_e0(head.w2 * g + head.b2);
}

Eigen::MatrixXd encode_intent_batch(const IntentHead& head, const Eigen::MatrixXd& F) {
  if (F.rows() != head.w1.cols()) throw std::invalid_argument("feature dim mismatch");
  Eigen::MatrixXd a = (head.w1 * F).colwise() + head.b1;
  Eigen::MatrixXd g = a.unaryExpr([](double x) { return gelu(x); });
  Eigen::MatrixXd u = (head.w2 * g).colwise() + head.b2;
  for (Eigen::Index c = 0; c < u.cols(); ++c) u.col(c) = normalized_or_e0(u.col(c));
  return u;
}

void save_intent_head(const IntentHead& head, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write("TWGH", 4);
  write_u32(os, 1);
  write_u32(os, static_cast<std::uint32_t>(head.in_dim()));
  write_u32(os, static_cast<std::uint32_t>(head.hidden_dim()));
  write_u32(os, static_cast<std::uint32_t>(head.out_dim()));
  write_matrix(os, head.w1);
  write_matrix(os, head.b1);
  write_matrix(os, head.w2);
  write_matrix(os, head.b2);
  if (!os) throw std::runtime_error("short write: " + path);
}

IntentHead load_intent_head(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[4] = {};
  is.read(magic, 4);
  if (std::string_view(magic, 4) != "TWGH") throw std::runtime_error("bad snapshot magic");
  std::uint32_t version = read_u32(is);
  if (version != 1) throw std::runtime_error("unsupported snapshot version");
  std::uint32_t d_feat = read_u32(is);
  std::uint32_t hidden = read_u32(is);
  std::uint32_t d_out = read_u32(is);
  IntentHead head;
  head.w1 = read_matrix(is, hidden, d_feat);
  head.b1 = read_matrix(is, hidden, 1);
  head.w2 = read_matrix(is, d_out, hidden);
  head.b2 = read_matrix(is, d_out, 1);
  if (!is) throw std::runtime_error("short read: " + path);
  return head;
}

}  // namespace duogate
