#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace duogate {

enum class RoleKind {
  BenignIndependent,
  BenignFragment,
  MaliciousFragment,
  MaliciousAnchor,
};

struct Role {
  RoleKind kind = RoleKind::BenignIndependent;
  std::int64_t intent_id = -1;  // >= 0 whenever kind is not BenignIndependent

  bool malicious() const {
    return kind == RoleKind::MaliciousFragment || kind == RoleKind::MaliciousAnchor;
  }
  bool has_intent() const { return kind != RoleKind::BenignIndependent; }
  bool operator==(const Role&) const = default;
};

std::string role_kind_name(RoleKind kind);
RoleKind role_kind_from_name(const std::string& name);

struct Request {
  std::int64_t id = 0;
  std::string text;
  Role role;
  std::int64_t arrival_index = 0;  // 1-based, dense within a stream
  bool operator==(const Request&) const = default;
};

enum class Decision : std::uint8_t { Allow = 0, Block = 1 };

enum class Stage { EmptyHistory, Inherited, IntentBlocked, IntentPassed };

std::string decision_name(Decision d);
std::string stage_name(Stage s);

struct Verdict {
  Decision decision = Decision::Allow;
  Stage stage = Stage::EmptyHistory;
  std::optional<std::int64_t> matched_entry_id;
  std::optional<double> similarity;
};

struct Thresholds {
  double tau_sem = 0.95;
  double tau_int = 0.80;
  int k = 1;

  // Throws std::invalid_argument unless both taus lie strictly inside (0,1)
  // and k >= 1. Engine construction does not call this: experiment code may
  // deliberately run with out-of-range taus (e.g. a never-blocking gate).
  void validate() const;
};

// Unit-norm embeddings of one request under both encoders. Stored at 32-bit
// precision, which is also the store's precision.
struct EmbeddingPair {
  Eigen::VectorXf semantic;
  Eigen::VectorXf intent;
};

struct Sample {
  std::string text;
  Role role;
  bool operator==(const Sample&) const = default;
};

// Labeled corpus. Fragment order within an intent is the order samples appear.
struct IntentDataset {
  std::string split = "all";  // "train" | "validation" | "test" | "all"
  std::vector<Sample> samples;
  std::string synth_blob;  // generator provenance, carried through (de)serialization

  std::vector<std::int64_t> malicious_intent_ids() const;
  std::vector<std::int64_t> benign_intent_ids() const;
  std::vector<std::size_t> fragment_indices(std::int64_t intent_id) const;  // excludes anchors
  std::optional<std::size_t> anchor_index(std::int64_t intent_id) const;
};

struct InterleavePolicy {
  enum class Kind { UniformShuffle, SlowLoris, Adversarial };
  Kind kind = Kind::UniformShuffle;

  // SlowLoris: cap on the number of background requests between consecutive
  // fragments of one malicious intent. Unlimited by default.
  std::size_t max_spread = static_cast<std::size_t>(-1);

  // Adversarial: explicit permutation of the eligible (non-anchor) samples,
  // as indices into the dataset's eligible list in dataset order.
  std::vector<std::size_t> schedule;

  bool shuffle_within_intent = false;
};

// Orders every non-anchor sample into a request stream. Fragment order within
// each intent follows dataset order unless shuffle_within_intent is set.
// Throws std::invalid_argument("empty stream source") when nothing is eligible.
std::vector<Request> make_stream(const IntentDataset& dataset, const InterleavePolicy& policy,
                                 std::uint64_t seed);

// Line serialization. One request per line; byte-exact round-trip.
std::string request_to_line(const Request& r);
Request request_from_line(const std::string& line);
std::string stream_to_text(const std::vector<Request>& stream);
std::vector<Request> stream_from_text(const std::string& text);

std::string dataset_to_text(const IntentDataset& ds);
IntentDataset dataset_from_text(const std::string& text);

}  // namespace duogate
