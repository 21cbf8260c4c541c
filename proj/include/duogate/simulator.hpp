#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "duogate/core.hpp"
#include "duogate/engine.hpp"

namespace duogate {

// Synthetic traffic generator. Tokens are consonant-vowel syllable triples
// drawn from three disjoint syllable families: malicious topics, benign
// topics, and shared background noise. Intent topic sets are disjoint token
// sets; fragments carry a strict subset of their intent's topics plus fresh
// noise. The family structure is what makes intent clustering a learnable,
// transferable signal at this scale.
struct SynthConfig {
  int n_malicious_intents = 30;
  int fragments_min = 3;
  int fragments_max = 6;
  int n_benign_intents = 140;
  int n_benign_independent = 1440;
  int vocab_size = 2000;
  int topic_tokens_per_intent = 6;
  int noise_tokens_per_fragment = 4;
  // Topic tokens carried per fragment. A malicious fragment is a dense slice
  // of one payload; a benign "intent" is only incidental topical overlap, so
  // its fragments share far fewer tokens. Benign fragments get extra noise
  // to keep text lengths comparable across classes.
  int mal_subset_min = 4;
  int mal_subset_max = 5;
  int ben_subset_min = 1;
  int ben_subset_max = 2;
  std::uint64_t seed = 1;
};

std::string synth_config_to_blob(const SynthConfig& cfg);
SynthConfig synth_config_from_blob(const std::string& blob);

struct SynthModel {
  SynthConfig cfg;
  std::vector<std::string> malicious_topic_pool;
  std::vector<std::string> benign_topic_pool;
  std::vector<std::string> noise_pool;
  std::vector<std::vector<std::string>> malicious_topics;  // per malicious intent id
  std::vector<std::vector<std::string>> benign_topics;     // per benign intent, offset by M

  const std::vector<std::string>& topics_of(std::int64_t intent_id) const;
};

// Deterministic in cfg.seed. Throws std::invalid_argument("vocab too small")
// when the pools cannot be carved out of vocab_size.
SynthModel build_synth_model(const SynthConfig& cfg);
IntentDataset generate_dataset(const SynthConfig& cfg);

// Partitions intent ids (and independents) into train/validation/test.
// Malicious counts may be pinned explicitly; everything else follows ratios.
struct SplitSpec {
  std::optional<std::array<int, 3>> malicious_counts;
  std::array<double, 3> ratios = {0.8, 0.1, 0.1};
  std::uint64_t seed = 1;
};
std::array<IntentDataset, 3> split_dataset(const IntentDataset& master, const SplitSpec& spec);

// Fresh fragment-shaped variants of one malicious intent: a strict topic
// subset plus resampled noise. Used by attackers and the exclusion estimate.
std::vector<std::string> fragment_variants(const SynthModel& model, std::int64_t intent_id,
                                           int count, std::uint64_t seed);

// Seeded synonym table over the noise pool (used by the rewrite attacker).
std::string synonym_of(const SynthModel& model, const std::string& token, int choice);

enum class AttackMode {
  Standard,
  Rewrite,
  LatentRepulsion,
  BlendFirst,
  BlendLast,
  FillContextFirst,
  FillContextRandom,
  FillContextLast,
};

std::string attack_mode_name(AttackMode m);

struct AttackerConfig {
  AttackMode mode = AttackMode::Standard;
  int max_attempts = 30;       // total submission budget per intent
  int repulsion_steps = 2;     // hill-climb rounds (LatentRepulsion)
  int repulsion_step_size = 4; // candidate substitutions per round
  int fill_factor = 4;         // filler length multiple (FillContext)
  std::uint64_t seed = 1;
};

struct IntentAttackTrace {
  std::int64_t intent_id = -1;
  bool succeeded = false;
  int submissions = 0;                    // total submissions spent
  std::vector<int> attempts_per_fragment; // one entry per fragment reached
};

struct AsrReport {
  std::vector<IntentAttackTrace> intents;
  double asr = 0.0;
  std::vector<double> asr_by_budget;  // index b-1: ASR under budget b
};

// Streams each malicious intent's fragments in order against the live
// engine; a blocked submission is retried with a fresh variant until the
// intent's budget runs out. Blocked attempts stay in the stores. The intent
// succeeds iff every fragment is eventually allowed.
AsrReport run_attack(Engine& engine, const IntentDataset& dataset, const AttackerConfig& atk);

struct PollutionReport {
  int n_poison = 0;
  int poisons_blocked = 0;
  int clean_blocked = 0;
  int clean_total = 0;
  double fpr = 0.0;
};

// Copies the engine, streams n_poison adversarially-perturbed variants of
// sampled future benign requests (pushed toward existing Block clusters by
// coordinate substitution), then streams the clean requests and reports
// their false-positive rate.
PollutionReport run_pollution(const Engine& base, const IntentDataset& vocab_source,
                              const std::vector<Request>& future_benign, int n_poison,
                              std::uint64_t seed, int steps = 4, int step_size = 8);

}  // namespace duogate
