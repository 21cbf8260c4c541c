// duogate: stateful two-stage request gate and its experiment pipeline.
//
// Subcommands: gen-data, train, calibrate, eval, attack, pollute,
// capacity-study, bounds, serve, bench. Every subcommand is deterministic
// given configuration + seeds; only bench measures wall-clock time.
//
// Configuration precedence: config file < DUOGATE_* environment < flags.
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 guard refusal.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "duogate/acl.hpp"
#include "duogate/bench.hpp"
#include "duogate/bounds.hpp"
#include "duogate/config.hpp"
#include "duogate/core.hpp"
#include "duogate/encoders.hpp"
#include "duogate/engine.hpp"
#include "duogate/metrics.hpp"
#include "duogate/serve.hpp"
#include "duogate/simulator.hpp"
#include "duogate/vecstore.hpp"

namespace {

using namespace duogate;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GuardError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << content;
  out.flush();
  if (!out) throw DataError("short write to " + path);
}

IntentDataset load_dataset(const std::string& path) {
  const auto text = read_file(path);
  try {
    return dataset_from_text(text);
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

// Split hygiene: pipeline stages refuse datasets carrying the wrong tag.
IntentDataset load_split(const std::string& path, const std::string& expected) {
  auto ds = load_dataset(path);
  if (ds.split != expected)
    throw DataError(path + ": split mismatch: expected \"" + expected + "\", got \"" + ds.split +
                    "\"");
  return ds;
}

std::string require_str(const Config& cfg, const std::string& key, const std::string& flag) {
  auto v = cfg.str(key, "");
  if (v.empty()) throw ConfigError("missing " + key + " (" + flag + ")");
  return v;
}

// --- thresholds file ------------------------------------------------------

struct ThresholdsFile {
  Thresholds t;
  bool frozen_by_calibrate = false;
  std::uint64_t frozen_seed = 7;
};

void save_thresholds(const std::string& path, const Thresholds& t, std::uint64_t frozen_seed,
                     double recall, double fpr, double budget) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "# calibrated operating point: recall=%.6f fpr=%.6f (budget %.6g)\n"
                "[thresholds]\n"
                "tau_sem = %.17g\n"
                "tau_int = %.17g\n"
                "k = %d\n"
                "frozen_by_calibrate = true\n"
                "frozen_seed = %llu\n",
                recall, fpr, budget, t.tau_sem, t.tau_int, t.k,
                static_cast<unsigned long long>(frozen_seed));
  write_file(path, buf);
}

ThresholdsFile load_thresholds(const std::string& path) {
  Config c;
  try {
    c = Config::from_file(path);
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (!c.raw("thresholds.tau_sem") || !c.raw("thresholds.tau_int"))
    throw DataError(path + ": missing thresholds.tau_sem / thresholds.tau_int");
  ThresholdsFile f;
  f.t.tau_sem = c.real("thresholds.tau_sem", 0.0);
  f.t.tau_int = c.real("thresholds.tau_int", 0.0);
  f.t.k = static_cast<int>(c.integer("thresholds.k", 1));
  f.frozen_by_calibrate = c.flag("thresholds.frozen_by_calibrate", false);
  f.frozen_seed = static_cast<std::uint64_t>(c.integer("thresholds.frozen_seed", 7));
  try {
    f.t.validate();
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return f;
}

struct ResolvedThresholds {
  Thresholds t;
  std::uint64_t frozen_seed = 7;
};

// Operating point for the run: from a thresholds file, explicit flags, or
// both (flags win). Evaluation-style callers pass require_frozen and forbid
// tau overrides so calibrated points cannot be silently edited.
ResolvedThresholds resolve_thresholds(const Config& cfg, const std::string& section,
                                      bool require_frozen, bool allow_tau_override) {
  ResolvedThresholds r;
  const std::string path = cfg.str(section + ".thresholds", "");
  const bool have_file = !path.empty();
  if (have_file) {
    auto tf = load_thresholds(path);
    if (require_frozen && !tf.frozen_by_calibrate)
      throw GuardError(path + ": thresholds not frozen by calibrate; refusing to run");
    r.t = tf.t;
    r.frozen_seed = tf.frozen_seed;
  }
  const auto ts = cfg.raw(section + ".tau_sem");
  const auto ti = cfg.raw(section + ".tau_int");
  if (allow_tau_override) {
    if (ts) r.t.tau_sem = cfg.real(section + ".tau_sem", r.t.tau_sem);
    if (ti) r.t.tau_int = cfg.real(section + ".tau_int", r.t.tau_int);
    if (!have_file && !(ts && ti))
      throw ConfigError(section + ": need --thresholds or both --tau-sem and --tau-int");
  } else if (!have_file) {
    throw ConfigError(section + ": --thresholds required");
  }
  if (cfg.raw(section + ".k")) r.t.k = static_cast<int>(cfg.integer(section + ".k", r.t.k));
  if (cfg.raw(section + ".frozen_seed"))
    r.frozen_seed = static_cast<std::uint64_t>(
        cfg.integer(section + ".frozen_seed", static_cast<long long>(r.frozen_seed)));
  r.t.validate();
  return r;
}

EngineFactory make_factory(const IntentHead& head, std::uint64_t frozen_seed, int k) {
  EngineFactory fac;
  fac.frozen = make_frozen_encoder(frozen_seed);
  fac.head = head;
  fac.k = k;
  return fac;
}

// --- small parsers ---------------------------------------------------------

AttackMode parse_attack_mode(const std::string& name) {
  static const std::map<std::string, AttackMode> table = {
      {"standard", AttackMode::Standard},
      {"rewrite", AttackMode::Rewrite},
      {"latent-repulsion", AttackMode::LatentRepulsion},
      {"blend-first", AttackMode::BlendFirst},
      {"blend-last", AttackMode::BlendLast},
      {"fill-first", AttackMode::FillContextFirst},
      {"fill-random", AttackMode::FillContextRandom},
      {"fill-last", AttackMode::FillContextLast},
  };
  auto it = table.find(name);
  if (it == table.end()) {
    std::string valid;
    for (const auto& [key, mode] : table) {
      (void)mode;
      valid += valid.empty() ? key : ", " + key;
    }
    throw ConfigError("unknown attack mode \"" + name + "\" (valid: " + valid + ")");
  }
  return it->second;
}

std::vector<double> parse_ratio_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      double v = std::stod(item, &pos);
      while (pos < item.size() && std::isspace(static_cast<unsigned char>(item[pos]))) ++pos;
      if (pos != item.size()) throw std::invalid_argument("trailing junk");
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("bad ratio list entry \"" + item + "\"");
    }
  }
  if (out.empty()) throw ConfigError("empty ratio list");
  return out;
}

GridSpec grid_from(const Config& cfg, const std::string& prefix, GridSpec fallback) {
  GridSpec g = fallback;
  g.lo = cfg.real(prefix + "_lo", g.lo);
  g.hi = cfg.real(prefix + "_hi", g.hi);
  g.step = cfg.real(prefix + "_step", g.step);
  return g;
}

// --- subcommands ------------------------------------------------------------

void cmd_gen_data(const Config& cfg) {
  SynthConfig sc;
  sc.n_malicious_intents =
      static_cast<int>(cfg.integer("synth.n_malicious_intents", sc.n_malicious_intents));
  sc.fragments_min = static_cast<int>(cfg.integer("synth.fragments_min", sc.fragments_min));
  sc.fragments_max = static_cast<int>(cfg.integer("synth.fragments_max", sc.fragments_max));
  sc.n_benign_intents =
      static_cast<int>(cfg.integer("synth.n_benign_intents", sc.n_benign_intents));
  sc.n_benign_independent =
      static_cast<int>(cfg.integer("synth.n_benign_independent", sc.n_benign_independent));
  sc.vocab_size = static_cast<int>(cfg.integer("synth.vocab_size", sc.vocab_size));
  sc.topic_tokens_per_intent =
      static_cast<int>(cfg.integer("synth.topic_tokens_per_intent", sc.topic_tokens_per_intent));
  sc.noise_tokens_per_fragment = static_cast<int>(
      cfg.integer("synth.noise_tokens_per_fragment", sc.noise_tokens_per_fragment));
  sc.mal_subset_min = static_cast<int>(cfg.integer("synth.mal_subset_min", sc.mal_subset_min));
  sc.mal_subset_max = static_cast<int>(cfg.integer("synth.mal_subset_max", sc.mal_subset_max));
  sc.ben_subset_min = static_cast<int>(cfg.integer("synth.ben_subset_min", sc.ben_subset_min));
  sc.ben_subset_max = static_cast<int>(cfg.integer("synth.ben_subset_max", sc.ben_subset_max));
  sc.seed = static_cast<std::uint64_t>(cfg.integer("synth.seed", static_cast<long long>(sc.seed)));

  SplitSpec split;
  const auto tm = cfg.raw("split.train_mal");
  const auto vm = cfg.raw("split.val_mal");
  const auto sm = cfg.raw("split.test_mal");
  if (tm || vm || sm) {
    if (!(tm && vm && sm))
      throw ConfigError("split.train_mal / split.val_mal / split.test_mal must be given together");
    split.malicious_counts = {{static_cast<int>(cfg.integer("split.train_mal", 0)),
                               static_cast<int>(cfg.integer("split.val_mal", 0)),
                               static_cast<int>(cfg.integer("split.test_mal", 0))}};
  }
  split.ratios = {cfg.real("split.train_ratio", split.ratios[0]),
                  cfg.real("split.val_ratio", split.ratios[1]),
                  cfg.real("split.test_ratio", split.ratios[2])};
  split.seed =
      static_cast<std::uint64_t>(cfg.integer("split.seed", static_cast<long long>(split.seed)));

  const std::string out_dir = cfg.str("gen.out", "data");

  auto master = generate_dataset(sc);
  auto parts = split_dataset(master, split);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir + ": " + ec.message());

  write_file(out_dir + "/master.txt", dataset_to_text(master));
  write_file(out_dir + "/train.txt", dataset_to_text(parts[0]));
  write_file(out_dir + "/validation.txt", dataset_to_text(parts[1]));
  write_file(out_dir + "/test.txt", dataset_to_text(parts[2]));

  std::printf("wrote %s/{master,train,validation,test}.txt\n", out_dir.c_str());
  std::printf("samples: master=%zu train=%zu validation=%zu test=%zu\n", master.samples.size(),
              parts[0].samples.size(), parts[1].samples.size(), parts[2].samples.size());
  std::printf("malicious intents: train=%zu validation=%zu test=%zu\n",
              parts[0].malicious_intent_ids().size(), parts[1].malicious_intent_ids().size(),
              parts[2].malicious_intent_ids().size());
}

void cmd_train(const Config& cfg) {
  const auto data = require_str(cfg, "train.data", "--data");
  const auto out = require_str(cfg, "train.out", "--out");
  auto ds = load_split(data, "train");

  TrainConfig tc;
  tc.temperature = cfg.real("train.temperature", tc.temperature);
  tc.learning_rate = cfg.real("train.learning_rate", tc.learning_rate);
  tc.epochs = static_cast<int>(cfg.integer("train.epochs", tc.epochs));
  tc.prune_threshold = cfg.real("train.prune_threshold", tc.prune_threshold);
  tc.seed = static_cast<std::uint64_t>(cfg.integer("train.seed", static_cast<long long>(tc.seed)));
  tc.include_anchor = cfg.flag("train.include_anchor", tc.include_anchor);
  tc.symmetric_cl = cfg.flag("train.symmetric_cl", tc.symmetric_cl);
  tc.hidden_dim = static_cast<int>(cfg.integer("train.hidden_dim", tc.hidden_dim));
  tc.out_dim = static_cast<int>(cfg.integer("train.out_dim", tc.out_dim));
  const auto frozen_seed = static_cast<std::uint64_t>(cfg.integer("train.frozen_seed", 7));

  auto frozen = make_frozen_encoder(frozen_seed);
  auto res = train(ds, frozen, tc);
  save_intent_head(res.head, out);

  const double final_loss = res.steps.empty() ? 0.0 : res.steps.back().loss;
  std::printf("trained: steps=%zu final_loss=%.6f pruned=%zu\n", res.steps.size(), final_loss,
              res.pruned_away);
  std::printf("wrote %s\n", out.c_str());
  const std::string log = cfg.str("train.log", "");
  if (!log.empty()) {
    write_file(log, train_log_to_text(res.steps));
    std::printf("wrote %s\n", log.c_str());
  }
}

void cmd_calibrate(const Config& cfg) {
  const auto data = require_str(cfg, "calibrate.data", "--data");
  const auto model = require_str(cfg, "calibrate.model", "--model");
  const auto out = require_str(cfg, "calibrate.out", "--out");
  auto ds = load_split(data, "validation");
  auto head = load_intent_head(model);

  const auto frozen_seed = static_cast<std::uint64_t>(cfg.integer("calibrate.frozen_seed", 7));
  const auto stream_seed = static_cast<std::uint64_t>(cfg.integer("calibrate.stream_seed", 11));
  const int k = static_cast<int>(cfg.integer("calibrate.k", 1));
  const double budget = cfg.real("calibrate.fpr_budget", 0.01);
  const GridSpec sem_grid = grid_from(cfg, "calibrate.sem", GridSpec{});
  const GridSpec int_grid = grid_from(cfg, "calibrate.int", GridSpec{});

  auto stream = make_stream(ds, InterleavePolicy{}, stream_seed);
  auto fac = make_factory(head, frozen_seed, k);
  auto res = calibrate(fac, stream, sem_grid, int_grid, budget);
  if (!res.feasible) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "no feasible point under fpr_budget=%.6g; closest: tau_sem=%.4f tau_int=%.4f "
                  "recall=%.4f fpr=%.6f",
                  budget, res.best.tau_sem, res.best.tau_int, res.best.recall, res.best.fpr);
    throw DataError(buf);
  }

  Thresholds t;
  t.tau_sem = res.best.tau_sem;
  t.tau_int = res.best.tau_int;
  t.k = k;
  save_thresholds(out, t, frozen_seed, res.best.recall, res.best.fpr, budget);
  std::printf("calibrated: tau_sem=%.4f tau_int=%.4f k=%d recall=%.4f fpr=%.6f (%zu grid points)\n",
              t.tau_sem, t.tau_int, t.k, res.best.recall, res.best.fpr, res.n_evaluated);
  std::printf("wrote %s\n", out.c_str());
}

void cmd_eval(const Config& cfg) {
  const auto data = require_str(cfg, "eval.data", "--data");
  const auto model = require_str(cfg, "eval.model", "--model");
  auto ds = load_split(data, "test");
  auto head = load_intent_head(model);

  // Zero-shot protocol: taus must come from a calibrate-frozen file; only the
  // consensus size k may be swept.
  auto rt = resolve_thresholds(cfg, "eval", /*require_frozen=*/true, /*allow_tau_override=*/false);
  const auto stream_seed = static_cast<std::uint64_t>(cfg.integer("eval.stream_seed", 12));

  auto fac = make_factory(head, rt.frozen_seed, rt.t.k);
  auto engine = fac.make(rt.t.tau_sem, rt.t.tau_int);
  auto stream = make_stream(ds, InterleavePolicy{}, stream_seed);
  auto verdicts = run_stream(engine, stream);
  auto rep = score(stream, verdicts);

  std::printf("recall=%.4f (%d/%d)  fpr=%.6f (%d/%d)  mean_first_intercept=%.3f\n", rep.recall,
              rep.n_intercepted, rep.n_malicious_intents, rep.fpr, rep.n_benign_blocked,
              rep.n_benign, rep.mean_first_intercept);
  if (cfg.flag("eval.per_intent", false)) {
    for (const auto& [intent, fi] : rep.first_intercept)
      std::printf("intent %lld: first_intercept=%s\n", static_cast<long long>(intent),
                  fi ? std::to_string(*fi).c_str() : "none");
  }
  const std::string curve_out = cfg.str("eval.curve_out", "");
  if (!curve_out.empty()) {
    const GridSpec grid = grid_from(cfg, "eval.int", GridSpec{});
    auto curve = recall_fpr_curve(fac, stream, rt.t.tau_sem, grid.values());
    std::string text = "tau_int\tfpr\trecall\n";
    for (const auto& p : curve) {
      char line[96];
      std::snprintf(line, sizeof(line), "%.4f\t%.6f\t%.4f\n", p.tau_int, p.fpr, p.recall);
      text += line;
    }
    write_file(curve_out, text);
    std::printf("wrote %s\n", curve_out.c_str());
  }
}

void cmd_attack(const Config& cfg) {
  const auto data = require_str(cfg, "attack.data", "--data");
  const auto model = require_str(cfg, "attack.model", "--model");
  auto ds = load_dataset(data);
  auto head = load_intent_head(model);
  auto rt =
      resolve_thresholds(cfg, "attack", /*require_frozen=*/false, /*allow_tau_override=*/true);

  AttackerConfig atk;
  atk.mode = parse_attack_mode(cfg.str("attack.mode", "standard"));
  atk.max_attempts = static_cast<int>(cfg.integer("attack.max_attempts", atk.max_attempts));
  atk.repulsion_steps =
      static_cast<int>(cfg.integer("attack.repulsion_steps", atk.repulsion_steps));
  atk.repulsion_step_size =
      static_cast<int>(cfg.integer("attack.repulsion_step_size", atk.repulsion_step_size));
  atk.fill_factor = static_cast<int>(cfg.integer("attack.fill_factor", atk.fill_factor));
  atk.seed = static_cast<std::uint64_t>(cfg.integer("attack.seed", static_cast<long long>(atk.seed)));

  int k = rt.t.k;
  const bool no_defense = cfg.flag("attack.no_defense", false);
  if (no_defense) k = 1 << 30;  // consensus never reached: gate never blocks

  auto fac = make_factory(head, rt.frozen_seed, k);
  auto engine = fac.make(rt.t.tau_sem, rt.t.tau_int);
  auto rep = run_attack(engine, ds, atk);

  std::printf("mode=%s%s asr=%.4f (%zu/%zu intents bypassed)\n",
              attack_mode_name(atk.mode).c_str(), no_defense ? " (no defense)" : "", rep.asr,
              static_cast<std::size_t>(std::count_if(rep.intents.begin(), rep.intents.end(),
                                                     [](const auto& t) { return t.succeeded; })),
              rep.intents.size());
  for (const auto& tr : rep.intents)
    std::printf("intent %lld: %s submissions=%d fragments_reached=%zu\n",
                static_cast<long long>(tr.intent_id), tr.succeeded ? "bypassed" : "contained",
                tr.submissions, tr.attempts_per_fragment.size());
  std::string budgets;
  for (std::size_t b = 0; b < rep.asr_by_budget.size(); ++b) {
    char item[16];
    std::snprintf(item, sizeof(item), "%.3f", rep.asr_by_budget[b]);
    budgets += budgets.empty() ? item : std::string(",") + item;
  }
  std::printf("asr_by_budget=%s\n", budgets.c_str());
}

void cmd_pollute(const Config& cfg) {
  const auto prime_path = require_str(cfg, "pollute.prime_data", "--prime-data");
  const auto future_path = require_str(cfg, "pollute.future_data", "--future-data");
  const auto model = require_str(cfg, "pollute.model", "--model");
  const auto vocab_path = cfg.str("pollute.vocab_data", prime_path);

  auto prime_ds = load_dataset(prime_path);
  auto future_ds = load_dataset(future_path);
  auto vocab_ds = load_dataset(vocab_path);
  if (!future_ds.malicious_intent_ids().empty())
    throw DataError(future_path + ": future traffic must be benign-only");
  auto head = load_intent_head(model);
  auto rt =
      resolve_thresholds(cfg, "pollute", /*require_frozen=*/false, /*allow_tau_override=*/true);

  const auto prime_seed = static_cast<std::uint64_t>(cfg.integer("pollute.prime_seed", 11));
  const auto future_seed = static_cast<std::uint64_t>(cfg.integer("pollute.future_seed", 17));
  const auto seed = static_cast<std::uint64_t>(cfg.integer("pollute.seed", 23));
  const int n_poison = static_cast<int>(cfg.integer("pollute.n_poison", 1000));
  const int steps = static_cast<int>(cfg.integer("pollute.steps", 4));
  const int step_size = static_cast<int>(cfg.integer("pollute.step_size", 8));

  auto fac = make_factory(head, rt.frozen_seed, rt.t.k);
  auto engine = fac.make(rt.t.tau_sem, rt.t.tau_int);
  run_stream(engine, make_stream(prime_ds, InterleavePolicy{}, prime_seed));
  auto future_stream = make_stream(future_ds, InterleavePolicy{}, future_seed);

  double base_fpr = 0.0;
  for (int n : {0, n_poison}) {
    auto rep = run_pollution(engine, vocab_ds, future_stream, n, seed, steps, step_size);
    std::printf("n_poison=%d: fpr=%.6f (%d/%d clean blocked) poisons_blocked=%d/%d\n",
                rep.n_poison, rep.fpr, rep.clean_blocked, rep.clean_total, rep.poisons_blocked,
                rep.n_poison);
    if (n == 0)
      base_fpr = rep.fpr;
    else if (base_fpr > 0.0)
      std::printf("fpr_ratio=%.3f\n", rep.fpr / base_fpr);
    else
      std::printf("fpr_ratio=%s (baseline fpr is zero)\n", rep.fpr > 0.0 ? "inf" : "1.000");
  }
}

void cmd_capacity_study(const Config& cfg) {
  const auto data = require_str(cfg, "capacity.data", "--data");
  const auto model = require_str(cfg, "capacity.model", "--model");
  auto ds = load_dataset(data);
  auto head = load_intent_head(model);
  auto rt =
      resolve_thresholds(cfg, "capacity", /*require_frozen=*/false, /*allow_tau_override=*/true);

  const auto stream_seed = static_cast<std::uint64_t>(cfg.integer("capacity.stream_seed", 13));
  const auto ratios = parse_ratio_list(cfg.str("capacity.ratios", "0.10,0.25,1.0"));
  const GridSpec grid = grid_from(cfg, "capacity.int", GridSpec{});
  const long long spread = cfg.integer("capacity.max_spread", -1);

  InterleavePolicy loris;
  loris.kind = InterleavePolicy::Kind::SlowLoris;
  if (spread >= 0) loris.max_spread = static_cast<std::size_t>(spread);
  auto stream = make_stream(ds, loris, stream_seed);
  const auto total = static_cast<std::int64_t>(stream.size());

  auto fac = make_factory(head, rt.frozen_seed, rt.t.k);
  const auto taus = grid.values();
  auto base_curve = recall_fpr_curve(fac, stream, rt.t.tau_sem, taus);
  std::printf("stream=%lld requests, tau_sem=%.4f, base_auc=%.6f\n",
              static_cast<long long>(total), rt.t.tau_sem, curve_auc(base_curve));
  for (double ratio : ratios) {
    if (ratio <= 0.0) throw ConfigError("capacity ratios must be positive");
    EngineFactory capped = fac;
    const auto capacity =
        static_cast<std::int64_t>(std::ceil(ratio * static_cast<double>(total)));
    capped.sem_cfg.capacity = capacity;
    capped.int_cfg.capacity = capacity;
    auto curve = recall_fpr_curve(capped, stream, rt.t.tau_sem, taus);
    std::printf("ratio=%.2f capacity=%lld auc_rel=%.6f\n", ratio,
                static_cast<long long>(capacity), relative_auc(curve, base_curve));
  }
}

void cmd_bounds(const Config& cfg) {
  bool did_anything = false;

  const auto ti = cfg.raw("bounds.tau_int");
  const auto di = cfg.raw("bounds.d_int");
  const auto rm = cfg.raw("bounds.r_mal");
  if (di || rm) {
    if (!(ti && di && rm))
      throw ConfigError("packing bound needs --tau-int, --d-int, and --r-mal together");
    const double tau_int = cfg.real("bounds.tau_int", 0.0);
    const int d_int = static_cast<int>(cfg.integer("bounds.d_int", 0));
    const double r_mal = cfg.real("bounds.r_mal", 0.0);
    auto b = packing_limit(tau_int, d_int, r_mal);
    std::printf("packing: tau_int=%.4f d_int=%d r_mal=%.4f cap_angle=%.4f limit=%.4f "
                "small_angle=%s\n",
                tau_int, d_int, r_mal, b.cap_angle, b.limit, b.small_angle ? "yes" : "no");
    const int mc = static_cast<int>(cfg.integer("bounds.mc_samples", 0));
    if (mc > 0) {
      const auto mc_seed = static_cast<std::uint64_t>(cfg.integer("bounds.mc_seed", 1));
      int kept = greedy_cap_packing(tau_int, d_int, r_mal, mc, mc_seed);
      std::printf("packing-mc: kept=%d samples=%d seed=%llu\n", kept, mc,
                  static_cast<unsigned long long>(mc_seed));
    }
    did_anything = true;
  }

  if (cfg.raw("bounds.gamma")) {
    const double gamma = cfg.real("bounds.gamma", 0.0);
    const int max_attempts = static_cast<int>(cfg.integer("bounds.max_attempts", 10));
    auto curve = feasibility_curve(gamma, max_attempts);
    for (std::size_t i = 0; i < curve.size(); ++i)
      std::printf("fragment=%zu expected_attempts=%.6f\n", i + 1, curve[i]);
    did_anything = true;
  }

  const std::string data = cfg.str("bounds.data", "");
  if (!data.empty()) {
    const auto model_path = require_str(cfg, "bounds.model", "--model");
    auto ds = load_dataset(data);
    if (ds.synth_blob.empty()) throw DataError(data + ": dataset carries no generator provenance");
    auto intents = ds.malicious_intent_ids();
    if (intents.empty()) throw DataError(data + ": no malicious intents to measure");
    auto head = load_intent_head(model_path);
    const auto frozen_seed = static_cast<std::uint64_t>(cfg.integer("bounds.frozen_seed", 7));
    const int n_variants = static_cast<int>(cfg.integer("bounds.n_variants", 100));
    const auto seed = static_cast<std::uint64_t>(cfg.integer("bounds.seed", 22));
    const double tau_int = cfg.real("bounds.tau_int", 0.80);

    auto fac = make_factory(head, frozen_seed, 1);
    auto probe = fac.make(Thresholds{}.tau_sem, Thresholds{}.tau_int);
    auto synth = build_synth_model(synth_config_from_blob(ds.synth_blob));

    auto gamma = estimate_gamma(probe, synth, intents, n_variants, tau_int, seed);
    std::printf("gamma: mean=%.6f tau_int=%.4f n_variants=%d\n", gamma.mean, tau_int,
                gamma.n_variants);
    for (const auto& [intent, g] : gamma.per_intent)
      std::printf("gamma intent %lld: %.6f\n", static_cast<long long>(intent), g);

    auto radius = intent_radius(probe, ds);
    std::printf("r_mal: max=%.6f (over dataset fragments)\n", radius.max_radius);
    for (const auto& [intent, r] : radius.per_intent)
      std::printf("r_mal intent %lld: %.6f\n", static_cast<long long>(intent), r);
    did_anything = true;
  }

  if (!did_anything)
    throw ConfigError(
        "nothing to compute: give --d-int/--r-mal/--tau-int, --gamma, or --data/--model");
}

std::atomic<bool> g_serve_stop{false};

void handle_stop_signal(int) { g_serve_stop.store(true); }

void cmd_serve(const Config& cfg) {
  const auto model = require_str(cfg, "serve.model", "--model");
  auto head = load_intent_head(model);
  auto rt = resolve_thresholds(cfg, "serve", /*require_frozen=*/false, /*allow_tau_override=*/true);

  auto fac = make_factory(head, rt.frozen_seed, rt.t.k);
  fac.write_lag = static_cast<int>(cfg.integer("serve.write_lag", 0));
  const long long sem_cap = cfg.integer("serve.sem_capacity", 0);
  const long long int_cap = cfg.integer("serve.int_capacity", 0);
  if (sem_cap > 0) fac.sem_cfg.capacity = sem_cap;
  if (int_cap > 0) fac.int_cfg.capacity = int_cap;
  const double merge_sim = cfg.real("serve.merge_similarity", fac.sem_cfg.merge_similarity);
  fac.sem_cfg.merge_similarity = merge_sim;
  fac.int_cfg.merge_similarity = merge_sim;
  auto engine = fac.make(rt.t.tau_sem, rt.t.tau_int);

  ServeOptions opts;
  opts.host = cfg.str("serve.host", opts.host);
  opts.port = static_cast<int>(cfg.integer("serve.port", opts.port));

  g_serve_stop.store(false);
  std::signal(SIGINT, handle_stop_signal);
  std::signal(SIGTERM, handle_stop_signal);
  run_serve(engine, opts, g_serve_stop, [&opts](int port) {
    std::printf("listening on %s:%d\n", opts.host.c_str(), port);
    std::fflush(stdout);
  });
  std::printf("stopped after %zu requests\n", engine.verdict_log().size());
}

void cmd_bench(const Config& cfg) {
  const auto store_size = cfg.integer("bench.store_size", 100000);
  const int dim = static_cast<int>(cfg.integer("bench.dim", 128));
  const int queries = static_cast<int>(cfg.integer("bench.queries", 200));
  const auto seed = static_cast<std::uint64_t>(cfg.integer("bench.seed", 42));

  auto ls = bench_store_query(store_size, dim, queries, seed);
  std::printf("store query: entries=%lld dim=%d queries=%zu p50=%.3fms p95=%.3fms p99=%.3fms "
              "mean=%.3fms\n",
              static_cast<long long>(store_size), dim, ls.n, ls.p50_us / 1000.0,
              ls.p95_us / 1000.0, ls.p99_us / 1000.0, ls.mean_us / 1000.0);

  // Adjudication throughput over a self-generated stream; arrivals are a
  // seeded Poisson process replayed in virtual time over measured service
  // times, so only the service measurement itself is wall-clock.
  const int requests = static_cast<int>(cfg.integer("bench.requests", 2000));
  const double lambda = cfg.real("bench.lambda", 400.0);
  const auto data_seed = static_cast<std::uint64_t>(cfg.integer("bench.data_seed", 5));
  const auto stream_seed = static_cast<std::uint64_t>(cfg.integer("bench.stream_seed", 3));
  const auto arrival_seed = static_cast<std::uint64_t>(cfg.integer("bench.arrival_seed", 9));

  SynthConfig sc;
  sc.seed = data_seed;
  auto ds = generate_dataset(sc);
  auto stream = make_stream(ds, InterleavePolicy{}, stream_seed);
  if (static_cast<int>(stream.size()) > requests) {
    stream.resize(static_cast<std::size_t>(requests));
    for (std::size_t i = 0; i < stream.size(); ++i)
      stream[i].arrival_index = static_cast<std::int64_t>(i) + 1;
  }

  EngineFactory fac = make_factory(make_intent_head(1), 7, 1);
  auto engine = fac.make(0.99, 0.80);
  auto th = bench_engine(engine, stream, lambda, arrival_seed);
  std::printf("engine: max_sustainable_lambda=%.1f req/s over %zu requests\n",
              th.requests_per_sec, stream.size());
  std::printf("engine service: p50=%.0fus p95=%.0fus p99=%.0fus mean=%.0fus\n", th.service.p50_us,
              th.service.p95_us, th.service.p99_us, th.service.mean_us);
  std::printf("engine sojourn at lambda=%.1f/s: mean=%.0fus p99=%.0fus\n", th.lambda_per_sec,
              th.mean_sojourn_us, th.p99_sojourn_us);
}

// --- flag plumbing ----------------------------------------------------------

// Records which CLI flags were actually given so they can be pushed into the
// Config on top of file and environment values.
class Binder {
 public:
  CLI::Option* num(CLI::App* app, const std::string& flag, long long& var, const std::string& key,
                   const std::string& desc) {
    auto* o = app->add_option(flag, var, desc);
    add(o, key, [&var] { return std::to_string(var); });
    return o;
  }
  CLI::Option* real(CLI::App* app, const std::string& flag, double& var, const std::string& key,
                    const std::string& desc) {
    auto* o = app->add_option(flag, var, desc);
    add(o, key, [&var] {
      char b[64];
      std::snprintf(b, sizeof(b), "%.17g", var);
      return std::string(b);
    });
    return o;
  }
  CLI::Option* str(CLI::App* app, const std::string& flag, std::string& var, const std::string& key,
                   const std::string& desc) {
    auto* o = app->add_option(flag, var, desc);
    add(o, key, [&var] { return var; });
    return o;
  }
  CLI::Option* flag(CLI::App* app, const std::string& spec, bool& var, const std::string& key,
                    const std::string& desc) {
    auto* o = app->add_flag(spec, var, desc);
    add(o, key, [&var] { return var ? "true" : "false"; });
    return o;
  }
  void push(Config& cfg) const {
    for (const auto& e : entries_)
      if (e.opt->count() > 0) cfg.set(e.key, e.render());
  }

 private:
  struct Entry {
    CLI::Option* opt;
    std::string key;
    std::function<std::string()> render;
  };
  void add(CLI::Option* opt, const std::string& key, std::function<std::string()> render) {
    entries_.push_back({opt, key, std::move(render)});
  }
  std::vector<Entry> entries_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stateful two-stage request gate"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "configuration file (file < DUOGATE_* env < flags)");

  Binder bind;
  std::function<void(const Config&)> action;
  const auto dispatch = [&](CLI::App* sub, void (*fn)(const Config&)) {
    sub->callback([&, fn] { action = fn; });
  };

  // gen-data
  {
    auto* sc = app.add_subcommand("gen-data", "generate a labeled corpus and split it");
    static long long v_mal = 30, v_fmin = 3, v_fmax = 6, v_bint = 140, v_bind = 1440,
                     v_vocab = 2000, v_topic = 6, v_noise = 4, v_msmin = 4, v_msmax = 5,
                     v_bsmin = 1, v_bsmax = 2, v_seed = 1;
    static long long v_tm = 0, v_vm = 0, v_sm = 0, v_ssd = 1;
    static double v_rtr = 0.8, v_rva = 0.1, v_rte = 0.1;
    static std::string v_out = "data";
    bind.num(sc, "--n-malicious-intents", v_mal, "synth.n_malicious_intents", "malicious intents");
    bind.num(sc, "--fragments-min", v_fmin, "synth.fragments_min", "min fragments per intent");
    bind.num(sc, "--fragments-max", v_fmax, "synth.fragments_max", "max fragments per intent");
    bind.num(sc, "--n-benign-intents", v_bint, "synth.n_benign_intents", "benign intents");
    bind.num(sc, "--n-benign-independent", v_bind, "synth.n_benign_independent",
             "independent benign requests");
    bind.num(sc, "--vocab-size", v_vocab, "synth.vocab_size", "vocabulary size");
    bind.num(sc, "--topic-tokens-per-intent", v_topic, "synth.topic_tokens_per_intent",
             "topic tokens per intent");
    bind.num(sc, "--noise-tokens-per-fragment", v_noise, "synth.noise_tokens_per_fragment",
             "noise tokens per fragment");
    bind.num(sc, "--mal-subset-min", v_msmin, "synth.mal_subset_min", "min topic tokens (malicious)");
    bind.num(sc, "--mal-subset-max", v_msmax, "synth.mal_subset_max", "max topic tokens (malicious)");
    bind.num(sc, "--ben-subset-min", v_bsmin, "synth.ben_subset_min", "min topic tokens (benign)");
    bind.num(sc, "--ben-subset-max", v_bsmax, "synth.ben_subset_max", "max topic tokens (benign)");
    bind.num(sc, "--seed", v_seed, "synth.seed", "generator seed");
    bind.num(sc, "--train-mal", v_tm, "split.train_mal", "malicious intents in train");
    bind.num(sc, "--val-mal", v_vm, "split.val_mal", "malicious intents in validation");
    bind.num(sc, "--test-mal", v_sm, "split.test_mal", "malicious intents in test");
    bind.real(sc, "--train-ratio", v_rtr, "split.train_ratio", "train ratio");
    bind.real(sc, "--val-ratio", v_rva, "split.val_ratio", "validation ratio");
    bind.real(sc, "--test-ratio", v_rte, "split.test_ratio", "test ratio");
    bind.num(sc, "--split-seed", v_ssd, "split.seed", "split shuffle seed");
    bind.str(sc, "--out", v_out, "gen.out", "output directory");
    dispatch(sc, cmd_gen_data);
  }

  // train
  {
    auto* sc = app.add_subcommand("train", "train the intent head on the train split");
    static std::string v_data, v_out, v_log;
    static double v_temp = 0.1, v_lr = 0.05, v_prune = 0.95;
    static long long v_epochs = 3, v_seed = 1, v_hidden = 512, v_outdim = 128, v_fseed = 7;
    static bool v_anchor = true, v_sym = false;
    bind.str(sc, "--data", v_data, "train.data", "train split file");
    bind.str(sc, "--out", v_out, "train.out", "model snapshot to write");
    bind.str(sc, "--log", v_log, "train.log", "per-step loss log to write");
    bind.real(sc, "--temperature", v_temp, "train.temperature", "contrastive temperature");
    bind.real(sc, "--learning-rate", v_lr, "train.learning_rate", "SGD learning rate");
    bind.num(sc, "--epochs", v_epochs, "train.epochs", "epochs");
    bind.real(sc, "--prune-threshold", v_prune, "train.prune_threshold",
              "near-duplicate prune threshold");
    bind.num(sc, "--seed", v_seed, "train.seed", "training seed");
    bind.flag(sc, "--include-anchor,!--no-include-anchor", v_anchor, "train.include_anchor",
              "include anchor requests in training");
    bind.flag(sc, "--symmetric-cl", v_sym, "train.symmetric_cl",
              "symmetric contrastive variant (ablation)");
    bind.num(sc, "--hidden-dim", v_hidden, "train.hidden_dim", "hidden width");
    bind.num(sc, "--out-dim", v_outdim, "train.out_dim", "output dimension");
    bind.num(sc, "--frozen-seed", v_fseed, "train.frozen_seed", "frozen encoder seed");
    dispatch(sc, cmd_train);
  }

  // calibrate
  {
    auto* sc = app.add_subcommand("calibrate",
                                  "grid-search thresholds on the validation split");
    static std::string v_data, v_model, v_out;
    static double v_budget = 0.01, v_slo = 0.50, v_shi = 0.99, v_sst = 0.01, v_ilo = 0.50,
                  v_ihi = 0.99, v_ist = 0.01;
    static long long v_fseed = 7, v_sseed = 11, v_k = 1;
    bind.str(sc, "--data", v_data, "calibrate.data", "validation split file");
    bind.str(sc, "--model", v_model, "calibrate.model", "trained model snapshot");
    bind.str(sc, "--out", v_out, "calibrate.out", "thresholds file to write");
    bind.real(sc, "--fpr-budget", v_budget, "calibrate.fpr_budget", "false-positive budget");
    bind.num(sc, "--frozen-seed", v_fseed, "calibrate.frozen_seed", "frozen encoder seed");
    bind.num(sc, "--stream-seed", v_sseed, "calibrate.stream_seed", "stream interleaving seed");
    bind.num(sc, "--k", v_k, "calibrate.k", "intent consensus size");
    bind.real(sc, "--sem-lo", v_slo, "calibrate.sem_lo", "semantic grid low");
    bind.real(sc, "--sem-hi", v_shi, "calibrate.sem_hi", "semantic grid high");
    bind.real(sc, "--sem-step", v_sst, "calibrate.sem_step", "semantic grid step");
    bind.real(sc, "--int-lo", v_ilo, "calibrate.int_lo", "intent grid low");
    bind.real(sc, "--int-hi", v_ihi, "calibrate.int_hi", "intent grid high");
    bind.real(sc, "--int-step", v_ist, "calibrate.int_step", "intent grid step");
    dispatch(sc, cmd_calibrate);
  }

  // eval
  {
    auto* sc = app.add_subcommand("eval", "score the test split at frozen thresholds");
    static std::string v_data, v_model, v_thr, v_curve;
    static long long v_sseed = 12, v_k = 1, v_fseed = 7;
    static bool v_per = false;
    static double v_ilo = 0.50, v_ihi = 0.99, v_ist = 0.01;
    bind.str(sc, "--data", v_data, "eval.data", "test split file");
    bind.str(sc, "--model", v_model, "eval.model", "trained model snapshot");
    bind.str(sc, "--thresholds", v_thr, "eval.thresholds", "calibrated thresholds file");
    bind.num(sc, "--stream-seed", v_sseed, "eval.stream_seed", "stream interleaving seed");
    bind.num(sc, "--k", v_k, "eval.k", "override consensus size (taus stay frozen)");
    bind.num(sc, "--frozen-seed", v_fseed, "eval.frozen_seed", "override frozen encoder seed");
    bind.flag(sc, "--per-intent", v_per, "eval.per_intent", "print per-intent first intercepts");
    bind.str(sc, "--curve-out", v_curve, "eval.curve_out", "write tau_int/fpr/recall sweep");
    bind.real(sc, "--int-lo", v_ilo, "eval.int_lo", "sweep grid low");
    bind.real(sc, "--int-hi", v_ihi, "eval.int_hi", "sweep grid high");
    bind.real(sc, "--int-step", v_ist, "eval.int_step", "sweep grid step");
    dispatch(sc, cmd_eval);
  }

  // attack
  {
    auto* sc = app.add_subcommand("attack", "run an adaptive attacker against a live engine");
    static std::string v_data, v_model, v_thr, v_mode = "standard";
    static long long v_att = 30, v_rs = 2, v_rss = 4, v_fill = 4, v_seed = 1, v_k = 1,
                     v_fseed = 7;
    static double v_ts = 0.95, v_ti = 0.80;
    static bool v_nodef = false;
    bind.str(sc, "--data", v_data, "attack.data", "dataset with target intents");
    bind.str(sc, "--model", v_model, "attack.model", "trained model snapshot");
    bind.str(sc, "--thresholds", v_thr, "attack.thresholds", "thresholds file");
    bind.str(sc, "--mode", v_mode, "attack.mode",
             "standard|rewrite|latent-repulsion|blend-first|blend-last|fill-first|fill-random|"
             "fill-last");
    bind.num(sc, "--max-attempts", v_att, "attack.max_attempts", "submission budget per intent");
    bind.num(sc, "--repulsion-steps", v_rs, "attack.repulsion_steps", "hill-climb rounds");
    bind.num(sc, "--repulsion-step-size", v_rss, "attack.repulsion_step_size",
             "candidates per round");
    bind.num(sc, "--fill-factor", v_fill, "attack.fill_factor", "filler length multiple");
    bind.num(sc, "--seed", v_seed, "attack.seed", "attacker seed");
    bind.real(sc, "--tau-sem", v_ts, "attack.tau_sem", "explicit semantic threshold");
    bind.real(sc, "--tau-int", v_ti, "attack.tau_int", "explicit intent threshold");
    bind.num(sc, "--k", v_k, "attack.k", "consensus size");
    bind.num(sc, "--frozen-seed", v_fseed, "attack.frozen_seed", "frozen encoder seed");
    bind.flag(sc, "--no-defense", v_nodef, "attack.no_defense",
              "disable blocking (baseline ASR)");
    dispatch(sc, cmd_attack);
  }

  // pollute
  {
    auto* sc = app.add_subcommand("pollute", "poison the stores, then measure clean-traffic FPR");
    static std::string v_prime, v_future, v_vocab, v_model, v_thr;
    static long long v_np = 1000, v_seed = 23, v_steps = 4, v_ss = 8, v_pseed = 11, v_fseed2 = 17,
                     v_k = 1, v_fro = 7;
    static double v_ts = 0.95, v_ti = 0.80;
    bind.str(sc, "--prime-data", v_prime, "pollute.prime_data", "dataset streamed before poisoning");
    bind.str(sc, "--future-data", v_future, "pollute.future_data", "benign-only future traffic");
    bind.str(sc, "--vocab-data", v_vocab, "pollute.vocab_data",
             "dataset providing generator provenance (default: prime data)");
    bind.str(sc, "--model", v_model, "pollute.model", "trained model snapshot");
    bind.str(sc, "--thresholds", v_thr, "pollute.thresholds", "thresholds file");
    bind.num(sc, "--n-poison", v_np, "pollute.n_poison", "poison count");
    bind.num(sc, "--seed", v_seed, "pollute.seed", "poison crafting seed");
    bind.num(sc, "--steps", v_steps, "pollute.steps", "crafting ascent rounds");
    bind.num(sc, "--step-size", v_ss, "pollute.step_size", "candidates per round");
    bind.num(sc, "--prime-seed", v_pseed, "pollute.prime_seed", "prime stream seed");
    bind.num(sc, "--future-seed", v_fseed2, "pollute.future_seed", "future stream seed");
    bind.real(sc, "--tau-sem", v_ts, "pollute.tau_sem", "explicit semantic threshold");
    bind.real(sc, "--tau-int", v_ti, "pollute.tau_int", "explicit intent threshold");
    bind.num(sc, "--k", v_k, "pollute.k", "consensus size");
    bind.num(sc, "--frozen-seed", v_fro, "pollute.frozen_seed", "frozen encoder seed");
    dispatch(sc, cmd_pollute);
  }

  // capacity-study
  {
    auto* sc = app.add_subcommand("capacity-study",
                                  "recall/FPR area vs store capacity on a slow-loris stream");
    static std::string v_data, v_model, v_thr, v_ratios = "0.10,0.25,1.0";
    static long long v_sseed = 13, v_spread = -1, v_k = 1, v_fseed = 7;
    static double v_ts = 0.95, v_ti = 0.80, v_ilo = 0.50, v_ihi = 0.99, v_ist = 0.01;
    bind.str(sc, "--data", v_data, "capacity.data", "dataset to stream");
    bind.str(sc, "--model", v_model, "capacity.model", "trained model snapshot");
    bind.str(sc, "--thresholds", v_thr, "capacity.thresholds", "thresholds file");
    bind.str(sc, "--ratios", v_ratios, "capacity.ratios", "comma-separated capacity ratios");
    bind.num(sc, "--stream-seed", v_sseed, "capacity.stream_seed", "stream seed");
    bind.num(sc, "--max-spread", v_spread, "capacity.max_spread",
             "cap on background requests between fragments (-1 = unlimited)");
    bind.real(sc, "--tau-sem", v_ts, "capacity.tau_sem", "explicit semantic threshold");
    bind.real(sc, "--tau-int", v_ti, "capacity.tau_int", "explicit intent threshold");
    bind.num(sc, "--k", v_k, "capacity.k", "consensus size");
    bind.num(sc, "--frozen-seed", v_fseed, "capacity.frozen_seed", "frozen encoder seed");
    bind.real(sc, "--int-lo", v_ilo, "capacity.int_lo", "curve grid low");
    bind.real(sc, "--int-hi", v_ihi, "capacity.int_hi", "curve grid high");
    bind.real(sc, "--int-step", v_ist, "capacity.int_step", "curve grid step");
    dispatch(sc, cmd_capacity_study);
  }

  // bounds
  {
    auto* sc = app.add_subcommand("bounds", "capacity / feasibility bound calculators");
    static double v_ti = 0.80, v_rm = 0.5, v_gamma = 0.0;
    static long long v_di = 0, v_mc = 0, v_mcs = 1, v_ma = 10, v_nv = 100, v_seed = 22,
                     v_fseed = 7;
    static std::string v_data, v_model;
    bind.real(sc, "--tau-int", v_ti, "bounds.tau_int", "intent threshold");
    bind.num(sc, "--d-int", v_di, "bounds.d_int", "intent manifold dimension");
    bind.real(sc, "--r-mal", v_rm, "bounds.r_mal", "malicious cluster angular radius");
    bind.num(sc, "--mc-samples", v_mc, "bounds.mc_samples", "greedy packing Monte-Carlo samples");
    bind.num(sc, "--mc-seed", v_mcs, "bounds.mc_seed", "Monte-Carlo seed");
    bind.real(sc, "--gamma", v_gamma, "bounds.gamma", "exclusion mass for the feasibility curve");
    bind.num(sc, "--max-attempts", v_ma, "bounds.max_attempts", "feasibility curve length");
    bind.str(sc, "--data", v_data, "bounds.data", "dataset for empirical estimates");
    bind.str(sc, "--model", v_model, "bounds.model", "trained model snapshot");
    bind.num(sc, "--n-variants", v_nv, "bounds.n_variants", "variants per intent");
    bind.num(sc, "--seed", v_seed, "bounds.seed", "variant sampling seed");
    bind.num(sc, "--frozen-seed", v_fseed, "bounds.frozen_seed", "frozen encoder seed");
    dispatch(sc, cmd_bounds);
  }

  // serve
  {
    auto* sc = app.add_subcommand("serve", "adjudicate a tab-separated line protocol over TCP");
    static std::string v_model, v_thr, v_host = "127.0.0.1";
    static long long v_port = 0, v_lag = 0, v_scap = 0, v_icap = 0, v_k = 1, v_fseed = 7;
    static double v_ts = 0.95, v_ti = 0.80, v_merge = 0.90;
    bind.str(sc, "--model", v_model, "serve.model", "trained model snapshot");
    bind.str(sc, "--thresholds", v_thr, "serve.thresholds", "thresholds file");
    bind.str(sc, "--host", v_host, "serve.host", "bind address");
    bind.num(sc, "--port", v_port, "serve.port", "bind port (0 = ephemeral)");
    bind.num(sc, "--write-lag", v_lag, "serve.write_lag", "relaxed write visibility lag");
    bind.num(sc, "--sem-capacity", v_scap, "serve.sem_capacity",
             "semantic store capacity (0 = unbounded)");
    bind.num(sc, "--int-capacity", v_icap, "serve.int_capacity",
             "intent store capacity (0 = unbounded)");
    bind.real(sc, "--merge-similarity", v_merge, "serve.merge_similarity",
              "eviction merge similarity");
    bind.real(sc, "--tau-sem", v_ts, "serve.tau_sem", "explicit semantic threshold");
    bind.real(sc, "--tau-int", v_ti, "serve.tau_int", "explicit intent threshold");
    bind.num(sc, "--k", v_k, "serve.k", "consensus size");
    bind.num(sc, "--frozen-seed", v_fseed, "serve.frozen_seed", "frozen encoder seed");
    dispatch(sc, cmd_serve);
  }

  // bench
  {
    auto* sc = app.add_subcommand("bench", "store-query latency and adjudication throughput");
    static long long v_size = 100000, v_dim = 128, v_q = 200, v_seed = 42, v_req = 2000,
                     v_dseed = 5, v_sseed = 3, v_aseed = 9;
    static double v_lambda = 400.0;
    bind.num(sc, "--store-size", v_size, "bench.store_size", "preloaded store entries");
    bind.num(sc, "--dim", v_dim, "bench.dim", "vector dimension");
    bind.num(sc, "--queries", v_q, "bench.queries", "measured queries");
    bind.num(sc, "--seed", v_seed, "bench.seed", "store/query seed");
    bind.num(sc, "--requests", v_req, "bench.requests", "throughput stream length");
    bind.real(sc, "--lambda", v_lambda, "bench.lambda", "probe arrival rate (req/s)");
    bind.num(sc, "--data-seed", v_dseed, "bench.data_seed", "throughput corpus seed");
    bind.num(sc, "--stream-seed", v_sseed, "bench.stream_seed", "throughput stream seed");
    bind.num(sc, "--arrival-seed", v_aseed, "bench.arrival_seed", "Poisson arrival seed");
    dispatch(sc, cmd_bench);
  }

  try {
    app.parse(argc, argv);
    Config cfg;
    if (!config_path.empty()) {
      try {
        cfg = Config::from_file(config_path);
      } catch (const std::exception& e) {
        throw ConfigError(config_path + ": " + e.what());
      }
    }
    cfg.apply_env();
    bind.push(cfg);
    action(cfg);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const GuardError& e) {
    std::fprintf(stderr, "duogate: refused: %s\n", e.what());
    return 4;
  } catch (const DataError& e) {
    std::fprintf(stderr, "duogate: data-error: %s\n", e.what());
    return 3;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "duogate: config-error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "duogate: config-error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "duogate: data-error: %s\n", e.what());
    return 3;
  }
  return 0;
}
