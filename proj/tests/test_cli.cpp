#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

// DUOGATE_CLI is the compiled binary path, injected by the build.

namespace {

struct RunResult {
  int code;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(DUOGATE_CLI) + " " + args + " 2>&1";
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  const int st = ::pclose(p);
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, out};
}

std::string make_tmp_dir() {
  char tmpl[] = "/tmp/duogate_cli_XXXXXX";
  REQUIRE(::mkdtemp(tmpl) != nullptr);
  return tmpl;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

const std::string kGenBase =
    " --n-malicious-intents 4 --fragments-min 2 --fragments-max 3"
    " --n-benign-intents 8 --n-benign-independent 40 --vocab-size 400"
    " --train-mal 2 --val-mal 1 --test-mal 1 --split-seed 5";
const std::string kGenArgs = kGenBase + " --seed 3";

}  // namespace

TEST_CASE("usage and parse errors") {
  auto help = run_cli("--help");
  CHECK(help.code == 0);
  CHECK(contains(help.out, "gen-data"));
  CHECK(contains(help.out, "calibrate"));

  CHECK(run_cli("").code == 2);               // a subcommand is required
  CHECK(run_cli("frobnicate").code == 2);     // unknown subcommand
  CHECK(run_cli("train --bogus 1").code == 2);

  auto missing = run_cli("train");
  CHECK(missing.code == 2);
  CHECK(contains(missing.out, "train.data"));
}

TEST_CASE("gen-data writes a deterministic corpus") {
  const auto a = make_tmp_dir();
  const auto b = make_tmp_dir();
  const auto c = make_tmp_dir();

  auto r1 = run_cli("gen-data --out " + a + kGenArgs);
  REQUIRE(r1.code == 0);
  CHECK(contains(r1.out, "samples: master="));
  CHECK(contains(r1.out, "malicious intents: train=2 validation=1 test=1"));
  for (const char* f : {"master.txt", "train.txt", "validation.txt", "test.txt"})
    CHECK(std::ifstream(a + "/" + f).good());

  REQUIRE(run_cli("gen-data --out " + b + kGenArgs).code == 0);
  CHECK(read_file(a + "/master.txt") == read_file(b + "/master.txt"));
  CHECK(read_file(a + "/test.txt") == read_file(b + "/test.txt"));

  REQUIRE(run_cli("gen-data --out " + c + kGenBase + " --seed 4").code == 0);
  CHECK(read_file(a + "/master.txt") != read_file(c + "/master.txt"));
}

TEST_CASE("pipeline: train, calibrate, eval, attack, bounds") {
  const auto dir = make_tmp_dir();
  REQUIRE(run_cli("gen-data --out " + dir + kGenArgs).code == 0);

  const std::string train_args = " --data " + dir + "/train.txt --epochs 2 --hidden-dim 64"
                                 " --out-dim 32 --seed 1";
  auto tr = run_cli("train --out " + dir + "/head.bin" + train_args);
  REQUIRE(tr.code == 0);
  CHECK(contains(tr.out, "trained:"));
  REQUIRE(run_cli("train --out " + dir + "/head2.bin" + train_args).code == 0);
  CHECK(read_file(dir + "/head.bin") == read_file(dir + "/head2.bin"));

  auto cal = run_cli("calibrate --data " + dir + "/validation.txt --model " + dir +
                     "/head.bin --out " + dir + "/thresholds.txt --fpr-budget 0.25"
                     " --sem-lo 0.80 --sem-hi 0.95 --sem-step 0.05"
                     " --int-lo 0.60 --int-hi 0.95 --int-step 0.05");
  REQUIRE(cal.code == 0);
  CHECK(contains(cal.out, "calibrated:"));
  CHECK(contains(read_file(dir + "/thresholds.txt"), "frozen_by_calibrate = true"));

  auto ev = run_cli("eval --data " + dir + "/test.txt --model " + dir +
                    "/head.bin --thresholds " + dir + "/thresholds.txt");
  REQUIRE(ev.code == 0);
  CHECK(contains(ev.out, "recall="));
  CHECK(contains(ev.out, "fpr="));

  // wrong split refuses before any scoring
  CHECK(run_cli("eval --data " + dir + "/train.txt --model " + dir +
                "/head.bin --thresholds " + dir + "/thresholds.txt")
            .code == 3);

  // hand-edited thresholds are not calibrate-frozen: the zero-shot guard refuses
  write_file(dir + "/unfrozen.txt", "[thresholds]\ntau_sem = 0.95\ntau_int = 0.8\nk = 1\n");
  auto guard = run_cli("eval --data " + dir + "/test.txt --model " + dir +
                       "/head.bin --thresholds " + dir + "/unfrozen.txt");
  CHECK(guard.code == 4);
  CHECK(contains(guard.out, "refusing"));

  CHECK(run_cli("eval --data " + dir + "/test.txt --model " + dir + "/head.bin").code == 2);

  const std::string atk_args = "attack --data " + dir + "/master.txt --model " + dir +
                               "/head.bin --tau-sem 0.95 --tau-int 0.80 --max-attempts 2"
                               " --seed 1";
  auto atk = run_cli(atk_args);
  REQUIRE(atk.code == 0);
  CHECK(contains(atk.out, "mode=standard"));
  CHECK(contains(atk.out, "asr="));

  // environment overrides the default, explicit flags override the environment
  REQUIRE(::setenv("DUOGATE_ATTACK_MODE", "rewrite", 1) == 0);
  CHECK(contains(run_cli(atk_args).out, "mode=rewrite"));
  CHECK(contains(run_cli(atk_args + " --mode standard").out, "mode=standard"));
  REQUIRE(::unsetenv("DUOGATE_ATTACK_MODE") == 0);

  auto bounds = run_cli("bounds --tau-int 0.80 --d-int 3 --r-mal 0.5");
  REQUIRE(bounds.code == 0);
  CHECK(contains(bounds.out, "packing:"));
  CHECK(contains(bounds.out, "limit="));
}
