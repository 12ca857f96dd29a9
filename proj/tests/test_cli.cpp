#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "oracles.hpp"

namespace {

const std::string kFixtures = CROPATTN_FIXTURE_DIR;

std::string cli_path() {
  const char* p = std::getenv("CROPATTN_CLI");
  REQUIRE_MESSAGE(p != nullptr, "CROPATTN_CLI must point at the built binary");
  return p;
}

struct RunResult {
  int code = -1;
  std::string output; // stdout and stderr combined
};

RunResult run_cli(const oracles::TempDir& tmp, const std::string& args) {
  static int counter = 0;
  const std::string capture = tmp.file("cli_out_" + std::to_string(counter++) + ".txt");
  const std::string cmd = "\"" + cli_path() + "\" " + args + " > \"" + capture +
                          "\" 2>&1";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(capture);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), ("missing file: " + path));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool exists(const std::string& path) {
  return std::filesystem::exists(path);
}

int line_count(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

// One synthetic dataset + one trained model shared by the downstream tests.
struct Pipeline {
  oracles::TempDir tmp{"cli"};
  std::string data_dir;
  std::string train_dir;

  Pipeline() {
    data_dir = tmp.file("data");
    train_dir = tmp.file("train");
    RunResult synth = run_cli(
        tmp, "synth --config " + kFixtures + "/cli_smoke.cfg --seed 3 --out " + data_dir);
    REQUIRE_MESSAGE(synth.code == 0, synth.output);
    RunResult train = run_cli(
        tmp, "train --config " + kFixtures + "/cli_smoke.cfg --seed 3 --data " +
                 data_dir + " --out " + train_dir);
    REQUIRE_MESSAGE(train.code == 0, train.output);
  }
};

Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

} // namespace

// ---------------------------------------------------------------------------
// Usage errors (exit 2)
// ---------------------------------------------------------------------------

TEST_CASE("cli: usage errors exit with 2") {
  oracles::TempDir tmp("usage");
  CHECK(run_cli(tmp, "").code == 2);                       // no subcommand
  CHECK(run_cli(tmp, "frobnicate").code == 2);             // unknown subcommand
  CHECK(run_cli(tmp, "synth").code == 2);                  // missing --config
  CHECK(run_cli(tmp, "train").code == 2);                  // missing --data
  CHECK(run_cli(tmp, "synth --config x.cfg --bogus").code == 2);
  CHECK(run_cli(tmp, "occlude --data x").code == 2);       // missing --crops

  RunResult help = run_cli(tmp, "--help");
  CHECK(help.code == 0);
  CHECK(help.output.find("synth") != std::string::npos);
  CHECK(run_cli(tmp, "--version").code == 0);
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

TEST_CASE("cli synth: writes a canonical dataset deterministically") {
  oracles::TempDir tmp("synth");
  const std::string d1 = tmp.file("one");
  const std::string d2 = tmp.file("two");

  RunResult r1 = run_cli(
      tmp, "synth --config " + kFixtures + "/cli_smoke.cfg --seed 11 --out " + d1);
  REQUIRE_MESSAGE(r1.code == 0, r1.output);
  CHECK(exists(d1 + "/dataset.csv"));
  CHECK(exists(d1 + "/dataset.meta.json"));
  CHECK(exists(d1 + "/manifest_synth.json"));
  CHECK(r1.output.find("12 parcels") != std::string::npos);

  RunResult r2 = run_cli(
      tmp, "synth --config " + kFixtures + "/cli_smoke.cfg --seed 11 --out " + d2);
  REQUIRE(r2.code == 0);
  CHECK(slurp(d1 + "/dataset.csv") == slurp(d2 + "/dataset.csv"));
  CHECK(slurp(d1 + "/dataset.meta.json") == slurp(d2 + "/dataset.meta.json"));

  // A different seed changes the data.
  const std::string d3 = tmp.file("three");
  RunResult r3 = run_cli(
      tmp, "synth --config " + kFixtures + "/cli_smoke.cfg --seed 12 --out " + d3);
  REQUIRE(r3.code == 0);
  CHECK(slurp(d1 + "/dataset.csv") != slurp(d3 + "/dataset.csv"));

  // The sidecar is valid JSON with the expected splits.
  auto meta = nlohmann::json::parse(slurp(d1 + "/dataset.meta.json"));
  CHECK(meta.at("format") == "cropattn-dataset");
  CHECK(meta.at("splits").at("train").size() == 6);
  CHECK(meta.at("splits").at("validation").size() == 2);
  CHECK(meta.at("splits").at("test").size() == 4);

  // The manifest records the run.
  auto manifest = nlohmann::json::parse(slurp(d1 + "/manifest_synth.json"));
  REQUIRE(manifest.is_array());
  REQUIRE(manifest.size() == 1);
  CHECK(manifest[0].at("subcommand") == "synth");
  CHECK(manifest[0].at("seed") == 11);
}

TEST_CASE("cli synth: nonexistent config exits 1") {
  oracles::TempDir tmp("synth");
  RunResult r = run_cli(tmp, "synth --config /nonexistent.cfg --out " + tmp.file("o"));
  CHECK(r.code == 1);
  CHECK(r.output.find("error:") != std::string::npos);
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

TEST_CASE("cli ingest: normalizes a raw CSV") {
  oracles::TempDir tmp("ingest");
  const std::string out = tmp.file("out");
  // Write a minimal config with explicit fractions that work for 3 parcels.
  const std::string cfg = tmp.file("ingest.cfg");
  {
    std::ofstream f(cfg);
    f << "train_frac = 0.5\nvalidation_frac = 0.25\ntest_frac = 0.25\n";
  }
  RunResult r = run_cli(tmp, "ingest --config " + cfg + " --input " + kFixtures +
                                 "/three_parcels.csv --seed 5 --out " + out);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(exists(out + "/dataset.csv"));
  CHECK(exists(out + "/dataset.meta.json"));
  CHECK(exists(out + "/manifest_ingest.json"));

  // Normalized reflectances (divided by 10000) are in the output.
  const std::string csv = slurp(out + "/dataset.csv");
  CHECK(csv.find("0.1") != std::string::npos);
  CHECK(line_count(csv) == 7); // header + 6 observations

  // The manifest fingerprints both the raw CSV and the config file.
  auto manifest = nlohmann::json::parse(slurp(out + "/manifest_ingest.json"));
  CHECK(manifest[0].at("input_fingerprints").size() == 2);
  CHECK(manifest[0].at("input_fingerprints").contains(kFixtures + "/three_parcels.csv"));

  RunResult bad = run_cli(tmp, "ingest --input /no/such.csv --out " + out);
  CHECK(bad.code == 1);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

TEST_CASE("cli train: artifacts, metrics, determinism") {
  Pipeline& p = pipeline();

  CHECK(exists(p.train_dir + "/checkpoint.json"));
  CHECK(exists(p.train_dir + "/metrics.json"));
  CHECK(exists(p.train_dir + "/confusion.csv"));
  CHECK(exists(p.train_dir + "/training_log.csv"));
  CHECK(exists(p.train_dir + "/manifest_train.json"));

  auto metrics = nlohmann::json::parse(slurp(p.train_dir + "/metrics.json"));
  const double acc = metrics.at("overall_accuracy").get<double>();
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  CHECK(metrics.contains("class_accuracy"));
  CHECK(metrics.contains("macro_f1"));

  // Confusion CSV: header plus one row per class.
  CHECK(line_count(slurp(p.train_dir + "/confusion.csv")) == 3);

  // Retraining with the same seed reproduces the artifacts byte for byte.
  const std::string again = p.tmp.file("train_again");
  RunResult r = run_cli(
      p.tmp, "train --config " + kFixtures + "/cli_smoke.cfg --seed 3 --data " +
                 p.data_dir + " --out " + again);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(slurp(again + "/checkpoint.json") == slurp(p.train_dir + "/checkpoint.json"));
  CHECK(slurp(again + "/metrics.json") == slurp(p.train_dir + "/metrics.json"));
  CHECK(slurp(again + "/training_log.csv") == slurp(p.train_dir + "/training_log.csv"));
}

TEST_CASE("cli train: missing dataset exits 1") {
  oracles::TempDir tmp("train");
  RunResult r = run_cli(tmp, "train --data /no/such/dir --out " + tmp.file("o"));
  CHECK(r.code == 1);
  CHECK(r.output.find("error:") != std::string::npos);
}

// ---------------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------------

TEST_CASE("cli explain: importance tables and key dates") {
  Pipeline& p = pipeline();
  const std::string out = p.tmp.file("explain");

  RunResult r = run_cli(
      p.tmp, "explain --config " + kFixtures + "/cli_smoke.cfg --data " + p.data_dir +
                 " --checkpoint " + p.train_dir + "/checkpoint.json --top-t 3 --out " + out);
  REQUIRE_MESSAGE(r.code == 0, r.output);

  for (const char* name :
       {"importance_parcel.csv", "importance_crop.csv", "importance_global.csv",
        "key_dates.csv", "pca_keydates.csv", "ndvi_summary.csv",
        "ndvi_over_time.csv", "top_parcels.csv", "explain_meta.json",
        "manifest_explain.json"}) {
    CHECK_MESSAGE(exists(out + "/" + std::string(name)), name);
  }

  // key_dates.csv: header + exactly top-t rows.
  CHECK(line_count(slurp(out + "/key_dates.csv")) == 4);

  // The global table covers all 9 scheduled dates.
  CHECK(line_count(slurp(out + "/importance_global.csv")) == 10);

  // Requesting more key dates than exist is a runtime error.
  RunResult too_many = run_cli(
      p.tmp, "explain --config " + kFixtures + "/cli_smoke.cfg --data " + p.data_dir +
                 " --checkpoint " + p.train_dir + "/checkpoint.json --top-t 999 --out " +
                 p.tmp.file("explain_overflow"));
  CHECK(too_many.code == 1);
  CHECK(too_many.output.find("TopTooLarge") != std::string::npos);
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

TEST_CASE("cli ablate: curve rows with a reference line") {
  Pipeline& p = pipeline();
  const std::string out = p.tmp.file("ablate");

  RunResult r = run_cli(
      p.tmp, "ablate --config " + kFixtures + "/cli_smoke.cfg --seed 3 --data " +
                 p.data_dir + " --t 1,2,2 --out " + out);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(r.output.find("duplicate") != std::string::npos); // warned about 2,2

  const std::string curve = slurp(out + "/ablation_curve.csv");
  // Header, reference row, t=1, t=2.
  CHECK(line_count(curve) == 4);
  CHECK(curve.find("ref") != std::string::npos);
  CHECK(exists(out + "/ablation_meta.json"));

  auto meta = nlohmann::json::parse(slurp(out + "/ablation_meta.json"));
  CHECK(meta.at("ranking").size() == 9);
}

// ---------------------------------------------------------------------------
// occlude
// ---------------------------------------------------------------------------

TEST_CASE("cli occlude: self-consistency run yields zero deltas") {
  Pipeline& p = pipeline();
  const std::string out = p.tmp.file("occlude");

  RunResult r = run_cli(
      p.tmp, "occlude --config " + kFixtures + "/cli_smoke.cfg --seed 3 --data " +
                 p.data_dir + " --crops none --out " + out);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(exists(out + "/occlusion_deltas.csv"));
  CHECK(exists(out + "/accuracy_changes.csv"));
  CHECK(exists(out + "/total_variation.csv"));

  // Every delta row ends in a zero delta column.
  std::istringstream deltas(slurp(out + "/occlusion_deltas.csv"));
  std::string line;
  std::getline(deltas, line); // header
  CHECK(line == "occluded_crop,crop,date,delta,support");
  int rows = 0;
  while (std::getline(deltas, line)) {
    if (line.empty()) continue;
    ++rows;
    // delta is the fourth column.
    std::istringstream ls(line);
    std::string field;
    for (int i = 0; i < 4; ++i) std::getline(ls, field, ',');
    CHECK(std::stod(field) == 0.0);
  }
  CHECK(rows == 2 * 9); // two crops, nine dates
}

TEST_CASE("cli occlude: removing a crop from a two-class set exits 1") {
  Pipeline& p = pipeline();
  RunResult r = run_cli(
      p.tmp, "occlude --config " + kFixtures + "/cli_smoke.cfg --seed 3 --data " +
                 p.data_dir + " --crops early --out " + p.tmp.file("occlude_bad"));
  CHECK(r.code == 1);
  CHECK(r.output.find("TooFewClasses") != std::string::npos);
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

TEST_CASE("cli report: summarizes training artifacts") {
  Pipeline& p = pipeline();
  RunResult r = run_cli(p.tmp, "report --out " + p.train_dir);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(exists(p.train_dir + "/report.md"));
  const std::string report = slurp(p.train_dir + "/report.md");
  CHECK(report.find("accuracy") != std::string::npos);

  RunResult empty = run_cli(p.tmp, "report --out " + p.tmp.file("empty_dir"));
  CHECK(empty.code == 1);
}
