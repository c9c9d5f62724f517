// End-to-end orchestration: run configuration, the generate/train/score/
// evaluate/report stages, JSON-lines logging, and artifact fingerprints.
//
// Run layout under the output directory:
//   config.kv                            canonical config echo
//   logs.jsonl                           one event per line
//   seed_<S>/model_<machine>_section_<NN>.asdm
//   seed_<S>/cov_<machine>_section_<NN>.asdc
//   seed_<S>/<mode>/anomaly_score_<machine>_section_<NN>.csv
//   seed_<S>/<mode>/decision_result_<machine>_section_<NN>.csv
//   seed_<S>/<mode>/meta.kv              corpus + config fingerprints
//   seed_<S>/<mode>/report.csv|report.txt
//
// Every stage is deterministic for a fixed config: rerunning produces
// byte-identical models, score CSVs, and report CSVs (timestamps exist only
// inside logs.jsonl).
#pragma once

#include <span>
#include <string>
#include <vector>

#include "asd/autoencoder.hpp"
#include "asd/common.hpp"
#include "asd/dataset.hpp"
#include "asd/evaluation.hpp"
#include "asd/features.hpp"
#include "asd/scoring.hpp"
#include "asd/synthgen.hpp"

namespace asd::pipeline {

struct RunConfig {
  fs::path root;
  fs::path out;
  scoring::ScoreMode mode = scoring::ScoreMode::kSimple;
  dataset::ValidationProfile profile = dataset::ValidationProfile::kDevelopment;
  features::FeatureSettings feature_settings;
  std::string arch =
      "640-128-128-128-128-8-128-128-128-128-640";
  int epochs = 100;
  int batch = 256;
  double learning_rate = 1e-3;
  bool shuffle = true;
  double lambda = 1e-3;
  double p = 0.1;
  double percentile = 0.9;
  std::vector<std::uint64_t> seeds = {0};
  int jobs = 2;

  // Canonical key order; the fingerprint hashes this rendering.
  KvFile render() const;
  std::uint64_t fingerprint() const;
};

RunConfig run_config_from_kv(const KvFile& kv);
RunConfig load_run_config(const fs::path& path);

// Internal seed for one (machine, section) model: distinct machines must not
// share initialization or shuffling streams.
std::uint64_t derive_model_seed(const std::string& machine,
                                const std::string& section, std::uint64_t seed);

// Maps error types onto process exit codes:
// 2 validation/parse, 3 numeric, 4 I/O.
int exit_code_for(const std::exception& error);

// ---------------------------------------------------------------------------
// Stages

// Generates a corpus from a machine spec file (or the bundled default specs
// when spec_file is empty). seed, when nonzero, re-rolls every machine seed.
synthgen::GenerateResult cmd_generate(const fs::path& spec_file,
                                      const fs::path& root,
                                      synthgen::GenProfile profile,
                                      std::uint64_t seed, int jobs);

// Trains one model per (machine, section) per configured seed and writes
// model + covariance files. Refuses to start when the catalog fails
// validation for the configured profile.
void cmd_train(const RunConfig& config);

// Scores test clips with every configured seed's model in the configured
// mode; fits the decision threshold on the training-clip scores.
void cmd_score(const RunConfig& config);

// Evaluates one score directory against the corpus ground truth; writes
// report.csv / report.txt next to the scores and returns the report.
evaluation::EvaluationReport cmd_evaluate_dir(const fs::path& scores_dir,
                                              const fs::path& corpus_root,
                                              double p);

// Evaluates every configured seed's score directory.
std::vector<evaluation::EvaluationReport> cmd_evaluate(const RunConfig& config);

// Mean +/- std table over trial report CSVs.
std::string cmd_report(std::span<const fs::path> report_csvs);

}  // namespace asd::pipeline
