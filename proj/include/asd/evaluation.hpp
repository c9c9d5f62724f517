// Detection metrics and the official score.
//
// AUC per (machine, section, domain): fraction of (normal, anomaly) score
// pairs ordered strictly correctly — ties count zero, matching the step
// function H(x) = [x > 0].
//
// pAUC per section restricts the comparison to the low false-positive-rate
// operating region FPR in [0, p]: the floor(p * N_normal) highest-scoring
// normals (the published definition's outer summation bound is typographical;
// its normalizer 1/(floor(p*N-)*N+) pins this reading). Ties at the cut
// boundary are broken by descending score then ascending clip name, which
// cannot change the value (tied normals compare identically) but keeps any
// per-clip diagnostics reproducible.
//
// The official score is the harmonic mean over the flat multiset of all
// per-domain AUCs and per-section pAUCs. Non-positive inputs are rejected,
// not clamped: a zero AUC means a pathological system and deserves a loud
// failure rather than a fabricated score.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "asd/common.hpp"

namespace asd::evaluation {

// Scores for one (machine, section), normals split by domain.
struct LabeledScoreSet {
  std::string machine;
  std::string section;
  std::vector<double> normals_source;
  std::vector<double> normals_target;
  std::vector<double> anomalies;  // both domains pooled
};

struct MachineSectionResult {
  std::string machine;
  std::string section;
  double auc_source = 0.0;
  double auc_target = 0.0;
  double pauc = 0.0;
};

struct EvaluationReport {
  std::vector<MachineSectionResult> rows;
  double official = 0.0;
  double p = 0.1;
};

double auc_domain(std::span<const double> normals,
                  std::span<const double> anomalies);

double pauc_section(std::span<const double> normals_all,
                    std::span<const double> anomalies, double p);

double harmonic_mean(std::span<const double> values);

// Flattens {auc_source, auc_target, pauc} over all rows and takes the
// harmonic mean. Throws ValidationError naming any non-finite cell.
double official_score(std::span<const MachineSectionResult> rows);

// Metrics for one labeled score set.
MachineSectionResult evaluate_section(const LabeledScoreSet& set, double p);

// Full grid + official score.
EvaluationReport evaluate(std::span<const LabeledScoreSet> sets, double p);

// ---------------------------------------------------------------------------
// Ground truth manifest: `filename,domain,condition` per test clip.

struct GroundTruthRecord {
  std::string filename;
  Domain domain = Domain::kUnknown;
  Condition condition = Condition::kUnknown;
};

void write_ground_truth_csv(const fs::path& path,
                            std::span<const GroundTruthRecord> records);
std::vector<GroundTruthRecord> read_ground_truth_csv(const fs::path& path);

// Joins one machine/section's score rows against its ground truth. Throws
// ValidationError naming missing, extra, or duplicate clips.
LabeledScoreSet join_scores(
    const std::string& machine, const std::string& section,
    std::span<const GroundTruthRecord> ground_truth,
    std::span<const std::pair<std::string, double>> scores);

// ---------------------------------------------------------------------------
// Rendering

// Text table in the familiar layout: machine, section, source/target AUC and
// pAUC as percentages with two decimals, plus the official score.
std::string render_report(const EvaluationReport& report);

// Mean +/- population std per cell over several trials (std omitted for a
// single trial). All trials must cover the same grid.
std::string render_multi_trial(std::span<const EvaluationReport> trials);

// CSV: `machine,section,auc_source,auc_target,pauc` rows (raw fractions)
// plus a final `official_score,,,,<value>` row.
void write_report_csv(const fs::path& path, const EvaluationReport& report);
EvaluationReport read_report_csv(const fs::path& path);

}  // namespace asd::evaluation
