// Anomaly scoring: reconstruction-error scores in two operating modes, the
// residual covariance fit behind the selective Mahalanobis mode, and the
// percentile decision threshold.
//
// Both modes average per-frame distances over a clip's K stacked vectors and
// normalize by D*K. Mahalanobis distances are the squared form (no square
// root), so identity inverse covariances collapse the Mahalanobis mode onto
// the simple mode exactly.
//
// Covariances are mean-centered with divisor N and regularized as
// Sigma + max(lambda * trace(Sigma)/D, 1e-9) * I before the SPD inversion;
// the floor keeps the fit usable when residuals are (near-)constant, which
// matters because the target domain contributes only a handful of clips.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "asd/autoencoder.hpp"
#include "asd/common.hpp"
#include "asd/features.hpp"

namespace asd::scoring {

using features::MatrixRMf;

struct ResidualCovariancePair {
  Eigen::MatrixXd sigma_inv_source;  // D x D, symmetric positive-definite
  Eigen::MatrixXd sigma_inv_target;
  double lambda = 1e-3;
  std::uint64_t source_rows = 0;
  std::uint64_t target_rows = 0;
  std::uint64_t feature_fingerprint = 0;

  Eigen::Index dim() const { return sigma_inv_source.rows(); }
};

struct ScoreRecord {
  std::string clip_name;
  double score = 0.0;
};

enum class ScoreMode { kSimple, kMahalanobis };

ScoreMode score_mode_from_string(std::string_view s);
std::string to_string(ScoreMode mode);

struct Threshold {
  double phi = 0.0;
  std::string method;  // e.g. "percentile-0.90"
};

enum class Decision { kNormal, kAnomaly };

// ---------------------------------------------------------------------------
// Residuals. Both score modes consume the same residual matrix so that their
// per-frame terms agree exactly when the metrics coincide.

// reconstruction minus input, row per frame.
MatrixRMf residuals(const ae::NetF& net, const features::MelFrameStack& stack);

// Mean of squared residual entries: (1/(D*K)) * sum_k ||r_k - psi_k||^2.
double simple_score_from_residuals(const MatrixRMf& residual_rows);

double score_simple(const ae::NetF& net, const features::MelFrameStack& stack);

// Streaming covariance fit over residual rows of one domain.
class ResidualAccumulator {
 public:
  explicit ResidualAccumulator(Eigen::Index dim);

  void add(const MatrixRMf& residual_rows);
  std::uint64_t rows() const { return rows_; }

  // Mean-centered covariance, divisor N. Requires rows() >= 1.
  Eigen::MatrixXd covariance() const;

 private:
  Eigen::MatrixXd outer_;  // sum of r r^T (lower triangle maintained)
  Eigen::VectorXd sum_;
  std::uint64_t rows_ = 0;
};

// Regularize + invert one covariance via LLT. Exposed for the accumulator
// path; throws NumericError advising a larger lambda if factorization fails.
Eigen::MatrixXd invert_covariance(const Eigen::MatrixXd& covariance,
                                  double lambda);

ResidualCovariancePair fit_residual_covariance(
    const ae::NetF& net, std::span<const features::MelFrameStack> source_stacks,
    std::span<const features::MelFrameStack> target_stacks, double lambda);

// Squared Mahalanobis distance (r - psi)^T Sigma_inv (r - psi).
double mahalanobis(const Eigen::VectorXd& psi, const Eigen::VectorXd& r,
                   const Eigen::MatrixXd& sigma_inv);

// Per-clip selective Mahalanobis score:
// (1/(D*K)) * sum_k min(D_source(k), D_target(k)).
double score_mahalanobis(const ae::NetF& net, const ResidualCovariancePair& covs,
                         const features::MelFrameStack& stack);

// Precomputed Cholesky factors of the inverse covariances for bulk scoring;
// score(R) equals score_mahalanobis on the stack R came from.
class MahalanobisScorer {
 public:
  explicit MahalanobisScorer(const ResidualCovariancePair& covs);

  double score_from_residuals(const MatrixRMf& residual_rows) const;

 private:
  Eigen::MatrixXd factor_source_t_;  // U with U^T U = Sigma_inv
  Eigen::MatrixXd factor_target_t_;
};

// ---------------------------------------------------------------------------
// Threshold (decision CSV convenience only; AUC/pAUC never touch it).

// Empirical percentile with linear interpolation between order statistics.
Threshold fit_threshold(std::span<const double> train_scores, double percentile);

Decision decide(double score, const Threshold& threshold);

// ---------------------------------------------------------------------------
// Files

// "ASDC" v1: u64 feature fingerprint, u32 D, f64 lambda, u64 source rows,
// u64 target rows, then both inverse covariances as row-major f64 LE.
void save_covariance(const fs::path& path, const ResidualCovariancePair& covs);
ResidualCovariancePair load_covariance(const fs::path& path);

// Submission-style CSV: `filename,score` rows, no header, 6 significant
// digits.
void write_score_csv(const fs::path& path, std::span<const ScoreRecord> records);
std::vector<ScoreRecord> read_score_csv(const fs::path& path);

// `filename,0|1` rows (1 = anomaly), no header.
void write_decision_csv(const fs::path& path,
                        std::span<const ScoreRecord> records,
                        const Threshold& threshold);

}  // namespace asd::scoring
