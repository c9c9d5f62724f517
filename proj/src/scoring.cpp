#include "asd/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace asd::scoring {

namespace {

constexpr double kMinRegularizer = 1e-9;

// Fixed-order double accumulation of sum of squares.
template <class S>
double sq_norm_double(const S* data, Eigen::Index n) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = static_cast<double>(data[i]);
    sum += v * v;
  }
  return sum;
}

}  // namespace

ScoreMode score_mode_from_string(std::string_view s) {
  if (s == "simple") return ScoreMode::kSimple;
  if (s == "mahalanobis") return ScoreMode::kMahalanobis;
  throw ParseError("unknown score mode '" + std::string(s) + "'");
}

std::string to_string(ScoreMode mode) {
  return mode == ScoreMode::kSimple ? "simple" : "mahalanobis";
}

MatrixRMf residuals(const ae::NetF& net, const features::MelFrameStack& stack) {
  if (stack.count() == 0) throw ValidationError("empty feature stack");
  return ae::reconstruct(net, stack.rows) - stack.rows;
}

double simple_score_from_residuals(const MatrixRMf& residual_rows) {
  if (residual_rows.size() == 0) throw ValidationError("empty residual matrix");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < residual_rows.rows(); ++k)
    sum += sq_norm_double(residual_rows.row(k).data(), residual_rows.cols());
  return sum / static_cast<double>(residual_rows.size());
}

double score_simple(const ae::NetF& net, const features::MelFrameStack& stack) {
  return simple_score_from_residuals(residuals(net, stack));
}

// --------------------------------------------------------------------------
// Covariance fit

ResidualAccumulator::ResidualAccumulator(Eigen::Index dim)
    : outer_(Eigen::MatrixXd::Zero(dim, dim)), sum_(Eigen::VectorXd::Zero(dim)) {}

void ResidualAccumulator::add(const MatrixRMf& residual_rows) {
  if (residual_rows.cols() != outer_.rows())
    throw ValidationError("residual dim mismatch");
  if (!residual_rows.allFinite())
    throw NumericError("non-finite residuals in covariance fit");
  const Eigen::MatrixXd rows = residual_rows.cast<double>();
  outer_.selfadjointView<Eigen::Lower>().rankUpdate(rows.transpose(), 1.0);
  sum_ += rows.colwise().sum().transpose();
  rows_ += static_cast<std::uint64_t>(residual_rows.rows());
}

Eigen::MatrixXd ResidualAccumulator::covariance() const {
  if (rows_ == 0) throw ValidationError("no residual rows accumulated");
  const double n = static_cast<double>(rows_);
  const Eigen::VectorXd mean = sum_ / n;
  Eigen::MatrixXd cov =
      Eigen::MatrixXd(outer_.selfadjointView<Eigen::Lower>()) / n -
      mean * mean.transpose();
  // Clean any asymmetry left by the rank updates.
  cov = ((cov + cov.transpose()) * 0.5).eval();
  return cov;
}

Eigen::MatrixXd invert_covariance(const Eigen::MatrixXd& covariance,
                                  double lambda) {
  if (lambda < 0.0) throw ValidationError("lambda must be >= 0");
  const Eigen::Index dim = covariance.rows();
  // Floored so a zero-trace covariance still gets at least 1e-9 * I; with
  // lambda == 0 no regularization is requested and rank deficiency surfaces
  // as a factorization error.
  const double reg =
      lambda > 0.0
          ? std::max(lambda * covariance.trace() / static_cast<double>(dim),
                     kMinRegularizer)
          : 0.0;
  Eigen::MatrixXd regularized = covariance;
  regularized.diagonal().array() += reg;

  const Eigen::LLT<Eigen::MatrixXd> llt(regularized);
  if (llt.info() != Eigen::Success)
    throw NumericError(
        "covariance factorization failed; increase the regularization lambda");
  // LLT can accept a numerically semidefinite matrix; reject factors whose
  // diagonal collapses relative to the matrix scale.
  const Eigen::VectorXd diag = Eigen::MatrixXd(llt.matrixL()).diagonal();
  const double scale = std::max(regularized.diagonal().maxCoeff(), 1e-300);
  if ((diag.array() <= 0.0).any() ||
      diag.minCoeff() * diag.minCoeff() < 1e-14 * scale)
    throw NumericError(
        "covariance factorization failed; increase the regularization lambda");
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
  inv = ((inv + inv.transpose()) * 0.5).eval();
  return inv;
}

ResidualCovariancePair fit_residual_covariance(
    const ae::NetF& net, std::span<const features::MelFrameStack> source_stacks,
    std::span<const features::MelFrameStack> target_stacks, double lambda) {
  const Eigen::Index dim = net.input_dim();
  ResidualAccumulator source(dim);
  ResidualAccumulator target(dim);
  for (const auto& stack : source_stacks) source.add(residuals(net, stack));
  for (const auto& stack : target_stacks) target.add(residuals(net, stack));
  if (source.rows() == 0 || target.rows() == 0)
    throw ValidationError("covariance fit needs residual rows in both domains");

  ResidualCovariancePair covs;
  covs.lambda = lambda;
  covs.source_rows = source.rows();
  covs.target_rows = target.rows();
  covs.feature_fingerprint = net.feature_fingerprint;
  covs.sigma_inv_source = invert_covariance(source.covariance(), lambda);
  covs.sigma_inv_target = invert_covariance(target.covariance(), lambda);
  return covs;
}

double mahalanobis(const Eigen::VectorXd& psi, const Eigen::VectorXd& r,
                   const Eigen::MatrixXd& sigma_inv) {
  if (psi.size() != r.size() || sigma_inv.rows() != psi.size() ||
      sigma_inv.cols() != psi.size())
    throw ValidationError("mahalanobis: dimension mismatch");
  const Eigen::VectorXd v = r - psi;
  const double d = v.dot(sigma_inv * v);
  return std::max(d, 0.0);
}

MahalanobisScorer::MahalanobisScorer(const ResidualCovariancePair& covs) {
  const auto factor = [](const Eigen::MatrixXd& sigma_inv) -> Eigen::MatrixXd {
    const Eigen::LLT<Eigen::MatrixXd> llt(sigma_inv);
    if (llt.info() != Eigen::Success)
      throw NumericError("inverse covariance is not positive-definite");
    return Eigen::MatrixXd(llt.matrixU());  // U with U^T U = Sigma_inv
  };
  factor_source_t_ = factor(covs.sigma_inv_source);
  factor_target_t_ = factor(covs.sigma_inv_target);
}

double MahalanobisScorer::score_from_residuals(
    const MatrixRMf& residual_rows) const {
  if (residual_rows.size() == 0) throw ValidationError("empty residual matrix");
  if (residual_rows.cols() != factor_source_t_.rows())
    throw ValidationError("residual dim mismatch");
  const Eigen::Index dim = residual_rows.cols();
  const Eigen::Index frames = residual_rows.rows();

  // d = v^T Sigma_inv v = ||U v||^2; both domains via one triangular product
  // over the whole clip.
  const Eigen::MatrixXd v = residual_rows.transpose().cast<double>();
  Eigen::MatrixXd w_source(dim, frames), w_target(dim, frames);
  w_source.noalias() = factor_source_t_.triangularView<Eigen::Upper>() * v;
  w_target.noalias() = factor_target_t_.triangularView<Eigen::Upper>() * v;

  double sum = 0.0;
  for (Eigen::Index k = 0; k < frames; ++k) {
    const double d_source = sq_norm_double(w_source.col(k).data(), dim);
    const double d_target = sq_norm_double(w_target.col(k).data(), dim);
    sum += std::min(d_source, d_target);
  }
  return sum / static_cast<double>(residual_rows.size());
}

double score_mahalanobis(const ae::NetF& net, const ResidualCovariancePair& covs,
                         const features::MelFrameStack& stack) {
  const MahalanobisScorer scorer(covs);
  return scorer.score_from_residuals(residuals(net, stack));
}

// --------------------------------------------------------------------------
// Threshold

Threshold fit_threshold(std::span<const double> train_scores, double percentile) {
  if (train_scores.empty())
    throw ValidationError("cannot fit threshold on empty scores");
  if (!(percentile >= 0.0 && percentile <= 1.0))
    throw ValidationError("percentile must lie in [0, 1]");
  std::vector<double> sorted(train_scores.begin(), train_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = percentile * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  Threshold thr;
  thr.phi = frac == 0.0 ? sorted[lo]
                        : sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
  std::ostringstream method;
  method << "percentile-" << percentile;
  thr.method = method.str();
  return thr;
}

Decision decide(double score, const Threshold& threshold) {
  if (!std::isfinite(score) || !std::isfinite(threshold.phi))
    throw ValidationError("decide: score and threshold must be finite");
  return score > threshold.phi ? Decision::kAnomaly : Decision::kNormal;
}

// --------------------------------------------------------------------------
// Files

namespace {

constexpr char kCovMagic[4] = {'A', 'S', 'D', 'C'};
constexpr std::uint32_t kCovVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v & 0xffffffffull));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw IoError(std::string("covariance file: truncated ") + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is, const char* what) {
  const std::uint64_t lo = get_u32(is, what);
  const std::uint64_t hi = get_u32(is, what);
  return lo | (hi << 32);
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  static_assert(sizeof(double) == 8);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      os.write(reinterpret_cast<const char*>(&v), 8);
    }
}

Eigen::MatrixXd read_matrix(std::istream& is, Eigen::Index dim,
                            const fs::path& path) {
  Eigen::MatrixXd m(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = 0; c < dim; ++c) {
      double v = 0.0;
      if (!is.read(reinterpret_cast<char*>(&v), 8))
        throw IoError(path.string() + ": truncated covariance matrix");
      m(r, c) = v;
    }
  return m;
}

}  // namespace

void save_covariance(const fs::path& path, const ResidualCovariancePair& covs) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kCovMagic, 4);
  put_u32(out, kCovVersion);
  put_u64(out, covs.feature_fingerprint);
  put_u32(out, static_cast<std::uint32_t>(covs.dim()));
  const double lambda = covs.lambda;
  out.write(reinterpret_cast<const char*>(&lambda), 8);
  put_u64(out, covs.source_rows);
  put_u64(out, covs.target_rows);
  write_matrix(out, covs.sigma_inv_source);
  write_matrix(out, covs.sigma_inv_target);
  if (!out) throw IoError("write failed for " + path.string());
}

ResidualCovariancePair load_covariance(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCovMagic, 4) != 0)
    throw ValidationError(path.string() + ": not a covariance file");
  const std::uint32_t version = get_u32(in, "version");
  if (version != kCovVersion)
    throw ValidationError(path.string() + ": unsupported covariance version " +
                          std::to_string(version));
  ResidualCovariancePair covs;
  covs.feature_fingerprint = get_u64(in, "feature fingerprint");
  const std::uint32_t dim = get_u32(in, "dim");
  if (!in.read(reinterpret_cast<char*>(&covs.lambda), 8))
    throw IoError(path.string() + ": truncated lambda");
  covs.source_rows = get_u64(in, "source rows");
  covs.target_rows = get_u64(in, "target rows");
  covs.sigma_inv_source = read_matrix(in, dim, path);
  covs.sigma_inv_target = read_matrix(in, dim, path);
  return covs;
}

void write_score_csv(const fs::path& path, std::span<const ScoreRecord> records) {
  std::ostringstream os;
  char buf[64];
  for (const auto& rec : records) {
    std::snprintf(buf, sizeof(buf), "%.6g", rec.score);
    os << rec.clip_name << ',' << buf << '\n';
  }
  write_text_file(path, os.str());
}

std::vector<ScoreRecord> read_score_csv(const fs::path& path) {
  const std::string text = read_text_file(path);
  std::istringstream is(text);
  std::string line;
  std::vector<ScoreRecord> out;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 >= line.size())
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": expected `filename,score`");
    ScoreRecord rec;
    rec.clip_name = line.substr(0, comma);
    try {
      rec.score = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": bad score value");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void write_decision_csv(const fs::path& path,
                        std::span<const ScoreRecord> records,
                        const Threshold& threshold) {
  std::ostringstream os;
  for (const auto& rec : records)
    os << rec.clip_name << ','
       << (decide(rec.score, threshold) == Decision::kAnomaly ? '1' : '0')
       << '\n';
  write_text_file(path, os.str());
}

}  // namespace asd::scoring
