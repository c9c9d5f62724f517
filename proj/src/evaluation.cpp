#include "asd/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace asd::evaluation {

namespace {

// Pairs won by anomalies, counted strictly: sum over anomalies of
// #{normals with score < anomaly score}. Both metrics reduce to this.
std::uint64_t strict_pair_count(std::vector<double> normals_sorted_asc,
                                std::span<const double> anomalies) {
  std::uint64_t wins = 0;
  for (const double a : anomalies) {
    const auto it = std::lower_bound(normals_sorted_asc.begin(),
                                     normals_sorted_asc.end(), a);
    wins += static_cast<std::uint64_t>(it - normals_sorted_asc.begin());
  }
  return wins;
}

void require_finite(std::span<const double> scores, const char* what) {
  for (const double s : scores)
    if (!std::isfinite(s))
      throw ValidationError(std::string("non-finite ") + what + " score");
}

}  // namespace

double auc_domain(std::span<const double> normals,
                  std::span<const double> anomalies) {
  if (normals.empty()) throw ValidationError("auc: no normal scores");
  if (anomalies.empty()) throw ValidationError("auc: no anomaly scores");
  require_finite(normals, "normal");
  require_finite(anomalies, "anomaly");
  std::vector<double> sorted(normals.begin(), normals.end());
  std::sort(sorted.begin(), sorted.end());
  const std::uint64_t wins = strict_pair_count(std::move(sorted), anomalies);
  return static_cast<double>(wins) /
         (static_cast<double>(normals.size()) *
          static_cast<double>(anomalies.size()));
}

double pauc_section(std::span<const double> normals_all,
                    std::span<const double> anomalies, double p) {
  if (normals_all.empty()) throw ValidationError("pauc: no normal scores");
  if (anomalies.empty()) throw ValidationError("pauc: no anomaly scores");
  if (!(p > 0.0 && p <= 1.0)) throw ValidationError("pauc: p must lie in (0, 1]");
  require_finite(normals_all, "normal");
  require_finite(anomalies, "anomaly");

  const std::size_t keep = static_cast<std::size_t>(
      std::floor(p * static_cast<double>(normals_all.size())));
  if (keep == 0)
    throw ValidationError("too few normal clips for p=" + std::to_string(p));

  // Hardest normals: the `keep` largest scores.
  std::vector<double> sorted(normals_all.begin(), normals_all.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  sorted.resize(keep);
  std::sort(sorted.begin(), sorted.end());

  const std::uint64_t wins = strict_pair_count(std::move(sorted), anomalies);
  return static_cast<double>(wins) /
         (static_cast<double>(keep) * static_cast<double>(anomalies.size()));
}

double harmonic_mean(std::span<const double> values) {
  if (values.empty()) throw ValidationError("harmonic mean of empty set");
  double recip_sum = 0.0;
  for (const double v : values) {
    if (!(v > 0.0))
      throw ValidationError("harmonic mean undefined for non-positive value " +
                            std::to_string(v));
    recip_sum += 1.0 / v;
  }
  return static_cast<double>(values.size()) / recip_sum;
}

double official_score(std::span<const MachineSectionResult> rows) {
  if (rows.empty()) throw ValidationError("official score: empty grid");
  std::vector<double> values;
  values.reserve(rows.size() * 3);
  for (const auto& row : rows) {
    const auto check = [&](double v, const char* what) {
      if (!std::isfinite(v))
        throw ValidationError("official score: missing " + std::string(what) +
                              " for " + row.machine + "/section " + row.section);
      values.push_back(v);
    };
    check(row.auc_source, "source AUC");
    check(row.auc_target, "target AUC");
    check(row.pauc, "pAUC");
  }
  return harmonic_mean(values);
}

MachineSectionResult evaluate_section(const LabeledScoreSet& set, double p) {
  MachineSectionResult out;
  out.machine = set.machine;
  out.section = set.section;
  out.auc_source = auc_domain(set.normals_source, set.anomalies);
  out.auc_target = auc_domain(set.normals_target, set.anomalies);
  std::vector<double> pooled;
  pooled.reserve(set.normals_source.size() + set.normals_target.size());
  pooled.insert(pooled.end(), set.normals_source.begin(), set.normals_source.end());
  pooled.insert(pooled.end(), set.normals_target.begin(), set.normals_target.end());
  out.pauc = pauc_section(pooled, set.anomalies, p);
  return out;
}

EvaluationReport evaluate(std::span<const LabeledScoreSet> sets, double p) {
  if (sets.empty()) throw ValidationError("evaluate: no score sets");
  EvaluationReport report;
  report.p = p;
  for (const auto& set : sets) report.rows.push_back(evaluate_section(set, p));
  report.official = official_score(report.rows);
  return report;
}

// --------------------------------------------------------------------------
// Ground truth

void write_ground_truth_csv(const fs::path& path,
                            std::span<const GroundTruthRecord> records) {
  std::ostringstream os;
  for (const auto& rec : records)
    os << rec.filename << ',' << asd::to_string(rec.domain) << ','
       << asd::to_string(rec.condition) << '\n';
  write_text_file(path, os.str());
}

std::vector<GroundTruthRecord> read_ground_truth_csv(const fs::path& path) {
  const std::string text = read_text_file(path);
  std::istringstream is(text);
  std::string line;
  std::vector<GroundTruthRecord> out;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": expected `filename,domain,condition`");
    GroundTruthRecord rec;
    rec.filename = line.substr(0, c1);
    rec.domain = domain_from_string(line.substr(c1 + 1, c2 - c1 - 1));
    rec.condition = condition_from_string(line.substr(c2 + 1));
    out.push_back(std::move(rec));
  }
  return out;
}

LabeledScoreSet join_scores(
    const std::string& machine, const std::string& section,
    std::span<const GroundTruthRecord> ground_truth,
    std::span<const std::pair<std::string, double>> scores) {
  std::map<std::string, const GroundTruthRecord*> truth;
  for (const auto& rec : ground_truth) {
    if (!truth.emplace(rec.filename, &rec).second)
      throw ValidationError("duplicate ground truth entry: " + rec.filename);
  }

  LabeledScoreSet set;
  set.machine = machine;
  set.section = section;

  std::set<std::string> seen;
  for (const auto& [name, score] : scores) {
    const auto it = truth.find(name);
    if (it == truth.end())
      throw ValidationError("score for unknown clip: " + name);
    if (!seen.insert(name).second)
      throw ValidationError("duplicate score row: " + name);
    const GroundTruthRecord& rec = *it->second;
    if (rec.condition == Condition::kUnknown)
      throw ValidationError("ground truth for " + name + " is unlabeled");
    if (rec.condition == Condition::kAnomaly) {
      set.anomalies.push_back(score);
    } else if (rec.domain == Domain::kSource) {
      set.normals_source.push_back(score);
    } else if (rec.domain == Domain::kTarget) {
      set.normals_target.push_back(score);
    } else {
      throw ValidationError("ground truth for " + name + " lacks a domain");
    }
  }
  if (seen.size() != truth.size()) {
    for (const auto& [name, rec] : truth)
      if (!seen.count(name))
        throw ValidationError("missing score for clip: " + name);
  }
  return set;
}

// --------------------------------------------------------------------------
// Rendering

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v * 100.0);
  return buf;
}

std::string pct_pm(double mean, double stddev, bool with_std) {
  char buf[64];
  if (with_std)
    std::snprintf(buf, sizeof(buf), "%.2f +/- %.2f", mean * 100.0,
                  stddev * 100.0);
  else
    std::snprintf(buf, sizeof(buf), "%.2f", mean * 100.0);
  return buf;
}

void render_table(std::ostringstream& os,
                  const std::vector<std::array<std::string, 5>>& cells) {
  std::array<std::size_t, 5> width{};
  for (const auto& row : cells)
    for (std::size_t c = 0; c < 5; ++c)
      width[c] = std::max(width[c], row[c].size());
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < 5; ++c) {
      os << row[c];
      if (c + 1 < 5)
        os << std::string(width[c] - row[c].size() + 2, ' ');
    }
    os << '\n';
  }
}

}  // namespace

std::string render_report(const EvaluationReport& report) {
  std::vector<std::array<std::string, 5>> cells;
  cells.push_back({"machine", "section", "AUC source [%]", "AUC target [%]",
                   "pAUC [%]"});
  for (const auto& row : report.rows)
    cells.push_back({row.machine, row.section, pct(row.auc_source),
                     pct(row.auc_target), pct(row.pauc)});
  std::ostringstream os;
  render_table(os, cells);
  os << "official score (harmonic mean, p=" << report.p
     << "): " << pct(report.official) << "%\n";
  return os.str();
}

std::string render_multi_trial(std::span<const EvaluationReport> trials) {
  if (trials.empty()) throw ValidationError("no trial reports");
  const auto& first = trials.front();
  for (const auto& trial : trials) {
    if (trial.rows.size() != first.rows.size())
      throw ValidationError("trial reports cover different grids");
    for (std::size_t i = 0; i < trial.rows.size(); ++i)
      if (trial.rows[i].machine != first.rows[i].machine ||
          trial.rows[i].section != first.rows[i].section)
        throw ValidationError("trial reports cover different grids");
  }

  const bool with_std = trials.size() > 1;
  const double n = static_cast<double>(trials.size());
  const auto stats = [&](auto getter) {
    std::vector<std::pair<double, double>> out;  // (mean, population std)
    for (std::size_t i = 0; i < first.rows.size(); ++i) {
      double sum = 0.0, sq = 0.0;
      for (const auto& trial : trials) {
        const double v = getter(trial.rows[i]);
        sum += v;
        sq += v * v;
      }
      const double mean = sum / n;
      const double var = std::max(sq / n - mean * mean, 0.0);
      out.emplace_back(mean, std::sqrt(var));
    }
    return out;
  };
  const auto src = stats([](const MachineSectionResult& r) { return r.auc_source; });
  const auto tgt = stats([](const MachineSectionResult& r) { return r.auc_target; });
  const auto pa = stats([](const MachineSectionResult& r) { return r.pauc; });

  std::vector<std::array<std::string, 5>> cells;
  cells.push_back({"machine", "section", "AUC source [%]", "AUC target [%]",
                   "pAUC [%]"});
  for (std::size_t i = 0; i < first.rows.size(); ++i)
    cells.push_back({first.rows[i].machine, first.rows[i].section,
                     pct_pm(src[i].first, src[i].second, with_std),
                     pct_pm(tgt[i].first, tgt[i].second, with_std),
                     pct_pm(pa[i].first, pa[i].second, with_std)});

  double off_sum = 0.0, off_sq = 0.0;
  for (const auto& trial : trials) {
    off_sum += trial.official;
    off_sq += trial.official * trial.official;
  }
  const double off_mean = off_sum / n;
  const double off_std =
      std::sqrt(std::max(off_sq / n - off_mean * off_mean, 0.0));

  std::ostringstream os;
  render_table(os, cells);
  os << "official score over " << trials.size() << " trial(s): "
     << pct_pm(off_mean, off_std, with_std) << "%\n";
  return os.str();
}

void write_report_csv(const fs::path& path, const EvaluationReport& report) {
  std::ostringstream os;
  char buf[64];
  os << "machine,section,auc_source,auc_target,pauc\n";
  for (const auto& row : report.rows) {
    os << row.machine << ',' << row.section;
    for (const double v : {row.auc_source, row.auc_target, row.pauc}) {
      std::snprintf(buf, sizeof(buf), "%.10g", v);
      os << ',' << buf;
    }
    os << '\n';
  }
  std::snprintf(buf, sizeof(buf), "%.10g", report.official);
  os << "official_score,,,," << buf << '\n';
  write_text_file(path, os.str());
}

EvaluationReport read_report_csv(const fs::path& path) {
  const std::string text = read_text_file(path);
  std::istringstream is(text);
  std::string line;
  EvaluationReport report;
  bool saw_official = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("machine,", 0) == 0) continue;  // header
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find(',', start);
      if (pos == std::string::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    if (cells.size() != 5)
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": expected 5 cells");
    if (cells[0] == "official_score") {
      report.official = std::stod(cells[4]);
      saw_official = true;
      continue;
    }
    MachineSectionResult row;
    row.machine = cells[0];
    row.section = cells[1];
    row.auc_source = std::stod(cells[2]);
    row.auc_target = std::stod(cells[3]);
    row.pauc = std::stod(cells[4]);
    report.rows.push_back(std::move(row));
  }
  if (!saw_official)
    throw ParseError(path.string() + ": missing official_score row");
  return report;
}

}  // namespace asd::evaluation
