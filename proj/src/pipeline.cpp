#include "asd/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>

#include <json.hpp>

namespace asd::pipeline {

namespace {

using nlohmann::json;

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class JsonlLogger {
 public:
  explicit JsonlLogger(const fs::path& path) : path_(path) {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  }

  void log(json event) {
    event["ts"] = iso_timestamp();
    std::lock_guard<std::mutex> lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    out << event.dump() << '\n';
  }

 private:
  fs::path path_;
  std::mutex mutex_;
};

std::string seed_dir_name(std::uint64_t seed) {
  return "seed_" + std::to_string(seed);
}

std::string artifact_name(const std::string& prefix, const std::string& machine,
                          const std::string& section, const std::string& ext) {
  return prefix + "_" + machine + "_section_" + section + ext;
}

void require_valid_catalog(const dataset::DatasetCatalog& catalog,
                           dataset::ValidationProfile profile) {
  const auto report = dataset::validate_split(catalog, profile);
  if (report.ok()) return;
  std::ostringstream os;
  os << "catalog failed " << dataset::to_string(profile) << " validation ("
     << report.violations.size() << " violations):";
  const std::size_t show = std::min<std::size_t>(report.violations.size(), 5);
  for (std::size_t i = 0; i < show; ++i) os << "\n  " << report.violations[i];
  if (show < report.violations.size()) os << "\n  ...";
  throw ValidationError(os.str());
}

// Pooled training rows for one (machine, section): source block first, then
// target block. Extraction parallelizes over clips.
struct TrainingRows {
  features::MatrixRMf rows;
  Eigen::Index source_rows = 0;
  Eigen::Index target_rows = 0;
};

TrainingRows extract_training_rows(const dataset::SectionClips& clips,
                                   const features::FeatureSettings& settings,
                                   int jobs) {
  std::vector<const dataset::CatalogEntry*> entries;
  for (const auto& e : clips.train_source) entries.push_back(&e);
  for (const auto& e : clips.train_target) entries.push_back(&e);
  std::vector<features::MelFrameStack> stacks(entries.size());
  parallel_for(entries.size(), jobs, [&](std::size_t i) {
    stacks[i] =
        features::extract_stack(dataset::load_wav(entries[i]->path), settings);
  });

  TrainingRows out;
  Eigen::Index total = 0;
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    total += stacks[i].count();
    if (i < clips.train_source.size())
      out.source_rows += stacks[i].count();
    else
      out.target_rows += stacks[i].count();
  }
  out.rows.resize(total, settings.stacked_dim());
  Eigen::Index at = 0;
  for (auto& stack : stacks) {
    out.rows.middleRows(at, stack.count()) = stack.rows;
    at += stack.count();
    stack.rows.resize(0, 0);  // release as we go; the pool is large
  }
  return out;
}

// Residual covariances over the pooled rows (source block first),
// reconstructing in chunks to bound transient memory.
scoring::ResidualCovariancePair fit_covariance_blocks(
    const ae::NetF& net, const features::MatrixRMf& rows,
    Eigen::Index source_rows, double lambda) {
  constexpr Eigen::Index kChunk = 4096;
  const Eigen::Index dim = rows.cols();
  scoring::ResidualAccumulator source(dim);
  scoring::ResidualAccumulator target(dim);
  for (Eigen::Index start = 0; start < rows.rows(); start += kChunk) {
    const Eigen::Index n = std::min(kChunk, rows.rows() - start);
    const features::MatrixRMf chunk = rows.middleRows(start, n);
    const features::MatrixRMf residual = ae::reconstruct(net, chunk) - chunk;
    // A chunk may straddle the source/target boundary.
    const Eigen::Index src_n = std::clamp<Eigen::Index>(source_rows - start,
                                                        0, n);
    if (src_n > 0) source.add(residual.topRows(src_n));
    if (src_n < n) target.add(residual.bottomRows(n - src_n));
  }
  if (source.rows() == 0 || target.rows() == 0)
    throw ValidationError("covariance fit needs rows in both domains");

  scoring::ResidualCovariancePair covs;
  covs.lambda = lambda;
  covs.source_rows = source.rows();
  covs.target_rows = target.rows();
  covs.feature_fingerprint = net.feature_fingerprint;
  covs.sigma_inv_source = scoring::invert_covariance(source.covariance(), lambda);
  covs.sigma_inv_target = scoring::invert_covariance(target.covariance(), lambda);
  return covs;
}

}  // namespace

KvFile RunConfig::render() const {
  KvFile kv;
  kv.set("root", root.generic_string());
  kv.set("out", out.generic_string());
  kv.set("mode", scoring::to_string(mode));
  kv.set("profile", dataset::to_string(profile));
  kv.set("arch", arch);
  kv.set("epochs", std::to_string(epochs));
  kv.set("batch", std::to_string(batch));
  {
    std::ostringstream os;
    os << learning_rate;
    kv.set("learning_rate", os.str());
  }
  kv.set("shuffle", shuffle ? "true" : "false");
  {
    std::ostringstream os;
    os << lambda;
    kv.set("lambda", os.str());
  }
  {
    std::ostringstream os;
    os << p;
    kv.set("p", os.str());
  }
  {
    std::ostringstream os;
    os << percentile;
    kv.set("percentile", os.str());
  }
  {
    std::ostringstream os;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      if (i) os << ',';
      os << seeds[i];
    }
    kv.set("seeds", os.str());
  }
  kv.set("jobs", std::to_string(jobs));
  kv.set("frame_len", std::to_string(feature_settings.frame_len));
  kv.set("hop", std::to_string(feature_settings.hop));
  kv.set("n_mels", std::to_string(feature_settings.n_mels));
  {
    std::ostringstream os;
    os << feature_settings.fmin_hz;
    kv.set("fmin", os.str());
  }
  {
    std::ostringstream os;
    os << feature_settings.fmax_hz;
    kv.set("fmax", os.str());
  }
  kv.set("context", std::to_string(feature_settings.context));
  {
    std::ostringstream os;
    os << feature_settings.log_eps;
    kv.set("log_eps", os.str());
  }
  return kv;
}

std::uint64_t RunConfig::fingerprint() const { return fnv1a64(render().render()); }

RunConfig run_config_from_kv(const KvFile& kv) {
  RunConfig cfg;
  for (const auto& [key, value] : kv.entries) {
    if (key == "root") {
      cfg.root = value;
    } else if (key == "out") {
      cfg.out = value;
    } else if (key == "mode") {
      cfg.mode = scoring::score_mode_from_string(value);
    } else if (key == "profile") {
      cfg.profile = dataset::validation_profile_from_string(value);
    } else if (key == "arch") {
      cfg.arch = value;
    } else if (key == "epochs") {
      cfg.epochs = static_cast<int>(kv.get_long("epochs"));
    } else if (key == "batch") {
      cfg.batch = static_cast<int>(kv.get_long("batch"));
    } else if (key == "learning_rate") {
      cfg.learning_rate = kv.get_double("learning_rate");
    } else if (key == "shuffle") {
      cfg.shuffle = value == "true" || value == "1";
    } else if (key == "lambda") {
      cfg.lambda = kv.get_double("lambda");
    } else if (key == "p") {
      cfg.p = kv.get_double("p");
    } else if (key == "percentile") {
      cfg.percentile = kv.get_double("percentile");
    } else if (key == "seeds") {
      cfg.seeds.clear();
      std::istringstream is(value);
      std::string tok;
      while (std::getline(is, tok, ','))
        cfg.seeds.push_back(static_cast<std::uint64_t>(std::stoull(tok)));
    } else if (key == "jobs") {
      cfg.jobs = static_cast<int>(kv.get_long("jobs"));
    } else if (key == "frame_len") {
      cfg.feature_settings.frame_len = static_cast<int>(kv.get_long("frame_len"));
    } else if (key == "hop") {
      cfg.feature_settings.hop = static_cast<int>(kv.get_long("hop"));
    } else if (key == "n_mels") {
      cfg.feature_settings.n_mels = static_cast<int>(kv.get_long("n_mels"));
    } else if (key == "fmin") {
      cfg.feature_settings.fmin_hz = kv.get_double("fmin");
    } else if (key == "fmax") {
      cfg.feature_settings.fmax_hz = kv.get_double("fmax");
    } else if (key == "context") {
      cfg.feature_settings.context = static_cast<int>(kv.get_long("context"));
    } else if (key == "log_eps") {
      cfg.feature_settings.log_eps = kv.get_double("log_eps");
    } else if (key == "use_test_for_training") {
      if (value == "true" || value == "1")
        throw ValidationError(
            "first-shot constraint: test data cannot be used for training");
    } else {
      throw ParseError("unknown config key '" + key + "'");
    }
  }

  if (cfg.root.empty()) throw ValidationError("config: root is required");
  if (cfg.out.empty()) throw ValidationError("config: out is required");
  if (!(cfg.p > 0.0 && cfg.p <= 1.0))
    throw ValidationError("config: p must lie in (0, 1]");
  if (!(cfg.percentile >= 0.0 && cfg.percentile <= 1.0))
    throw ValidationError("config: percentile must lie in [0, 1]");
  if (cfg.seeds.empty()) throw ValidationError("config: seed list is empty");
  if (cfg.epochs < 1) throw ValidationError("config: epochs must be >= 1");
  if (cfg.batch < 1) throw ValidationError("config: batch must be >= 1");
  if (!(cfg.learning_rate > 0.0))
    throw ValidationError("config: learning_rate must be > 0");
  if (cfg.jobs < 1) throw ValidationError("config: jobs must be >= 1");
  if (cfg.lambda < 0.0) throw ValidationError("config: lambda must be >= 0");
  ae::parse_arch(cfg.arch);  // throws on malformed descriptors
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  return run_config_from_kv(load_kv_file(path));
}

std::uint64_t derive_model_seed(const std::string& machine,
                                const std::string& section,
                                std::uint64_t seed) {
  return fnv1a64(machine + "|" + section, seed ^ 0x5851f42d4c957f2dull);
}

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const NumericError*>(&error)) return 3;
  if (dynamic_cast<const IoError*>(&error)) return 4;
  if (dynamic_cast<const ValidationError*>(&error)) return 2;
  if (dynamic_cast<const ParseError*>(&error)) return 2;
  return 1;
}

// --------------------------------------------------------------------------
// generate

synthgen::GenerateResult cmd_generate(const fs::path& spec_file,
                                      const fs::path& root,
                                      synthgen::GenProfile profile,
                                      std::uint64_t seed, int jobs) {
  std::vector<synthgen::MachineSpec> specs =
      spec_file.empty() ? synthgen::default_machine_specs()
                        : synthgen::parse_machine_specs(load_kv_file(spec_file));
  if (seed != 0)
    for (auto& spec : specs) spec.seed ^= seed;
  return synthgen::generate_corpus(specs, root, profile, jobs);
}

// --------------------------------------------------------------------------
// train

void cmd_train(const RunConfig& cfg) {
  const auto catalog = dataset::scan_dataset(cfg.root);
  require_valid_catalog(catalog, cfg.profile);

  fs::create_directories(cfg.out);
  save_kv_file(cfg.out / "config.kv", cfg.render());
  JsonlLogger logger(cfg.out / "logs.jsonl");
  const ae::Arch arch = ae::parse_arch(cfg.arch);
  if (arch.dims.front() != cfg.feature_settings.stacked_dim())
    throw ValidationError("arch input dim " + std::to_string(arch.dims.front()) +
                          " != stacked feature dim " +
                          std::to_string(cfg.feature_settings.stacked_dim()));
  const std::uint64_t feat_fp = cfg.feature_settings.fingerprint();

  for (const auto& [machine, data] : catalog.machines) {
    for (const auto& [section, clips] : data.sections) {
      const auto t0 = std::chrono::steady_clock::now();
      const TrainingRows pool =
          extract_training_rows(clips, cfg.feature_settings, cfg.jobs);
      logger.log({{"stage", "train"},
                  {"event", "features"},
                  {"machine", machine},
                  {"section", section},
                  {"rows", pool.rows.rows()},
                  {"elapsed_s", std::chrono::duration<double>(
                                    std::chrono::steady_clock::now() - t0)
                                    .count()}});

      std::vector<ae::TrainReport> reports(cfg.seeds.size());
      parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
        const std::uint64_t run_seed = cfg.seeds[i];
        ae::TrainConfig tc;
        tc.epochs = cfg.epochs;
        tc.batch = cfg.batch;
        tc.learning_rate = cfg.learning_rate;
        tc.shuffle = cfg.shuffle;
        tc.seed = derive_model_seed(machine, section, run_seed);

        ae::NetF net = ae::init_model(arch, tc.seed);
        net.feature_fingerprint = feat_fp;
        reports[i] = ae::train_on_rows(net, pool.rows, tc);

        const auto covs =
            fit_covariance_blocks(net, pool.rows, pool.source_rows, cfg.lambda);
        const fs::path dir = cfg.out / seed_dir_name(run_seed);
        ae::save_model(dir / artifact_name("model", machine, section, ".asdm"),
                       net);
        scoring::save_covariance(
            dir / artifact_name("cov", machine, section, ".asdc"), covs);
      });

      for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        for (std::size_t e = 0; e < reports[i].epoch_loss.size(); ++e)
          logger.log({{"stage", "train"},
                      {"event", "epoch"},
                      {"machine", machine},
                      {"section", section},
                      {"seed", cfg.seeds[i]},
                      {"epoch", e + 1},
                      {"loss", reports[i].epoch_loss[e]}});
        logger.log({{"stage", "train"},
                    {"event", "done"},
                    {"machine", machine},
                    {"section", section},
                    {"seed", cfg.seeds[i]},
                    {"final_loss", reports[i].final_loss},
                    {"elapsed_s", reports[i].wall_seconds}});
      }
    }
  }
}

// --------------------------------------------------------------------------
// score

namespace {

struct SectionStacks {
  std::vector<std::string> test_names;
  std::vector<features::MelFrameStack> test_stacks;
  std::vector<features::MelFrameStack> train_stacks;
};

SectionStacks extract_section_stacks(const dataset::SectionClips& clips,
                                     const features::FeatureSettings& settings,
                                     int jobs) {
  SectionStacks out;
  std::vector<const dataset::CatalogEntry*> entries;
  for (const auto& e : clips.test) {
    entries.push_back(&e);
    out.test_names.push_back(e.path.filename().string());
  }
  const std::size_t n_test = entries.size();
  for (const auto& e : clips.train_source) entries.push_back(&e);
  for (const auto& e : clips.train_target) entries.push_back(&e);

  std::vector<features::MelFrameStack> stacks(entries.size());
  parallel_for(entries.size(), jobs, [&](std::size_t i) {
    stacks[i] =
        features::extract_stack(dataset::load_wav(entries[i]->path), settings);
  });
  out.test_stacks.assign(std::make_move_iterator(stacks.begin()),
                         std::make_move_iterator(stacks.begin() +
                                                 static_cast<long>(n_test)));
  out.train_stacks.assign(std::make_move_iterator(stacks.begin() +
                                                  static_cast<long>(n_test)),
                          std::make_move_iterator(stacks.end()));
  return out;
}

}  // namespace

void cmd_score(const RunConfig& cfg) {
  const auto catalog = dataset::scan_dataset(cfg.root);
  require_valid_catalog(catalog, cfg.profile);
  JsonlLogger logger(cfg.out / "logs.jsonl");
  const std::uint64_t feat_fp = cfg.feature_settings.fingerprint();

  // Corpus fingerprint travels into every score directory's sidecar.
  std::string corpus_fp = "unknown";
  if (fs::exists(cfg.root / "corpus_meta.kv"))
    corpus_fp = load_kv_file(cfg.root / "corpus_meta.kv").get_or("fingerprint",
                                                                 "unknown");

  for (const auto& [machine, data] : catalog.machines) {
    for (const auto& [section, clips] : data.sections) {
      if (clips.test.empty())
        throw ValidationError(machine + "/section " + section +
                              ": no test clips to score");
      const auto t0 = std::chrono::steady_clock::now();
      const SectionStacks stacks =
          extract_section_stacks(clips, cfg.feature_settings, cfg.jobs);
      logger.log({{"stage", "score"},
                  {"event", "features"},
                  {"machine", machine},
                  {"section", section},
                  {"test_clips", stacks.test_stacks.size()},
                  {"train_clips", stacks.train_stacks.size()},
                  {"elapsed_s", std::chrono::duration<double>(
                                    std::chrono::steady_clock::now() - t0)
                                    .count()}});

      parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
        const std::uint64_t run_seed = cfg.seeds[i];
        const fs::path seed_dir = cfg.out / seed_dir_name(run_seed);
        const ae::NetF net = ae::load_model(
            seed_dir / artifact_name("model", machine, section, ".asdm"));
        if (net.feature_fingerprint != feat_fp)
          throw ValidationError(
              "model " + machine + "/section " + section + " seed " +
              std::to_string(run_seed) +
              " was trained with different feature settings; refusing to score");

        std::unique_ptr<scoring::MahalanobisScorer> maha;
        if (cfg.mode == scoring::ScoreMode::kMahalanobis) {
          const auto covs = scoring::load_covariance(
              seed_dir / artifact_name("cov", machine, section, ".asdc"));
          if (covs.feature_fingerprint != feat_fp)
            throw ValidationError("covariance fingerprint mismatch for " +
                                  machine + "/section " + section);
          maha = std::make_unique<scoring::MahalanobisScorer>(covs);
        }
        const auto score_stack = [&](const features::MelFrameStack& stack) {
          const features::MatrixRMf residual = scoring::residuals(net, stack);
          return cfg.mode == scoring::ScoreMode::kSimple
                     ? scoring::simple_score_from_residuals(residual)
                     : maha->score_from_residuals(residual);
        };

        std::vector<scoring::ScoreRecord> records(stacks.test_stacks.size());
        for (std::size_t c = 0; c < stacks.test_stacks.size(); ++c)
          records[c] = {stacks.test_names[c], score_stack(stacks.test_stacks[c])};

        std::vector<double> train_scores(stacks.train_stacks.size());
        for (std::size_t c = 0; c < stacks.train_stacks.size(); ++c)
          train_scores[c] = score_stack(stacks.train_stacks[c]);
        const auto threshold =
            scoring::fit_threshold(train_scores, cfg.percentile);

        const fs::path mode_dir = seed_dir / scoring::to_string(cfg.mode);
        scoring::write_score_csv(
            mode_dir / artifact_name("anomaly_score", machine, section, ".csv"),
            records);
        scoring::write_decision_csv(
            mode_dir /
                artifact_name("decision_result", machine, section, ".csv"),
            records, threshold);

        KvFile meta;
        meta.set("corpus_fingerprint", corpus_fp);
        meta.set("config_fingerprint", to_hex(cfg.fingerprint()));
        meta.set("mode", scoring::to_string(cfg.mode));
        meta.set("seed", std::to_string(run_seed));
        meta.set("threshold", std::to_string(threshold.phi));
        meta.set("threshold_method", threshold.method);
        save_kv_file(mode_dir / "meta.kv", meta);
      });

      for (const std::uint64_t run_seed : cfg.seeds)
        logger.log({{"stage", "score"},
                    {"event", "done"},
                    {"machine", machine},
                    {"section", section},
                    {"seed", run_seed},
                    {"mode", scoring::to_string(cfg.mode)}});
    }
  }
}

// --------------------------------------------------------------------------
// evaluate

namespace {

// ground_truth_<machine>_section_<NN>.csv -> (machine, section)
bool parse_ground_truth_name(const std::string& stem, std::string& machine,
                             std::string& section) {
  static const std::string prefix = "ground_truth_";
  const auto mark = stem.rfind("_section_");
  if (stem.rfind(prefix, 0) != 0 || mark == std::string::npos ||
      mark <= prefix.size())
    return false;
  machine = stem.substr(prefix.size(), mark - prefix.size());
  section = stem.substr(mark + 9);
  return machine.size() > 0 && section.size() == 2;
}

}  // namespace

evaluation::EvaluationReport cmd_evaluate_dir(const fs::path& scores_dir,
                                              const fs::path& corpus_root,
                                              double p) {
  if (!fs::exists(scores_dir))
    throw IoError("score directory " + scores_dir.string() + " does not exist");

  // Fingerprint gate: refuse scores produced from a different corpus.
  const fs::path corpus_meta_path = corpus_root / "corpus_meta.kv";
  const fs::path score_meta_path = scores_dir / "meta.kv";
  if (fs::exists(corpus_meta_path) && fs::exists(score_meta_path)) {
    const std::string corpus_fp =
        load_kv_file(corpus_meta_path).get_or("fingerprint", "unknown");
    const std::string scored_fp =
        load_kv_file(score_meta_path).get_or("corpus_fingerprint", "unknown");
    if (corpus_fp != "unknown" && scored_fp != "unknown" &&
        corpus_fp != scored_fp)
      throw ValidationError("score directory " + scores_dir.string() +
                            " was produced from a different corpus (fingerprint " +
                            scored_fp + " != " + corpus_fp + ")");
  }

  std::vector<evaluation::LabeledScoreSet> sets;
  std::vector<std::pair<std::string, std::string>> grid;
  for (const auto& entry : fs::directory_iterator(corpus_root)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    std::string machine, section;
    if (parse_ground_truth_name(entry.path().stem().string(), machine, section))
      grid.emplace_back(machine, section);
  }
  std::sort(grid.begin(), grid.end());
  if (grid.empty())
    throw ValidationError("no ground_truth_*.csv manifests under " +
                          corpus_root.string());

  for (const auto& [machine, section] : grid) {
    const auto truth = evaluation::read_ground_truth_csv(
        corpus_root / ("ground_truth_" + machine + "_section_" + section +
                       ".csv"));
    const fs::path score_csv =
        scores_dir / artifact_name("anomaly_score", machine, section, ".csv");
    if (!fs::exists(score_csv))
      throw ValidationError("missing score file for " + machine + "/section " +
                            section + ": " + score_csv.string());
    const auto records = scoring::read_score_csv(score_csv);
    std::vector<std::pair<std::string, double>> scores;
    scores.reserve(records.size());
    for (const auto& rec : records) scores.emplace_back(rec.clip_name, rec.score);
    sets.push_back(evaluation::join_scores(machine, section, truth, scores));
  }

  const auto report = evaluation::evaluate(sets, p);
  evaluation::write_report_csv(scores_dir / "report.csv", report);
  write_text_file(scores_dir / "report.txt", evaluation::render_report(report));
  return report;
}

std::vector<evaluation::EvaluationReport> cmd_evaluate(const RunConfig& cfg) {
  std::vector<evaluation::EvaluationReport> reports;
  for (const std::uint64_t seed : cfg.seeds)
    reports.push_back(cmd_evaluate_dir(
        cfg.out / seed_dir_name(seed) / scoring::to_string(cfg.mode), cfg.root,
        cfg.p));
  return reports;
}

std::string cmd_report(std::span<const fs::path> report_csvs) {
  if (report_csvs.empty()) throw ValidationError("no report CSVs given");
  std::vector<evaluation::EvaluationReport> trials;
  for (const auto& path : report_csvs)
    trials.push_back(evaluation::read_report_csv(path));
  return evaluation::render_multi_trial(trials);
}

}  // namespace asd::pipeline
