// Acceptance suite: one pass/fail line per criterion, exit 0 only when all
// pass. The end-to-end criterion trains on the bundled full-count synthetic
// development corpus, so a complete run takes several minutes.
//
// Work area: ./asd_acceptance_work (override with ASD_ACCEPTANCE_DIR).
// The directory is removed after a fully green run and kept for inspection
// otherwise.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include "asd/pipeline.hpp"

using namespace asd;

namespace {

struct Criterion {
  int number;
  std::string name;
  std::function<std::string()> run;  // returns detail text; throws on failure
};

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

fs::path work_dir() {
  if (const char* env = std::getenv("ASD_ACCEPTANCE_DIR")) return env;
  return "asd_acceptance_work";
}

int worker_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 4u));
}

std::string format_seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f s", s);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Metric oracle equivalence

std::uint64_t brute_force_wins(const std::vector<double>& normals,
                               const std::vector<double>& anomalies) {
  std::uint64_t wins = 0;
  for (const double a : anomalies)
    for (const double n : normals)
      if (a - n > 0.0) ++wins;
  return wins;
}

std::string criterion_metric_oracles() {
  Rng rng(20240001);
  const double p_grid[] = {0.1, 0.25, 0.5, 1.0};
  std::size_t auc_checked = 0, pauc_checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n_neg = 10 + rng.below(41);  // 10..50
    const std::size_t n_pos = 1 + rng.below(50);   // 1..50
    std::vector<double> normals(n_neg), anomalies(n_pos);
    // Quarter-integer grid forces exact ties in both directions.
    for (auto& v : normals) v = static_cast<double>(rng.below(48)) / 4.0;
    for (auto& v : anomalies) v = static_cast<double>(rng.below(48)) / 4.0;

    const double auc = evaluation::auc_domain(normals, anomalies);
    const double auc_expected =
        static_cast<double>(brute_force_wins(normals, anomalies)) /
        (static_cast<double>(n_neg) * static_cast<double>(n_pos));
    require(auc == auc_expected, "auc mismatch at trial " + std::to_string(trial));
    ++auc_checked;

    const double p = p_grid[rng.below(4)];
    const std::size_t keep =
        static_cast<std::size_t>(std::floor(p * static_cast<double>(n_neg)));
    if (keep == 0) continue;
    std::vector<double> hardest = normals;
    std::sort(hardest.begin(), hardest.end(), std::greater<>());
    hardest.resize(keep);
    const double pauc = evaluation::pauc_section(normals, anomalies, p);
    const double pauc_expected =
        static_cast<double>(brute_force_wins(hardest, anomalies)) /
        (static_cast<double>(keep) * static_cast<double>(n_pos));
    require(pauc == pauc_expected,
            "pauc mismatch at trial " + std::to_string(trial));
    ++pauc_checked;
  }
  std::ostringstream os;
  os << auc_checked << " AUC and " << pauc_checked
     << " pAUC instances, exact integer-ratio agreement";
  return os.str();
}

// ---------------------------------------------------------------------------
// 2. Official score on the published simple-mode means

std::string criterion_official_score() {
  const double values_pct[7][3] = {
      {66.98, 33.75, 48.77}, {76.63, 46.92, 47.95}, {62.01, 61.40, 57.58},
      {67.71, 55.24, 57.53}, {70.40, 69.34, 55.65}, {66.51, 56.01, 51.77},
      {51.07, 46.25, 52.42}};
  std::vector<evaluation::MachineSectionResult> rows(7);
  for (int m = 0; m < 7; ++m) {
    rows[m].machine = "machine" + std::to_string(m);
    rows[m].section = "00";
    rows[m].auc_source = values_pct[m][0] / 100.0;
    rows[m].auc_target = values_pct[m][1] / 100.0;
    rows[m].pauc = values_pct[m][2] / 100.0;
  }
  const double omega = evaluation::official_score(rows);

  // Independent one-line computation.
  double recip = 0.0;
  for (const auto& v : values_pct) recip += 100.0 / v[0] + 100.0 / v[1] + 100.0 / v[2];
  const double direct = 21.0 / recip;

  constexpr double kFrozen = 0.55351119476306809;
  require(std::abs(omega - direct) <= 1e-12 * direct,
          "official_score disagrees with the direct harmonic mean");
  require(std::abs(omega - kFrozen) <= 1e-12,
          "official_score drifted from the frozen value");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "harmonic mean of 21 inputs = %.15f", omega);
  return buf;
}

// ---------------------------------------------------------------------------
// 3. Gradient correctness

template <class S>
ae::MatrixRM<S> random_rows(Eigen::Index rows, Eigen::Index dim,
                            std::uint64_t seed) {
  Rng rng(seed);
  ae::MatrixRM<S> out(rows, dim);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index d = 0; d < dim; ++d)
      out(r, d) = static_cast<S>(rng.normal());
  return out;
}

std::string criterion_gradients() {
  const std::vector<std::vector<int>> shapes = {
      {4, 3, 4}, {5, 3, 2, 3, 5}, {6, 4, 6}, {3, 2, 3}, {8, 5, 2, 5, 8},
      {4, 4, 4}};
  std::size_t models = 0, params = 0;
  for (int trial = 0; trial < 24; ++trial) {
    const auto& dims = shapes[static_cast<std::size_t>(trial) % shapes.size()];
    ae::Arch arch;
    arch.dims = dims;
    arch.acts.assign(dims.size() - 1, ae::Activation::kRelu);
    arch.acts.back() = ae::Activation::kLinear;
    auto net = ae::init_net<double>(arch, 7000 + static_cast<std::uint64_t>(trial));
    {
      // Nonzero biases keep pre-activations off the exact ReLU kink, where
      // a central-difference oracle is undefined.
      Rng rng(7100 + static_cast<std::uint64_t>(trial));
      for (auto& layer : net.layers)
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
          layer.bias(i) = rng.uniform(-0.3, 0.3);
    }
    const auto batch = random_rows<double>(
        1 + static_cast<Eigen::Index>(trial % 5), dims.front(),
        7200 + static_cast<std::uint64_t>(trial));
    const auto grads = ae::backward(net, batch);
    const auto loss = [&]() {
      return ae::mse_loss(batch, ae::forward(net, batch));
    };

    const double h = 1e-4;
    auto check = [&](double& param, double grad) {
      const double saved = param;
      param = saved + h;
      const double up = loss();
      param = saved - h;
      const double down = loss();
      param = saved;
      const double fd = (up - down) / (2.0 * h);
      const double err = std::abs(fd - grad);
      require(err <= 1e-7 || err <= 1e-4 * std::abs(fd),
              "gradient mismatch: analytic " + std::to_string(grad) +
                  " vs finite-difference " + std::to_string(fd));
      ++params;
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      for (Eigen::Index i = 0; i < net.layers[l].weights.size(); ++i)
        check(net.layers[l].weights.data()[i], grads.layers[l].weights.data()[i]);
      for (Eigen::Index i = 0; i < net.layers[l].bias.size(); ++i)
        check(net.layers[l].bias.data()[i], grads.layers[l].bias.data()[i]);
    }
    ++models;
  }
  std::ostringstream os;
  os << models << " toy models, " << params
     << " parameters within 1e-4 relative / 1e-7 absolute of central differences";
  return os.str();
}

// ---------------------------------------------------------------------------
// 4. Mode-collapse identity

std::string criterion_mode_collapse() {
  Rng rng(42424242);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 4 + static_cast<int>(rng.below(13)) * 4;  // 4..52
    ae::Arch arch;
    arch.dims = {dim, std::max(dim / 2, 2), dim};
    arch.acts = {ae::Activation::kRelu, ae::Activation::kLinear};
    const auto net =
        ae::init_net<float>(arch, 9000 + static_cast<std::uint64_t>(trial));

    features::MelFrameStack stack;
    stack.rows = random_rows<float>(
        1 + static_cast<Eigen::Index>(rng.below(8)), dim,
        9100 + static_cast<std::uint64_t>(trial));

    scoring::ResidualCovariancePair covs;
    covs.sigma_inv_source = Eigen::MatrixXd::Identity(dim, dim);
    covs.sigma_inv_target = Eigen::MatrixXd::Identity(dim, dim);

    const double simple = scoring::score_simple(net, stack);
    const double maha = scoring::score_mahalanobis(net, covs, stack);
    require(simple > 0.0, "degenerate zero simple score");
    const double rel = std::abs(maha - simple) / simple;
    worst = std::max(worst, rel);
    require(rel <= 1e-12, "identity collapse violated: relative gap " +
                              std::to_string(rel));
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf),
                "100 random (model, stack) pairs, worst relative gap %.3g",
                worst);
  return buf;
}

// ---------------------------------------------------------------------------
// 5. End-to-end synthetic reproduction

std::string criterion_end_to_end(const fs::path& corpus) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = work_dir() / "run_e2e";

  pipeline::RunConfig cfg;
  cfg.root = corpus;
  cfg.out = out;
  cfg.mode = scoring::ScoreMode::kSimple;
  cfg.profile = dataset::ValidationProfile::kDevelopment;
  cfg.epochs = 4;
  cfg.batch = 256;
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.jobs = worker_threads();

  pipeline::cmd_train(cfg);
  pipeline::cmd_score(cfg);
  const auto simple_reports = pipeline::cmd_evaluate(cfg);

  double source_sum = 0.0, omega_sum = 0.0;
  std::size_t source_cells = 0;
  for (const auto& report : simple_reports) {
    omega_sum += report.official;
    for (const auto& row : report.rows) {
      source_sum += row.auc_source;
      ++source_cells;
    }
  }
  const double mean_source_auc = source_sum / static_cast<double>(source_cells);
  const double mean_omega =
      omega_sum / static_cast<double>(simple_reports.size());

  // Five-trial summary table over the per-seed reports.
  {
    std::vector<fs::path> report_csvs;
    for (const std::uint64_t seed : cfg.seeds)
      report_csvs.push_back(out / ("seed_" + std::to_string(seed)) / "simple" /
                            "report.csv");
    const std::string table = pipeline::cmd_report(report_csvs);
    require(table.find("+/-") != std::string::npos,
            "trial table lacks mean +/- std cells");
    require(table.find("nan") == std::string::npos &&
                table.find("inf") == std::string::npos,
            "trial table contains non-finite cells");
  }

  // Mahalanobis leg: only the target-domain AUC delta is reported (the sign
  // is not asserted). Computed straight from score CSVs + manifests.
  cfg.mode = scoring::ScoreMode::kMahalanobis;
  pipeline::cmd_score(cfg);

  const auto target_auc_for = [&](std::uint64_t seed, const std::string& mode,
                                  const std::string& machine) {
    const auto truth = evaluation::read_ground_truth_csv(
        corpus / ("ground_truth_" + machine + "_section_00.csv"));
    const auto records =
        scoring::read_score_csv(out / ("seed_" + std::to_string(seed)) / mode /
                                ("anomaly_score_" + machine + "_section_00.csv"));
    std::vector<std::pair<std::string, double>> scores;
    for (const auto& rec : records) scores.emplace_back(rec.clip_name, rec.score);
    const auto set = evaluation::join_scores(machine, "00", truth, scores);
    return evaluation::auc_domain(set.normals_target, set.anomalies);
  };

  std::vector<std::string> machines;
  for (const auto& entry : fs::directory_iterator(corpus))
    if (entry.is_directory()) machines.push_back(entry.path().filename().string());
  std::sort(machines.begin(), machines.end());

  double delta_sum = 0.0;
  std::size_t delta_cells = 0;
  for (const std::uint64_t seed : cfg.seeds) {
    for (const auto& machine : machines) {
      const double simple_auc = target_auc_for(seed, "simple", machine);
      const double maha_auc = target_auc_for(seed, "mahalanobis", machine);
      delta_sum += maha_auc - simple_auc;
      ++delta_cells;
    }
  }
  const double mean_delta = delta_sum / static_cast<double>(delta_cells);

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  char buf[240];
  std::snprintf(buf, sizeof(buf),
                "5-seed mean source AUC %.4f (>= 0.85), mean official score "
                "%.4f (>= 0.6), mahalanobis target-AUC delta %+.4f (logged, "
                "sign not asserted), %s",
                mean_source_auc, mean_omega, mean_delta,
                format_seconds(elapsed).c_str());
  require(mean_source_auc >= 0.85,
          "mean source AUC " + std::to_string(mean_source_auc) + " < 0.85");
  require(mean_omega >= 0.6,
          "mean official score " + std::to_string(mean_omega) + " < 0.6");
  return buf;
}

// ---------------------------------------------------------------------------
// 6. Shape/feature chain

std::string criterion_shape_chain() {
  Rng rng(606060);
  const features::FeatureSettings settings;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t length = 16000 + rng.below(200000 - 16000 + 1);
    dataset::AudioClip clip;
    clip.samples.resize(length);
    for (auto& s : clip.samples) s = static_cast<float>(0.05 * rng.normal());

    const auto spec = features::log_mel(clip, settings);
    const auto frames =
        static_cast<Eigen::Index>((length - 1024) / 512) + 1;
    require(spec.frames() == frames, "T mismatch at L=" + std::to_string(length));

    const auto stack = features::stack_frames(spec, settings.context);
    require(stack.count() == frames - 5 + 1,
            "K mismatch at L=" + std::to_string(length));
    require(stack.dim() == 640, "D != 640");
  }
  return "200 random clip lengths, T and K match the closed forms, D == 640";
}

// ---------------------------------------------------------------------------
// 7. Determinism

std::string criterion_determinism() {
  const fs::path root = work_dir() / "corpus_ci";
  pipeline::cmd_generate({}, root, synthgen::GenProfile::kCi, 0,
                         worker_threads());

  pipeline::RunConfig cfg;
  cfg.root = root;
  cfg.out = work_dir() / "run_det";
  cfg.profile = dataset::ValidationProfile::kCi;
  cfg.epochs = 2;
  cfg.seeds = {1, 2};
  cfg.jobs = worker_threads();

  const auto run_and_digest = [&]() {
    fs::remove_all(cfg.out);
    pipeline::cmd_train(cfg);
    pipeline::cmd_score(cfg);
    pipeline::cmd_evaluate(cfg);
    std::map<std::string, std::uint64_t> digest;
    for (const auto& entry : fs::recursive_directory_iterator(cfg.out)) {
      if (!entry.is_regular_file()) continue;
      const std::string ext = entry.path().extension().string();
      if (ext != ".asdm" && ext != ".asdc" && ext != ".csv") continue;
      digest[fs::relative(entry.path(), cfg.out).generic_string()] =
          fnv1a64(read_text_file(entry.path()));
    }
    return digest;
  };

  const auto first = run_and_digest();
  const auto second = run_and_digest();
  require(!first.empty(), "no artifacts hashed");
  require(first == second,
          "model/score/report artifacts differ between identical runs");
  std::ostringstream os;
  os << first.size() << " artifacts byte-identical across two full runs";
  return os.str();
}

// ---------------------------------------------------------------------------
// 8. Validator fidelity

struct Mutation {
  std::string name;
  std::string expect;  // violation marker substring
  std::function<std::function<void()>()> apply;  // returns undo
};

fs::path find_clip(const fs::path& dir, const std::string& needle) {
  std::vector<fs::path> hits;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().filename().string().find(needle) != std::string::npos)
      hits.push_back(entry.path());
  require(!hits.empty(), "no clip matching " + needle + " under " + dir.string());
  std::sort(hits.begin(), hits.end());
  return hits.front();
}

std::string criterion_validator(const fs::path& dev_corpus) {
  // All three profiles accepted on pristine generator output.
  {
    const auto report = dataset::validate_split(
        dataset::scan_dataset(dev_corpus), dataset::ValidationProfile::kDevelopment);
    require(report.ok(), "development corpus failed validation: " +
                             (report.violations.empty() ? std::string("?")
                                                        : report.violations[0]));
  }
  auto specs = synthgen::default_machine_specs();
  specs.resize(1);
  const fs::path add_root = work_dir() / "corpus_add";
  const fs::path eval_root = work_dir() / "corpus_eval";
  if (!fs::exists(add_root / "corpus_meta.kv"))
    synthgen::generate_corpus(specs, add_root, synthgen::GenProfile::kAdd,
                              worker_threads());
  if (!fs::exists(eval_root / "corpus_meta.kv"))
    synthgen::generate_corpus(specs, eval_root, synthgen::GenProfile::kEval,
                              worker_threads());
  require(dataset::validate_split(dataset::scan_dataset(add_root),
                                  dataset::ValidationProfile::kAdditionalTraining)
              .ok(),
          "additional-training corpus failed validation");
  require(dataset::validate_split(dataset::scan_dataset(eval_root),
                                  dataset::ValidationProfile::kEvaluation)
              .ok(),
          "evaluation corpus failed validation");

  const fs::path train_dir = dev_corpus / "pumpsim" / "train";
  const fs::path test_dir = dev_corpus / "pumpsim" / "test";

  const auto delete_mutation = [](const fs::path& dir, const std::string& needle) {
    return [dir, needle]() -> std::function<void()> {
      const fs::path victim = find_clip(dir, needle);
      const std::string bytes = read_text_file(victim);
      fs::remove(victim);
      return [victim, bytes]() { write_text_file(victim, bytes); };
    };
  };
  const auto rename_mutation = [](const fs::path& dir, const std::string& needle,
                                  const std::string& from, const std::string& to) {
    return [dir, needle, from, to]() -> std::function<void()> {
      const fs::path victim = find_clip(dir, needle);
      std::string name = victim.filename().string();
      name.replace(name.find(from), from.size(), to);
      const fs::path renamed = victim.parent_path() / name;
      fs::rename(victim, renamed);
      return [victim, renamed]() { fs::rename(renamed, victim); };
    };
  };
  const auto add_file_mutation = [](const fs::path& dir, const std::string& name) {
    return [dir, name]() -> std::function<void()> {
      const fs::path added = dir / name;
      write_text_file(added, std::string(1, '\0'));
      return [added]() { fs::remove(added); };
    };
  };

  const std::vector<Mutation> mutations = {
      {"deleted source-train clip", "train/source expected 990, found 989",
       delete_mutation(train_dir, "source_train_normal_0001")},
      {"deleted target-train clip", "train/target expected 10, found 9",
       delete_mutation(train_dir, "target_train_normal_0001")},
      {"deleted normal test clip", "test/normal expected 100, found 99",
       delete_mutation(test_dir, "source_test_normal_0001")},
      {"deleted anomaly test clip", "test/anomaly expected 100, found 99",
       delete_mutation(test_dir, "source_test_anomaly_0001")},
      {"relabeled domain", "train/source expected 990, found 989",
       rename_mutation(train_dir, "source_train_normal_0002", "_source_",
                       "_target_")},
      {"relabeled condition", "test/normal expected 100, found 99",
       rename_mutation(test_dir, "source_test_normal_0002", "_normal_",
                       "_anomaly_")},
      {"duplicated clip index", "duplicate clip index",
       [&]() -> std::function<void()> {
         const fs::path victim = find_clip(train_dir, "source_train_normal_0003");
         // Same identity, different attribute token: a distinct path that
         // collides on (split, domain, condition, index).
         std::string name = victim.filename().string();
         name.replace(name.find(".wav"), 4, "_x_9.wav");
         const fs::path copy = victim.parent_path() / name;
         fs::copy_file(victim, copy);
         return [copy]() { fs::remove(copy); };
       }},
      {"corrupt filename", "reject:",
       rename_mutation(train_dir, "source_train_normal_0004", "_source_",
                       "_sauce_")},
      {"anomalous train clip", "train clips must be normal",
       add_file_mutation(train_dir,
                         "section_00_source_train_anomaly_0991_vel_31.wav")},
      {"unlabeled test clip in dev profile",
       "test clips must carry domain and condition labels",
       add_file_mutation(test_dir, "section_00_test_0999.wav")},
      {"labeled test clip in evaluation corpus",
       "evaluation test clips must have condition=unknown",
       [&]() -> std::function<void()> {
         const fs::path added = eval_root / "pumpsim" / "test" /
                                "section_00_source_test_normal_0500_vel_31.wav";
         write_text_file(added, std::string(1, '\0'));
         return [added]() { fs::remove(added); };
       }},
  };

  std::size_t flagged = 0;
  for (const auto& mutation : mutations) {
    const bool on_eval = mutation.name.find("evaluation corpus") != std::string::npos;
    const fs::path& root = on_eval ? eval_root : dev_corpus;
    const auto profile = on_eval ? dataset::ValidationProfile::kEvaluation
                                 : dataset::ValidationProfile::kDevelopment;

    const auto undo = mutation.apply();
    const auto report = dataset::validate_split(dataset::scan_dataset(root), profile);
    bool hit = false;
    for (const auto& violation : report.violations)
      hit |= violation.find(mutation.expect) != std::string::npos;
    undo();
    require(!report.ok(), mutation.name + ": validator saw no violation");
    require(hit, mutation.name + ": expected marker '" + mutation.expect +
                     "' missing");
    // The undo must restore a clean corpus before the next mutation.
    require(dataset::validate_split(dataset::scan_dataset(root), profile).ok(),
            mutation.name + ": undo left the corpus dirty");
    ++flagged;
  }
  std::ostringstream os;
  os << "3 profiles accepted; " << flagged << " mutation classes flagged";
  return os.str();
}

}  // namespace

int main() {
  const auto t_start = std::chrono::steady_clock::now();
  fs::create_directories(work_dir());

  // The full-count development corpus feeds criteria 5 and 8.
  const fs::path dev_corpus = work_dir() / "corpus_dev";
  bool generated = false;
  try {
    if (!fs::exists(dev_corpus / "corpus_meta.kv")) {
      const auto specs = synthgen::default_machine_specs();
      synthgen::generate_corpus(specs, dev_corpus, synthgen::GenProfile::kDev,
                                worker_threads());
    }
    generated = true;
  } catch (const std::exception& e) {
    std::cout << "corpus generation failed: " << e.what() << "\n";
  }

  std::vector<Criterion> criteria = {
      {1, "metric oracle equivalence", criterion_metric_oracles},
      {2, "official score vs published means", criterion_official_score},
      {3, "gradient correctness", criterion_gradients},
      {4, "mode-collapse identity", criterion_mode_collapse},
      {5, "end-to-end synthetic reproduction",
       [&] { return criterion_end_to_end(dev_corpus); }},
      {6, "shape/feature chain", criterion_shape_chain},
      {7, "pipeline determinism", criterion_determinism},
      {8, "validator fidelity", [&] { return criterion_validator(dev_corpus); }},
  };
  // Cheap criteria first; the trainer runs last.
  const int order[] = {1, 2, 3, 4, 6, 7, 8, 5};

  int failures = 0;
  for (const int number : order) {
    const auto& criterion = criteria[static_cast<std::size_t>(number - 1)];
    if ((number == 5 || number == 8) && !generated) {
      std::cout << "criterion " << number << " (" << criterion.name
                << "): FAIL - corpus generation failed\n";
      ++failures;
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const std::string detail = criterion.run();
      const double dt =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      std::cout << "criterion " << number << " (" << criterion.name
                << "): PASS [" << format_seconds(dt) << "] - " << detail << "\n";
    } catch (const std::exception& e) {
      const double dt =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      std::cout << "criterion " << number << " (" << criterion.name
                << "): FAIL [" << format_seconds(dt) << "] - " << e.what()
                << "\n";
      ++failures;
    }
    std::cout.flush();
  }

  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  if (failures == 0) {
    std::error_code ec;
    fs::remove_all(work_dir(), ec);
    std::cout << "acceptance: all 8 criteria passed in " << format_seconds(total)
              << "\n";
    return 0;
  }
  std::cout << "acceptance: " << failures << " criteria failed in "
            << format_seconds(total) << " (work dir kept: " << work_dir()
            << ")\n";
  return 1;
}
