// asd: anomalous-sound-detection pipeline CLI.
//
//   asd generate  --root DIR --profile dev|add|eval|ci [--spec FILE]
//                 [--seed N] [--jobs N]
//   asd train     --config FILE [overrides]
//   asd score     --config FILE [overrides]
//   asd evaluate  --config FILE | (--scores DIR --root DIR [--p P])
//   asd report    REPORT.csv... [--out FILE]
//
// Exit codes: 0 success, 2 validation failure, 3 numeric failure, 4 I/O.
#include <CLI11.hpp>
#include <iostream>

#include "asd/pipeline.hpp"

namespace {

using namespace asd;

struct Overrides {
  std::string root, out, mode, profile;
  std::vector<std::uint64_t> seeds;
  double p = -1.0;
  int jobs = 0;
  int epochs = 0;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--root", ov.root, "dataset root (overrides config)");
  cmd->add_option("--out", ov.out, "output directory (overrides config)");
  cmd->add_option("--mode", ov.mode, "simple|mahalanobis (overrides config)");
  cmd->add_option("--profile", ov.profile, "validation profile (overrides config)");
  cmd->add_option("--seed", ov.seeds, "run seed(s) (overrides config)");
  cmd->add_option("--p", ov.p, "pAUC FPR bound (overrides config)");
  cmd->add_option("--jobs", ov.jobs, "worker threads (overrides config)");
  cmd->add_option("--epochs", ov.epochs, "training epochs (overrides config)");
}

pipeline::RunConfig resolve_config(const std::string& config_path,
                                   const Overrides& ov) {
  KvFile kv = load_kv_file(config_path);
  if (!ov.root.empty()) kv.set("root", ov.root);
  if (!ov.out.empty()) kv.set("out", ov.out);
  if (!ov.mode.empty()) kv.set("mode", ov.mode);
  if (!ov.profile.empty()) kv.set("profile", ov.profile);
  if (ov.p >= 0.0) kv.set("p", std::to_string(ov.p));
  if (ov.jobs > 0) kv.set("jobs", std::to_string(ov.jobs));
  if (ov.epochs > 0) kv.set("epochs", std::to_string(ov.epochs));
  if (!ov.seeds.empty()) {
    std::string seeds;
    for (std::size_t i = 0; i < ov.seeds.size(); ++i) {
      if (i) seeds += ',';
      seeds += std::to_string(ov.seeds[i]);
    }
    kv.set("seeds", seeds);
  }
  return pipeline::run_config_from_kv(kv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"first-shot anomalous sound detection pipeline"};
  app.require_subcommand(1);

  // generate
  std::string gen_spec, gen_root, gen_profile = "dev";
  std::uint64_t gen_seed = 0;
  int gen_jobs = 2;
  auto* generate = app.add_subcommand("generate", "emit a synthetic corpus");
  generate->add_option("--spec", gen_spec, "machine spec file (default: bundled)");
  generate->add_option("--root", gen_root, "corpus root to write")->required();
  generate->add_option("--profile", gen_profile, "dev|add|eval|ci");
  generate->add_option("--seed", gen_seed, "re-roll machine seeds");
  generate->add_option("--jobs", gen_jobs, "worker threads");

  std::string cfg_path;
  Overrides ov;
  auto* train = app.add_subcommand("train", "train one model per machine");
  train->add_option("--config", cfg_path, "run config file")->required();
  add_override_flags(train, ov);

  auto* score = app.add_subcommand("score", "score test clips");
  score->add_option("--config", cfg_path, "run config file")->required();
  add_override_flags(score, ov);

  std::string eval_scores;
  auto* evaluate = app.add_subcommand("evaluate", "compute AUC/pAUC reports");
  evaluate->add_option("--config", cfg_path, "run config file");
  evaluate->add_option("--scores", eval_scores, "single score directory");
  add_override_flags(evaluate, ov);

  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "mean +/- std over trial reports");
  report->add_option("reports", report_inputs, "report.csv files")->required();
  report->add_option("--out", report_out, "write table here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      const auto result = pipeline::cmd_generate(
          gen_spec.empty() ? fs::path{} : fs::path(gen_spec), gen_root,
          synthgen::gen_profile_from_string(gen_profile), gen_seed, gen_jobs);
      std::cout << "wrote " << result.clips_written << " clips under " << gen_root
                << " (fingerprint " << to_hex(result.fingerprint) << ")\n";
    } else if (train->parsed()) {
      pipeline::cmd_train(resolve_config(cfg_path, ov));
      std::cout << "training complete\n";
    } else if (score->parsed()) {
      pipeline::cmd_score(resolve_config(cfg_path, ov));
      std::cout << "scoring complete\n";
    } else if (evaluate->parsed()) {
      if (!eval_scores.empty()) {
        if (ov.root.empty())
          throw ValidationError("evaluate --scores needs --root");
        const auto rep = pipeline::cmd_evaluate_dir(
            eval_scores, ov.root, ov.p >= 0.0 ? ov.p : 0.1);
        std::cout << evaluation::render_report(rep);
      } else if (!cfg_path.empty()) {
        const auto cfg = resolve_config(cfg_path, ov);
        const auto reports = pipeline::cmd_evaluate(cfg);
        for (std::size_t i = 0; i < reports.size(); ++i) {
          std::cout << "seed " << cfg.seeds[i] << ":\n"
                    << evaluation::render_report(reports[i]) << "\n";
        }
      } else {
        throw ValidationError("evaluate needs --config or --scores");
      }
    } else if (report->parsed()) {
      std::vector<fs::path> paths(report_inputs.begin(), report_inputs.end());
      const std::string table = pipeline::cmd_report(paths);
      if (report_out.empty())
        std::cout << table;
      else
        write_text_file(report_out, table);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    const auto* as_asd = dynamic_cast<const asd::Error*>(&e);
    return as_asd ? pipeline::exit_code_for(e) : 1;
  }
  return 0;
}
