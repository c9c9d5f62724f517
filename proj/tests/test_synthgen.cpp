#include <doctest.h>

#include <cmath>

#include "asd/autoencoder.hpp"
#include "asd/features.hpp"
#include "asd/scoring.hpp"
#include "asd/synthgen.hpp"
#include "test_util.hpp"

using namespace asd;
using namespace asd::synthgen;
using asd_test::TempDir;

namespace {

// Hash of every file's bytes, keyed by relative path.
std::map<std::string, std::uint64_t> tree_digest(const fs::path& root) {
  std::map<std::string, std::uint64_t> digest;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file())
      digest[fs::relative(entry.path(), root).generic_string()] =
          fnv1a64(read_text_file(entry.path()));
  return digest;
}

double rms_delta(const std::vector<float>& a, const std::vector<float>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(a.size()));
}

}  // namespace

TEST_CASE("profile counts follow the task layout") {
  const auto dev = counts_for(GenProfile::kDev);
  CHECK(dev.train_source == 990);
  CHECK(dev.train_target == 10);
  CHECK(dev.test_normal == 100);
  CHECK(dev.test_anomaly == 100);
  CHECK_FALSE(dev.unlabeled_test);

  const auto add = counts_for(GenProfile::kAdd);
  CHECK(add.train_source == 990);
  CHECK(add.test_normal + add.test_anomaly == 0);

  const auto eval = counts_for(GenProfile::kEval);
  CHECK(eval.unlabeled_test);
  CHECK(eval.test_normal + eval.test_anomaly == 200);

  const auto ci = counts_for(GenProfile::kCi);
  CHECK(ci.train_source == 20);
  CHECK(ci.train_target == 5);
}

TEST_CASE("ci corpus validates cleanly and carries manifests") {
  TempDir tmp("gen");
  const auto specs = default_machine_specs();
  const auto result =
      generate_corpus(specs, tmp.path(), GenProfile::kCi, 2);
  CHECK(result.clips_written == 2 * (20 + 5 + 10 + 10));

  const auto catalog = dataset::scan_dataset(tmp.path());
  CHECK(catalog.rejects.empty());
  const auto report =
      dataset::validate_split(catalog, dataset::ValidationProfile::kCi);
  CHECK(report.ok());

  // Ground truth: one manifest per machine, one row per test clip.
  for (const auto& spec : specs) {
    const auto truth = evaluation::read_ground_truth_csv(
        tmp.path() / ("ground_truth_" + spec.name + "_section_00.csv"));
    CHECK(truth.size() == 20);
    for (const auto& rec : truth) {
      CHECK(rec.domain != Domain::kUnknown);
      CHECK(rec.condition != Condition::kUnknown);
    }
  }

  // Attribute CSV only for the attribute-visible machine.
  CHECK(fs::exists(tmp.path() / "pumpsim" / "attributes_00.csv"));
  CHECK_FALSE(fs::exists(tmp.path() / "fansim" / "attributes_00.csv"));
  const auto attrs =
      dataset::load_attributes(tmp.path() / "pumpsim" / "attributes_00.csv");
  CHECK(attrs.size() == 45);
  CHECK_NOTHROW(dataset::check_attribute_consistency(catalog, "pumpsim", attrs));

  CHECK(fs::exists(tmp.path() / "corpus_meta.kv"));
}

TEST_CASE("evaluation corpus hides labels in names but not manifests") {
  TempDir tmp("geneval");
  auto specs = default_machine_specs();
  specs.resize(1);
  generate_corpus(specs, tmp.path(), GenProfile::kEval, 2);

  const auto catalog = dataset::scan_dataset(tmp.path());
  const auto& clips = catalog.machines.at("pumpsim").sections.at("00");
  CHECK(clips.train_source.empty());
  CHECK(clips.train_target.empty());
  REQUIRE(clips.test.size() == 200);
  for (const auto& entry : clips.test) CHECK(entry.meta.unlabeled);

  const auto report = dataset::validate_split(
      catalog, dataset::ValidationProfile::kEvaluation);
  CHECK(report.ok());

  const auto truth = evaluation::read_ground_truth_csv(
      tmp.path() / "ground_truth_pumpsim_section_00.csv");
  REQUIRE(truth.size() == 200);
  std::size_t anomalies = 0;
  for (const auto& rec : truth) anomalies += rec.condition == Condition::kAnomaly;
  CHECK(anomalies == 100);
}

TEST_CASE("generation is byte-identical per seed and differs across seeds") {
  TempDir a("gena"), b("genb"), c("genc");
  auto specs = default_machine_specs();
  specs.resize(1);
  specs[0].duration_s = 1.0;  // keep the digesting cheap

  generate_corpus(specs, a.path(), GenProfile::kCi, 2);
  generate_corpus(specs, b.path(), GenProfile::kCi, 1);
  CHECK(tree_digest(a.path()) == tree_digest(b.path()));

  specs[0].seed ^= 0xabcdef;
  generate_corpus(specs, c.path(), GenProfile::kCi, 2);
  CHECK(tree_digest(a.path()) != tree_digest(c.path()));
}

TEST_CASE("duplicate machine names and bad severities are rejected") {
  TempDir tmp("genbad");
  auto specs = default_machine_specs();
  specs[1].name = specs[0].name;
  CHECK_THROWS_AS(generate_corpus(specs, tmp.path(), GenProfile::kCi, 1),
                  ValidationError);
  specs = default_machine_specs();
  specs[0].anomaly.severity = 0.0;
  CHECK_THROWS_AS(generate_corpus(specs, tmp.path(), GenProfile::kCi, 1),
                  ValidationError);
}

TEST_CASE("target clips shift the fundamental by the pitch ratio") {
  auto spec = default_machine_specs()[0];  // f0 = 170, ratio 1.09
  spec.duration_s = 2.0;

  const auto peak_freq = [](const std::vector<float>& samples) {
    dataset::AudioClip clip;
    clip.samples = samples;
    const auto power = features::power_spectrogram(clip, 8192, 8192);
    // Fundamental = strongest bin below 400 Hz (harmonics decay).
    const Eigen::Index max_bin = static_cast<Eigen::Index>(400.0 * 8192 / 16000);
    Eigen::Index peak = 0;
    power.row(0).head(max_bin).maxCoeff(&peak);
    return static_cast<double>(peak) * 16000.0 / 8192.0;
  };

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng_s(seed);
    Rng rng_t(seed + 100);
    const auto source = synth_normal_clip(spec, Domain::kSource, 1.0, rng_s);
    const auto target = synth_normal_clip(spec, Domain::kTarget, 1.0, rng_t);
    // Per-clip jitter is +/-1%, FFT resolution ~2 Hz.
    CHECK(peak_freq(source) ==
          doctest::Approx(spec.base_f0_hz).epsilon(0.02));
    CHECK(peak_freq(target) ==
          doctest::Approx(spec.base_f0_hz * spec.target_pitch_ratio)
              .epsilon(0.02));
  }
}

TEST_CASE("inject_anomaly approaches identity as severity vanishes") {
  auto spec = default_machine_specs()[0];
  spec.duration_s = 2.0;
  Rng rng(7);
  const auto clean = synth_normal_clip(spec, Domain::kSource, 1.0, rng);

  for (const auto kind :
       {AnomalyKind::kTransientBursts, AnomalyKind::kHarmonicDistortion,
        AnomalyKind::kBandNoise}) {
    AnomalySpec tiny;
    tiny.kind = kind;
    tiny.severity = 1e-6;
    Rng inject_rng(8);
    const auto out = inject_anomaly(clean, tiny, inject_rng);
    REQUIRE(out.size() == clean.size());
    CHECK(rms_delta(out, clean) < 1e-4);
  }
}

TEST_CASE("transient mode adds exactly the configured burst count") {
  auto spec = default_machine_specs()[0];
  spec.duration_s = 2.0;
  Rng rng(9);
  const auto clean = synth_normal_clip(spec, Domain::kSource, 1.0, rng);

  AnomalySpec bursts;
  bursts.kind = AnomalyKind::kTransientBursts;
  bursts.severity = 2.0;
  bursts.burst_count = 6;
  Rng inject_rng(10);
  const auto out = inject_anomaly(clean, bursts, inject_rng);
  REQUIRE(out.size() == clean.size());

  // Bursts are confined one-per-segment; count segments that were touched.
  const std::size_t segment = clean.size() / 6;
  int touched = 0;
  for (int s = 0; s < 6; ++s) {
    double peak = 0.0;
    for (std::size_t i = static_cast<std::size_t>(s) * segment;
         i < (static_cast<std::size_t>(s) + 1) * segment && i < clean.size(); ++i)
      peak = std::max(peak, std::abs(static_cast<double>(out[i]) - clean[i]));
    touched += peak > 1e-3;
  }
  CHECK(touched == 6);
  CHECK(rms_delta(out, clean) > 0.0);
}

TEST_CASE("distortion preserves length; injected energy tracks severity") {
  auto spec = default_machine_specs()[0];
  spec.duration_s = 2.0;
  Rng rng(11);
  const auto clean = synth_normal_clip(spec, Domain::kSource, 1.0, rng);

  AnomalySpec dist;
  dist.kind = AnomalyKind::kHarmonicDistortion;
  dist.severity = 1.0;
  Rng r1(12), r2(12);
  const auto full = inject_anomaly(clean, dist, r1);
  dist.severity = 0.5;
  const auto half = inject_anomaly(clean, dist, r2);
  REQUIRE(full.size() == clean.size());
  REQUIRE(half.size() == clean.size());

  // The added component is linear in severity.
  CHECK(rms_delta(full, clean) ==
        doctest::Approx(2.0 * rms_delta(half, clean)).epsilon(1e-6));
}

TEST_CASE("band-noise energy scales with severity") {
  auto spec = default_machine_specs()[1];  // band-noise machine
  spec.duration_s = 2.0;
  Rng rng(13);
  const auto clean = synth_normal_clip(spec, Domain::kSource, 1.0, rng);

  AnomalySpec band = spec.anomaly;
  band.severity = 1.0;
  Rng r1(14), r2(14);
  const auto full = inject_anomaly(clean, band, r1);
  band.severity = 0.25;
  const auto quarter = inject_anomaly(clean, band, r2);
  CHECK(rms_delta(full, clean) ==
        doctest::Approx(4.0 * rms_delta(quarter, clean)).epsilon(1e-6));
}

TEST_CASE("spec file rendering round-trips through the parser") {
  const auto specs = default_machine_specs();
  const auto kv = parse_kv_text(render_machine_specs(specs));
  const auto parsed = parse_machine_specs(kv);
  REQUIRE(parsed.size() == specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    CHECK(parsed[i].name == specs[i].name);
    CHECK(parsed[i].base_f0_hz == specs[i].base_f0_hz);
    CHECK(parsed[i].harmonic_amplitudes == specs[i].harmonic_amplitudes);
    CHECK(parsed[i].anomaly.kind == specs[i].anomaly.kind);
    CHECK(parsed[i].anomaly.severity == specs[i].anomaly.severity);
    CHECK(parsed[i].attributes_visible == specs[i].attributes_visible);
    CHECK(parsed[i].seed == specs[i].seed);
  }

  CHECK_THROWS_AS(parse_machine_specs(parse_kv_text("loose_key = 1\n")),
                  ParseError);
  CHECK_THROWS_AS(
      parse_machine_specs(parse_kv_text("[machine m]\nnot_a_field = 1\n")),
      ParseError);
}

TEST_CASE("domain shift is detectable under a source-only model") {
  // Train a small model on source clips only; target-domain normals must
  // score higher on average than source-domain normals.
  TempDir tmp("shift");
  auto specs = default_machine_specs();
  specs.resize(1);
  generate_corpus(specs, tmp.path(), GenProfile::kCi, 2);
  const auto catalog = dataset::scan_dataset(tmp.path());
  const auto& clips = catalog.machines.at("pumpsim").sections.at("00");

  const features::FeatureSettings settings;
  std::vector<features::MelFrameStack> source_stacks;
  for (const auto& entry : clips.train_source)
    source_stacks.push_back(
        features::extract_stack(dataset::load_wav(entry.path), settings));

  auto net = ae::init_model(ae::default_arch(), 1);
  ae::TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch = 256;
  cfg.seed = 2;
  ae::train(net, source_stacks, cfg);

  double source_mean = 0.0;
  for (const auto& stack : source_stacks)
    source_mean += scoring::score_simple(net, stack) /
                   static_cast<double>(source_stacks.size());
  double target_mean = 0.0;
  for (const auto& entry : clips.train_target)
    target_mean += scoring::score_simple(
                       net, features::extract_stack(
                                dataset::load_wav(entry.path), settings)) /
                   static_cast<double>(clips.train_target.size());
  CHECK(target_mean > source_mean);
}
