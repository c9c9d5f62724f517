#include "asd/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <set>
#include <sstream>

namespace asd::synthgen {

namespace {

constexpr int kSampleRate = 16000;

// Operating-speed attribute: token written to filenames/CSVs and the pitch
// multiplier it stands for.
struct SpeedAttr {
  const char* token;
  double multiplier;
};
constexpr SpeedAttr kSpeeds[] = {{"28", 0.98}, {"31", 1.00}, {"34", 1.02}};

double rms_of(const std::vector<float>& samples) {
  double sum = 0.0;
  for (const float s : samples) sum += static_cast<double>(s) * s;
  return std::sqrt(sum / std::max<std::size_t>(samples.size(), 1));
}

}  // namespace

AnomalyKind anomaly_kind_from_string(std::string_view s) {
  if (s == "transient_bursts") return AnomalyKind::kTransientBursts;
  if (s == "harmonic_distortion") return AnomalyKind::kHarmonicDistortion;
  if (s == "band_noise") return AnomalyKind::kBandNoise;
  throw ParseError("unknown anomaly kind '" + std::string(s) + "'");
}

std::string to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::kTransientBursts: return "transient_bursts";
    case AnomalyKind::kHarmonicDistortion: return "harmonic_distortion";
    case AnomalyKind::kBandNoise: return "band_noise";
  }
  return "?";
}

GenProfile gen_profile_from_string(std::string_view s) {
  if (s == "dev" || s == "development") return GenProfile::kDev;
  if (s == "add" || s == "additional_training") return GenProfile::kAdd;
  if (s == "eval" || s == "evaluation") return GenProfile::kEval;
  if (s == "ci") return GenProfile::kCi;
  throw ParseError("unknown generation profile '" + std::string(s) + "'");
}

std::string to_string(GenProfile profile) {
  switch (profile) {
    case GenProfile::kDev: return "dev";
    case GenProfile::kAdd: return "add";
    case GenProfile::kEval: return "eval";
    case GenProfile::kCi: return "ci";
  }
  return "?";
}

GenCounts counts_for(GenProfile profile) {
  switch (profile) {
    case GenProfile::kDev: return {990, 10, 100, 100, false};
    case GenProfile::kAdd: return {990, 10, 0, 0, false};
    case GenProfile::kEval: return {0, 0, 100, 100, true};
    case GenProfile::kCi: return {20, 5, 10, 10, false};
  }
  return {};
}

std::vector<MachineSpec> default_machine_specs() {
  MachineSpec pump;
  pump.name = "pumpsim";
  pump.base_f0_hz = 170.0;
  pump.harmonic_amplitudes = {1.0, 0.55, 0.4, 0.3, 0.2, 0.12, 0.08};
  pump.noise_floor_db = -32.0;
  pump.target_pitch_ratio = 1.09;
  pump.target_noise_delta_db = 3.0;
  pump.anomaly = {AnomalyKind::kTransientBursts, 1.0, 8, 3000.0, 5000.0};
  pump.attributes_visible = true;
  pump.seed = 11;

  MachineSpec fan;
  fan.name = "fansim";
  fan.base_f0_hz = 102.0;
  fan.harmonic_amplitudes = {1.0, 0.7, 0.5, 0.35, 0.25, 0.18, 0.12, 0.08};
  fan.noise_floor_db = -30.0;
  fan.target_pitch_ratio = 0.92;
  fan.target_noise_delta_db = 4.0;
  fan.anomaly = {AnomalyKind::kBandNoise, 1.0, 8, 3200.0, 5200.0};
  fan.attributes_visible = false;
  fan.seed = 23;

  return {pump, fan};
}

std::vector<MachineSpec> parse_machine_specs(const KvFile& kv) {
  // Section headers come through as "machine <name>.key" entries.
  std::vector<std::string> names;
  for (const auto& [key, value] : kv.entries) {
    const auto dot = key.find('.');
    if (dot == std::string::npos || key.rfind("machine ", 0) != 0)
      throw ParseError("spec file entries must live in [machine <name>] sections");
    const std::string name = key.substr(8, dot - 8);
    if (std::find(names.begin(), names.end(), name) == names.end())
      names.push_back(name);
  }
  if (names.empty()) throw ParseError("spec file declares no machines");

  std::vector<MachineSpec> specs;
  for (const auto& name : names) {
    const std::string prefix = "machine " + name + ".";
    MachineSpec spec;
    spec.name = name;
    for (const auto& [key, value] : kv.entries) {
      if (key.rfind(prefix, 0) != 0) continue;
      const std::string field = key.substr(prefix.size());
      try {
        if (field == "base_f0") {
          spec.base_f0_hz = std::stod(value);
        } else if (field == "harmonics") {
          spec.harmonic_amplitudes.clear();
          std::istringstream is(value);
          std::string tok;
          while (std::getline(is, tok, ','))
            spec.harmonic_amplitudes.push_back(std::stod(tok));
        } else if (field == "noise_floor_db") {
          spec.noise_floor_db = std::stod(value);
        } else if (field == "target_pitch_ratio") {
          spec.target_pitch_ratio = std::stod(value);
        } else if (field == "target_noise_delta_db") {
          spec.target_noise_delta_db = std::stod(value);
        } else if (field == "anomaly") {
          spec.anomaly.kind = anomaly_kind_from_string(value);
        } else if (field == "severity") {
          spec.anomaly.severity = std::stod(value);
        } else if (field == "burst_count") {
          spec.anomaly.burst_count = std::stoi(value);
        } else if (field == "band_lo") {
          spec.anomaly.band_lo_hz = std::stod(value);
        } else if (field == "band_hi") {
          spec.anomaly.band_hi_hz = std::stod(value);
        } else if (field == "duration_s") {
          spec.duration_s = std::stod(value);
        } else if (field == "attributes_visible") {
          spec.attributes_visible = value == "true" || value == "1";
        } else if (field == "seed") {
          spec.seed = static_cast<std::uint64_t>(std::stoull(value));
        } else {
          throw ParseError("unknown machine spec field '" + field + "'");
        }
      } catch (const ParseError&) {
        throw;
      } catch (const std::exception&) {
        throw ParseError("bad value for " + key + ": '" + value + "'");
      }
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::string render_machine_specs(std::span<const MachineSpec> specs) {
  std::ostringstream os;
  for (const auto& spec : specs) {
    os << "[machine " << spec.name << "]\n";
    os << "base_f0 = " << spec.base_f0_hz << "\n";
    os << "harmonics = ";
    for (std::size_t i = 0; i < spec.harmonic_amplitudes.size(); ++i) {
      if (i) os << ',';
      os << spec.harmonic_amplitudes[i];
    }
    os << "\n";
    os << "noise_floor_db = " << spec.noise_floor_db << "\n";
    os << "target_pitch_ratio = " << spec.target_pitch_ratio << "\n";
    os << "target_noise_delta_db = " << spec.target_noise_delta_db << "\n";
    os << "anomaly = " << to_string(spec.anomaly.kind) << "\n";
    os << "severity = " << spec.anomaly.severity << "\n";
    os << "burst_count = " << spec.anomaly.burst_count << "\n";
    os << "band_lo = " << spec.anomaly.band_lo_hz << "\n";
    os << "band_hi = " << spec.anomaly.band_hi_hz << "\n";
    os << "duration_s = " << spec.duration_s << "\n";
    os << "attributes_visible = " << (spec.attributes_visible ? "true" : "false")
       << "\n";
    os << "seed = " << spec.seed << "\n";
  }
  return os.str();
}

// --------------------------------------------------------------------------
// Signal synthesis

std::vector<float> synth_normal_clip(const MachineSpec& spec, Domain domain,
                                     double speed_multiplier, Rng& rng) {
  const std::size_t n =
      static_cast<std::size_t>(spec.duration_s * kSampleRate + 0.5);
  std::vector<double> acc(n, 0.0);

  const bool target = domain == Domain::kTarget;
  const double pitch = target ? spec.target_pitch_ratio : 1.0;
  const double jitter = 1.0 + rng.uniform(-0.01, 0.01);
  const double f0 = spec.base_f0_hz * pitch * speed_multiplier * jitter;

  double tone_power = 0.0;
  for (std::size_t h = 0; h < spec.harmonic_amplitudes.size(); ++h) {
    const double freq = f0 * static_cast<double>(h + 1);
    if (freq >= 0.499 * kSampleRate) break;
    const double amp =
        spec.harmonic_amplitudes[h] * (1.0 + rng.uniform(-0.1, 0.1));
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    tone_power += amp * amp / 2.0;

    // Complex oscillator: one rotation per sample, no per-sample trig.
    std::complex<double> osc = std::polar(1.0, phase);
    const std::complex<double> step =
        std::polar(1.0, 2.0 * std::numbers::pi * freq / kSampleRate);
    for (std::size_t i = 0; i < n; ++i) {
      acc[i] += amp * osc.imag();
      osc *= step;
    }
  }

  const double tone_rms = std::sqrt(std::max(tone_power, 1e-12));
  const double noise_db =
      spec.noise_floor_db + (target ? spec.target_noise_delta_db : 0.0);
  const double noise_std = tone_rms * std::pow(10.0, noise_db / 20.0);
  for (std::size_t i = 0; i < n; ++i) acc[i] += noise_std * rng.normal();

  // Level: RMS 0.1 with a small per-clip gain wobble, leaving headroom for
  // injected anomalies before PCM clamping.
  double rms = 0.0;
  for (const double v : acc) rms += v * v;
  rms = std::sqrt(rms / static_cast<double>(n));
  const double gain =
      0.1 / std::max(rms, 1e-9) * std::pow(10.0, rng.uniform(-1.5, 1.5) / 20.0);

  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = static_cast<float>(acc[i] * gain);
  return out;
}

std::vector<float> inject_anomaly(const std::vector<float>& clean,
                                  const AnomalySpec& spec, Rng& rng) {
  if (!(spec.severity > 0.0)) throw ValidationError("severity must be > 0");
  const std::size_t n = clean.size();
  std::vector<float> out = clean;
  const double rms = std::max(rms_of(clean), 1e-6);

  switch (spec.kind) {
    case AnomalyKind::kTransientBursts: {
      // One burst per equal segment so bursts never merge; offsets within
      // each segment are random.
      const int count = std::max(spec.burst_count, 1);
      const std::size_t burst_len =
          std::min<std::size_t>(n, kSampleRate * 60 / 1000);  // 60 ms
      const std::size_t segment = n / static_cast<std::size_t>(count);
      const double amp = 3.0 * spec.severity * rms;
      for (int b = 0; b < count; ++b) {
        const std::size_t base = static_cast<std::size_t>(b) * segment;
        const std::size_t slack = segment > burst_len ? segment - burst_len : 0;
        const std::size_t offset =
            base + (slack > 0 ? static_cast<std::size_t>(rng.below(slack)) : 0);
        for (std::size_t i = 0; i < burst_len && offset + i < n; ++i) {
          const double env =
              0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / burst_len));
          out[offset + i] += static_cast<float>(amp * env * rng.normal());
        }
      }
      break;
    }
    case AnomalyKind::kHarmonicDistortion: {
      // Quadratic + cubic waveshaping on the normalized signal; creates
      // inter-harmonic spectral lines the normal clips never contain.
      std::vector<double> added(n);
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double u = static_cast<double>(clean[i]) / rms;
        added[i] = spec.severity * rms * 0.5 * (u * u + u * u * u);
        mean += added[i];
      }
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        out[i] += static_cast<float>(added[i] - mean);
      break;
    }
    case AnomalyKind::kBandNoise: {
      // Dense random sinusoids confined to [band_lo, band_hi].
      constexpr int kTones = 60;
      const double amp = 1.5 * spec.severity * rms / std::sqrt(kTones / 2.0);
      for (int t = 0; t < kTones; ++t) {
        const double freq = rng.uniform(spec.band_lo_hz, spec.band_hi_hz);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        std::complex<double> osc = std::polar(1.0, phase);
        const std::complex<double> step =
            std::polar(1.0, 2.0 * std::numbers::pi * freq / kSampleRate);
        for (std::size_t i = 0; i < n; ++i) {
          out[i] += static_cast<float>(amp * osc.imag());
          osc *= step;
        }
      }
      break;
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// Corpus generation

namespace {

struct ClipJob {
  const MachineSpec* spec = nullptr;
  dataset::ClipMetadata meta;   // as encoded in the filename
  Domain hidden_domain = Domain::kUnknown;       // true labels
  Condition hidden_condition = Condition::kUnknown;
  fs::path path;
  std::uint64_t seed = 0;
  std::string speed_token;  // drawn attribute value ("" when not drawn yet)
};

std::uint64_t clip_seed(const MachineSpec& spec, Domain domain, Split split,
                        Condition condition, int index) {
  const std::string identity = spec.name + "|00|" + asd::to_string(domain) +
                               "|" + asd::to_string(split) + "|" +
                               asd::to_string(condition) + "|" +
                               std::to_string(index);
  return fnv1a64(identity, spec.seed * 0x9e3779b97f4a7c15ull + 0x1234abcd);
}

}  // namespace

GenerateResult generate_corpus(std::span<const MachineSpec> specs,
                               const fs::path& root, GenProfile profile,
                               int jobs) {
  if (specs.empty()) throw ValidationError("no machine specs");
  {
    std::set<std::string> names;
    for (const auto& spec : specs) {
      if (spec.name.empty()) throw ValidationError("machine spec without a name");
      if (!names.insert(spec.name).second)
        throw ValidationError("duplicate machine name '" + spec.name + "'");
      if (!(spec.anomaly.severity > 0.0))
        throw ValidationError(spec.name + ": severity must be > 0");
      if (!(spec.target_pitch_ratio > 0.0))
        throw ValidationError(spec.name + ": pitch ratio must be > 0");
    }
  }
  const GenCounts counts = counts_for(profile);
  fs::create_directories(root);

  std::vector<ClipJob> all_jobs;
  for (const auto& spec : specs) {
    const fs::path train_dir = root / spec.name / "train";
    const fs::path test_dir = root / spec.name / "test";
    if (counts.train_source + counts.train_target > 0)
      fs::create_directories(train_dir);
    if (counts.test_normal + counts.test_anomaly > 0)
      fs::create_directories(test_dir);

    auto push_labeled = [&](Domain domain, Split split, Condition condition,
                            int index) {
      ClipJob job;
      job.spec = &spec;
      job.meta.machine_type = spec.name;
      job.meta.section = "00";
      job.meta.domain = domain;
      job.meta.split = split;
      job.meta.condition = condition;
      job.meta.clip_index = index;
      job.meta.concealed = !spec.attributes_visible;
      job.hidden_domain = domain;
      job.hidden_condition = condition;
      job.seed = clip_seed(spec, domain, split, condition, index);
      all_jobs.push_back(std::move(job));
    };

    for (std::size_t i = 0; i < counts.train_source; ++i)
      push_labeled(Domain::kSource, Split::kTrain, Condition::kNormal,
                   static_cast<int>(i) + 1);
    for (std::size_t i = 0; i < counts.train_target; ++i)
      push_labeled(Domain::kTarget, Split::kTrain, Condition::kNormal,
                   static_cast<int>(i) + 1);

    if (counts.test_normal + counts.test_anomaly == 0) continue;

    // Test clips: split evenly between domains (source gets the remainder).
    std::vector<std::pair<Domain, Condition>> test_labels;
    const auto half = [](std::size_t total) {
      return std::pair<std::size_t, std::size_t>{(total + 1) / 2, total / 2};
    };
    const auto [normal_src, normal_tgt] = half(counts.test_normal);
    const auto [anomaly_src, anomaly_tgt] = half(counts.test_anomaly);
    for (std::size_t i = 0; i < normal_src; ++i)
      test_labels.emplace_back(Domain::kSource, Condition::kNormal);
    for (std::size_t i = 0; i < normal_tgt; ++i)
      test_labels.emplace_back(Domain::kTarget, Condition::kNormal);
    for (std::size_t i = 0; i < anomaly_src; ++i)
      test_labels.emplace_back(Domain::kSource, Condition::kAnomaly);
    for (std::size_t i = 0; i < anomaly_tgt; ++i)
      test_labels.emplace_back(Domain::kTarget, Condition::kAnomaly);

    if (counts.unlabeled_test) {
      // Hidden labels in shuffled index order so indices leak nothing.
      Rng order_rng(spec.seed ^ 0xfeedface12345678ull);
      shuffle(test_labels, order_rng);
      for (std::size_t i = 0; i < test_labels.size(); ++i) {
        ClipJob job;
        job.spec = &spec;
        job.meta.machine_type = spec.name;
        job.meta.section = "00";
        job.meta.split = Split::kTest;
        job.meta.clip_index = static_cast<int>(i) + 1;
        job.meta.unlabeled = true;
        job.hidden_domain = test_labels[i].first;
        job.hidden_condition = test_labels[i].second;
        job.seed = clip_seed(spec, job.hidden_domain, Split::kTest,
                             job.hidden_condition, job.meta.clip_index);
        all_jobs.push_back(std::move(job));
      }
    } else {
      // Labeled test clips, indices counted per (domain, condition) group.
      std::map<std::pair<Domain, Condition>, int> next_index;
      for (const auto& [domain, condition] : test_labels)
        push_labeled(domain, Split::kTest, condition,
                     ++next_index[{domain, condition}]);
    }
  }

  // Draw per-clip attributes and fix filenames before synthesis so CSVs and
  // manifests can be assembled without touching audio.
  for (auto& job : all_jobs) {
    Rng rng(job.seed);
    const auto& speed = kSpeeds[rng.below(std::size(kSpeeds))];
    job.speed_token = speed.token;
    if (!job.meta.unlabeled && !job.meta.concealed)
      job.meta.attributes = {{"vel", speed.token}};
    const std::string filename = dataset::render_clip_filename(job.meta);
    const char* split_dir = job.meta.split == Split::kTrain ? "train" : "test";
    job.path = root / job.spec->name / split_dir / filename;
  }

  parallel_for(all_jobs.size(), jobs, [&](std::size_t i) {
    const ClipJob& job = all_jobs[i];
    Rng rng(job.seed);
    const auto& speed = kSpeeds[rng.below(std::size(kSpeeds))];  // same draw
    std::vector<float> samples = synth_normal_clip(
        *job.spec, job.hidden_domain, speed.multiplier, rng);
    if (job.hidden_condition == Condition::kAnomaly)
      samples = inject_anomaly(samples, job.spec->anomaly, rng);
    dataset::write_wav(job.path, samples, kSampleRate);
  });

  // Ground-truth manifests (one per machine with test clips).
  for (const auto& spec : specs) {
    std::vector<evaluation::GroundTruthRecord> records;
    for (const auto& job : all_jobs) {
      if (job.spec != &spec || job.meta.split != Split::kTest) continue;
      records.push_back({job.path.filename().string(), job.hidden_domain,
                         job.hidden_condition});
    }
    if (records.empty()) continue;
    std::sort(records.begin(), records.end(),
              [](const auto& a, const auto& b) { return a.filename < b.filename; });
    write_ground_truth_csv(root / ("ground_truth_" + spec.name + "_section_00.csv"),
                           records);
  }

  // Attribute CSVs for machines with visible attributes.
  for (const auto& spec : specs) {
    if (!spec.attributes_visible) continue;
    std::vector<std::pair<std::string, std::string>> rows;
    for (const auto& job : all_jobs)
      if (job.spec == &spec && !job.meta.unlabeled)
        rows.emplace_back(job.path.filename().string(), job.speed_token);
    if (rows.empty()) continue;
    std::sort(rows.begin(), rows.end());
    std::ostringstream os;
    os << "file_name,attr_key_1,attr_value_1\n";
    for (const auto& [name, vel] : rows) os << name << ",vel," << vel << '\n';
    write_text_file(root / spec.name / "attributes_00.csv", os.str());
  }

  GenerateResult result;
  result.clips_written = all_jobs.size();
  result.fingerprint =
      fnv1a64(render_machine_specs(specs) + "|profile=" + to_string(profile));

  KvFile meta;
  meta.set("fingerprint", to_hex(result.fingerprint));
  meta.set("profile", to_string(profile));
  {
    std::ostringstream names;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (i) names << ',';
      names << specs[i].name;
    }
    meta.set("machines", names.str());
  }
  meta.set("clips", std::to_string(result.clips_written));
  save_kv_file(root / "corpus_meta.kv", meta);
  return result;
}

}  // namespace asd::synthgen
