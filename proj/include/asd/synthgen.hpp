// Synthetic corpus generator: parametric machine-like signals (harmonic
// stacks over a noise floor) laid out in the task directory convention, with
// a controlled source/target shift (pitch ratio + noise delta) and injected
// anomalies. Everything derives from (machine seed, clip identity), so
// parallel and serial generation produce identical bytes.
#pragma once

#include <string>
#include <vector>

#include "asd/common.hpp"
#include "asd/dataset.hpp"
#include "asd/evaluation.hpp"

namespace asd::synthgen {

enum class AnomalyKind { kTransientBursts, kHarmonicDistortion, kBandNoise };

AnomalyKind anomaly_kind_from_string(std::string_view s);
std::string to_string(AnomalyKind kind);

struct AnomalySpec {
  AnomalyKind kind = AnomalyKind::kTransientBursts;
  double severity = 1.0;  // energy of the injected component, relative scale
  int burst_count = 8;    // transient mode
  double band_lo_hz = 3000.0;  // band-noise mode
  double band_hi_hz = 5000.0;
};

struct MachineSpec {
  std::string name;
  double base_f0_hz = 120.0;
  std::vector<double> harmonic_amplitudes = {1.0, 0.6, 0.45, 0.3, 0.22, 0.15};
  double noise_floor_db = -32.0;  // relative to the tonal RMS
  double target_pitch_ratio = 1.09;
  double target_noise_delta_db = 3.0;
  AnomalySpec anomaly;
  double duration_s = 6.0;
  bool attributes_visible = true;
  std::uint64_t seed = 1;
};

enum class GenProfile { kDev, kAdd, kEval, kCi };

GenProfile gen_profile_from_string(std::string_view s);
std::string to_string(GenProfile profile);

// Clip counts per profile. Test clips split evenly between domains.
struct GenCounts {
  std::size_t train_source = 0;
  std::size_t train_target = 0;
  std::size_t test_normal = 0;   // per section, both domains together
  std::size_t test_anomaly = 0;
  bool unlabeled_test = false;
};

GenCounts counts_for(GenProfile profile);

// The bundled two-machine development setup.
std::vector<MachineSpec> default_machine_specs();

// Spec file: one [machine <name>] section per machine, key=value fields.
std::vector<MachineSpec> parse_machine_specs(const KvFile& kv);

// Canonical text rendering; the corpus fingerprint hashes this.
std::string render_machine_specs(std::span<const MachineSpec> specs);

struct GenerateResult {
  std::size_t clips_written = 0;
  std::uint64_t fingerprint = 0;
};

// Writes WAVs, per-machine attribute CSVs (visible machines), per-machine
// ground-truth manifests (machines with test clips), and corpus_meta.kv.
// `jobs` caps the worker threads; output is identical for any job count.
GenerateResult generate_corpus(std::span<const MachineSpec> specs,
                               const fs::path& root, GenProfile profile,
                               int jobs = 2);

// Clean normal-condition samples for one clip identity.
std::vector<float> synth_normal_clip(const MachineSpec& spec, Domain domain,
                                     double speed_multiplier, Rng& rng);

// Adds the configured anomaly component; output length equals input length
// and the injected energy scales with spec.severity.
std::vector<float> inject_anomaly(const std::vector<float>& clean,
                                  const AnomalySpec& spec, Rng& rng);

}  // namespace asd::synthgen
