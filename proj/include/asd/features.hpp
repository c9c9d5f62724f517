// Log-mel front end: STFT power spectrogram, triangular mel filterbank,
// dB-scale log compression, and context-window stacking.
//
// Conventions (fixed, documented here because the task leaves them open):
//   * analysis window: periodic Hann, w[n] = 0.5*(1 - cos(2*pi*n/N))
//   * mel scale: HTK, mel(f) = 2595*log10(1 + f/700); triangular filters
//     with unit peaks, ramps linear in Hz, centers equally spaced in mel
//   * log compression: X = 10*log10(power + 1e-12), i.e. decibels with a
//     -120 dB floor
//   * trailing partial frames are dropped (no padding)
//   * no per-clip normalization
#pragma once

#include <Eigen/Core>

#include "asd/common.hpp"
#include "asd/dataset.hpp"

namespace asd::features {

using MatrixRMf =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixRMd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureSettings {
  int sample_rate = 16000;
  int frame_len = 1024;  // 64 ms at 16 kHz
  int hop = 512;         // 50% overlap
  int n_mels = 128;
  double fmin_hz = 0.0;
  double fmax_hz = 8000.0;
  int context = 5;  // frames per stacked vector
  double log_eps = 1e-12;

  int stacked_dim() const { return context * n_mels; }

  // Stable hash of every setting; embedded in model files so scoring can
  // refuse features produced under a different configuration.
  std::uint64_t fingerprint() const;
};

// T x n_mels log-mel energies for one clip.
struct MelSpectrogram {
  MatrixRMf values;
  int frame_len = 0;
  int hop = 0;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index bins() const { return values.cols(); }
};

// K x D stacked context windows; row k is [X_k || ... || X_{k+P-1}].
struct MelFrameStack {
  MatrixRMf rows;
  int context = 0;

  Eigen::Index count() const { return rows.rows(); }
  Eigen::Index dim() const { return rows.cols(); }
};

// |windowed DFT|^2 per frame, bins 0..frame_len/2 (no scaling, no bin
// doubling). frame_len must be a power of two; clips shorter than one frame
// are an error. T = floor((L - frame_len)/hop) + 1.
MatrixRMd power_spectrogram(const dataset::AudioClip& clip, int frame_len,
                            int hop);

// F x (n_fft/2 + 1) triangular filterbank on FFT bin centers.
MatrixRMd mel_filterbank(int n_mels, int n_fft, int sample_rate, double fmin_hz,
                         double fmax_hz);

// Filter center frequencies in Hz (equally spaced on the mel axis).
std::vector<double> mel_filter_centers(int n_mels, double fmin_hz,
                                       double fmax_hz);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

MelSpectrogram log_mel(const dataset::AudioClip& clip,
                       const FeatureSettings& settings);

MelFrameStack stack_frames(const MelSpectrogram& spec, int context);

// Convenience: full front end for one clip.
MelFrameStack extract_stack(const dataset::AudioClip& clip,
                            const FeatureSettings& settings);

// Feature cache: 16-byte header (magic "ASDF", u32 version, u32 K, u32 D)
// followed by row-major float32 little-endian rows.
void write_feature_cache(const fs::path& path, const MelFrameStack& stack);
MelFrameStack read_feature_cache(const fs::path& path);

}  // namespace asd::features
