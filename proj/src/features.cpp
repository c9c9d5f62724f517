#include "asd/features.hpp"

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <sstream>

namespace asd::features {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, decimation in time.
class Fft {
 public:
  explicit Fft(int n) : n_(n) {
    twiddle_.resize(static_cast<std::size_t>(n / 2));
    for (int k = 0; k < n / 2; ++k) {
      const double angle = -2.0 * std::numbers::pi * k / n;
      twiddle_[static_cast<std::size_t>(k)] = {std::cos(angle), std::sin(angle)};
    }
    bitrev_.resize(static_cast<std::size_t>(n));
    int bits = 0;
    while ((1 << bits) < n) ++bits;
    for (int i = 0; i < n; ++i) {
      int r = 0;
      for (int b = 0; b < bits; ++b)
        if (i & (1 << b)) r |= 1 << (bits - 1 - b);
      bitrev_[static_cast<std::size_t>(i)] = r;
    }
  }

  void transform(std::vector<std::complex<double>>& a) const {
    for (int i = 0; i < n_; ++i) {
      const int j = bitrev_[static_cast<std::size_t>(i)];
      if (i < j) std::swap(a[static_cast<std::size_t>(i)],
                           a[static_cast<std::size_t>(j)]);
    }
    for (int len = 2; len <= n_; len <<= 1) {
      const int half = len / 2;
      const int step = n_ / len;
      for (int start = 0; start < n_; start += len) {
        for (int k = 0; k < half; ++k) {
          const auto w = twiddle_[static_cast<std::size_t>(k * step)];
          auto& lo = a[static_cast<std::size_t>(start + k)];
          auto& hi = a[static_cast<std::size_t>(start + k + half)];
          const auto t = w * hi;
          hi = lo - t;
          lo = lo + t;
        }
      }
    }
  }

 private:
  int n_;
  std::vector<std::complex<double>> twiddle_;
  std::vector<int> bitrev_;
};

}  // namespace

std::uint64_t FeatureSettings::fingerprint() const {
  std::ostringstream os;
  os << "sr=" << sample_rate << ";frame=" << frame_len << ";hop=" << hop
     << ";mels=" << n_mels << ";fmin=" << fmin_hz << ";fmax=" << fmax_hz
     << ";ctx=" << context << ";eps=" << log_eps;
  return fnv1a64(os.str());
}

MatrixRMd power_spectrogram(const dataset::AudioClip& clip, int frame_len,
                            int hop) {
  if (!is_pow2(frame_len))
    throw ValidationError("frame length must be a power of two");
  if (hop < 1) throw ValidationError("hop must be positive");
  const std::size_t len = clip.length();
  if (len < static_cast<std::size_t>(frame_len))
    throw ValidationError("clip shorter than one frame (" +
                          std::to_string(len) + " < " +
                          std::to_string(frame_len) + " samples)");

  const Eigen::Index frames =
      static_cast<Eigen::Index>((len - static_cast<std::size_t>(frame_len)) /
                                static_cast<std::size_t>(hop)) +
      1;
  const Eigen::Index bins = frame_len / 2 + 1;

  // Periodic Hann: bin-centered sinusoids leak only into adjacent bins.
  std::vector<double> window(static_cast<std::size_t>(frame_len));
  for (int n = 0; n < frame_len; ++n)
    window[static_cast<std::size_t>(n)] =
        0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / frame_len));

  const Fft fft(frame_len);
  MatrixRMd out(frames, bins);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(frame_len));
  for (Eigen::Index t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) *
                              static_cast<std::size_t>(hop);
    for (int n = 0; n < frame_len; ++n)
      buf[static_cast<std::size_t>(n)] = {
          static_cast<double>(clip.samples[start + static_cast<std::size_t>(n)]) *
              window[static_cast<std::size_t>(n)],
          0.0};
    fft.transform(buf);
    for (Eigen::Index f = 0; f < bins; ++f)
      out(t, f) = std::norm(buf[static_cast<std::size_t>(f)]);
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MatrixRMd mel_filterbank(int n_mels, int n_fft, int sample_rate, double fmin_hz,
                         double fmax_hz) {
  if (n_mels < 1) throw ValidationError("mel filter count must be >= 1");
  if (fmin_hz < 0.0 || fmax_hz <= fmin_hz)
    throw ValidationError("need 0 <= fmin < fmax");
  if (fmax_hz > sample_rate / 2.0)
    throw ValidationError("fmax above Nyquist");

  const int bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(fmin_hz);
  const double mel_hi = hz_to_mel(fmax_hz);

  std::vector<double> hz_pts(static_cast<std::size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    hz_pts[static_cast<std::size_t>(i)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

  MatrixRMd fb = MatrixRMd::Zero(n_mels, bins);
  for (int m = 0; m < n_mels; ++m) {
    const double left = hz_pts[static_cast<std::size_t>(m)];
    const double center = hz_pts[static_cast<std::size_t>(m) + 1];
    const double right = hz_pts[static_cast<std::size_t>(m) + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      double w = 0.0;
      if (f > left && f < right)
        w = f <= center ? (f - left) / (center - left)
                        : (right - f) / (right - center);
      fb(m, k) = w;
    }
  }
  return fb;
}

std::vector<double> mel_filter_centers(int n_mels, double fmin_hz,
                                       double fmax_hz) {
  if (n_mels < 1) throw ValidationError("mel filter count must be >= 1");
  const double mel_lo = hz_to_mel(fmin_hz);
  const double mel_hi = hz_to_mel(fmax_hz);
  std::vector<double> centers(static_cast<std::size_t>(n_mels));
  for (int m = 0; m < n_mels; ++m)
    centers[static_cast<std::size_t>(m)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m + 1) / (n_mels + 1));
  return centers;
}

MelSpectrogram log_mel(const dataset::AudioClip& clip,
                       const FeatureSettings& s) {
  const MatrixRMd power = power_spectrogram(clip, s.frame_len, s.hop);
  const MatrixRMd fb =
      mel_filterbank(s.n_mels, s.frame_len, s.sample_rate, s.fmin_hz, s.fmax_hz);
  MatrixRMd mel = power * fb.transpose();  // T x n_mels

  MelSpectrogram out;
  out.frame_len = s.frame_len;
  out.hop = s.hop;
  out.values = (10.0 * (mel.array() + s.log_eps).log10()).cast<float>();
  return out;
}

MelFrameStack stack_frames(const MelSpectrogram& spec, int context) {
  if (context < 1) throw ValidationError("context must be >= 1");
  const Eigen::Index frames = spec.frames();
  const Eigen::Index bins = spec.bins();
  if (frames < context)
    throw ValidationError("clip too short for context window (" +
                          std::to_string(frames) + " frames < " +
                          std::to_string(context) + ")");
  const Eigen::Index count = frames - context + 1;

  MelFrameStack out;
  out.context = context;
  out.rows.resize(count, static_cast<Eigen::Index>(context) * bins);
  for (Eigen::Index k = 0; k < count; ++k)
    for (int p = 0; p < context; ++p)
      out.rows.block(k, static_cast<Eigen::Index>(p) * bins, 1, bins) =
          spec.values.row(k + p);
  return out;
}

MelFrameStack extract_stack(const dataset::AudioClip& clip,
                            const FeatureSettings& settings) {
  return stack_frames(log_mel(clip, settings), settings.context);
}

// --------------------------------------------------------------------------
// Cache file

namespace {

constexpr char kCacheMagic[4] = {'A', 'S', 'D', 'F'};
constexpr std::uint32_t kCacheVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw IoError(std::string("feature cache: truncated ") + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_feature_cache(const fs::path& path, const MelFrameStack& stack) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kCacheMagic, 4);
  put_u32(out, kCacheVersion);
  put_u32(out, static_cast<std::uint32_t>(stack.count()));
  put_u32(out, static_cast<std::uint32_t>(stack.dim()));
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(stack.rows.data()),
            static_cast<std::streamsize>(sizeof(float)) * stack.rows.size());
  if (!out) throw IoError("write failed for " + path.string());
}

MelFrameStack read_feature_cache(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCacheMagic, 4) != 0)
    throw ValidationError(path.string() + ": not a feature cache file");
  const std::uint32_t version = get_u32(in, "version");
  if (version != kCacheVersion)
    throw ValidationError(path.string() + ": unsupported cache version " +
                          std::to_string(version));
  const std::uint32_t count = get_u32(in, "row count");
  const std::uint32_t dim = get_u32(in, "dim");

  MelFrameStack stack;
  stack.rows.resize(count, dim);
  if (!in.read(reinterpret_cast<char*>(stack.rows.data()),
               static_cast<std::streamsize>(sizeof(float)) * stack.rows.size()))
    throw IoError(path.string() + ": truncated feature rows");
  return stack;
}

}  // namespace asd::features
