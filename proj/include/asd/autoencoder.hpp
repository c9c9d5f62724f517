// Dense reconstruction autoencoder: fully-connected layers with ReLU hidden
// activations and a linear output, trained with Adam on mean squared error.
//
// The net is templated on the scalar type. Production code uses float
// (matching the ASDM model file format); the finite-difference gradient
// tests instantiate double, where central differences are meaningful.
//
// Reproducibility: initialization, shuffling, and optimization draw from the
// project Rng only, and every reduction runs in a fixed order, so a given
// (data, config, seed) triple yields a bit-identical model.
#pragma once

#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "asd/common.hpp"
#include "asd/features.hpp"

namespace asd::ae {

enum class Activation { kRelu, kLinear };

struct Arch {
  std::vector<int> dims;              // layer widths, first == last
  std::vector<Activation> acts;       // one per weight layer
};

// 640-128-128-128-128-8-128-128-128-128-640, ReLU hidden, linear output.
Arch default_arch();

// "640-128-8-128-640" -> Arch with ReLU hidden layers, linear output.
Arch parse_arch(const std::string& descriptor);
std::string arch_to_string(const Arch& arch);

template <class S>
using MatrixRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using MatrixCM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
struct Net {
  struct Layer {
    MatrixCM<S> weights;  // out x in
    Vector<S> bias;       // out
    Activation act = Activation::kRelu;
  };
  std::vector<Layer> layers;
  std::uint64_t feature_fingerprint = 0;

  int input_dim() const {
    return layers.empty() ? 0 : static_cast<int>(layers.front().weights.cols());
  }
  int output_dim() const {
    return layers.empty() ? 0 : static_cast<int>(layers.back().weights.rows());
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers)
      n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
  }
};

using NetF = Net<float>;
using NetD = Net<double>;

// Gradient of the batch MSE with respect to every parameter; mirrors the
// layer structure of the net it came from.
template <class S>
struct Gradients {
  struct Layer {
    MatrixCM<S> weights;
    Vector<S> bias;
  };
  std::vector<Layer> layers;
};

struct TrainConfig {
  int epochs = 100;
  int batch = 256;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean training loss per epoch
  double final_loss = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Initialization: Glorot-uniform weights, zero biases, deterministic per seed.

template <class S>
Net<S> init_net(const Arch& arch, std::uint64_t seed) {
  if (arch.dims.size() < 2) throw ValidationError("descriptor needs >= 2 dims");
  if (arch.acts.size() != arch.dims.size() - 1)
    throw ValidationError("descriptor has " + std::to_string(arch.dims.size() - 1) +
                          " layers but " + std::to_string(arch.acts.size()) +
                          " activation tags");
  for (const int d : arch.dims)
    if (d < 1) throw ValidationError("layer dims must be positive");
  if (arch.dims.front() != arch.dims.back())
    throw ValidationError("output dim " + std::to_string(arch.dims.back()) +
                          " != " + std::to_string(arch.dims.front()));

  Rng rng(seed);
  Net<S> net;
  net.layers.resize(arch.dims.size() - 1);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const int fan_in = arch.dims[l];
    const int fan_out = arch.dims[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    auto& layer = net.layers[l];
    layer.weights.resize(fan_out, fan_in);
    for (int c = 0; c < fan_in; ++c)
      for (int r = 0; r < fan_out; ++r)
        layer.weights(r, c) = static_cast<S>(rng.uniform(-bound, bound));
    layer.bias = Vector<S>::Zero(fan_out);
    layer.act = arch.acts[l];
  }
  return net;
}

NetF init_model(const Arch& arch, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Forward. The single-vector path is the definition; the batch overload runs
// it per row, so row i of a batch result is bit-identical to the
// single-vector result regardless of batch size.

template <class S>
Vector<S> forward_one(const Net<S>& net, const Vector<S>& input) {
  if (input.size() != net.input_dim())
    throw ValidationError("forward: input dim " + std::to_string(input.size()) +
                          " != " + std::to_string(net.input_dim()));
  Vector<S> a = input;
  Vector<S> z;
  for (const auto& layer : net.layers) {
    z.noalias() = layer.weights * a;
    z += layer.bias;
    if (layer.act == Activation::kRelu) z = z.cwiseMax(S(0));
    a.swap(z);
  }
  return a;
}

template <class S>
MatrixRM<S> forward(const Net<S>& net, const MatrixRM<S>& batch) {
  if (batch.cols() != net.input_dim())
    throw ValidationError("forward: input dim " + std::to_string(batch.cols()) +
                          " != " + std::to_string(net.input_dim()));
  MatrixRM<S> out(batch.rows(), batch.cols());
  Vector<S> x(batch.cols());
  for (Eigen::Index i = 0; i < batch.rows(); ++i) {
    x = batch.row(i).transpose();
    out.row(i) = forward_one(net, x).transpose();
  }
  return out;
}

// Throughput reconstruction path (batched matrix products). Numerically
// equivalent to forward() but not bit-identical; used by training/scoring.
template <class S>
MatrixRM<S> reconstruct(const Net<S>& net, const MatrixRM<S>& rows) {
  if (rows.cols() != net.input_dim())
    throw ValidationError("reconstruct: input dim " + std::to_string(rows.cols()) +
                          " != " + std::to_string(net.input_dim()));
  MatrixCM<S> a = rows.transpose();  // in x B
  MatrixCM<S> z;
  for (const auto& layer : net.layers) {
    z.noalias() = layer.weights * a;
    z.colwise() += layer.bias;
    if (layer.act == Activation::kRelu) z = z.cwiseMax(S(0));
    a.swap(z);
  }
  return MatrixRM<S>(a.transpose());
}

// ---------------------------------------------------------------------------
// Loss and gradients. Loss sums run in double in a fixed order whatever the
// net scalar is.

template <class S>
double mse_loss(const MatrixRM<S>& inputs, const MatrixRM<S>& reconstructions) {
  if (inputs.rows() != reconstructions.rows() ||
      inputs.cols() != reconstructions.cols())
    throw ValidationError("mse_loss: shape mismatch");
  if (inputs.size() == 0) throw ValidationError("mse_loss: empty batch");
  double sum = 0.0;
  const S* a = inputs.data();
  const S* b = reconstructions.data();
  const std::size_t n = static_cast<std::size_t>(inputs.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(n);
}

namespace detail {

// One forward/backward pass over a column-major in x B batch.
// Returns the batch MSE; writes parameter gradients into grads.
template <class S>
double backward_batch(const Net<S>& net, const MatrixCM<S>& batch,
                      Gradients<S>& grads) {
  const std::size_t n_layers = net.layers.size();

  std::vector<MatrixCM<S>> acts(n_layers + 1);
  acts[0] = batch;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = net.layers[l];
    acts[l + 1].noalias() = layer.weights * acts[l];
    acts[l + 1].colwise() += layer.bias;
    if (layer.act == Activation::kRelu)
      acts[l + 1] = acts[l + 1].cwiseMax(S(0));
  }

  const double denom =
      static_cast<double>(batch.size());  // B * D elements in the mean
  double loss_sum = 0.0;
  {
    const S* a = acts[n_layers].data();
    const S* b = batch.data();
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
      const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
      loss_sum += d * d;
    }
  }

  if (grads.layers.size() != n_layers) {
    grads.layers.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
      grads.layers[l].weights.resizeLike(net.layers[l].weights);
      grads.layers[l].bias.resizeLike(net.layers[l].bias);
    }
  }

  // delta holds dLoss/dz for the current layer, walking backwards.
  MatrixCM<S> delta = (acts[n_layers] - batch) * S(2.0 / denom);
  if (net.layers.back().act == Activation::kRelu)
    delta = delta.cwiseProduct(
        (acts[n_layers].array() > S(0)).template cast<S>().matrix());
  for (std::size_t l = n_layers; l-- > 0;) {
    grads.layers[l].weights.noalias() = delta * acts[l].transpose();
    grads.layers[l].bias.noalias() = delta.rowwise().sum();
    if (l > 0) {
      MatrixCM<S> prev;
      prev.noalias() = net.layers[l].weights.transpose() * delta;
      if (net.layers[l - 1].act == Activation::kRelu)
        prev = prev.cwiseProduct(
            (acts[l].array() > S(0)).template cast<S>().matrix());
      delta.swap(prev);
    }
  }
  return loss_sum / denom;
}

}  // namespace detail

// Gradient of the batch mean MSE with respect to every parameter.
// Rows of `batch` are samples.
template <class S>
Gradients<S> backward(const Net<S>& net, const MatrixRM<S>& batch) {
  if (batch.cols() != net.input_dim())
    throw ValidationError("backward: input dim " + std::to_string(batch.cols()) +
                          " != " + std::to_string(net.input_dim()));
  if (batch.rows() == 0) throw ValidationError("backward: empty batch");
  Gradients<S> grads;
  const MatrixCM<S> cols = batch.transpose();
  detail::backward_batch(net, cols, grads);
  return grads;
}

// ---------------------------------------------------------------------------
// Training

template <class S>
struct AdamState {
  struct Slot {
    MatrixCM<S> m_w, v_w;
    Vector<S> m_b, v_b;
  };
  std::vector<Slot> slots;
  long step = 0;

  explicit AdamState(const Net<S>& net) {
    slots.resize(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      slots[l].m_w = MatrixCM<S>::Zero(net.layers[l].weights.rows(),
                                       net.layers[l].weights.cols());
      slots[l].v_w = slots[l].m_w;
      slots[l].m_b = Vector<S>::Zero(net.layers[l].bias.size());
      slots[l].v_b = slots[l].m_b;
    }
  }

  void update(Net<S>& net, const Gradients<S>& grads, const TrainConfig& cfg) {
    ++step;
    const S b1 = static_cast<S>(cfg.beta1);
    const S b2 = static_cast<S>(cfg.beta2);
    const S corr1 =
        static_cast<S>(1.0 / (1.0 - std::pow(cfg.beta1, static_cast<double>(step))));
    const S corr2 =
        static_cast<S>(1.0 / (1.0 - std::pow(cfg.beta2, static_cast<double>(step))));
    const S lr = static_cast<S>(cfg.learning_rate);
    const S eps = static_cast<S>(cfg.adam_eps);
    for (std::size_t l = 0; l < slots.size(); ++l) {
      auto& s = slots[l];
      const auto& g = grads.layers[l];
      s.m_w = b1 * s.m_w + (S(1) - b1) * g.weights;
      s.v_w.array() = b2 * s.v_w.array() + (S(1) - b2) * g.weights.array().square();
      net.layers[l].weights.array() -=
          lr * (s.m_w.array() * corr1) / ((s.v_w.array() * corr2).sqrt() + eps);
      s.m_b = b1 * s.m_b + (S(1) - b1) * g.bias;
      s.v_b.array() = b2 * s.v_b.array() + (S(1) - b2) * g.bias.array().square();
      net.layers[l].bias.array() -=
          lr * (s.m_b.array() * corr1) / ((s.v_b.array() * corr2).sqrt() + eps);
    }
  }
};

// Trains in place on pooled feature rows (samples as rows). Throws
// NumericError naming epoch/batch if the loss goes non-finite.
template <class S>
TrainReport train_on_rows(Net<S>& net, const MatrixRM<S>& rows,
                          const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (cfg.batch < 1) throw ValidationError("batch size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
  if (rows.rows() == 0) throw ValidationError("no training rows");
  if (rows.cols() != net.input_dim())
    throw ValidationError("training rows have dim " + std::to_string(rows.cols()) +
                          ", net expects " + std::to_string(net.input_dim()));

  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::Index n = rows.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  Rng rng(cfg.seed);
  AdamState<S> adam(net);
  Gradients<S> grads;
  MatrixCM<S> batch;
  TrainReport report;
  report.seed = cfg.seed;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) shuffle(order, rng);
    double epoch_sum = 0.0;
    for (Eigen::Index start = 0, batch_idx = 0; start < n;
         start += cfg.batch, ++batch_idx) {
      const Eigen::Index b = std::min<Eigen::Index>(cfg.batch, n - start);
      batch.resize(rows.cols(), b);
      for (Eigen::Index j = 0; j < b; ++j)
        batch.col(j) =
            rows.row(order[static_cast<std::size_t>(start + j)]).transpose();
      const double loss = detail::backward_batch(net, batch, grads);
      if (!std::isfinite(loss))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_idx));
      adam.update(net, grads, cfg);
      epoch_sum += loss * static_cast<double>(b);
    }
    report.epoch_loss.push_back(epoch_sum / static_cast<double>(n));
  }
  report.final_loss = report.epoch_loss.back();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

// Spec-shaped convenience: pools the given stacks (domain-blind) and trains.
TrainReport train(NetF& net, std::span<const features::MelFrameStack> stacks,
                  const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Model file: magic "ASDM", u32 version, u64 feature fingerprint,
// u32 layer count; per layer u32 in, u32 out, u32 activation tag, then
// row-major float32 LE weights and float32 LE biases.

void save_model(const fs::path& path, const NetF& net);
NetF load_model(const fs::path& path);

}  // namespace asd::ae
