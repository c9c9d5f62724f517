#include "asd/autoencoder.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace asd::ae {

Arch default_arch() {
  Arch arch;
  arch.dims = {640, 128, 128, 128, 128, 8, 128, 128, 128, 128, 640};
  arch.acts.assign(arch.dims.size() - 1, Activation::kRelu);
  arch.acts.back() = Activation::kLinear;
  return arch;
}

Arch parse_arch(const std::string& descriptor) {
  Arch arch;
  std::istringstream is(descriptor);
  std::string tok;
  while (std::getline(is, tok, '-')) {
    try {
      std::size_t pos = 0;
      const int dim = std::stoi(tok, &pos);
      if (pos != tok.size() || dim < 1) throw std::invalid_argument(tok);
      arch.dims.push_back(dim);
    } catch (const std::exception&) {
      throw ParseError("bad architecture descriptor token '" + tok + "'");
    }
  }
  if (arch.dims.size() < 2)
    throw ParseError("architecture descriptor needs >= 2 dims");
  arch.acts.assign(arch.dims.size() - 1, Activation::kRelu);
  arch.acts.back() = Activation::kLinear;
  return arch;
}

std::string arch_to_string(const Arch& arch) {
  std::ostringstream os;
  for (std::size_t i = 0; i < arch.dims.size(); ++i) {
    if (i) os << '-';
    os << arch.dims[i];
  }
  return os.str();
}

NetF init_model(const Arch& arch, std::uint64_t seed) {
  return init_net<float>(arch, seed);
}

TrainReport train(NetF& net, std::span<const features::MelFrameStack> stacks,
                  const TrainConfig& cfg) {
  Eigen::Index total = 0;
  for (const auto& stack : stacks) total += stack.count();
  if (total == 0) throw ValidationError("no training rows");
  MatrixRM<float> rows(total, net.input_dim());
  Eigen::Index at = 0;
  for (const auto& stack : stacks) {
    if (stack.dim() != net.input_dim())
      throw ValidationError("stack dim " + std::to_string(stack.dim()) +
                            " != net input " + std::to_string(net.input_dim()));
    rows.middleRows(at, stack.count()) = stack.rows;
    at += stack.count();
  }
  return train_on_rows(net, rows, cfg);
}

// --------------------------------------------------------------------------
// Model file

namespace {

constexpr char kModelMagic[4] = {'A', 'S', 'D', 'M'};
constexpr std::uint32_t kModelVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v & 0xffffffffull));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw IoError(std::string("model file: truncated ") + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is, const char* what) {
  const std::uint64_t lo = get_u32(is, what);
  const std::uint64_t hi = get_u32(is, what);
  return lo | (hi << 32);
}

}  // namespace

void save_model(const fs::path& path, const NetF& net) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kModelMagic, 4);
  put_u32(out, kModelVersion);
  put_u64(out, net.feature_fingerprint);
  put_u32(out, static_cast<std::uint32_t>(net.layers.size()));
  std::vector<float> row;
  for (const auto& layer : net.layers) {
    const auto rows = static_cast<std::uint32_t>(layer.weights.rows());
    const auto cols = static_cast<std::uint32_t>(layer.weights.cols());
    put_u32(out, cols);  // in
    put_u32(out, rows);  // out
    put_u32(out, layer.act == Activation::kRelu ? 0u : 1u);
    row.resize(cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) row[c] = layer.weights(r, c);
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(sizeof(float)) * cols);
    }
    out.write(reinterpret_cast<const char*>(layer.bias.data()),
              static_cast<std::streamsize>(sizeof(float)) * rows);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

NetF load_model(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kModelMagic, 4) != 0)
    throw ValidationError(path.string() + ": not a model file");
  const std::uint32_t version = get_u32(in, "version");
  if (version != kModelVersion)
    throw ValidationError(path.string() + ": unsupported model version " +
                          std::to_string(version));
  NetF net;
  net.feature_fingerprint = get_u64(in, "feature fingerprint");
  const std::uint32_t n_layers = get_u32(in, "layer count");
  net.layers.resize(n_layers);
  std::vector<float> row;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const std::uint32_t in_dim = get_u32(in, "layer input dim");
    const std::uint32_t out_dim = get_u32(in, "layer output dim");
    const std::uint32_t act = get_u32(in, "activation tag");
    if (act > 1)
      throw ValidationError(path.string() + ": unknown activation tag " +
                            std::to_string(act));
    auto& layer = net.layers[l];
    layer.act = act == 0 ? Activation::kRelu : Activation::kLinear;
    layer.weights.resize(out_dim, in_dim);
    row.resize(in_dim);
    for (std::uint32_t r = 0; r < out_dim; ++r) {
      if (!in.read(reinterpret_cast<char*>(row.data()),
                   static_cast<std::streamsize>(sizeof(float)) * in_dim))
        throw IoError(path.string() + ": truncated weights");
      for (std::uint32_t c = 0; c < in_dim; ++c) layer.weights(r, c) = row[c];
    }
    layer.bias.resize(out_dim);
    if (!in.read(reinterpret_cast<char*>(layer.bias.data()),
                 static_cast<std::streamsize>(sizeof(float)) * out_dim))
      throw IoError(path.string() + ": truncated biases");
  }
  // Consecutive layer dims must chain.
  for (std::size_t l = 1; l < net.layers.size(); ++l)
    if (net.layers[l].weights.cols() != net.layers[l - 1].weights.rows())
      throw ValidationError(path.string() + ": layer dims do not chain");
  return net;
}

}  // namespace asd::ae
