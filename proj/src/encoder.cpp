#include "tdh/encoder.hpp"

#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "tdh/error.hpp"

namespace tdh {

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }
std::string_view to_string(Modality m) { return m == Modality::text ? "text" : "image"; }

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw InvalidArgument("unknown activation '" + std::string(s) + "' (expected relu|tanh)");
}

Modality parse_modality(std::string_view s) {
  if (s == "text") return Modality::text;
  if (s == "image") return Modality::image;
  throw InvalidArgument("unknown modality '" + std::string(s) + "' (expected text|image)");
}

std::vector<std::size_t> EncoderConfig::layer_dims() const {
  std::vector<std::size_t> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(code_length);
  return dims;
}

void EncoderConfig::validate() const {
  if (input_dim == 0) throw InvalidArgument("encoder: input_dim must be >= 1");
  if (code_length == 0) throw InvalidArgument("encoder: code_length must be >= 1");
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw InvalidArgument("encoder: hidden layer width must be >= 1");
  }
}

std::size_t EncoderParams::input_dim() const {
  return layers.empty() ? 0 : layers.front().weight.cols();
}

std::size_t EncoderParams::code_length() const {
  return layers.empty() ? 0 : layers.back().weight.rows();
}

std::vector<std::size_t> EncoderParams::layer_dims() const {
  std::vector<std::size_t> dims;
  if (layers.empty()) return dims;
  dims.push_back(input_dim());
  for (const auto& l : layers) dims.push_back(l.weight.rows());
  return dims;
}

EncoderParams EncoderParams::zeros_like() const {
  EncoderParams z;
  z.activation = activation;
  for (const auto& l : layers) {
    z.layers.push_back({Matrix(l.weight.rows(), l.weight.cols()),
                        std::vector<double>(l.bias.size(), 0.0)});
  }
  return z;
}

EncoderParams init_encoder(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  const auto dims = config.layer_dims();
  EncoderParams p;
  p.activation = config.activation;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double stddev = kInitGain * std::sqrt(2.0 / static_cast<double>(dims[l]));
    p.layers.push_back({seeded_normal(dims[l + 1], dims[l], seed + l, stddev),
                        std::vector<double>(dims[l + 1], 0.0)});
  }
  return p;
}

namespace {

double activate(Activation a, double x) {
  return a == Activation::relu ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

// Derivative expressed through the pre-activation.
double activate_grad(Activation a, double pre) {
  if (a == Activation::relu) return pre > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(pre);
  return 1.0 - t * t;
}

Matrix affine(const DenseLayer& layer, const Matrix& input) {
  Matrix out = matmul(layer.weight, input);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const double b = layer.bias[r];
    for (double& v : out.row(r)) v += b;
  }
  return out;
}

void check_batch(const EncoderParams& params, const Matrix& batch) {
  if (params.layers.empty()) throw InvalidArgument("encoder has no layers");
  if (batch.cols() == 0) throw ShapeError("encoder: empty batch");
  if (batch.rows() != params.input_dim()) {
    throw ShapeError("encoder: batch " + shape_of(batch) + " does not match input_dim " +
                     std::to_string(params.input_dim()));
  }
}

}  // namespace

ForwardResult forward(const EncoderParams& params, const Matrix& batch) {
  check_batch(params, batch);
  ForwardResult result;
  Matrix current = batch;
  const std::size_t n_layers = params.layers.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    Matrix pre = affine(params.layers[l], current);
    result.tape.layer_inputs.push_back(std::move(current));
    if (l + 1 == n_layers) {
      current = std::move(pre);
    } else {
      current = pre;
      for (double& v : current.data()) v = activate(params.activation, v);
      result.tape.pre_activations.push_back(std::move(pre));
    }
  }
  result.codes = std::move(current);
  return result;
}

Matrix encode(const EncoderParams& params, const Matrix& batch) {
  check_batch(params, batch);
  Matrix current = batch;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    current = affine(params.layers[l], current);
    if (l + 1 < params.layers.size()) {
      for (double& v : current.data()) v = activate(params.activation, v);
    }
  }
  return current;
}

BackwardResult backward(const EncoderParams& params, const ActivationTape& tape,
                        const Matrix& upstream_grad) {
  const std::size_t n_layers = params.layers.size();
  if (tape.layer_inputs.size() != n_layers || tape.pre_activations.size() + 1 != n_layers) {
    throw ShapeError("backward: tape does not match a network of " + std::to_string(n_layers) +
                     " layers");
  }
  const std::size_t m = tape.layer_inputs.front().cols();
  if (upstream_grad.rows() != params.code_length() || upstream_grad.cols() != m) {
    throw ShapeError("backward: upstream gradient " + shape_of(upstream_grad) + " vs codes (" +
                     std::to_string(params.code_length()) + "x" + std::to_string(m) + ")");
  }

  BackwardResult result;
  result.param_grads = params.zeros_like();
  Matrix delta = upstream_grad;  // gradient w.r.t. the current layer's output (pre-activation)
  for (std::size_t l = n_layers; l-- > 0;) {
    const Matrix& input = tape.layer_inputs[l];
    if (input.cols() != m || input.rows() != params.layers[l].weight.cols()) {
      throw ShapeError("backward: tape layer " + std::to_string(l) + " has shape " +
                       shape_of(input));
    }
    auto& grad = result.param_grads.layers[l];
    grad.weight = matmul(delta, transpose(input));
    grad.bias = row_sums(delta);
    Matrix upstream = matmul(transpose(params.layers[l].weight), delta);
    if (l > 0) {
      const Matrix& pre = tape.pre_activations[l - 1];
      auto up = upstream.data();
      const auto pre_data = pre.data();
      for (std::size_t i = 0; i < up.size(); ++i) {
        up[i] *= activate_grad(params.activation, pre_data[i]);
      }
    }
    delta = std::move(upstream);
  }
  result.input_grad = std::move(delta);
  return result;
}

EncoderParams sgd_step(const EncoderParams& params, const EncoderParams& grads,
                       double learning_rate) {
  if (!(learning_rate > 0.0)) throw InvalidArgument("sgd_step: learning_rate must be > 0");
  if (params.layer_dims() != grads.layer_dims()) {
    throw ShapeError("sgd_step: gradient shapes do not match parameters");
  }
  EncoderParams next = params;
  for (std::size_t l = 0; l < next.layers.size(); ++l) {
    auto& layer = next.layers[l];
    const auto& g = grads.layers[l];
    if (g.bias.size() != layer.bias.size()) throw ShapeError("sgd_step: bias shape mismatch");
    auto w = layer.weight.data();
    const auto gw = g.weight.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= learning_rate * gw[i];
    for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= learning_rate * g.bias[i];
  }
  return next;
}

namespace {
constexpr const char* kEncoderMagic = "TDHv1";
}

void write_encoder(std::ostream& out, const EncoderParams& params, Modality modality) {
  out.write(kEncoderMagic, 5);
  detail::write_u8(out, static_cast<std::uint8_t>(modality));
  detail::write_u8(out, static_cast<std::uint8_t>(params.activation));
  const auto dims = params.layer_dims();
  detail::write_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (std::size_t d : dims) detail::write_u32(out, static_cast<std::uint32_t>(d));
  for (const auto& layer : params.layers) {
    for (double v : layer.weight.data()) detail::write_f64(out, v);
    for (double v : layer.bias) detail::write_f64(out, v);
  }
  if (!out) throw IoError("failed writing encoder checkpoint");
}

EncoderParams read_encoder(std::istream& in, Modality* modality) {
  detail::expect_magic(in, kEncoderMagic);
  const auto mod = detail::read_u8(in, "modality");
  const auto act = detail::read_u8(in, "activation");
  if (mod > 1) throw IoError("encoder checkpoint: bad modality tag " + std::to_string(mod));
  if (act > 1) throw IoError("encoder checkpoint: bad activation tag " + std::to_string(act));
  const auto n_dims = detail::read_u32(in, "dims count");
  if (n_dims < 2 || n_dims > 64) throw IoError("encoder checkpoint: bad dims count");
  std::vector<std::size_t> dims(n_dims);
  for (auto& d : dims) {
    d = detail::read_u32(in, "dims");
    if (d == 0) throw IoError("encoder checkpoint: zero dimension");
  }
  EncoderParams p;
  p.activation = static_cast<Activation>(act);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer{Matrix(dims[l + 1], dims[l]), std::vector<double>(dims[l + 1])};
    for (double& v : layer.weight.data()) v = detail::read_f64(in, "weights");
    for (double& v : layer.bias) v = detail::read_f64(in, "bias");
    p.layers.push_back(std::move(layer));
  }
  if (modality != nullptr) *modality = static_cast<Modality>(mod);
  return p;
}

void save_encoder(const std::filesystem::path& path, const EncoderParams& params,
                  Modality modality) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_encoder(out, params, modality);
}

EncoderParams load_encoder(const std::filesystem::path& path, Modality* modality) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read_encoder(in, modality);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace tdh
