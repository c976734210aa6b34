#pragma once

// Per-modality multi-layer perceptron producing real-valued hash-layer
// outputs. Hidden layers use a configurable activation; the final (hash)
// layer is linear, quantization happens only at sign time.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "tdh/linalg.hpp"

namespace tdh {

enum class Activation : std::uint8_t { relu = 0, tanh = 1 };

enum class Modality : std::uint8_t { text = 0, image = 1 };

std::string_view to_string(Activation a);
std::string_view to_string(Modality m);
Activation parse_activation(std::string_view s);
Modality parse_modality(std::string_view s);

struct EncoderConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t code_length = 0;
  Activation activation = Activation::tanh;

  // input_dim, hidden..., code_length
  std::vector<std::size_t> layer_dims() const;
  void validate() const;
};

struct DenseLayer {
  Matrix weight;  // (out x in)
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct EncoderParams {
  Activation activation = Activation::relu;
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const;
  std::size_t code_length() const;
  std::vector<std::size_t> layer_dims() const;
  // Same shapes, all zeros.
  EncoderParams zeros_like() const;

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

inline constexpr double kInitGain = 0.1;

// Weights ~ N(0, (kInitGain * sqrt(2 / fan_in))^2), biases zero. Layer l draws
// from seed + l so layers are independent streams.
EncoderParams init_encoder(const EncoderConfig& config, std::uint64_t seed);

// Inputs to each layer and pre-activations of each hidden layer, enough to
// replay the network backwards.
struct ActivationTape {
  std::vector<Matrix> layer_inputs;
  std::vector<Matrix> pre_activations;
};

struct ForwardResult {
  Matrix codes;  // (k x m)
  ActivationTape tape;
};

ForwardResult forward(const EncoderParams& params, const Matrix& batch);
// Forward without keeping the tape.
Matrix encode(const EncoderParams& params, const Matrix& batch);

struct BackwardResult {
  EncoderParams param_grads;
  Matrix input_grad;
};

// Gradient of <upstream_grad, codes> with respect to every parameter and the input.
BackwardResult backward(const EncoderParams& params, const ActivationTape& tape,
                        const Matrix& upstream_grad);

EncoderParams sgd_step(const EncoderParams& params, const EncoderParams& grads,
                       double learning_rate);

// Checkpoint format ("TDHv1"), all integers and doubles little-endian:
//   5 bytes   "TDHv1"
//   u8        modality (0 text, 1 image)
//   u8        activation (0 relu, 1 tanh)
//   u32       number of entries in the dims list (layers + 1)
//   u32 x n   dims, input first, code length last
//   per layer l: f64 weight[dims[l+1]][dims[l]] row-major, then f64 bias[dims[l+1]]
void write_encoder(std::ostream& out, const EncoderParams& params, Modality modality);
EncoderParams read_encoder(std::istream& in, Modality* modality = nullptr);
void save_encoder(const std::filesystem::path& path, const EncoderParams& params, Modality modality);
EncoderParams load_encoder(const std::filesystem::path& path, Modality* modality = nullptr);

}  // namespace tdh
