#pragma once

// Alternating optimisation of the two encoders and the unified code matrix.
// Each outer iteration (epoch):
//   1. refresh F and G with full forward passes and update B in closed form;
//   2. ceil(N / batch_size) SGD steps on the text network, each on a random
//      mini-batch with freshly sampled triplets anchored in the batch;
//   3. the same number of steps on the image network;
//   4. refresh F and G and record the objective on a fixed monitor triplet set.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tdh/codes.hpp"
#include "tdh/dataio.hpp"
#include "tdh/encoder.hpp"
#include "tdh/loss.hpp"

namespace tdh {

struct TrainConfig {
  std::size_t code_length = 16;
  std::vector<std::size_t> hidden_dims{256};
  Activation activation = Activation::tanh;

  std::size_t batch_size = 128;
  std::size_t outer_iterations = 500;
  // Steps are taken with learning_rate / (m * N): m instances in the
  // mini-batch, N training instances in total.
  double learning_rate = 5e-3;
  double lr_decay = 0.5;
  std::size_t lr_decay_every = 100;
  // 0 means one anchor per mini-batch instance.
  std::size_t anchors_per_batch = 0;
  std::size_t positives_per_anchor = 1;
  std::size_t negatives_per_anchor = 1;
  std::uint64_t seed = 0;

  // alpha < 0 selects code_length / 2.
  double alpha = -1.0;
  double gamma = 100.0;
  double eta = 50.0;
  double beta = 1.0;

  bool anchor_only_gradients = false;
  SimilarityRule similarity = SimilarityRule::share_any;

  HyperParams hyper_params() const;
  std::size_t anchors() const { return anchors_per_batch == 0 ? batch_size : anchors_per_batch; }
  double learning_rate_at(std::size_t epoch) const;
  void validate() const;
};

// Flat `key = value` text, `#` starts a comment. Keys are TrainConfig field
// names; unknown keys are an error. `seed_set` reports whether `seed` appeared.
TrainConfig parse_train_config(std::istream& in, const std::string& source_name,
                               bool* seed_set = nullptr);
TrainConfig load_train_config(const std::filesystem::path& path, bool* seed_set = nullptr);
void write_train_config(std::ostream& out, const TrainConfig& config);

struct TripletSample {
  std::vector<TripletLabel> triplets;
  std::size_t skipped_anchors = 0;
};

// For each anchor, m1 positives (share a label, not the anchor itself) and m2
// negatives (share none) drawn uniformly with replacement; all m1 * m2 pairs
// become triplets. Anchors lacking either kind are skipped and counted.
// Throws InvalidArgument when every anchor is skipped.
TripletSample sample_triplets(std::span<const LabelSet> labels, std::span<const std::size_t> anchors,
                              std::size_t m1, std::size_t m2, std::mt19937_64& rng);

// Training-set view with the pieces that stay fixed across epochs.
struct TrainingData {
  Matrix x;  // text features of the training instances
  Matrix y;  // image features
  std::vector<LabelSet> labels;
  SimilarityGraph graph;
  CodeUpdater updater;
  // Fixed triplets used to report the objective after each epoch.
  std::vector<TripletLabel> monitor_triplets;

  static TrainingData from(const BimodalDataset& dataset, const TrainConfig& config);
  std::size_t size() const noexcept { return labels.size(); }
};

struct TrainState {
  EncoderParams params_x;  // text network
  EncoderParams params_y;  // image network
  CodeMatrix b;
  Matrix f;  // image outputs, k x N
  Matrix g;  // text outputs, k x N
  std::size_t iteration = 0;
  std::vector<LossBreakdown> loss_history;
};

// Fresh encoders for the configured seed; F and G from a full forward pass
// and B from one closed-form update.
TrainState init_state(const TrainingData& data, const TrainConfig& config);

// Full forward passes over the training set.
void refresh_outputs(TrainState& state, const TrainingData& data);

// One SGD step on a single modality. Exposed so tests can compare the applied
// gradient against the loss module; returns the upstream gradient used.
Matrix modality_step(TrainState& state, const TrainingData& data, const TrainConfig& config,
                     Modality modality, std::span<const std::size_t> batch,
                     std::span<const TripletLabel> triplets, double learning_rate);

// Throws NumericError naming the term when the recorded objective is not finite.
TrainState train_epoch(TrainState state, const TrainConfig& config, const TrainingData& data);

struct TrainResult {
  EncoderParams params_x;
  EncoderParams params_y;
  CodeMatrix codes;
  std::vector<LossBreakdown> loss_history;
};

struct TrainOptions {
  // Checkpoints are written here after every `checkpoint_every` epochs and at the end.
  std::optional<std::filesystem::path> checkpoint_dir;
  std::size_t checkpoint_every = 0;
  // Continue from the checkpoint in checkpoint_dir when it exists.
  bool resume = false;
  std::function<void(std::size_t epoch, const LossBreakdown&)> on_epoch;
};

TrainResult train(const BimodalDataset& dataset, const TrainConfig& config,
                  const TrainOptions& options = {});

// Checkpoint directory: params_x.tdh, params_y.tdh, codes.tdhbin, history.csv.
void save_checkpoint(const std::filesystem::path& dir, const EncoderParams& params_x,
                     const EncoderParams& params_y, const CodeMatrix& codes,
                     std::span<const LossBreakdown> history);

struct Checkpoint {
  EncoderParams params_x;
  EncoderParams params_y;
  CodeMatrix codes;
  std::vector<LossBreakdown> history;
};

Checkpoint load_checkpoint(const std::filesystem::path& dir);

void write_history_csv(const std::filesystem::path& path, std::span<const LossBreakdown> history);
std::vector<LossBreakdown> read_history_csv(const std::filesystem::path& path);

}  // namespace tdh
