#pragma once

// Bimodal corpora: synthetic generation plus CSV loading and saving.
//
// On-disk layout of a dataset directory:
//   features_x.csv  text-modality features, one instance per line
//   features_y.csv  image-modality features, one instance per line
//   labels.csv      `id,label1;label2;...` per line, same order as features
//   split.csv       `role,id` per line, role in {train, query, retrieval}

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "tdh/codes.hpp"
#include "tdh/linalg.hpp"
#include "tdh/retrieval.hpp"

namespace tdh {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> query;
  std::vector<std::size_t> retrieval;

  friend bool operator==(const Split&, const Split&) = default;
};

struct BimodalDataset {
  Matrix x;  // text features, d_x x N
  Matrix y;  // image features, d_y x N
  std::vector<LabelSet> labels;
  std::vector<ItemId> ids;
  Split split;

  std::size_t size() const noexcept { return labels.size(); }
  // Throws InvalidArgument on any broken invariant.
  void validate(bool allow_train_in_retrieval = true) const;

  friend bool operator==(const BimodalDataset&, const BimodalDataset&) = default;
};

struct SplitSpec {
  std::optional<std::filesystem::path> split_file;
  double query_fraction = 0.1;
  // Training instances drawn from the retrieval set; 0 takes all of it.
  std::size_t train_size = 0;
  // When false the training instances are removed from the retrieval set.
  bool train_from_retrieval = true;
  std::uint64_t seed = 0;
};

// Random query/retrieval/train split over n instances.
Split make_split(std::size_t n, const SplitSpec& spec);

struct SyntheticSpec {
  std::size_t num_classes = 4;
  std::size_t per_class = 100;
  std::size_t d_x = 64;
  std::size_t d_y = 96;
  double noise_sigma = 0.2;
  double multilabel_rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t latent_dim = 16;
  double query_fraction = 0.1;
  std::size_t train_size = 0;
};

// Each class has a latent prototype; each modality applies its own fixed
// linear map to the prototype and adds N(0, noise_sigma^2) noise. A
// `multilabel_rate` fraction of instances carries a second class and the
// mean of both prototypes.
BimodalDataset generate_synthetic(const SyntheticSpec& spec);

BimodalDataset load_dataset(const std::filesystem::path& features_x,
                            const std::filesystem::path& features_y,
                            const std::filesystem::path& labels, const SplitSpec& split);

// Uses split.csv from the directory when present, `fallback` otherwise.
BimodalDataset load_dataset_dir(const std::filesystem::path& dir, const SplitSpec& fallback = {});
void save_dataset(const std::filesystem::path& dir, const BimodalDataset& dataset);

// One instance per line, comma-separated; the result has one column per line.
Matrix read_feature_csv(const std::filesystem::path& path);
void write_feature_csv(const std::filesystem::path& path, const Matrix& features);

}  // namespace tdh
