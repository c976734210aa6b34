#pragma once

// Out-of-sample hashing and exhaustive Hamming ranking over packed codes.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "tdh/codes.hpp"
#include "tdh/encoder.hpp"

namespace tdh {

using ItemId = std::uint64_t;

// One k-bit code, same bit layout as a PackedCodes record.
struct BinaryCode {
  std::size_t bits = 0;
  std::vector<std::uint64_t> words;

  static BinaryCode from(const PackedCodes& codes, std::size_t item);
  // Column `item` of a +-1 matrix.
  static BinaryCode from(const CodeMatrix& codes, std::size_t item);

  friend bool operator==(const BinaryCode&, const BinaryCode&) = default;
};

// b = sign(f(x; w)) for every column of `items`.
CodeMatrix encode_out_of_sample(const EncoderParams& params, const Matrix& items);
BinaryCode encode_out_of_sample(const EncoderParams& params, std::span<const double> item);

std::size_t hamming_distance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);
// Throws ShapeError when the code lengths differ.
std::size_t hamming_distance(const BinaryCode& a, const BinaryCode& b);

struct Hit {
  ItemId id = 0;
  std::size_t distance = 0;

  friend bool operator==(const Hit&, const Hit&) = default;
};

class RetrievalIndex {
 public:
  RetrievalIndex() = default;
  // `labels` is either empty or one set per item. Throws InvalidArgument on
  // duplicate identifiers or mismatched sizes.
  RetrievalIndex(PackedCodes codes, std::vector<ItemId> ids, std::vector<LabelSet> labels = {});

  std::size_t size() const noexcept { return codes_.count(); }
  std::size_t bits() const noexcept { return codes_.bits(); }
  bool has_labels() const noexcept { return !labels_.empty(); }

  const PackedCodes& codes() const noexcept { return codes_; }
  const std::vector<ItemId>& ids() const noexcept { return ids_; }
  const std::vector<LabelSet>& labels() const noexcept { return labels_; }

 private:
  PackedCodes codes_;
  std::vector<ItemId> ids_;
  std::vector<LabelSet> labels_;
};

// Hash `features` (one item per column) and index them.
RetrievalIndex build_index(const EncoderParams& params, const Matrix& features,
                           std::vector<ItemId> ids, std::vector<LabelSet> labels = {});

// Distances from `query` to every item, in index order.
std::vector<std::size_t> distances(const RetrievalIndex& index, const BinaryCode& query);

// Items ordered by ascending Hamming distance, ties by ascending identifier.
// Returns min(top_n, size) hits; all of them when top_n is empty.
std::vector<Hit> rank(const RetrievalIndex& index, const BinaryCode& query,
                      std::optional<std::size_t> top_n = std::nullopt);

// Index directory: `codes.tdhbin` plus `manifest.csv` with one line per item,
// `id[,label...]`, in code order.
void save_index(const std::filesystem::path& dir, const RetrievalIndex& index);
RetrievalIndex load_index(const std::filesystem::path& dir);

}  // namespace tdh
