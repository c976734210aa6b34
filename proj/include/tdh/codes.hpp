#pragma once

// Label-similarity graph, the {-1,+1} code matrix and its closed-form update,
// and the packed on-disk code format.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "tdh/linalg.hpp"

namespace tdh {

// Sorted, duplicate-free category ids of one instance.
using LabelSet = std::vector<int>;

LabelSet make_label_set(std::vector<int> labels);
bool labels_overlap(const LabelSet& a, const LabelSet& b);

enum class SimilarityRule : std::uint8_t {
  share_any,    // s_ij = 1 when the label sets intersect
  exact_match,  // s_ij = 1 when the label sets are equal
};

bool similar(const LabelSet& a, const LabelSet& b, SimilarityRule rule);

struct SimilarityGraph {
  Matrix similarity;           // S, N x N over {0,1}
  std::vector<double> degree;  // diagonal of D
  Matrix laplacian;            // L = D - S

  std::size_t size() const noexcept { return degree.size(); }
  Matrix degree_matrix() const;
};

// Throws InvalidArgument naming the first instance with an empty label set.
SimilarityGraph build_graph(std::span<const LabelSet> labels,
                            SimilarityRule rule = SimilarityRule::share_any);

// k x N matrix whose entries are exactly -1.0 or +1.0.
class CodeMatrix {
 public:
  CodeMatrix() = default;
  // Throws InvalidArgument if any entry is not exactly +-1.
  explicit CodeMatrix(Matrix values);

  std::size_t bits() const noexcept { return values_.rows(); }
  std::size_t count() const noexcept { return values_.cols(); }
  const Matrix& matrix() const noexcept { return values_; }
  double operator()(std::size_t bit, std::size_t item) const noexcept { return values_(bit, item); }

  friend bool operator==(const CodeMatrix&, const CodeMatrix&) = default;

 private:
  Matrix values_;
};

// sign(x) = +1 for x >= 0, -1 otherwise.
CodeMatrix sign_matrix(const Matrix& m);

// B = sign((F + G) (2I + (beta/gamma) L)^-1). Holds the factorization so
// repeated updates against a fixed graph reuse it.
class CodeUpdater {
 public:
  CodeUpdater(const Matrix& laplacian, double gamma, double beta);

  CodeMatrix update(const Matrix& f, const Matrix& g) const;

 private:
  std::size_t n_;
  bool identity_only_;
  std::optional<Cholesky> factor_;
};

CodeMatrix update_codes(const Matrix& f, const Matrix& g, const SimilarityGraph& graph,
                        double gamma, double beta);

// Codes packed one bit per entry (+1 -> 1, -1 -> 0), 64 bits per word,
// bit j of a code in word j / 64 at position j % 64.
class PackedCodes {
 public:
  PackedCodes() = default;
  PackedCodes(std::size_t bits, std::size_t count);

  static PackedCodes from(const CodeMatrix& codes);
  CodeMatrix unpack() const;

  std::size_t bits() const noexcept { return bits_; }
  std::size_t count() const noexcept { return count_; }
  std::size_t words_per_code() const noexcept { return words_per_code_; }

  std::span<const std::uint64_t> code(std::size_t i) const noexcept {
    return {words_.data() + i * words_per_code_, words_per_code_};
  }
  std::span<std::uint64_t> code(std::size_t i) noexcept {
    return {words_.data() + i * words_per_code_, words_per_code_};
  }
  void set_bit(std::size_t item, std::size_t bit, bool positive) noexcept;
  bool bit(std::size_t item, std::size_t bit) const noexcept;

  friend bool operator==(const PackedCodes&, const PackedCodes&) = default;

 private:
  std::size_t bits_ = 0;
  std::size_t count_ = 0;
  std::size_t words_per_code_ = 0;
  std::vector<std::uint64_t> words_;
};

// "TDHBIN1" file: 7-byte magic, u32 k, u32 N (little-endian), then N records
// of ceil(k/8) bytes. Bit j of a record is byte j/8, bit j%8 (LSB first);
// 1 encodes +1. Unused trailing bits are zero.
void write_codes(std::ostream& out, const PackedCodes& codes);
PackedCodes read_codes(std::istream& in);
void save_codes(const std::filesystem::path& path, const PackedCodes& codes);
PackedCodes load_codes(const std::filesystem::path& path);

}  // namespace tdh
