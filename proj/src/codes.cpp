#include "tdh/codes.hpp"

#include <algorithm>
#include <fstream>

#include "binary_io.hpp"
#include "tdh/error.hpp"

namespace tdh {

LabelSet make_label_set(std::vector<int> labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

bool labels_overlap(const LabelSet& a, const LabelSet& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return true;
    if (*i < *j) {
      ++i;
    } else {
      ++j;
    }
  }
  return false;
}

bool similar(const LabelSet& a, const LabelSet& b, SimilarityRule rule) {
  return rule == SimilarityRule::share_any ? labels_overlap(a, b) : a == b;
}

Matrix SimilarityGraph::degree_matrix() const {
  Matrix d(degree.size(), degree.size());
  for (std::size_t i = 0; i < degree.size(); ++i) d(i, i) = degree[i];
  return d;
}

SimilarityGraph build_graph(std::span<const LabelSet> labels, SimilarityRule rule) {
  const std::size_t n = labels.size();
  if (n == 0) throw InvalidArgument("build_graph: no instances");
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i].empty()) {
      throw InvalidArgument("build_graph: instance " + std::to_string(i) + " has no labels");
    }
  }
  SimilarityGraph g;
  g.similarity = Matrix(n, n);
  g.degree.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    g.similarity(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (similar(labels[i], labels[j], rule)) {
        g.similarity(i, j) = 1.0;
        g.similarity(j, i) = 1.0;
      }
    }
  }
  g.laplacian = -g.similarity;
  for (std::size_t i = 0; i < n; ++i) {
    for (double s : g.similarity.row(i)) g.degree[i] += s;
    g.laplacian(i, i) += g.degree[i];
  }
  return g;
}

CodeMatrix::CodeMatrix(Matrix values) : values_(std::move(values)) {
  for (double v : values_.data()) {
    if (v != 1.0 && v != -1.0) {
      throw InvalidArgument("code matrix entries must be exactly -1 or +1, got " +
                            std::to_string(v));
    }
  }
}

CodeMatrix sign_matrix(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  const auto src = m.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= 0.0 ? 1.0 : -1.0;
  return CodeMatrix(std::move(out));
}

CodeUpdater::CodeUpdater(const Matrix& laplacian, double gamma, double beta)
    : n_(laplacian.rows()), identity_only_(beta == 0.0) {
  if (!(gamma > 0.0)) throw InvalidArgument("update_codes: gamma must be > 0");
  if (!(beta >= 0.0)) throw InvalidArgument("update_codes: beta must be >= 0");
  if (laplacian.cols() != n_) throw ShapeError("update_codes: laplacian " + shape_of(laplacian));
  if (!identity_only_) {
    Matrix system = (beta / gamma) * laplacian;
    for (std::size_t i = 0; i < n_; ++i) system(i, i) += 2.0;
    factor_.emplace(system);
  }
}

CodeMatrix CodeUpdater::update(const Matrix& f, const Matrix& g) const {
  if (f.rows() != g.rows() || f.cols() != g.cols() || f.cols() != n_) {
    throw ShapeError("update_codes: F " + shape_of(f) + ", G " + shape_of(g) +
                     " against graph of " + std::to_string(n_) + " instances");
  }
  Matrix sum = f + g;
  // With beta = 0 the system is 2I and the positive scale cannot change a sign.
  if (identity_only_) return sign_matrix(sum);
  return sign_matrix(transpose(factor_->solve(transpose(sum))));
}

CodeMatrix update_codes(const Matrix& f, const Matrix& g, const SimilarityGraph& graph,
                        double gamma, double beta) {
  return CodeUpdater(graph.laplacian, gamma, beta).update(f, g);
}

PackedCodes::PackedCodes(std::size_t bits, std::size_t count)
    : bits_(bits), count_(count), words_per_code_((bits + 63) / 64),
      words_(words_per_code_ * count, 0) {}

void PackedCodes::set_bit(std::size_t item, std::size_t bit, bool positive) noexcept {
  std::uint64_t& w = words_[item * words_per_code_ + bit / 64];
  const std::uint64_t mask = std::uint64_t{1} << (bit % 64);
  w = positive ? (w | mask) : (w & ~mask);
}

bool PackedCodes::bit(std::size_t item, std::size_t bit) const noexcept {
  return (words_[item * words_per_code_ + bit / 64] >> (bit % 64)) & 1u;
}

PackedCodes PackedCodes::from(const CodeMatrix& codes) {
  PackedCodes packed(codes.bits(), codes.count());
  for (std::size_t b = 0; b < codes.bits(); ++b)
    for (std::size_t i = 0; i < codes.count(); ++i)
      if (codes(b, i) > 0.0) packed.set_bit(i, b, true);
  return packed;
}

CodeMatrix PackedCodes::unpack() const {
  Matrix m(bits_, count_);
  for (std::size_t b = 0; b < bits_; ++b)
    for (std::size_t i = 0; i < count_; ++i) m(b, i) = bit(i, b) ? 1.0 : -1.0;
  return CodeMatrix(std::move(m));
}

namespace {
constexpr const char* kCodesMagic = "TDHBIN1";
}

void write_codes(std::ostream& out, const PackedCodes& codes) {
  out.write(kCodesMagic, 7);
  detail::write_u32(out, static_cast<std::uint32_t>(codes.bits()));
  detail::write_u32(out, static_cast<std::uint32_t>(codes.count()));
  const std::size_t bytes_per_code = (codes.bits() + 7) / 8;
  std::vector<char> record(bytes_per_code);
  for (std::size_t i = 0; i < codes.count(); ++i) {
    const auto words = codes.code(i);
    for (std::size_t byte = 0; byte < bytes_per_code; ++byte) {
      record[byte] = static_cast<char>((words[byte / 8] >> (8 * (byte % 8))) & 0xffu);
    }
    out.write(record.data(), static_cast<std::streamsize>(bytes_per_code));
  }
  if (!out) throw IoError("failed writing packed codes");
}

PackedCodes read_codes(std::istream& in) {
  detail::expect_magic(in, kCodesMagic);
  const std::size_t bits = detail::read_u32(in, "code length");
  const std::size_t count = detail::read_u32(in, "code count");
  if (bits == 0) throw IoError("packed codes: zero code length");
  PackedCodes codes(bits, count);
  const std::size_t bytes_per_code = (bits + 7) / 8;
  std::vector<unsigned char> record(bytes_per_code);
  for (std::size_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(bytes_per_code));
    if (in.gcount() != static_cast<std::streamsize>(bytes_per_code)) {
      throw IoError("packed codes: truncated at record " + std::to_string(i));
    }
    auto words = codes.code(i);
    for (std::size_t byte = 0; byte < bytes_per_code; ++byte) {
      words[byte / 8] |= static_cast<std::uint64_t>(record[byte]) << (8 * (byte % 8));
    }
    if (bits % 64 != 0 && (words.back() >> (bits % 64)) != 0) {
      throw IoError("packed codes: record " + std::to_string(i) + " has bits set past k");
    }
  }
  return codes;
}

void save_codes(const std::filesystem::path& path, const PackedCodes& codes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_codes(out, codes);
}

PackedCodes load_codes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read_codes(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace tdh
