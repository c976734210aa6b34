#include "tdh/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <string>
#include <unordered_set>

#include "tdh/error.hpp"

namespace tdh {

BinaryCode BinaryCode::from(const PackedCodes& codes, std::size_t item) {
  if (item >= codes.count()) throw InvalidArgument("code index out of range");
  const auto words = codes.code(item);
  return {codes.bits(), {words.begin(), words.end()}};
}

BinaryCode BinaryCode::from(const CodeMatrix& codes, std::size_t item) {
  if (item >= codes.count()) throw InvalidArgument("code index out of range");
  BinaryCode code{codes.bits(), std::vector<std::uint64_t>((codes.bits() + 63) / 64, 0)};
  for (std::size_t b = 0; b < codes.bits(); ++b) {
    if (codes(b, item) > 0.0) code.words[b / 64] |= std::uint64_t{1} << (b % 64);
  }
  return code;
}

CodeMatrix encode_out_of_sample(const EncoderParams& params, const Matrix& items) {
  return sign_matrix(encode(params, items));
}

BinaryCode encode_out_of_sample(const EncoderParams& params, std::span<const double> item) {
  Matrix column(item.size(), 1);
  column.set_col(0, item);
  return BinaryCode::from(encode_out_of_sample(params, column), 0);
}

std::size_t hamming_distance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  if (a.size() != b.size()) throw ShapeError("hamming_distance: word count mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += static_cast<std::size_t>(std::popcount(a[i] ^ b[i]));
  return d;
}

std::size_t hamming_distance(const BinaryCode& a, const BinaryCode& b) {
  if (a.bits != b.bits) {
    throw ShapeError("hamming_distance: code lengths differ (" + std::to_string(a.bits) + " vs " +
                     std::to_string(b.bits) + ")");
  }
  return hamming_distance(std::span<const std::uint64_t>(a.words), b.words);
}

RetrievalIndex::RetrievalIndex(PackedCodes codes, std::vector<ItemId> ids,
                               std::vector<LabelSet> labels)
    : codes_(std::move(codes)), ids_(std::move(ids)), labels_(std::move(labels)) {
  if (ids_.size() != codes_.count()) {
    throw InvalidArgument("index: " + std::to_string(ids_.size()) + " identifiers for " +
                          std::to_string(codes_.count()) + " codes");
  }
  if (!labels_.empty() && labels_.size() != codes_.count()) {
    throw InvalidArgument("index: " + std::to_string(labels_.size()) + " label sets for " +
                          std::to_string(codes_.count()) + " codes");
  }
  std::unordered_set<ItemId> seen;
  for (ItemId id : ids_) {
    if (!seen.insert(id).second) throw InvalidArgument("index: duplicate identifier " + std::to_string(id));
  }
}

RetrievalIndex build_index(const EncoderParams& params, const Matrix& features,
                           std::vector<ItemId> ids, std::vector<LabelSet> labels) {
  return {PackedCodes::from(encode_out_of_sample(params, features)), std::move(ids), std::move(labels)};
}

std::vector<std::size_t> distances(const RetrievalIndex& index, const BinaryCode& query) {
  if (query.bits != index.bits()) {
    throw ShapeError("query has " + std::to_string(query.bits) + " bits, index has " +
                     std::to_string(index.bits()));
  }
  std::vector<std::size_t> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    out[i] = hamming_distance(index.codes().code(i), query.words);
  }
  return out;
}

std::vector<Hit> rank(const RetrievalIndex& index, const BinaryCode& query,
                      std::optional<std::size_t> top_n) {
  if (index.size() == 0) throw InvalidArgument("rank: empty index");
  const auto dist = distances(index, query);
  std::vector<Hit> hits(index.size());
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i] = {index.ids()[i], dist[i]};
  const auto by_distance_then_id = [](const Hit& a, const Hit& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  };
  const std::size_t n = std::min(top_n.value_or(hits.size()), hits.size());
  if (n < hits.size()) {
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(),
                      by_distance_then_id);
    hits.resize(n);
  } else {
    std::sort(hits.begin(), hits.end(), by_distance_then_id);
  }
  return hits;
}

void save_index(const std::filesystem::path& dir, const RetrievalIndex& index) {
  std::filesystem::create_directories(dir);
  save_codes(dir / "codes.tdhbin", index.codes());
  std::ofstream out(dir / "manifest.csv", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "manifest.csv").string());
  for (std::size_t i = 0; i < index.size(); ++i) {
    out << index.ids()[i];
    if (index.has_labels()) {
      for (int label : index.labels()[i]) out << ',' << label;
    }
    out << '\n';
  }
}

namespace {

template <typename T>
T parse_number(std::string_view token, const std::string& file, std::size_t line) {
  T value{};
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end || token.empty()) {
    throw ParseError(file, line, "invalid number '" + std::string(token) + "'");
  }
  return value;
}

}  // namespace

RetrievalIndex load_index(const std::filesystem::path& dir) {
  PackedCodes codes = load_codes(dir / "codes.tdhbin");
  const auto manifest = dir / "manifest.csv";
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open " + manifest.string());
  std::vector<ItemId> ids;
  std::vector<LabelSet> labels;
  bool any_labels = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<int> row_labels;
    std::size_t start = 0;
    bool first = true;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view token =
          std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (first) {
        ids.push_back(parse_number<ItemId>(token, manifest.string(), line_no));
        first = false;
      } else {
        row_labels.push_back(parse_number<int>(token, manifest.string(), line_no));
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    any_labels = any_labels || !row_labels.empty();
    labels.push_back(make_label_set(std::move(row_labels)));
  }
  if (ids.size() != codes.count()) {
    throw ParseError(manifest.string(), line_no,
                     std::to_string(ids.size()) + " manifest rows for " +
                         std::to_string(codes.count()) + " codes");
  }
  if (!any_labels) labels.clear();
  return {std::move(codes), std::move(ids), std::move(labels)};
}

}  // namespace tdh
