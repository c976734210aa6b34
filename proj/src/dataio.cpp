#include "tdh/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>

#include "tdh/error.hpp"
#include "tdh/metrics.hpp"

namespace tdh {

namespace {

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_token(std::string_view token, const std::string& file, std::size_t line) {
  token = trim(token);
  T value{};
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (token.empty() || ec != std::errc() || ptr != end) {
    throw ParseError(file, line, "invalid number '" + std::string(token) + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ParseError(file, line, "non-finite value");
  }
  return value;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

struct LabelFile {
  std::vector<ItemId> ids;
  std::vector<LabelSet> labels;
};

LabelFile read_labels(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string name = path.string();
  LabelFile out;
  std::unordered_map<ItemId, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(name, line_no, "expected 'id,label;label...'");
    const auto id = parse_token<ItemId>(std::string_view(line).substr(0, comma), name, line_no);
    if (!seen.emplace(id, line_no).second) {
      throw ParseError(name, line_no, "duplicate id " + std::to_string(id));
    }
    std::vector<int> labels;
    for (auto token : split_on(std::string_view(line).substr(comma + 1), ';')) {
      if (trim(token).empty()) continue;
      labels.push_back(parse_token<int>(token, name, line_no));
    }
    if (labels.empty()) throw ParseError(name, line_no, "instance " + std::to_string(id) + " has no labels");
    out.ids.push_back(id);
    out.labels.push_back(make_label_set(std::move(labels)));
  }
  return out;
}

Split read_split(const std::filesystem::path& path, const std::vector<ItemId>& ids) {
  std::unordered_map<ItemId, std::size_t> position;
  for (std::size_t i = 0; i < ids.size(); ++i) position.emplace(ids[i], i);
  auto in = open_input(path);
  const std::string name = path.string();
  Split split;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto parts = split_on(line, ',');
    if (parts.size() != 2) throw ParseError(name, line_no, "expected 'role,id'");
    const auto role = trim(parts[0]);
    const auto id = parse_token<ItemId>(parts[1], name, line_no);
    const auto it = position.find(id);
    if (it == position.end()) throw ParseError(name, line_no, "unknown id " + std::to_string(id));
    if (role == "train") {
      split.train.push_back(it->second);
    } else if (role == "query") {
      split.query.push_back(it->second);
    } else if (role == "retrieval") {
      split.retrieval.push_back(it->second);
    } else {
      throw ParseError(name, line_no, "unknown role '" + std::string(role) + "'");
    }
  }
  return split;
}

void write_split(const std::filesystem::path& path, const BimodalDataset& ds) {
  auto out = open_output(path);
  for (std::size_t i : ds.split.train) out << "train," << ds.ids[i] << '\n';
  for (std::size_t i : ds.split.query) out << "query," << ds.ids[i] << '\n';
  for (std::size_t i : ds.split.retrieval) out << "retrieval," << ds.ids[i] << '\n';
}

bool disjoint(std::vector<std::size_t> a, std::vector<std::size_t> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<std::size_t> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  return both.empty();
}

}  // namespace

void BimodalDataset::validate(bool allow_train_in_retrieval) const {
  const std::size_t n = labels.size();
  if (n == 0) throw InvalidArgument("dataset is empty");
  if (x.cols() != n || y.cols() != n || ids.size() != n) {
    throw InvalidArgument("dataset: " + std::to_string(x.cols()) + " text columns, " +
                          std::to_string(y.cols()) + " image columns, " + std::to_string(n) +
                          " label sets, " + std::to_string(ids.size()) + " ids");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i].empty()) throw InvalidArgument("dataset: instance " + std::to_string(i) + " has no labels");
  }
  for (const auto* part : {&split.train, &split.query, &split.retrieval}) {
    for (std::size_t i : *part) {
      if (i >= n) throw InvalidArgument("dataset: split index " + std::to_string(i) + " out of range");
    }
  }
  if (!disjoint(split.query, split.retrieval) || !disjoint(split.query, split.train)) {
    throw InvalidArgument("dataset: query split overlaps another split");
  }
  if (!allow_train_in_retrieval && !disjoint(split.train, split.retrieval)) {
    throw InvalidArgument("dataset: train split overlaps retrieval split");
  }
}

Split make_split(std::size_t n, const SplitSpec& spec) {
  if (!(spec.query_fraction >= 0.0 && spec.query_fraction < 1.0)) {
    throw InvalidArgument("query_fraction must be in [0, 1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_query = static_cast<std::size_t>(std::llround(spec.query_fraction * static_cast<double>(n)));
  Split split;
  split.query.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_query));
  split.retrieval.assign(order.begin() + static_cast<std::ptrdiff_t>(n_query), order.end());
  const std::size_t n_train = spec.train_size == 0 ? split.retrieval.size() : spec.train_size;
  if (n_train > split.retrieval.size()) {
    throw InvalidArgument("train_size " + std::to_string(n_train) + " exceeds retrieval set of " +
                          std::to_string(split.retrieval.size()));
  }
  split.train.assign(split.retrieval.begin(), split.retrieval.begin() + static_cast<std::ptrdiff_t>(n_train));
  if (!spec.train_from_retrieval) {
    split.retrieval.erase(split.retrieval.begin(), split.retrieval.begin() + static_cast<std::ptrdiff_t>(n_train));
  }
  std::sort(split.query.begin(), split.query.end());
  std::sort(split.retrieval.begin(), split.retrieval.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

BimodalDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_classes < 2) throw InvalidArgument("generate_synthetic: num_classes must be >= 2");
  if (spec.per_class < 2) throw InvalidArgument("generate_synthetic: per_class must be >= 2");
  if (spec.d_x == 0 || spec.d_y == 0 || spec.latent_dim == 0) {
    throw InvalidArgument("generate_synthetic: feature dimensions must be >= 1");
  }
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
    throw InvalidArgument("generate_synthetic: noise_sigma must be >= 0");
  }
  if (!(spec.multilabel_rate >= 0.0 && spec.multilabel_rate <= 1.0)) {
    throw InvalidArgument("generate_synthetic: multilabel_rate must be in [0, 1]");
  }

  const std::size_t n = spec.num_classes * spec.per_class;
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(spec.latent_dim));
  // Independent streams for prototypes, the two modality maps and the sampling.
  Matrix prototypes = seeded_normal(spec.latent_dim, spec.num_classes, spec.seed * 4 + 0, 1.0);
  // Prototypes are centered so that the features carry no shared offset.
  for (std::size_t r = 0; r < spec.latent_dim; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < spec.num_classes; ++c) mean += prototypes(r, c);
    mean /= static_cast<double>(spec.num_classes);
    for (std::size_t c = 0; c < spec.num_classes; ++c) prototypes(r, c) -= mean;
  }
  const Matrix map_x = seeded_normal(spec.d_x, spec.latent_dim, spec.seed * 4 + 1, map_scale);
  const Matrix map_y = seeded_normal(spec.d_y, spec.latent_dim, spec.seed * 4 + 2, map_scale);
  std::mt19937_64 rng(spec.seed * 4 + 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> other_class(0, spec.num_classes - 2);
  std::normal_distribution<double> noise(0.0, 1.0);

  BimodalDataset ds;
  Matrix latent(spec.latent_dim, n);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t j = 0; j < spec.per_class; ++j) {
      const std::size_t i = c * spec.per_class + j;
      std::vector<int> labels{static_cast<int>(c)};
      std::vector<double> z = prototypes.col(c);
      if (unit(rng) < spec.multilabel_rate) {
        std::size_t second = other_class(rng);
        if (second >= c) ++second;
        labels.push_back(static_cast<int>(second));
        for (std::size_t r = 0; r < z.size(); ++r) z[r] = 0.5 * (z[r] + prototypes(r, second));
      }
      latent.set_col(i, z);
      ds.labels.push_back(make_label_set(std::move(labels)));
      ds.ids.push_back(i);
    }
  }
  ds.x = matmul(map_x, latent);
  ds.y = matmul(map_y, latent);
  if (spec.noise_sigma > 0.0) {
    for (double& v : ds.x.data()) v += spec.noise_sigma * noise(rng);
    for (double& v : ds.y.data()) v += spec.noise_sigma * noise(rng);
  }
  SplitSpec split;
  split.query_fraction = spec.query_fraction;
  split.train_size = spec.train_size;
  split.seed = spec.seed;
  ds.split = make_split(n, split);
  ds.validate();
  return ds;
}

Matrix read_feature_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string name = path.string();
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (auto token : split_on(line, ',')) row.push_back(parse_token<double>(token, name, line_no));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(name, line_no, "expected " + std::to_string(rows.front().size()) +
                                          " values, found " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(name, line_no, "no instances");
  Matrix m(rows.front().size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.set_col(i, rows[i]);
  return m;
}

void write_feature_csv(const std::filesystem::path& path, const Matrix& features) {
  auto out = open_output(path);
  for (std::size_t i = 0; i < features.cols(); ++i) {
    for (std::size_t r = 0; r < features.rows(); ++r) {
      if (r > 0) out << ',';
      out << format_real(features(r, i));
    }
    out << '\n';
  }
}

BimodalDataset load_dataset(const std::filesystem::path& features_x,
                            const std::filesystem::path& features_y,
                            const std::filesystem::path& labels, const SplitSpec& split) {
  BimodalDataset ds;
  ds.x = read_feature_csv(features_x);
  ds.y = read_feature_csv(features_y);
  auto label_file = read_labels(labels);
  if (ds.x.cols() != ds.y.cols() || ds.x.cols() != label_file.ids.size()) {
    throw InvalidArgument("instance counts differ: " + features_x.string() + " has " +
                          std::to_string(ds.x.cols()) + ", " + features_y.string() + " has " +
                          std::to_string(ds.y.cols()) + ", " + labels.string() + " has " +
                          std::to_string(label_file.ids.size()));
  }
  ds.ids = std::move(label_file.ids);
  ds.labels = std::move(label_file.labels);
  ds.split = split.split_file ? read_split(*split.split_file, ds.ids) : make_split(ds.size(), split);
  ds.validate(split.train_from_retrieval);
  return ds;
}

BimodalDataset load_dataset_dir(const std::filesystem::path& dir, const SplitSpec& fallback) {
  SplitSpec spec = fallback;
  if (!spec.split_file && std::filesystem::exists(dir / "split.csv")) spec.split_file = dir / "split.csv";
  return load_dataset(dir / "features_x.csv", dir / "features_y.csv", dir / "labels.csv", spec);
}

void save_dataset(const std::filesystem::path& dir, const BimodalDataset& dataset) {
  dataset.validate();
  std::filesystem::create_directories(dir);
  write_feature_csv(dir / "features_x.csv", dataset.x);
  write_feature_csv(dir / "features_y.csv", dataset.y);
  auto out = open_output(dir / "labels.csv");
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out << dataset.ids[i] << ',';
    for (std::size_t l = 0; l < dataset.labels[i].size(); ++l) {
      if (l > 0) out << ';';
      out << dataset.labels[i][l];
    }
    out << '\n';
  }
  write_split(dir / "split.csv", dataset);
}

}  // namespace tdh
