#include "tdh/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>

#include "tdh/error.hpp"

namespace tdh {

double average_precision(std::span<const std::uint8_t> ranked_relevance, std::size_t r_cap) {
  if (ranked_relevance.empty()) throw InvalidArgument("average_precision: empty ranking");
  if (r_cap == 0 || r_cap > ranked_relevance.size()) {
    throw InvalidArgument("average_precision: r_cap " + std::to_string(r_cap) +
                          " outside [1, " + std::to_string(ranked_relevance.size()) + "]");
  }
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < r_cap; ++r) {
    if (ranked_relevance[r] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

namespace {

void require_labels(const RetrievalIndex& queries, const RetrievalIndex& database) {
  if (queries.size() == 0) throw InvalidArgument("evaluation needs at least one query");
  if (database.size() == 0) throw InvalidArgument("evaluation needs a non-empty database");
  if (!queries.has_labels() || !database.has_labels()) {
    throw InvalidArgument("evaluation needs label sets for queries and database");
  }
  if (queries.bits() != database.bits()) {
    throw ShapeError("query codes have " + std::to_string(queries.bits()) + " bits, database " +
                     std::to_string(database.bits()));
  }
}

// Per-item distance and relevance for one query, self-excluded.
struct Judged {
  std::vector<std::size_t> distance;
  std::vector<std::uint8_t> relevant;
  std::vector<ItemId> ids;
};

Judged judge(const RetrievalIndex& queries, std::size_t q, const RetrievalIndex& database,
             bool exclude_self) {
  const BinaryCode code = BinaryCode::from(queries.codes(), q);
  const ItemId qid = queries.ids()[q];
  const LabelSet& qlabels = queries.labels()[q];
  Judged j;
  j.distance.reserve(database.size());
  j.relevant.reserve(database.size());
  for (std::size_t i = 0; i < database.size(); ++i) {
    if (exclude_self && database.ids()[i] == qid) continue;
    j.distance.push_back(hamming_distance(database.codes().code(i), code.words));
    j.relevant.push_back(labels_overlap(qlabels, database.labels()[i]) ? 1 : 0);
    j.ids.push_back(database.ids()[i]);
  }
  return j;
}

}  // namespace

std::vector<std::uint8_t> ranked_relevance(const RetrievalIndex& queries, std::size_t q,
                                           const RetrievalIndex& database, bool exclude_self) {
  require_labels(queries, database);
  const Judged j = judge(queries, q, database, exclude_self);
  // Same order as rank(): distance, then identifier.
  std::vector<std::size_t> order(j.distance.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return j.distance[a] != j.distance[b] ? j.distance[a] < j.distance[b] : j.ids[a] < j.ids[b];
  });
  std::vector<std::uint8_t> rel(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) rel[r] = j.relevant[order[r]];
  return rel;
}

double mean_average_precision(const RetrievalIndex& queries, const RetrievalIndex& database,
                              const EvalOptions& options) {
  require_labels(queries, database);
  double sum = 0.0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto rel = ranked_relevance(queries, q, database, options.exclude_self);
    if (rel.empty()) continue;
    const std::size_t cap = std::min(options.r_cap.value_or(rel.size()), rel.size());
    sum += average_precision(rel, cap);
  }
  return sum / static_cast<double>(queries.size());
}

std::vector<PrPoint> precision_recall_curve(const RetrievalIndex& queries,
                                            const RetrievalIndex& database,
                                            const EvalOptions& options) {
  require_labels(queries, database);
  const std::size_t k = database.bits();
  std::vector<double> recall_sum(k + 1, 0.0);
  std::vector<double> precision_sum(k + 1, 0.0);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const Judged j = judge(queries, q, database, options.exclude_self);
    // Histogram by distance, then cumulative counts per radius.
    std::vector<std::size_t> retrieved_at(k + 1, 0);
    std::vector<std::size_t> relevant_at(k + 1, 0);
    std::size_t total_relevant = 0;
    for (std::size_t i = 0; i < j.distance.size(); ++i) {
      ++retrieved_at[j.distance[i]];
      relevant_at[j.distance[i]] += j.relevant[i];
      total_relevant += j.relevant[i];
    }
    std::size_t retrieved = 0;
    std::size_t relevant = 0;
    for (std::size_t r = 0; r <= k; ++r) {
      retrieved += retrieved_at[r];
      relevant += relevant_at[r];
      precision_sum[r] += retrieved == 0 ? 1.0 : static_cast<double>(relevant) / static_cast<double>(retrieved);
      recall_sum[r] += total_relevant == 0 ? 1.0
                                           : static_cast<double>(relevant) / static_cast<double>(total_relevant);
    }
  }
  const double nq = static_cast<double>(queries.size());
  std::vector<PrPoint> curve(k + 1);
  for (std::size_t r = 0; r <= k; ++r) curve[r] = {r, recall_sum[r] / nq, precision_sum[r] / nq};
  return curve;
}

std::vector<TopNPoint> topn_precision_curve(const RetrievalIndex& queries,
                                            const RetrievalIndex& database,
                                            std::span<const std::size_t> n_values,
                                            const EvalOptions& options) {
  require_labels(queries, database);
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    if (n_values[i] == 0 || n_values[i] > database.size()) {
      throw InvalidArgument("top-n value " + std::to_string(n_values[i]) + " outside [1, " +
                            std::to_string(database.size()) + "]");
    }
    if (i > 0 && n_values[i] <= n_values[i - 1]) {
      throw InvalidArgument("top-n values must be strictly ascending");
    }
  }
  std::vector<double> sums(n_values.size(), 0.0);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto rel = ranked_relevance(queries, q, database, options.exclude_self);
    std::size_t hits = 0;
    std::size_t pos = 0;
    for (std::size_t v = 0; v < n_values.size(); ++v) {
      const std::size_t n = std::min(n_values[v], rel.size());
      for (; pos < n; ++pos) hits += rel[pos];
      sums[v] += n == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(n);
    }
  }
  std::vector<TopNPoint> curve(n_values.size());
  for (std::size_t v = 0; v < n_values.size(); ++v) {
    curve[v] = {n_values[v], sums[v] / static_cast<double>(queries.size())};
  }
  return curve;
}

EvalReport evaluate(const RetrievalIndex& queries, const RetrievalIndex& database,
                    std::span<const std::size_t> n_values, const EvalOptions& options) {
  return {mean_average_precision(queries, database, options),
          precision_recall_curve(queries, database, options),
          topn_precision_curve(queries, database, n_values, options)};
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericError("cannot format value");
  return std::string(buf, ptr);
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_pr_curve(const std::filesystem::path& path, std::span<const PrPoint> curve) {
  auto out = open_csv(path);
  out << "radius,recall,precision\n";
  for (const auto& p : curve) {
    out << p.radius << ',' << format_real(p.recall) << ',' << format_real(p.precision) << '\n';
  }
}

void write_topn_curve(const std::filesystem::path& path, std::span<const TopNPoint> curve) {
  auto out = open_csv(path);
  out << "n,precision\n";
  for (const auto& p : curve) out << p.n << ',' << format_real(p.precision) << '\n';
}

void write_report(const std::filesystem::path& dir, const EvalReport& report) {
  std::filesystem::create_directories(dir);
  auto out = open_csv(dir / "map.csv");
  out << "map\n" << format_real(report.map) << '\n';
  write_pr_curve(dir / "pr_curve.csv", report.pr_curve);
  write_topn_curve(dir / "topn.csv", report.topn_curve);
}

}  // namespace tdh
