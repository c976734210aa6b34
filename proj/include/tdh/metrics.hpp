#pragma once

// Hamming-ranking and hash-lookup evaluation: AP/MAP, precision-recall over
// Hamming radius, and precision at the top n. An item is relevant to a query
// when their label sets share at least one label.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "tdh/retrieval.hpp"

namespace tdh {

struct EvalOptions {
  // Ranked-list cut-off for AP; the whole (self-excluded) list when empty.
  std::optional<std::size_t> r_cap;
  // Drop database items whose identifier equals the query's.
  bool exclude_self = true;
};

struct PrPoint {
  std::size_t radius = 0;
  double recall = 0.0;
  double precision = 0.0;
};

struct TopNPoint {
  std::size_t n = 0;
  double precision = 0.0;
};

struct EvalReport {
  double map = 0.0;
  std::vector<PrPoint> pr_curve;
  std::vector<TopNPoint> topn_curve;
};

// AP = (1/N) sum_{r <= r_cap} precision@r * rel(r), N relevant items within
// the cap. Zero when nothing relevant is retrieved.
double average_precision(std::span<const std::uint8_t> ranked_relevance, std::size_t r_cap);

// Relevance of the ranked list for query `q` (after self exclusion).
std::vector<std::uint8_t> ranked_relevance(const RetrievalIndex& queries, std::size_t q,
                                           const RetrievalIndex& database, bool exclude_self);

// Queries and database both need label sets.
double mean_average_precision(const RetrievalIndex& queries, const RetrievalIndex& database,
                              const EvalOptions& options = {});

// One point per radius 0..k, averaged over queries. A query whose radius-r
// set is empty contributes precision 1; one with no relevant items anywhere
// contributes recall 1.
std::vector<PrPoint> precision_recall_curve(const RetrievalIndex& queries,
                                            const RetrievalIndex& database,
                                            const EvalOptions& options = {});

// n_values must be ascending, each in [1, database size].
std::vector<TopNPoint> topn_precision_curve(const RetrievalIndex& queries,
                                            const RetrievalIndex& database,
                                            std::span<const std::size_t> n_values,
                                            const EvalOptions& options = {});

EvalReport evaluate(const RetrievalIndex& queries, const RetrievalIndex& database,
                    std::span<const std::size_t> n_values, const EvalOptions& options = {});

// Writes map.csv, pr_curve.csv and topn.csv into `dir`.
void write_report(const std::filesystem::path& dir, const EvalReport& report);
void write_pr_curve(const std::filesystem::path& path, std::span<const PrPoint> curve);
void write_topn_curve(const std::filesystem::path& path, std::span<const TopNPoint> curve);

// Shortest decimal text that parses back to the same double.
std::string format_real(double v);

}  // namespace tdh
