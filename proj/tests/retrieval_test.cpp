#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>
#include <random>

#include "tdh/error.hpp"
#include "tdh/retrieval.hpp"
#include "test_support.hpp"

namespace tdh {
namespace {

using testing::full_sort_rank;
using testing::inner_product_distance;
using testing::random_codes;
using testing::random_labels;
using testing::random_matrix;

std::vector<ItemId> shuffled_ids(std::size_t n, std::mt19937_64& rng) {
  std::vector<ItemId> ids(n);
  std::iota(ids.begin(), ids.end(), ItemId{1000});
  std::shuffle(ids.begin(), ids.end(), rng);
  return ids;
}

TEST(Hamming, MatchesInnerProductForm) {
  std::mt19937_64 rng(21);
  for (std::size_t k : {1u, 16u, 64u, 100u, 128u}) {
    const CodeMatrix a = random_codes(k, 12, rng);
    for (std::size_t i = 0; i < a.count(); ++i) {
      for (std::size_t j = 0; j < a.count(); ++j) {
        EXPECT_EQ(hamming_distance(BinaryCode::from(a, i), BinaryCode::from(a, j)),
                  inner_product_distance(a, i, a, j));
      }
    }
  }
}

TEST(Hamming, MetricProperties) {
  std::mt19937_64 rng(22);
  const CodeMatrix c = random_codes(40, 15, rng);
  std::vector<BinaryCode> codes;
  for (std::size_t i = 0; i < c.count(); ++i) codes.push_back(BinaryCode::from(c, i));
  for (const auto& a : codes) {
    EXPECT_EQ(hamming_distance(a, a), 0u);
    for (const auto& b : codes) {
      EXPECT_EQ(hamming_distance(a, b), hamming_distance(b, a));
      EXPECT_LE(hamming_distance(a, b), 40u);
      for (const auto& x : codes) {
        EXPECT_LE(hamming_distance(a, b), hamming_distance(a, x) + hamming_distance(x, b));
      }
    }
  }
}

TEST(Hamming, LengthMismatchThrows) {
  std::mt19937_64 rng(23);
  const CodeMatrix a = random_codes(8, 1, rng);
  const CodeMatrix b = random_codes(9, 1, rng);
  EXPECT_THROW(hamming_distance(BinaryCode::from(a, 0), BinaryCode::from(b, 0)), ShapeError);
}

TEST(BinaryCode, PackedAndMatrixAgree) {
  std::mt19937_64 rng(24);
  const CodeMatrix c = random_codes(70, 5, rng);
  const PackedCodes packed = PackedCodes::from(c);
  for (std::size_t i = 0; i < c.count(); ++i) EXPECT_EQ(BinaryCode::from(packed, i), BinaryCode::from(c, i));
}

TEST(Rank, MatchesFullSortOracle) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t k = trial % 2 == 0 ? 8 : 32;
    const CodeMatrix db = random_codes(k, 200, rng);
    const CodeMatrix queries = random_codes(k, 5, rng);
    const auto ids = shuffled_ids(200, rng);
    const RetrievalIndex index(PackedCodes::from(db), ids);
    for (std::size_t q = 0; q < queries.count(); ++q) {
      const auto expected = full_sort_rank(db, ids, queries, q);
      const BinaryCode query = BinaryCode::from(queries, q);
      EXPECT_EQ(rank(index, query), expected);
      for (std::size_t top : {1u, 10u, 57u, 200u, 500u}) {
        const auto got = rank(index, query, top);
        const std::vector<Hit> want(expected.begin(), expected.begin() + std::min<std::size_t>(top, 200));
        EXPECT_EQ(got, want) << "top " << top;
      }
    }
  }
}

TEST(Rank, DistancesInIndexOrder) {
  std::mt19937_64 rng(26);
  const CodeMatrix db = random_codes(12, 30, rng);
  const CodeMatrix queries = random_codes(12, 1, rng);
  const RetrievalIndex index(PackedCodes::from(db), shuffled_ids(30, rng));
  const auto d = distances(index, BinaryCode::from(queries, 0));
  for (std::size_t i = 0; i < db.count(); ++i) EXPECT_EQ(d[i], inner_product_distance(db, i, queries, 0));
}

TEST(RetrievalIndex, ValidatesInputs) {
  std::mt19937_64 rng(27);
  const PackedCodes codes = PackedCodes::from(random_codes(8, 3, rng));
  EXPECT_THROW(RetrievalIndex(codes, {1, 2}), InvalidArgument);
  EXPECT_THROW(RetrievalIndex(codes, {1, 2, 1}), InvalidArgument);
  EXPECT_THROW(RetrievalIndex(codes, {1, 2, 3}, {{0}}), InvalidArgument);
  EXPECT_NO_THROW(RetrievalIndex(codes, {1, 2, 3}, {{0}, {1}, {0, 1}}));
}

TEST(OutOfSample, MatrixAndSingleItemAgree) {
  std::mt19937_64 rng(28);
  const EncoderParams params = init_encoder({6, {10}, 12, Activation::tanh}, 5);
  const Matrix items = random_matrix(6, 9, rng, 3.0);
  const CodeMatrix all = encode_out_of_sample(params, items);
  EXPECT_EQ(all, sign_matrix(encode(params, items)));
  for (std::size_t i = 0; i < items.cols(); ++i) {
    const auto column = items.col(i);
    EXPECT_EQ(encode_out_of_sample(params, column), BinaryCode::from(all, i));
  }
}

TEST(OutOfSample, BuildIndexUsesEncoder) {
  std::mt19937_64 rng(29);
  const EncoderParams params = init_encoder({4, {}, 8, Activation::tanh}, 3);
  const Matrix items = random_matrix(4, 6, rng);
  const RetrievalIndex index = build_index(params, items, {10, 11, 12, 13, 14, 15});
  EXPECT_EQ(index.codes(), PackedCodes::from(encode_out_of_sample(params, items)));
}

TEST(IndexFiles, RoundTrip) {
  std::mt19937_64 rng(30);
  const auto dir = std::filesystem::path(::testing::TempDir()) / "tdh_index_roundtrip";
  std::filesystem::remove_all(dir);
  const RetrievalIndex labelled(PackedCodes::from(random_codes(20, 7, rng)), shuffled_ids(7, rng),
                                random_labels(7, 3, rng));
  save_index(dir, labelled);
  const RetrievalIndex back = load_index(dir);
  EXPECT_EQ(back.codes(), labelled.codes());
  EXPECT_EQ(back.ids(), labelled.ids());
  EXPECT_EQ(back.labels(), labelled.labels());

  const RetrievalIndex bare(PackedCodes::from(random_codes(5, 4, rng)), {4, 3, 2, 1});
  save_index(dir, bare);
  const RetrievalIndex bare_back = load_index(dir);
  EXPECT_EQ(bare_back.ids(), bare.ids());
  EXPECT_FALSE(bare_back.has_labels());
  std::filesystem::remove_all(dir);
}

TEST(IndexFiles, MissingDirectoryIsIoError) {
  EXPECT_THROW(load_index("/nonexistent/tdh/index"), IoError);
}

}  // namespace
}  // namespace tdh
