#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "rmsh/error.hpp"
#include "rmsh/packed_codes.hpp"
#include "rmsh/rng.hpp"
#include "rmsh/similarity.hpp"
#include "test_util.hpp"

using namespace rmsh;
using testutil::TempDir;
using testutil::make_labels;

namespace {

Eigen::MatrixXd random_sign_rows(std::size_t n, int k, Rng& rng) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), k);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.bernoulli(0.5) ? 1.0 : -1.0;
  return m;
}

int naive_row_distance(const Eigen::MatrixXd& rows, Eigen::Index a, Eigen::Index b) {
  int d = 0;
  for (Eigen::Index j = 0; j < rows.cols(); ++j) d += rows(a, j) != rows(b, j) ? 1 : 0;
  return d;
}

}  // namespace

TEST_CASE("pack round-trips sign matrices and defaults the identifiers") {
  Rng rng(21);
  Eigen::MatrixXd codes = random_sign_rows(7, 13, rng);
  PackedCodes packed = pack(codes);
  CHECK(packed.code_bits() == 13);
  CHECK(packed.count() == 7);
  CHECK(packed.words_per_code() == 1);
  for (std::size_t n = 0; n < 7; ++n) {
    CHECK(packed.id(n) == std::to_string(n));
    Eigen::VectorXd row = packed.unpack(n);
    REQUIRE(row.size() == 13);
    for (int j = 0; j < 13; ++j) CHECK(row(j) == codes(static_cast<Eigen::Index>(n), j));
  }
}

TEST_CASE("pack rejects entries other than +1 and -1") {
  Eigen::MatrixXd codes = Eigen::MatrixXd::Ones(3, 4);
  codes(1, 2) = 0.0;
  try {
    pack(codes);
    FAIL("expected a validation error");
  } catch (const Error& e) {
    const std::string what = e.what();
    CHECK(what.find("row 1") != std::string::npos);
    CHECK(what.find("bit 2") != std::string::npos);
  }
  Eigen::MatrixXd empty;
  CHECK_THROWS_AS(pack(empty), Error);
  CHECK_THROWS_AS(pack(Eigen::MatrixXd::Ones(2, 2), {"only-one"}), Error);
}

TEST_CASE("hamming pinned case and validation") {
  Eigen::MatrixXd codes(2, 4);
  codes << 1, -1, 1, 1,  //
      -1, -1, 1, -1;
  PackedCodes packed = pack(codes);
  CHECK(hamming(packed, 0, packed, 1) == 2);
  CHECK(hamming(packed, 0, packed, 0) == 0);
  CHECK(hamming(packed.code(0), packed.code(1)) == 2);

  PackedCodes longer = pack(Eigen::MatrixXd::Ones(1, 5));
  CHECK_THROWS_AS(hamming(packed, 0, longer, 0), Error);
  std::vector<std::uint64_t> one_word{0}, two_words{0, 0};
  CHECK_THROWS_AS(hamming(std::span<const std::uint64_t>(one_word),
                          std::span<const std::uint64_t>(two_words)),
                  Error);
}

TEST_CASE("codes wider than one word pack with clean padding") {
  const int k = 70;
  Eigen::MatrixXd codes = Eigen::MatrixXd::Ones(2, k);
  for (int j : {0, 63, 64, 69}) codes(1, j) = -1.0;
  PackedCodes packed = pack(codes);
  CHECK(packed.words_per_code() == 2);
  CHECK(hamming(packed, 0, packed, 1) == 4);
  // Bits beyond position 69 stay zero in the tail word.
  for (std::size_t n = 0; n < 2; ++n) {
    CHECK((packed.code(n)[1] >> 6) == 0);
    Eigen::VectorXd row = packed.unpack(n);
    for (int j = 0; j < k; ++j) CHECK(row(j) == codes(static_cast<Eigen::Index>(n), j));
  }

  Rng rng(9);
  Eigen::MatrixXd wide = random_sign_rows(5, k, rng);
  PackedCodes wide_packed = pack(wide);
  for (Eigen::Index a = 0; a < 5; ++a)
    for (Eigen::Index b = 0; b < 5; ++b) {
      CHECK(hamming(wide_packed, static_cast<std::size_t>(a), wide_packed,
                    static_cast<std::size_t>(b)) == naive_row_distance(wide, a, b));
    }
}

TEST_CASE("identifier lookup finds rows and names missing ids") {
  PackedCodes packed = pack(Eigen::MatrixXd::Ones(3, 4), {"query-7", "query-3", "query-9"});
  CHECK(packed.index_of("query-3") == 1);
  CHECK(packed.index_of("query-7") == 0);
  try {
    packed.index_of("query-4");
    FAIL("expected a lookup error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("query-4") != std::string::npos);
  }
}

TEST_CASE("search breaks distance ties by ascending identifier") {
  // Four identical codes: every distance ties, so ordering is purely the id
  // strings, which compare lexicographically ("10" before "2").
  Eigen::MatrixXd codes = Eigen::MatrixXd::Ones(4, 8);
  PackedCodes packed = pack(codes, {"2", "10", "1", "0"});
  std::vector<std::uint64_t> query(packed.code(0).begin(), packed.code(0).end());

  SearchResult all = search_topk(packed, query, 8, 10);
  REQUIRE(all.hits.size() == 4);
  CHECK(all.hits[0].id == "0");
  CHECK(all.hits[1].id == "1");
  CHECK(all.hits[2].id == "10");
  CHECK(all.hits[3].id == "2");
  for (const SearchHit& hit : all.hits) CHECK(hit.distance == 0);

  SearchResult top2 = search_topk(packed, query, 8, 2);
  REQUIRE(top2.hits.size() == 2);
  CHECK(top2.hits[0].id == "0");
  CHECK(top2.hits[1].id == "1");

  CHECK_THROWS_AS(search_topk(packed, query, 8, 0), Error);
  CHECK_THROWS_AS(search_topk(packed, query, 7, 2), Error);
}

TEST_CASE("search agrees with a naive sorted scan") {
  Rng rng(33);
  const int k = 16;
  Eigen::MatrixXd db = random_sign_rows(20, k, rng);
  Eigen::MatrixXd queries = random_sign_rows(4, k, rng);
  PackedCodes index = pack(db);

  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    PackedCodes one = pack(queries.row(q).eval());
    std::vector<std::uint64_t> query(one.code(0).begin(), one.code(0).end());

    std::vector<std::pair<int, std::string>> naive;
    for (Eigen::Index i = 0; i < db.rows(); ++i) {
      int d = 0;
      for (int j = 0; j < k; ++j) d += db(i, j) != queries(q, j) ? 1 : 0;
      naive.emplace_back(d, std::to_string(i));
    }
    std::sort(naive.begin(), naive.end());

    SearchResult got = search_topk(index, query, k, 20);
    REQUIRE(got.hits.size() == naive.size());
    for (std::size_t r = 0; r < naive.size(); ++r) {
      CHECK(got.hits[r].distance == naive[r].first);
      CHECK(got.hits[r].id == naive[r].second);
    }
  }
}

TEST_CASE("rank_all is a permutation ordered by distance") {
  Rng rng(55);
  Eigen::MatrixXd db = random_sign_rows(12, 10, rng);
  PackedCodes index = pack(db);
  PackedCodes probe = pack(random_sign_rows(1, 10, rng));
  std::vector<std::uint64_t> query(probe.code(0).begin(), probe.code(0).end());

  std::vector<std::size_t> order = rank_all(index, query, 10);
  std::vector<std::size_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(order.size());
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(sorted == iota);
  for (std::size_t r = 1; r < order.size(); ++r) {
    const int prev = hamming(index.code(order[r - 1]), query);
    const int cur = hamming(index.code(order[r]), query);
    CHECK(prev <= cur);
    if (prev == cur) CHECK(index.id(order[r - 1]) < index.id(order[r]));
  }
}

TEST_CASE("code files round-trip exactly") {
  TempDir tmp("codes");
  Rng rng(70);
  Eigen::MatrixXd codes = random_sign_rows(4, 70, rng);
  PackedCodes packed = pack(codes, {"a", "item-with-a-long-name", "", "d"});
  const std::string path = tmp.file("roundtrip.codes");
  save_codes(path, packed);

  PackedCodes loaded = load_codes(path);
  CHECK(loaded.code_bits() == packed.code_bits());
  CHECK(loaded.count() == packed.count());
  CHECK(loaded.ids() == packed.ids());
  for (std::size_t n = 0; n < packed.count(); ++n) {
    CHECK(std::equal(loaded.code(n).begin(), loaded.code(n).end(), packed.code(n).begin()));
  }

  // Saving the loaded copy reproduces the file byte for byte.
  const std::string again = tmp.file("again.codes");
  save_codes(again, loaded);
  CHECK(testutil::slurp(again) == testutil::slurp(path));
}

TEST_CASE("code file loader rejects damaged files") {
  TempDir tmp("codes_bad");
  PackedCodes packed = pack(Eigen::MatrixXd::Ones(2, 70), {"x", "y"});
  const std::string path = tmp.file("good.codes");
  save_codes(path, packed);
  const std::string bytes = testutil::slurp(path);

  CHECK_THROWS_AS(load_codes(tmp.file("missing.codes")), Error);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  testutil::spit(tmp.file("magic.codes"), bad_magic);
  CHECK_THROWS_AS(load_codes(tmp.file("magic.codes")), Error);

  testutil::spit(tmp.file("short.codes"), bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(load_codes(tmp.file("short.codes")), Error);

  testutil::spit(tmp.file("trailing.codes"), bytes + "!");
  CHECK_THROWS_AS(load_codes(tmp.file("trailing.codes")), Error);

  // Header is 8 magic + 4 code_bits + 8 count bytes; the tail word of code 0
  // starts 8 bytes later, and its top byte holds padding bits 120..127.
  std::string dirty = bytes;
  dirty[8 + 4 + 8 + 8 + 7] = static_cast<char>(0x80);
  testutil::spit(tmp.file("dirty.codes"), dirty);
  CHECK_THROWS_AS(load_codes(tmp.file("dirty.codes")), Error);
}

TEST_CASE("distance histogram pinned case") {
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 1, 1,  //
      -1, 1;
  b << 1, 1,  //
      -1, -1;
  PackedCodes pa = pack(a), pb = pack(b);
  LabelMatrix la = make_labels(2, {{0}, {1}});
  LabelMatrix lb = make_labels(2, {{0}, {1}});
  SimilarityMatrix sim = build_similarity(la, lb);

  DistanceHistogram hist = distance_histogram(pa, pb, sim, {0.0, 0.5, 1.0});
  REQUIRE(hist.counts.size() == 3);
  for (const auto& bucket : hist.counts) REQUIRE(bucket.size() == 3);

  // Distances: (0,0)=0 s=1; (0,1)=2 s=0; (1,0)=1 s=0; (1,1)=1 s=1.
  CHECK(hist.counts[0][1] == 1);
  CHECK(hist.counts[0][2] == 1);
  CHECK(hist.counts[1] == std::vector<std::uint64_t>{0, 0, 0});
  CHECK(hist.counts[2][0] == 1);
  CHECK(hist.counts[2][1] == 1);
  CHECK(hist.total() == 4);
}

TEST_CASE("distance histogram validates shapes and edges") {
  PackedCodes pa = pack(Eigen::MatrixXd::Ones(2, 4));
  PackedCodes pb = pack(Eigen::MatrixXd::Ones(2, 4));
  PackedCodes wide = pack(Eigen::MatrixXd::Ones(2, 5));
  LabelMatrix labels = make_labels(2, {{0}, {1}});
  SimilarityMatrix sim = build_similarity(labels, labels);

  CHECK_THROWS_AS(distance_histogram(pa, wide, sim, {0.0, 1.0}), Error);
  CHECK_THROWS_AS(distance_histogram(pa, pb, sim, {}), Error);
  CHECK_THROWS_AS(distance_histogram(pa, pb, sim, {0.5, 0.25, 1.0}), Error);
  CHECK_THROWS_AS(distance_histogram(pa, pb, sim, {0.0, 0.5}), Error);
  SimilarityMatrix small = build_similarity(make_labels(2, {{0}}), labels);
  CHECK_THROWS_AS(distance_histogram(pa, pb, small, {0.0, 1.0}), Error);
}
