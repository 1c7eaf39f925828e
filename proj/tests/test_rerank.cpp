#include <doctest.h>

#include <random>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "reid/camera_logic.hpp"
#include "reid/rerank.hpp"

using namespace reid;

namespace {

EmbeddingSetT<double> wrap(Matd m) { return {std::move(m), ""}; }

// square union distance matrix over stacked query+gallery rows
ScoreMatrixT<double> union_distances(const Matd& pts) {
  Matd d(pts.rows(), pts.rows());
  for (Index i = 0; i < pts.rows(); ++i)
    for (Index j = 0; j < pts.rows(); ++j) d(i, j) = (pts.row(i) - pts.row(j)).norm();
  return {std::move(d), Polarity::distance};
}

}  // namespace

TEST_CASE("expanded reciprocal neighborhood on a hand-built line") {
  // five points on a line: 0-1-2 tightly packed, 3-4 far away
  Matd pts(5, 1);
  pts << 0.0, 1.0, 2.0, 10.0, 11.0;
  const auto dist = union_distances(pts);

  // k=1: 1 is equidistant to 0 and 2; the index tiebreak points it at 0,
  // making 0-1 mutual and leaving 2 with no reciprocal neighbor at all
  CHECK(k_reciprocal_neighbors(dist, 0, 1) == std::vector<int>{1});
  CHECK(k_reciprocal_neighbors(dist, 1, 1) == std::vector<int>{0});
  CHECK(k_reciprocal_neighbors(dist, 2, 1).empty());
  // 3 and 4 are mutual nearest
  CHECK(k_reciprocal_neighbors(dist, 3, 1) == std::vector<int>{4});
  // k=2 makes the left cluster fully mutual
  CHECK(k_reciprocal_neighbors(dist, 0, 2) == std::vector<int>{1, 2});
}

TEST_CASE("expanded reciprocal neighborhood matches the set-comprehension oracle") {
  std::mt19937_64 eng(21);
  for (int it = 0; it < 30; ++it) {
    const Index n = oracles::uniform_int(eng, 4, 14);
    const Matd pts = oracles::random_matrix(eng, n, 3);
    const auto dist = union_distances(pts);

    std::vector<std::vector<double>> d(static_cast<std::size_t>(n),
                                       std::vector<double>(static_cast<std::size_t>(n)));
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = dist.values(i, j);

    const int probe = oracles::uniform_int(eng, 0, static_cast<int>(n) - 1);
    const int k = oracles::uniform_int(eng, 1, static_cast<int>(n) - 1);
    const std::vector<int> got = k_reciprocal_neighbors(dist, probe, k);
    const std::set<int> want = oracles::expanded_set(d, probe, k);
    CHECK(std::set<int>(got.begin(), got.end()) == want);
    CHECK(std::is_sorted(got.begin(), got.end()));
  }
}

TEST_CASE("k_reciprocal_neighbors validates its arguments") {
  Matd pts(4, 1);
  pts << 0, 1, 2, 3;
  const auto dist = union_distances(pts);
  CHECK_THROWS_AS(k_reciprocal_neighbors(dist, -1, 2), ParamError);
  CHECK_THROWS_AS(k_reciprocal_neighbors(dist, 4, 2), ParamError);
  CHECK_THROWS_AS(k_reciprocal_neighbors(dist, 0, 0), ParamError);
  CHECK_THROWS_AS(k_reciprocal_neighbors(dist, 0, 4), ParamError);

  ScoreMatrixT<double> sim = dist;
  sim.polarity = Polarity::similarity;
  CHECK_THROWS_AS(k_reciprocal_neighbors(sim, 0, 2), ParamError);

  ScoreMatrixT<double> rect{Matd::Zero(2, 3), Polarity::distance};
  CHECK_THROWS_AS(k_reciprocal_neighbors(rect, 0, 1), ShapeError);
}

TEST_CASE("re-ranking matches the sparse-set reference on seeded instances") {
  std::mt19937_64 eng(22);
  for (int it = 0; it < 20; ++it) {
    const Index nq = oracles::uniform_int(eng, 2, 8);
    const Index ng = oracles::uniform_int(eng, 4, 16);
    const auto q = wrap(oracles::random_matrix(eng, nq, 4));
    const auto g = wrap(oracles::random_matrix(eng, ng, 4));
    RerankParams p;
    p.k1 = oracles::uniform_int(eng, 2, 5);
    p.k2 = oracles::uniform_int(eng, 1, p.k1);
    p.lambda = oracles::uniform_real(eng, 0.0, 1.0);

    const auto got = k_reciprocal_rerank(q, g, p);
    CHECK(got.polarity == Polarity::distance);
    const Matd want = oracles::naive_rerank(q.data, g.data, p);
    CHECK((got.values - want).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("lambda 1 returns the original distances untouched") {
  std::mt19937_64 eng(23);
  const auto q = wrap(oracles::random_matrix(eng, 5, 4));
  const auto g = wrap(oracles::random_matrix(eng, 9, 4));
  RerankParams p;
  p.k1 = 4;
  p.k2 = 2;
  p.lambda = 1.0;
  const auto got = k_reciprocal_rerank(q, g, p);
  const auto want = euclidean_distance(q, g);
  CHECK((got.values.array() == want.values.array()).all());
}

TEST_CASE("re-ranking is bit-identical for any worker count") {
  std::mt19937_64 eng(24);
  const auto q = wrap(oracles::random_matrix(eng, 6, 4));
  const auto g = wrap(oracles::random_matrix(eng, 13, 4));
  RerankParams p;
  p.k1 = 5;
  p.k2 = 3;
  const auto one = k_reciprocal_rerank(q, g, p, 1);
  for (int workers : {2, 4, 8}) {
    const auto many = k_reciprocal_rerank(q, g, p, workers);
    CHECK((one.values.array() == many.values.array()).all());
  }
}

TEST_CASE("re-ranking parameter validation") {
  const auto q = wrap(Matd::Ones(2, 3) + Matd::Random(2, 3));
  const auto g = wrap(Matd::Ones(4, 3) + Matd::Random(4, 3));
  RerankParams p;

  p.k1 = 2, p.k2 = 3;  // k2 > k1
  CHECK_THROWS_AS(k_reciprocal_rerank(q, g, p), ParamError);
  p.k1 = 6, p.k2 = 2;  // k1 >= union size
  CHECK_THROWS_AS(k_reciprocal_rerank(q, g, p), ParamError);
  p.k1 = 3, p.k2 = 0;  // k2 < 1
  CHECK_THROWS_AS(k_reciprocal_rerank(q, g, p), ParamError);
  p.k1 = 3, p.k2 = 2, p.lambda = -0.1;
  CHECK_THROWS_AS(k_reciprocal_rerank(q, g, p), ParamError);
  p.lambda = 1.5;
  CHECK_THROWS_AS(k_reciprocal_rerank(q, g, p), ParamError);

  const auto bad = wrap(Matd::Ones(2, 4));
  CHECK_THROWS_AS(k_reciprocal_rerank(q, bad, RerankParams{}), ShapeError);
}

TEST_CASE("re-ranking keeps separable clusters separable") {
  // three tight identity clusters; the first member of each is the query
  std::mt19937_64 eng(25);
  Matd centers(3, 4);
  for (Index c = 0; c < 3; ++c)
    for (Index k = 0; k < 4; ++k) centers(c, k) = oracles::uniform_real(eng, -1, 1);

  Matd qpts(3, 4), gpts(9, 4);
  for (Index c = 0; c < 3; ++c) {
    for (Index k = 0; k < 4; ++k)
      qpts(c, k) = centers(c, k) + 0.01 * oracles::unit_gaussian(eng);
    for (Index m = 0; m < 3; ++m)
      for (Index k = 0; k < 4; ++k)
        gpts(3 * c + m, k) = centers(c, k) + 0.01 * oracles::unit_gaussian(eng);
  }

  RerankParams p;
  p.k1 = 4;
  p.k2 = 2;
  const auto rr = k_reciprocal_rerank(wrap(qpts), wrap(gpts), p);

  // per query, all three cluster mates must outrank every outsider
  ScoreMatrixT<double> sim{-rr.values, Polarity::similarity};
  const RankList ranks = rank_from_scores(sim);
  for (Index c = 0; c < 3; ++c) {
    std::set<int> top(ranks.row(c).begin(), ranks.row(c).begin() + 3);
    const std::set<int> want{static_cast<int>(3 * c), static_cast<int>(3 * c + 1),
                             static_cast<int>(3 * c + 2)};
    CHECK(top == want);
  }
}
