#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "reid/distance.hpp"
#include "reid/parallel.hpp"
#include "reid/types.hpp"

namespace reid {

namespace detail {

/// Neighbor bookkeeping over an n x n pairwise distance matrix: for every
/// point, the other points ordered by ascending (distance, index), plus the
/// inverse map rank_of(i, j) = 1-based position of j in i's order.
template <class Scalar>
struct NeighborOrder {
  std::vector<std::vector<int>> order;  // n rows of n-1 indices
  MatrixX<int> rank_of;                 // n x n, diagonal unused

  explicit NeighborOrder(const MatrixX<Scalar>& dist, int workers = 1) {
    const Index n = dist.rows();
    order.assign(static_cast<std::size_t>(n), {});
    rank_of.setZero(n, n);
    parallel_for(n, workers, [&](Index b, Index e) {
      for (Index i = b; i < e; ++i) {
        auto& ord = order[static_cast<std::size_t>(i)];
        ord.resize(static_cast<std::size_t>(n - 1));
        int w = 0;
        for (int j = 0; j < n; ++j)
          if (j != i) ord[static_cast<std::size_t>(w++)] = j;
        std::sort(ord.begin(), ord.end(), [&](int a, int c) {
          if (dist(i, a) != dist(i, c)) return dist(i, a) < dist(i, c);
          return a < c;
        });
        for (std::size_t r = 0; r < ord.size(); ++r)
          rank_of(i, ord[r]) = static_cast<int>(r) + 1;
      }
    });
  }

  /// Mutual top-k set of `probe`, ascending index order.
  std::vector<int> reciprocal(int probe, int k) const {
    std::vector<int> r;
    const auto& ord = order[static_cast<std::size_t>(probe)];
    const int take = std::min<int>(k, static_cast<int>(ord.size()));
    for (int t = 0; t < take; ++t) {
      const int x = ord[static_cast<std::size_t>(t)];
      if (rank_of(x, probe) <= k) r.push_back(x);
    }
    std::sort(r.begin(), r.end());
    return r;
  }

  /// reciprocal(probe, k) grown by the half-k expansion rule: a member's
  /// k/2-reciprocal set is merged in when at least two thirds of it already
  /// lies inside the base set.
  std::vector<int> expanded_reciprocal(int probe, int k) const {
    const std::vector<int> base = reciprocal(probe, k);
    std::vector<int> result = base;
    const int half = k / 2;
    if (half >= 1) {
      for (int x : base) {
        const std::vector<int> cand = reciprocal(x, half);
        std::size_t overlap = 0;
        for (int c : cand)
          if (std::binary_search(base.begin(), base.end(), c)) ++overlap;
        if (3 * overlap >= 2 * cand.size())
          result.insert(result.end(), cand.begin(), cand.end());
      }
    }
    std::sort(result.begin(), result.end());
    result.erase(std::unique(result.begin(), result.end()), result.end());
    return result;
  }
};

template <class Scalar>
void check_rerank_params(const RerankParams& p, Index n_union) {
  if (!(p.k2 >= 1 && p.k2 <= p.k1 && p.k1 < n_union))
    throw ParamError("rerank: need 1 <= k2 <= k1 < n_query + n_gallery, got k1=" +
                     std::to_string(p.k1) + " k2=" + std::to_string(p.k2) +
                     " union=" + std::to_string(n_union));
  if (!(p.lambda >= 0.0 && p.lambda <= 1.0))
    throw ParamError("rerank: lambda must lie in [0, 1]");
}

}  // namespace detail

/// Expanded k-reciprocal neighborhood of one probe over a union pairwise
/// distance matrix. The probe is excluded from its own top-k; ties break by
/// ascending index. Returned sorted ascending.
template <class Scalar>
std::vector<int> k_reciprocal_neighbors(const ScoreMatrixT<Scalar>& all_dist,
                                        int probe, int k) {
  if (all_dist.polarity != Polarity::distance)
    throw ParamError("k_reciprocal_neighbors: expected a distance matrix");
  const Index n = all_dist.values.rows();
  if (all_dist.values.cols() != n)
    throw ShapeError("k_reciprocal_neighbors: matrix must be square over the union set");
  if (probe < 0 || probe >= n)
    throw ParamError("k_reciprocal_neighbors: probe out of range");
  if (k < 1 || k >= n)
    throw ParamError("k_reciprocal_neighbors: k out of range, need 1 <= k < " +
                     std::to_string(n));
  detail::NeighborOrder<Scalar> nb(all_dist.values);
  return nb.expanded_reciprocal(probe, k);
}

/// k-reciprocal re-ranking of the query-gallery retrieval.
///
/// Works on the Euclidean distance matrix over the concatenated query+gallery
/// set. Every point gets an encoding vector holding exp(-d) over its expanded
/// k1-reciprocal neighborhood, L1-normalized, then smoothed by averaging the
/// vectors of its k2 nearest points (itself included). The output blends the
/// Jaccard distance between encoding vectors with the original distance:
///   d* = (1 - lambda) * d_jaccard + lambda * d_original.
template <class Scalar>
ScoreMatrixT<Scalar> k_reciprocal_rerank(const EmbeddingSetT<Scalar>& q,
                                         const EmbeddingSetT<Scalar>& g,
                                         const RerankParams& params,
                                         int workers = 1) {
  detail::check_same_dim(q, g);
  const Index nq = q.n_images();
  const Index ng = g.n_images();
  const Index n = nq + ng;
  detail::check_rerank_params<Scalar>(params, n);

  MatrixX<Scalar> uni(n, q.dim());
  uni.topRows(nq) = q.data;
  uni.bottomRows(ng) = g.data;

  // (i, j) and (j, i) evaluate the same expression, so the matrix is exactly
  // symmetric and safe to fill row-parallel.
  MatrixX<Scalar> dist(n, n);
  parallel_for(n, workers, [&](Index b, Index e) {
    for (Index i = b; i < e; ++i)
      for (Index j = 0; j < n; ++j)
        dist(i, j) = (uni.row(i) - uni.row(j)).norm();
  });

  detail::NeighborOrder<Scalar> nb(dist, workers);

  MatrixX<Scalar> enc = MatrixX<Scalar>::Zero(n, n);
  parallel_for(n, workers, [&](Index b, Index e) {
    for (Index i = b; i < e; ++i) {
      const std::vector<int> reach = nb.expanded_reciprocal(static_cast<int>(i), params.k1);
      Scalar total = 0;
      for (int x : reach) {
        const Scalar w = std::exp(-dist(i, x));
        enc(i, x) = w;
        total += w;
      }
      if (total > Scalar(0)) enc.row(i) /= total;
    }
  });

  // Local query expansion: replace each encoding vector by the mean over the
  // point itself and its k2 - 1 nearest neighbors.
  MatrixX<Scalar> smoothed;
  if (params.k2 > 1) {
    smoothed.setZero(n, n);
    parallel_for(n, workers, [&](Index b, Index e) {
      for (Index i = b; i < e; ++i) {
        smoothed.row(i) = enc.row(i);
        const auto& ord = nb.order[static_cast<std::size_t>(i)];
        for (int t = 0; t < params.k2 - 1; ++t)
          smoothed.row(i) += enc.row(ord[static_cast<std::size_t>(t)]);
        smoothed.row(i) /= Scalar(params.k2);
      }
    });
  } else {
    smoothed = std::move(enc);
  }

  ScoreMatrixT<Scalar> out{MatrixX<Scalar>(nq, ng), Polarity::distance};
  const Scalar lam = static_cast<Scalar>(params.lambda);
  parallel_for(nq, workers, [&](Index b, Index e) {
    for (Index i = b; i < e; ++i) {
      for (Index j = 0; j < ng; ++j) {
        Scalar min_sum = 0;
        Scalar max_sum = 0;
        for (Index x = 0; x < n; ++x) {
          min_sum += std::min(smoothed(i, x), smoothed(nq + j, x));
          max_sum += std::max(smoothed(i, x), smoothed(nq + j, x));
        }
        // max_sum is 0 only when both encodings are empty; count that as
        // maximally distant rather than dividing by zero.
        const Scalar jac =
            max_sum > Scalar(0) ? Scalar(1) - min_sum / max_sum : Scalar(1);
        out.values(i, j) = (Scalar(1) - lam) * jac + lam * dist(i, nq + j);
      }
    }
  });
  return out;
}

}  // namespace reid
