#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "reid/parallel.hpp"
#include "reid/types.hpp"

namespace reid {

namespace detail {

template <class Scalar>
void check_same_dim(const EmbeddingSetT<Scalar>& q, const EmbeddingSetT<Scalar>& g) {
  if (q.dim() != g.dim())
    throw ShapeError("embedding dim mismatch: query " + std::to_string(q.dim()) +
                     " vs gallery " + std::to_string(g.dim()));
}

}  // namespace detail

/// Dot-product similarity between row-normalized embedding sets.
///
/// Each entry is evaluated as an independent row-dot so the result does not
/// depend on the worker count.
template <class Scalar>
ScoreMatrixT<Scalar> cosine_similarity(const EmbeddingSetT<Scalar>& q,
                                       const EmbeddingSetT<Scalar>& g,
                                       int workers = 1) {
  detail::check_same_dim(q, g);
  ScoreMatrixT<Scalar> out{MatrixX<Scalar>(q.n_images(), g.n_images()),
                           Polarity::similarity};
  parallel_for(q.n_images(), workers, [&](Index b, Index e) {
    for (Index i = b; i < e; ++i)
      for (Index j = 0; j < g.n_images(); ++j)
        out.values(i, j) = q.data.row(i).dot(g.data.row(j));
  });
  return out;
}

/// Euclidean distance matrix. For unit rows this equals sqrt(2 - 2 cos).
template <class Scalar>
ScoreMatrixT<Scalar> euclidean_distance(const EmbeddingSetT<Scalar>& q,
                                        const EmbeddingSetT<Scalar>& g,
                                        int workers = 1) {
  detail::check_same_dim(q, g);
  ScoreMatrixT<Scalar> out{MatrixX<Scalar>(q.n_images(), g.n_images()),
                           Polarity::distance};
  parallel_for(q.n_images(), workers, [&](Index b, Index e) {
    for (Index i = b; i < e; ++i)
      for (Index j = 0; j < g.n_images(); ++j)
        out.values(i, j) = (q.data.row(i) - g.data.row(j)).norm();
  });
  return out;
}

/// Affine map of all entries onto [0, 1]. Per-row argsort is preserved.
/// Throws ParamError for a constant matrix, where the map is undefined.
template <class Scalar>
ScoreMatrixT<Scalar> minmax_normalize(const ScoreMatrixT<Scalar>& m) {
  if (m.values.size() == 0) throw ParamError("minmax_normalize: empty matrix");
  const Scalar lo = m.values.minCoeff();
  const Scalar hi = m.values.maxCoeff();
  if (!(hi > lo)) throw ParamError("minmax_normalize: constant matrix");
  return {((m.values.array() - lo) / (hi - lo)).matrix(), m.polarity};
}

/// Similarity matrices from several models, plus one non-negative weight each.
template <class Scalar>
struct EnsembleInputT {
  std::vector<ScoreMatrixT<Scalar>> matrices;
  std::vector<Scalar> weights;
};

using EnsembleInput = EnsembleInputT<double>;

/// Weighted sum of the input matrices, accumulated in ascending input order
/// so reruns are bit-identical.
template <class Scalar>
ScoreMatrixT<Scalar> ensemble_sum(const EnsembleInputT<Scalar>& in) {
  if (in.matrices.empty()) throw ShapeError("ensemble_sum: no input matrices");
  if (in.weights.size() != in.matrices.size())
    throw ShapeError("ensemble_sum: " + std::to_string(in.matrices.size()) +
                     " matrices but " + std::to_string(in.weights.size()) + " weights");
  const Index rows = in.matrices.front().n_query();
  const Index cols = in.matrices.front().n_gallery();
  bool any_positive = false;
  for (std::size_t k = 0; k < in.matrices.size(); ++k) {
    const auto& m = in.matrices[k];
    if (m.n_query() != rows || m.n_gallery() != cols)
      throw ShapeError("ensemble_sum: matrix " + std::to_string(k) + " shape mismatch");
    if (m.polarity != Polarity::similarity)
      throw ParamError("ensemble_sum: matrix " + std::to_string(k) + " is not a similarity");
    const Scalar w = in.weights[k];
    if (!(w >= Scalar(0)) || !std::isfinite(static_cast<double>(w)))
      throw ParamError("ensemble_sum: weight " + std::to_string(k) + " must be finite and >= 0");
    if (w > Scalar(0)) any_positive = true;
  }
  if (!any_positive) throw ParamError("ensemble_sum: all weights are zero");

  MatrixX<Scalar> acc = MatrixX<Scalar>::Zero(rows, cols);
  for (std::size_t k = 0; k < in.matrices.size(); ++k)
    acc += in.weights[k] * in.matrices[k].values;
  return {std::move(acc), Polarity::similarity};
}

}  // namespace reid
