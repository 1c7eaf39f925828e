#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "reid/types.hpp"

namespace reid {

/// 0/1 agreement matrix over two label columns. A pair counts as a match only
/// when both labels are present and equal; a missing label on either side is
/// neutral, never a mismatch penalty.
template <class Scalar = double>
MatrixX<Scalar> attribute_match_matrix(const std::vector<std::optional<int>>& query_labels,
                                       const std::vector<std::optional<int>>& gallery_labels) {
  const Index nq = static_cast<Index>(query_labels.size());
  const Index ng = static_cast<Index>(gallery_labels.size());
  MatrixX<Scalar> m = MatrixX<Scalar>::Zero(nq, ng);
  for (Index i = 0; i < nq; ++i) {
    const auto& a = query_labels[static_cast<std::size_t>(i)];
    if (!a) continue;
    for (Index j = 0; j < ng; ++j) {
      const auto& b = gallery_labels[static_cast<std::size_t>(j)];
      if (b && *a == *b) m(i, j) = Scalar(1);
    }
  }
  return m;
}

/// Additive attribute boost: out = sim + weight * match.
template <class Scalar>
ScoreMatrixT<Scalar> fuse_attribute(const ScoreMatrixT<Scalar>& scores,
                                    const MatrixX<Scalar>& match, Scalar weight) {
  if (scores.polarity != Polarity::similarity)
    throw ParamError("fuse_attribute: expected similarity scores");
  if (match.rows() != scores.n_query() || match.cols() != scores.n_gallery())
    throw ShapeError("fuse_attribute: match matrix shape does not match scores");
  if (!std::isfinite(static_cast<double>(weight)))
    throw ParamError("fuse_attribute: weight must be finite");
  ScoreMatrixT<Scalar> out = scores;
  out.values += weight * match;
  return out;
}

/// Viewing angles half a bin width past the bin's lower edge.
inline double bin_to_orientation(int bin, int n_bins = 36) {
  if (n_bins < 1) throw ParamError("bin_to_orientation: n_bins must be positive");
  if (bin < 0 || bin >= n_bins)
    throw ParamError("bin_to_orientation: bin " + std::to_string(bin) +
                     " out of range for " + std::to_string(n_bins) + " bins");
  return (bin + 0.5) * (360.0 / n_bins);
}

inline int orientation_bin(double deg, int n_bins = 36) {
  if (n_bins < 1) throw ParamError("orientation_bin: n_bins must be positive");
  if (!(deg >= 0.0 && deg < 360.0))
    throw ParamError("orientation_bin: angle must lie in [0, 360)");
  const int b = static_cast<int>(deg / (360.0 / n_bins));
  return b < n_bins ? b : n_bins - 1;
}

/// Double-angle embedding of a viewing direction. A vehicle seen from deg and
/// from deg + 180 produces mirror-image crops, so the angle is folded to
/// [0, 180) before the trig; the fold happens on the raw degrees, which makes
/// fold_orientation(d) and fold_orientation(d + 180) bit-identical.
template <class Scalar = double>
Eigen::Matrix<Scalar, 2, 1> fold_orientation(Scalar deg) {
  if (!(deg >= Scalar(0) && deg < Scalar(360)))
    throw ParamError("fold_orientation: angle must lie in [0, 360)");
  const Scalar folded = deg >= Scalar(180) ? deg - Scalar(180) : deg;
  const Scalar r = folded * std::numbers::pi_v<Scalar> / Scalar(180);
  return {std::cos(Scalar(2) * r), std::sin(Scalar(2) * r)};
}

/// Cosine of twice the folded angle difference: 1 for aligned or opposite
/// views, -1 for views a quarter turn apart.
template <class Scalar = double>
Scalar orientation_similarity(Scalar a_deg, Scalar b_deg) {
  return fold_orientation(a_deg).dot(fold_orientation(b_deg));
}

/// Pairwise orientation similarity; pairs with a missing angle are neutral 0.
template <class Scalar = double>
MatrixX<Scalar> orientation_similarity_matrix(const std::vector<std::optional<double>>& query_deg,
                                              const std::vector<std::optional<double>>& gallery_deg) {
  const Index nq = static_cast<Index>(query_deg.size());
  const Index ng = static_cast<Index>(gallery_deg.size());
  std::vector<Eigen::Matrix<Scalar, 2, 1>> gfold(static_cast<std::size_t>(ng));
  for (Index j = 0; j < ng; ++j)
    if (gallery_deg[static_cast<std::size_t>(j)])
      gfold[static_cast<std::size_t>(j)] =
          fold_orientation<Scalar>(static_cast<Scalar>(*gallery_deg[static_cast<std::size_t>(j)]));
  MatrixX<Scalar> m = MatrixX<Scalar>::Zero(nq, ng);
  for (Index i = 0; i < nq; ++i) {
    const auto& a = query_deg[static_cast<std::size_t>(i)];
    if (!a) continue;
    const auto qf = fold_orientation<Scalar>(static_cast<Scalar>(*a));
    for (Index j = 0; j < ng; ++j)
      if (gallery_deg[static_cast<std::size_t>(j)])
        m(i, j) = qf.dot(gfold[static_cast<std::size_t>(j)]);
  }
  return m;
}

/// Orientation debias: out = sim - lambda * orient. Pairs seen from the same
/// (folded) angle look alike for the wrong reason, so their visual score is
/// discounted in proportion to the angular agreement.
template <class Scalar>
ScoreMatrixT<Scalar> fuse_orientation(const ScoreMatrixT<Scalar>& scores,
                                      const MatrixX<Scalar>& orient, Scalar lambda) {
  if (scores.polarity != Polarity::similarity)
    throw ParamError("fuse_orientation: expected similarity scores");
  if (orient.rows() != scores.n_query() || orient.cols() != scores.n_gallery())
    throw ShapeError("fuse_orientation: orientation matrix shape does not match scores");
  if (!std::isfinite(static_cast<double>(lambda)))
    throw ParamError("fuse_orientation: lambda must be finite");
  ScoreMatrixT<Scalar> out = scores;
  out.values -= lambda * orient;
  return out;
}

/// Label columns pulled out of a metadata table, index-aligned with rows.
inline std::vector<std::optional<int>> brand_column(const MetadataTable& meta) {
  std::vector<std::optional<int>> v;
  v.reserve(meta.rows().size());
  for (const auto& r : meta.rows()) v.push_back(r.brand_id);
  return v;
}

inline std::vector<std::optional<int>> type_column(const MetadataTable& meta) {
  std::vector<std::optional<int>> v;
  v.reserve(meta.rows().size());
  for (const auto& r : meta.rows()) v.push_back(r.type_id);
  return v;
}

inline std::vector<std::optional<double>> orientation_column(const MetadataTable& meta) {
  std::vector<std::optional<double>> v;
  v.reserve(meta.rows().size());
  for (const auto& r : meta.rows()) v.push_back(r.orientation_deg);
  return v;
}

}  // namespace reid
