#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "reid/types.hpp"

namespace reid {

template <class Scalar>
struct CosfaceParamsT {
  Scalar scale = Scalar(30);
  Scalar margin = Scalar(0.35);
};
using CosfaceParams = CosfaceParamsT<double>;

template <class Scalar>
struct TripletParamsT {
  Scalar margin = Scalar(0.5);
};
using TripletParams = TripletParamsT<double>;

/// Loss value with its gradient w.r.t. the cosine logits that produced it.
template <class Scalar>
struct LossResultT {
  Scalar value = Scalar(0);
  MatrixX<Scalar> grad;
};
using LossResult = LossResultT<double>;

namespace detail {

template <class Scalar>
void check_labels(const MatrixX<Scalar>& logits, const std::vector<int>& labels,
                  const char* what) {
  if (logits.rows() < 1 || logits.cols() < 1)
    throw ParamError(std::string(what) + ": empty logit matrix");
  if (static_cast<Index>(labels.size()) != logits.rows())
    throw ShapeError(std::string(what) + ": got " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(logits.rows()) + " rows");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= logits.cols())
      throw ParamError(std::string(what) + ": label " + std::to_string(labels[i]) +
                       " at row " + std::to_string(i) + " out of range");
}

}  // namespace detail

/// Large-margin cosine loss. The target class logit is shifted down by the
/// margin, everything is scaled, and a softmax cross-entropy is taken:
///   L_i = -log( e^{s(cos_y - m)} / (e^{s(cos_y - m)} + sum_{j != y} e^{s cos_j}) )
/// averaged over rows. grad holds dL/dcos, so a margin of zero makes both the
/// value and the gradient coincide with softmax cross-entropy on s * cos.
template <class Scalar>
LossResultT<Scalar> cosface_loss(const MatrixX<Scalar>& cosine,
                                 const std::vector<int>& labels,
                                 const CosfaceParamsT<Scalar>& params) {
  detail::check_labels(cosine, labels, "cosface_loss");
  if (!(params.scale > Scalar(0)) || !std::isfinite(static_cast<double>(params.scale)))
    throw ParamError("cosface_loss: scale must be positive and finite");
  if (!(params.margin >= Scalar(0)) || !std::isfinite(static_cast<double>(params.margin)))
    throw ParamError("cosface_loss: margin must be non-negative and finite");

  const Index n = cosine.rows();
  MatrixX<Scalar> z = params.scale * cosine;
  for (Index i = 0; i < n; ++i) z(i, labels[static_cast<std::size_t>(i)]) -= params.scale * params.margin;

  LossResultT<Scalar> out;
  out.grad.resize(n, cosine.cols());
  const Scalar unit = params.scale / static_cast<Scalar>(n);
  Scalar acc = 0;
  for (Index i = 0; i < n; ++i) {
    const Scalar zmax = z.row(i).maxCoeff();
    const auto e = (z.row(i).array() - zmax).exp();
    const Scalar total = e.sum();
    acc += std::log(total) + zmax - z(i, labels[static_cast<std::size_t>(i)]);
    out.grad.row(i) = (e / total).matrix() * unit;
    out.grad(i, labels[static_cast<std::size_t>(i)]) -= unit;
  }
  out.value = acc / static_cast<Scalar>(n);
  return out;
}

/// Triplet hinge on one positive/negative distance pair:
///   max(d_p - d_n + margin, 0).
template <class Scalar>
Scalar triplet_loss(Scalar d_p, Scalar d_n, const TripletParamsT<Scalar>& params) {
  if (!(d_p >= Scalar(0)) || !(d_n >= Scalar(0)))
    throw ParamError("triplet_loss: distances must be non-negative");
  if (!(params.margin >= Scalar(0)) || !std::isfinite(static_cast<double>(params.margin)))
    throw ParamError("triplet_loss: margin must be non-negative and finite");
  return std::max(d_p - d_n + params.margin, Scalar(0));
}

/// Hinge over every (anchor, positive, negative) triple the labels admit:
///   mean of max(d(a, p) - d(a, n) + margin, 0).
template <class Scalar>
Scalar mean_triplet_loss(const MatrixX<Scalar>& dist, const std::vector<int>& labels,
                         const TripletParamsT<Scalar>& params) {
  const Index n = dist.rows();
  if (dist.cols() != n) throw ShapeError("mean_triplet_loss: distance matrix must be square");
  if (static_cast<Index>(labels.size()) != n)
    throw ShapeError("mean_triplet_loss: label count does not match matrix");
  if (!(params.margin >= Scalar(0)) || !std::isfinite(static_cast<double>(params.margin)))
    throw ParamError("mean_triplet_loss: margin must be non-negative and finite");

  Scalar acc = 0;
  std::int64_t count = 0;
  for (Index a = 0; a < n; ++a)
    for (Index p = 0; p < n; ++p) {
      if (p == a || labels[static_cast<std::size_t>(p)] != labels[static_cast<std::size_t>(a)]) continue;
      for (Index neg = 0; neg < n; ++neg) {
        if (labels[static_cast<std::size_t>(neg)] == labels[static_cast<std::size_t>(a)]) continue;
        acc += triplet_loss(dist(a, p), dist(a, neg), params);
        ++count;
      }
    }
  if (count == 0)
    throw ParamError("mean_triplet_loss: labels admit no anchor/positive/negative triple");
  return acc / static_cast<Scalar>(count);
}

template <class Scalar>
struct GemParamsT {
  Eigen::VectorX<Scalar> p;  // one exponent per channel, or a single shared one
};
using GemParams = GemParamsT<double>;

/// Generalized-mean pooling per channel over the spatial axis:
///   f_k = (mean_j max(x_kj, 0)^{p_k})^{1/p_k}
/// p = 1 reduces to the plain average; growing p leans toward the max.
template <class Scalar>
Eigen::VectorX<Scalar> gem_pool(const MatrixX<Scalar>& activations,
                                const GemParamsT<Scalar>& params) {
  if (activations.rows() < 1 || activations.cols() < 1)
    throw ParamError("gem_pool: empty activation map");
  const Index channels = activations.rows();
  if (params.p.size() != 1 && params.p.size() != channels)
    throw ShapeError("gem_pool: need one exponent or one per channel, got " +
                     std::to_string(params.p.size()) + " for " +
                     std::to_string(channels) + " channels");
  for (Index k = 0; k < params.p.size(); ++k)
    if (!(params.p(k) >= Scalar(1)) || !std::isfinite(static_cast<double>(params.p(k))))
      throw ParamError("gem_pool: exponent " + std::to_string(k) + " must be finite and >= 1");

  Eigen::VectorX<Scalar> out(channels);
  const Index cols = activations.cols();
  for (Index k = 0; k < channels; ++k) {
    const Scalar p = params.p(params.p.size() == 1 ? 0 : k);
    // left-to-right summation: the result must not depend on how a redux
    // happens to associate on the host platform
    Scalar acc = 0;
    for (Index j = 0; j < cols; ++j) {
      const Scalar clamped = std::max(activations(k, j), Scalar(0));
      acc += p == Scalar(1) ? clamped : std::pow(clamped, p);
    }
    const Scalar mean = acc / static_cast<Scalar>(cols);
    out(k) = p == Scalar(1) ? mean : std::pow(mean, Scalar(1) / p);
  }
  return out;
}

/// The training objective is the plain sum of its two parts.
template <class Scalar>
Scalar total_loss(Scalar classification, Scalar metric) {
  return classification + metric;
}

}  // namespace reid
