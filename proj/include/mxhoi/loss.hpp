#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mxhoi/model.hpp"
#include "mxhoi/supervision.hpp"

namespace mxhoi {

struct LossReport {
  double value = 0.0;
  SupervisionTag supervision = SupervisionTag::FS;
  int n_terms = 0;
};

template <typename Scalar>
struct RegionLoss {
  LossReport report;
  MatrixX<Scalar> grad;  // dL/dP
};

template <typename Scalar>
struct ImageLoss {
  LossReport report;
  VectorX<Scalar> grad;  // dL/dp
};

namespace detail {

template <typename Scalar>
Scalar clamp_probability(Scalar p) {
  return std::clamp(p, Scalar(kProbabilityClamp), Scalar(1.0 - kProbabilityClamp));
}

template <typename Derived>
void require_binary(const Eigen::MatrixBase<Derived>& y, const char* who) {
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    const auto v = y.reshaped()(k);
    if (v != 0 && v != 1) throw std::invalid_argument(std::string(who) + ": targets must be 0 or 1");
  }
}

}  // namespace detail

// Region-level BCE: sum over classes of the pair-averaged BCE,
//   L = sum_j (1/N) sum_i BCE(y_ij, p_ij),
// with dL/dp_ij = (p_ij - y_ij) / (N p_ij (1 - p_ij)) on clamped p.
// `average_over_classes` additionally divides by C (off by default).
template <typename Scalar>
RegionLoss<Scalar> fs_loss(const MatrixX<Scalar>& P, const MatrixX<Scalar>& Y,
                           bool average_over_classes = false) {
  if (P.rows() != Y.rows() || P.cols() != Y.cols())
    throw std::invalid_argument("fs_loss: P and Y shapes differ");
  if (P.rows() < 1) throw std::invalid_argument("fs_loss: empty batch");
  detail::require_binary(Y, "fs_loss");

  const Scalar scale = Scalar(1) / Scalar(P.rows()) /
                       (average_over_classes ? Scalar(P.cols()) : Scalar(1));
  RegionLoss<Scalar> out;
  out.grad.resize(P.rows(), P.cols());
  Scalar total = 0;
  for (Eigen::Index j = 0; j < P.cols(); ++j) {
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      const Scalar p = detail::clamp_probability(P(i, j));
      const Scalar y = Y(i, j);
      total -= y * std::log(p) + (Scalar(1) - y) * std::log(Scalar(1) - p);
      out.grad(i, j) = scale * (p - y) / (p * (Scalar(1) - p));
    }
  }
  out.report = {static_cast<double>(scale * total), SupervisionTag::FS, static_cast<int>(P.size())};
  return out;
}

// Image-level BCE summed over classes,
//   L = sum_j BCE(y_j, p_j),  dL/dp_j = (p_j - y_j) / (p_j (1 - p_j)) on clamped p.
template <typename Scalar>
ImageLoss<Scalar> ws_loss(const VectorX<Scalar>& p, const VectorX<Scalar>& y) {
  if (p.size() != y.size()) throw std::invalid_argument("ws_loss: p and y lengths differ");
  detail::require_binary(y, "ws_loss");
  ImageLoss<Scalar> out;
  out.grad.resize(p.size());
  Scalar total = 0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const Scalar pj = detail::clamp_probability(p(j));
    total -= y(j) * std::log(pj) + (Scalar(1) - y(j)) * std::log(Scalar(1) - pj);
    out.grad(j) = (pj - y(j)) / (pj * (Scalar(1) - pj));
  }
  out.report = {static_cast<double>(total), SupervisionTag::WS, static_cast<int>(p.size())};
  return out;
}

}  // namespace mxhoi
