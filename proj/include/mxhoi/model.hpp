#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mxhoi {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Lower/upper clamp applied to probabilities before any logarithm.
inline constexpr double kProbabilityClamp = 1e-7;

// Parameters of the two-branch predictor:
//   hidden = relu(X * encoder_w + encoder_b)
//   raw_c  = hidden * cls_w + cls_b,   raw_s = hidden * sel_w + sel_b
// Gradients share this type.
template <typename Scalar>
struct ModelParams {
  MatrixX<Scalar> encoder_w;  // feature_dim x hidden_dim
  VectorX<Scalar> encoder_b;
  MatrixX<Scalar> cls_w;      // hidden_dim x C
  VectorX<Scalar> cls_b;
  MatrixX<Scalar> sel_w;      // hidden_dim x C
  VectorX<Scalar> sel_b;

  int feature_dim() const { return static_cast<int>(encoder_w.rows()); }
  int hidden_dim() const { return static_cast<int>(encoder_w.cols()); }
  int n_classes() const { return static_cast<int>(cls_w.cols()); }

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases alike.
  static ModelParams init(int feature_dim, int hidden_dim, int n_classes, std::uint64_t seed) {
    if (feature_dim < 1 || hidden_dim < 1 || n_classes < 1)
      throw std::invalid_argument("ModelParams::init: dimensions must be positive");
    std::mt19937_64 rng(seed);
    auto fill = [&rng](auto& t, int fan_in) {
      std::uniform_real_distribution<double> u(-1.0 / std::sqrt(double(fan_in)),
                                               1.0 / std::sqrt(double(fan_in)));
      for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = static_cast<Scalar>(u(rng));
    };
    ModelParams p;
    p.encoder_w.resize(feature_dim, hidden_dim);
    p.encoder_b.resize(hidden_dim);
    p.cls_w.resize(hidden_dim, n_classes);
    p.cls_b.resize(n_classes);
    p.sel_w.resize(hidden_dim, n_classes);
    p.sel_b.resize(n_classes);
    fill(p.encoder_w, feature_dim);
    fill(p.encoder_b, feature_dim);
    fill(p.cls_w, hidden_dim);
    fill(p.cls_b, hidden_dim);
    fill(p.sel_w, hidden_dim);
    fill(p.sel_b, hidden_dim);
    return p;
  }

  /// Same shapes, all zeros.
  ModelParams zeros_like() const {
    ModelParams z;
    z.encoder_w = MatrixX<Scalar>::Zero(encoder_w.rows(), encoder_w.cols());
    z.encoder_b = VectorX<Scalar>::Zero(encoder_b.size());
    z.cls_w = MatrixX<Scalar>::Zero(cls_w.rows(), cls_w.cols());
    z.cls_b = VectorX<Scalar>::Zero(cls_b.size());
    z.sel_w = MatrixX<Scalar>::Zero(sel_w.rows(), sel_w.cols());
    z.sel_b = VectorX<Scalar>::Zero(sel_b.size());
    return z;
  }

  /// Visit every tensor in a fixed order (checkpoint layout order).
  template <typename F>
  void for_each_tensor(F&& f) {
    f("encoder_w", encoder_w);
    f("encoder_b", encoder_b);
    f("cls_w", cls_w);
    f("cls_b", cls_b);
    f("sel_w", sel_w);
    f("sel_b", sel_b);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    f("encoder_w", encoder_w);
    f("encoder_b", encoder_b);
    f("cls_w", cls_w);
    f("cls_b", cls_b);
    f("sel_w", sel_w);
    f("sel_b", sel_b);
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&ok](const char*, const auto& t) { ok = ok && t.allFinite(); });
    return ok;
  }

  bool same_shape(const ModelParams& o) const {
    return encoder_w.rows() == o.encoder_w.rows() && encoder_w.cols() == o.encoder_w.cols() &&
           encoder_b.size() == o.encoder_b.size() && cls_w.rows() == o.cls_w.rows() &&
           cls_w.cols() == o.cls_w.cols() && cls_b.size() == o.cls_b.size() &&
           sel_w.rows() == o.sel_w.rows() && sel_w.cols() == o.sel_w.cols() &&
           sel_b.size() == o.sel_b.size();
  }

  bool operator==(const ModelParams& o) const {
    return same_shape(o) && encoder_w == o.encoder_w && encoder_b == o.encoder_b &&
           cls_w == o.cls_w && cls_b == o.cls_b && sel_w == o.sel_w && sel_b == o.sel_b;
  }
};

template <typename Scalar>
struct ScoreMatrix {
  MatrixX<Scalar> raw_c;    // N x C
  MatrixX<Scalar> raw_s;    // N x C
  MatrixX<Scalar> sigma_c;  // softmax across classes, per pair (rows sum to 1)
  MatrixX<Scalar> sigma_s;  // softmax across pairs, per class (columns sum to 1)
  MatrixX<Scalar> P;        // sigma_c .* sigma_s

  Eigen::Index n_pairs() const { return P.rows(); }
  Eigen::Index n_classes() const { return P.cols(); }
};

/// Intermediate activations kept for the backward pass.
template <typename Scalar>
struct ForwardPass {
  MatrixX<Scalar> pre_hidden;
  MatrixX<Scalar> hidden;
  ScoreMatrix<Scalar> scores;
};

/// Row-wise softmax with max subtraction.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> e = (x.colwise() - x.rowwise().maxCoeff()).array().exp().matrix();
  const VectorX<Scalar> sums = e.rowwise().sum();
  return sums.cwiseInverse().asDiagonal() * e;
}

/// Column-wise softmax with max subtraction.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_cols(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> e = (x.rowwise() - x.colwise().maxCoeff()).array().exp().matrix();
  const RowVectorX<Scalar> sums = e.colwise().sum();
  return e * sums.cwiseInverse().asDiagonal();
}

template <typename Scalar, typename Derived>
ForwardPass<Scalar> forward_pass(const ModelParams<Scalar>& params,
                                 const Eigen::MatrixBase<Derived>& features) {
  if (features.rows() < 1) throw std::invalid_argument("forward: need at least one pair");
  if (features.cols() != params.feature_dim()) {
    throw std::invalid_argument("forward: feature width " + std::to_string(features.cols()) +
                                " != model input " + std::to_string(params.feature_dim()));
  }
  if (!features.allFinite()) throw std::invalid_argument("forward: non-finite input features");

  ForwardPass<Scalar> fp;
  fp.pre_hidden = (features.template cast<Scalar>() * params.encoder_w).rowwise() +
                  params.encoder_b.transpose();
  fp.hidden = fp.pre_hidden.cwiseMax(Scalar(0));
  ScoreMatrix<Scalar>& s = fp.scores;
  s.raw_c = (fp.hidden * params.cls_w).rowwise() + params.cls_b.transpose();
  s.raw_s = (fp.hidden * params.sel_w).rowwise() + params.sel_b.transpose();
  s.sigma_c = softmax_rows(s.raw_c);
  s.sigma_s = softmax_cols(s.raw_s);
  s.P = s.sigma_c.cwiseProduct(s.sigma_s);
  return fp;
}

template <typename Scalar, typename Derived>
ScoreMatrix<Scalar> forward(const ModelParams<Scalar>& params,
                            const Eigen::MatrixBase<Derived>& features) {
  return forward_pass(params, features).scores;
}

/// Image-level class probabilities: P summed over the pair axis. Each entry
/// lies in [0, 1] because every sigma_s column sums to one and sigma_c <= 1;
/// rounding can overshoot by an ulp, so the upper end is enforced.
template <typename Derived>
VectorX<typename Derived::Scalar> aggregate_image_level(const Eigen::MatrixBase<Derived>& P) {
  using Scalar = typename Derived::Scalar;
  return P.colwise().sum().transpose().cwiseMin(Scalar(1));
}

/// Backward through the two branches given the raw-score gradients.
template <typename Scalar, typename Derived>
ModelParams<Scalar> backward_from_raw(const ModelParams<Scalar>& params,
                                      const Eigen::MatrixBase<Derived>& features,
                                      const ForwardPass<Scalar>& fp,
                                      const MatrixX<Scalar>& d_raw_c,
                                      const MatrixX<Scalar>& d_raw_s) {
  ModelParams<Scalar> g;
  g.cls_w = fp.hidden.transpose() * d_raw_c;
  g.cls_b = d_raw_c.colwise().sum().transpose();
  g.sel_w = fp.hidden.transpose() * d_raw_s;
  g.sel_b = d_raw_s.colwise().sum().transpose();
  MatrixX<Scalar> d_hidden = d_raw_c * params.cls_w.transpose() + d_raw_s * params.sel_w.transpose();
  const MatrixX<Scalar> d_pre =
      d_hidden.cwiseProduct((fp.pre_hidden.array() > Scalar(0)).matrix().template cast<Scalar>());
  g.encoder_w = features.template cast<Scalar>().transpose() * d_pre;
  g.encoder_b = d_pre.colwise().sum().transpose();
  return g;
}

// Exact gradient of a scalar loss with respect to every parameter, given
// dL/dP. Chains through the element-wise product, the row softmax of the
// classification branch, the column softmax of the selection branch and the
// rectified encoder.
template <typename Scalar, typename Derived>
ModelParams<Scalar> backward(const ModelParams<Scalar>& params,
                             const Eigen::MatrixBase<Derived>& features,
                             const ForwardPass<Scalar>& fp, const MatrixX<Scalar>& d_P) {
  const ScoreMatrix<Scalar>& s = fp.scores;
  if (d_P.rows() != s.P.rows() || d_P.cols() != s.P.cols() || features.rows() != s.P.rows()) {
    throw std::invalid_argument("backward: upstream gradient shape does not match forward pass");
  }
  const MatrixX<Scalar> d_sigma_c = d_P.cwiseProduct(s.sigma_s);
  const MatrixX<Scalar> d_sigma_s = d_P.cwiseProduct(s.sigma_c);
  // softmax Jacobian-vector products: s .* (d - <d, s>) along the normalized axis.
  // d is shifted by its first entry first; the product is shift invariant, and a
  // constant d then gives exactly zero instead of 1 - sum(s) rounding noise.
  const MatrixX<Scalar> dc = d_sigma_c.colwise() - d_sigma_c.col(0);
  const MatrixX<Scalar> ds = d_sigma_s.rowwise() - d_sigma_s.row(0);
  const VectorX<Scalar> row_dot = dc.cwiseProduct(s.sigma_c).rowwise().sum();
  const RowVectorX<Scalar> col_dot = ds.cwiseProduct(s.sigma_s).colwise().sum();
  const MatrixX<Scalar> d_raw_c = s.sigma_c.cwiseProduct(dc.colwise() - row_dot);
  const MatrixX<Scalar> d_raw_s = s.sigma_s.cwiseProduct(ds.rowwise() - col_dot);
  return backward_from_raw(params, features, fp, d_raw_c, d_raw_s);
}

/// Backward for an image-level loss: dL/dP(i, j) = dL/dp(j) for every pair i.
template <typename Scalar, typename Derived>
ModelParams<Scalar> backward_image_level(const ModelParams<Scalar>& params,
                                         const Eigen::MatrixBase<Derived>& features,
                                         const ForwardPass<Scalar>& fp,
                                         const VectorX<Scalar>& d_p) {
  if (d_p.size() != fp.scores.P.cols())
    throw std::invalid_argument("backward_image_level: gradient length != class count");
  const MatrixX<Scalar> d_P = d_p.transpose().replicate(fp.scores.P.rows(), 1);
  return backward(params, features, fp, d_P);
}

struct PairClassScore {
  int pair = 0;
  int hoi_class = 0;
  double probability = 0.0;
};

/// Every (pair, class) entry of P, highest first; ties by (pair, class).
template <typename Scalar>
std::vector<PairClassScore> ranked_entries(const ScoreMatrix<Scalar>& scores) {
  std::vector<PairClassScore> out;
  out.reserve(static_cast<std::size_t>(scores.P.size()));
  for (Eigen::Index i = 0; i < scores.P.rows(); ++i)
    for (Eigen::Index j = 0; j < scores.P.cols(); ++j)
      out.push_back({static_cast<int>(i), static_cast<int>(j), static_cast<double>(scores.P(i, j))});
  std::stable_sort(out.begin(), out.end(), [](const PairClassScore& a, const PairClassScore& b) {
    return a.probability > b.probability;
  });
  return out;
}

template <typename Scalar, typename Derived>
std::vector<PairClassScore> infer_pairs(const ModelParams<Scalar>& params,
                                        const Eigen::MatrixBase<Derived>& features) {
  return ranked_entries(forward(params, features));
}

using ModelParamsd = ModelParams<double>;
using ScoreMatrixd = ScoreMatrix<double>;

}  // namespace mxhoi
