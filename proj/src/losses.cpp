#include <cmath>
#include <stdexcept>

#include "gdf/model_train.hpp"

namespace gdf {

namespace {

void check_shapes(const ScoreGrid& x, const LabelGrid& y) {
  if (x.hc != y.hc || x.wc != y.wc || x.logits.rows() != kCellChannels || x.logits.cols() != x.cells()) {
    throw ModelShapeError("loss: score grid and label grid shapes differ");
  }
}

// Softmax of every column, max-shifted.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits.rowwise() - logits.colwise().maxCoeff();
  p = p.array().exp().matrix();
  p.array().rowwise() /= p.colwise().sum().array();
  return p;
}

struct Normalized {
  Eigen::MatrixXd unit;
  Eigen::VectorXd norm;
  std::vector<std::uint8_t> fallback;
  int fallbacks = 0;
};

Normalized normalize_columns(const Eigen::MatrixXd& d) {
  Normalized n;
  n.unit = d;
  n.norm = d.colwise().norm().transpose();
  n.fallback.assign(static_cast<size_t>(d.cols()), 0);
  for (Eigen::Index c = 0; c < d.cols(); ++c) {
    if (n.norm(c) < 1e-12) {
      n.unit.col(c) = Eigen::VectorXd::Unit(d.rows(), 0);
      n.fallback[static_cast<size_t>(c)] = 1;
      ++n.fallbacks;
    } else {
      n.unit.col(c) /= n.norm(c);
    }
  }
  return n;
}

Eigen::MatrixXd normalize_backward(const Normalized& n, const Eigen::MatrixXd& d_unit) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d_unit.rows(), d_unit.cols());
  for (Eigen::Index c = 0; c < d_unit.cols(); ++c) {
    if (n.fallback[static_cast<size_t>(c)]) continue;
    const auto u = n.unit.col(c);
    g.col(c) = (d_unit.col(c) - u * u.dot(d_unit.col(c))) / n.norm(c);
  }
  return g;
}

}  // namespace

LossValue detector_loss(const ScoreGrid& x, const LabelGrid& y, const std::vector<std::uint8_t>& valid) {
  check_shapes(x, y);
  if (valid.size() != static_cast<size_t>(x.cells())) throw ModelShapeError("detector_loss: mask size mismatch");
  LossValue out;
  out.grad = Eigen::MatrixXd::Zero(x.logits.rows(), x.logits.cols());
  const Eigen::MatrixXd p = softmax_columns(x.logits);
  int count = 0;
  for (int c = 0; c < x.cells(); ++c) {
    if (!valid[static_cast<size_t>(c)] || !y.supervised[static_cast<size_t>(c)]) continue;
    ++count;
    const int label = y.labels[static_cast<size_t>(c)];
    const auto col = x.logits.col(c);
    const double peak = col.maxCoeff();
    const double lse = peak + std::log((col.array() - peak).exp().sum());
    out.value += lse - col(label);
    out.grad.col(c) = p.col(c);
    out.grad(label, c) -= 1.0;
  }
  if (count == 0) {
    out.empty = true;
    return out;
  }
  out.value /= count;
  out.grad /= count;
  return out;
}

LossValue peaky_loss(const ScoreGrid& x, const LabelGrid& y) {
  check_shapes(x, y);
  LossValue out;
  out.grad = Eigen::MatrixXd::Zero(x.logits.rows(), x.logits.cols());
  const Eigen::MatrixXd p = softmax_columns(x.logits);
  int count = 0;
  for (int c = 0; c < x.cells(); ++c) {
    if (y.labels[static_cast<size_t>(c)] == kDustbin || !y.supervised[static_cast<size_t>(c)]) continue;
    ++count;
    Eigen::Index k = 0;
    const double pmax = p.col(c).head(kDustbin).maxCoeff(&k);
    out.value += 1.0 - pmax;
    // d(-p_k)/dz_j = -p_k (delta_kj - p_j)
    out.grad.col(c) = pmax * p.col(c);
    out.grad(k, c) -= pmax;
  }
  if (count == 0) {
    out.empty = true;
    return out;
  }
  out.value /= count;
  out.grad /= count;
  return out;
}

HingeValue descriptor_hinge_loss(const DescriptorField& d, const DescriptorField& d_warped,
                                 const CorrespondenceMatrix& s, const HingeParams& hp) {
  if (d.hc != d_warped.hc || d.wc != d_warped.wc || d.dim != d_warped.dim || d.hc != s.hc || d.wc != s.wc) {
    throw ModelShapeError("descriptor_hinge_loss: shape mismatch");
  }
  HingeValue out;
  const Normalized a = normalize_columns(d.desc);
  const Normalized b = normalize_columns(d_warped.desc);
  out.fallbacks = a.fallbacks + b.fallbacks;
  const Eigen::MatrixXd sims = a.unit.transpose() * b.unit;
  const int n = d.cells();
  Eigen::VectorXd vs(n), vt(n);
  for (int c = 0; c < n; ++c) {
    vs(c) = s.valid_source[static_cast<size_t>(c)];
    vt(c) = s.valid_target[static_cast<size_t>(c)];
  }
  const double pairs = vs.sum() * vt.sum();
  out.grad = Eigen::MatrixXd::Zero(d.desc.rows(), d.desc.cols());
  out.grad_warped = Eigen::MatrixXd::Zero(d.desc.rows(), d.desc.cols());
  if (pairs == 0.0) {
    out.empty = true;
    return out;
  }
  // Negative terms over every valid pair first, then positives swap their term in.
  Eigen::MatrixXd g = (sims.array() > hp.m_n).cast<double>().matrix();
  double total = ((sims.array() - hp.m_n).max(0.0).matrix().cwiseProduct(vs * vt.transpose())).sum();
  g = g.cwiseProduct(vs * vt.transpose());
  for (int c = 0; c < n; ++c) {
    const int t = s.partner[static_cast<size_t>(c)];
    if (t < 0 || !vs(c) || !vt(t)) continue;
    const double sim = sims(c, t);
    total -= std::max(0.0, sim - hp.m_n);
    total += hp.lambda_d * std::max(0.0, hp.m_p - sim);
    g(c, t) = sim < hp.m_p ? -hp.lambda_d : 0.0;
  }
  out.value = total / pairs;
  g /= pairs;
  out.grad = normalize_backward(a, b.unit * g.transpose());
  out.grad_warped = normalize_backward(b, a.unit * g);
  return out;
}

void LossWeights::validate() const {
  if (!(w_i >= 0 && w_i_warped >= 0 && w_pk >= 0 && w_d >= 0)) {
    throw std::invalid_argument("LossWeights: weights must be nonnegative");
  }
  if (w_i + w_i_warped + w_pk + w_d == 0.0) throw std::invalid_argument("LossWeights: all weights are zero");
}

LossReport total_loss(double l_i, double l_i_warped, double l_pk, double l_d, const LossWeights& w) {
  w.validate();
  LossReport r{l_i, l_i_warped, l_pk, l_d, 0.0};
  r.total = w.w_i * l_i + w.w_i_warped * l_i_warped + w.w_pk * l_pk + w.w_d * l_d;
  return r;
}

}  // namespace gdf
