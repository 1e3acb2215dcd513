// Shared helpers for the unit suites and the acceptance binary.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "equisteer/network.hpp"

namespace support {

using equisteer::Matrix;
using equisteer::NonlinearityKind;
using equisteer::Vector;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Matrix a(rows, cols);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
  return a;
}

// A concrete member of each nonlinearity kind.
inline Vector apply_kind(NonlinearityKind kind, const Vector& v) {
  const Eigen::Index d = v.size();
  switch (kind) {
    case NonlinearityKind::identity: return v;
    case NonlinearityKind::relu: return v.cwiseMax(0.0);
    case NonlinearityKind::any_elementwise: return v.unaryExpr([](double x) { return std::tanh(x); });
    case NonlinearityKind::crelu: {
      Vector out(2 * d);
      out << v.cwiseMax(0.0), (-v).cwiseMax(0.0);
      return out;
    }
    case NonlinearityKind::concat: {
      Vector out(2 * d);
      out << v.unaryExpr([](double x) { return std::tanh(x); }), v.unaryExpr([](double x) { return std::tanh(-x); });
      return out;
    }
    case NonlinearityKind::norm_acting: {
      Vector out(d);
      equisteer::apply_capsule_nonlinearity<double>(equisteer::Nonlinearity::norm_relu, std::span<const double>(v.data(), d),
                                                    std::span<double>(out.data(), d), 0.5);
      return out;
    }
  }
  return v;
}

// Number of (h, vector) pairs where nu(rho(h) v) != act_rep(h) nu(v) bitwise.
inline int commutation_mismatches(const equisteer::Capsule& capsule, NonlinearityKind kind, int vectors, std::mt19937_64& rng) {
  const equisteer::Representation post = equisteer::act_rep(capsule, kind);
  int bad = 0;
  for (int t = 0; t < vectors; ++t) {
    const Vector v = random_matrix(capsule.dim(), 1, rng);
    for (const equisteer::Dihedral h : equisteer::d4_elements()) {
      const Vector lhs = apply_kind(kind, capsule.rep(h) * v);
      const Vector rhs = post(h) * apply_kind(kind, v);
      if (lhs != rhs) ++bad;
    }
  }
  return bad;
}

// Three conv layers mixing quotient, regular and irreducible capsules, ending in
// an invariant head: crelu and norm-relu exercise the signed-permutation rules.
inline equisteer::NetworkSpec mixed_network_spec(int grid = 9) {
  using equisteer::FiberSpec;
  using equisteer::LayerSpec;
  using equisteer::Nonlinearity;
  const FiberSpec in{{"A1", 1}};
  const FiberSpec h1{{"regular", 1}, {"qm", 1}, {"E", 1}, {"B1", 1}};
  const FiberSpec h1c{{"crelu(regular)", 1}, {"crelu(qm)", 1}, {"crelu(E)", 1}, {"crelu(B1)", 1}};
  const FiberSpec h2{{"regular", 1}, {"E", 2}, {"A2", 1}};
  const FiberSpec h3{{"A1", 4}};
  return {grid,
          {LayerSpec::conv(in, h1, 3), LayerSpec::nonlinearity(Nonlinearity::crelu), LayerSpec::conv(h1c, h2, 3),
           LayerSpec::nonlinearity(Nonlinearity::norm_relu), LayerSpec::conv(h2, h3, 3), LayerSpec::nonlinearity(Nonlinearity::relu),
           LayerSpec::pool(), LayerSpec::readout(3)}};
}

// conv(A1 -> regular) -> relu -> conv(regular -> A1 x 4) -> pool -> readout
inline equisteer::NetworkSpec small_network_spec(int grid = 5, int classes = 3) {
  using equisteer::FiberSpec;
  using equisteer::LayerSpec;
  return {grid,
          {LayerSpec::conv(FiberSpec{{"A1", 1}}, FiberSpec{{"regular", 1}}, 3), LayerSpec::nonlinearity(equisteer::Nonlinearity::relu),
           LayerSpec::conv(FiberSpec{{"regular", 1}}, FiberSpec{{"A1", 4}}, 3), LayerSpec::pool(), LayerSpec::readout(classes)}};
}

// Residual addition of [(regular,3)] onto [(qm,6)]: equal width, different types.
inline equisteer::NetworkSpec bad_residual_spec() {
  using equisteer::FiberSpec;
  using equisteer::LayerSpec;
  return {9,
          {LayerSpec::conv(FiberSpec{{"A1", 1}}, FiberSpec{{"regular", 3}}, 3),
           LayerSpec::conv(FiberSpec{{"regular", 3}}, FiberSpec{{"qm", 6}}, 3), LayerSpec::residual(0)}};
}

// Mean softmax cross-entropy computed from the forward pass alone.
inline double loss_only(const equisteer::Network& net, const equisteer::ParamSet& p,
                        const std::vector<equisteer::FeatureField<double>>& batch, const std::vector<int>& labels) {
  double loss = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto r = equisteer::forward(net, p, batch[i]);
    const auto& z = r.logits();
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double s = 0;
    for (double v : z) s += std::exp(v - mx);
    loss += (std::log(s) + mx - z[static_cast<std::size_t>(labels[i])]) / static_cast<double>(batch.size());
  }
  return loss;
}

struct FdResult {
  double worst = 0;
  int checked = 0;
  std::string where;
};

// Central differences on every scalar parameter against the analytic reverse pass.
inline FdResult finite_difference_check(const equisteer::Network& net, equisteer::ParamSet p,
                                        const std::vector<equisteer::FeatureField<double>>& batch, const std::vector<int>& labels,
                                        double step) {
  const equisteer::LossAndGrad analytic = equisteer::loss_and_grad(net, p, batch, labels);
  std::vector<const Matrix*> grads;
  analytic.grad.visit([&](const std::string&, const Matrix& m) { grads.push_back(&m); });
  FdResult res;
  std::size_t t = 0;
  p.visit([&](const std::string& name, Matrix& m) {
    const Matrix& g = *grads[t++];
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      const double orig = m.data()[k];
      m.data()[k] = orig + step;
      const double up = loss_only(net, p, batch, labels);
      m.data()[k] = orig - step;
      const double down = loss_only(net, p, batch, labels);
      m.data()[k] = orig;
      const double fd = (up - down) / (2 * step), an = g.data()[k];
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
      if (rel > res.worst) {
        res.worst = rel;
        res.where = name + "[" + std::to_string(k) + "] fd=" + std::to_string(fd) + " analytic=" + std::to_string(an);
      }
      ++res.checked;
    }
  });
  return res;
}

}  // namespace support
