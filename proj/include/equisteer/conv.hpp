// Circular correlation on the torus: out(x) = Psi . patch_x(f), with patch_x
// the s x s neighbourhood of x (offsets wrapped mod N) in channel-major order.

#pragma once

#include "equisteer/field.hpp"
#include "equisteer/filter_bank.hpp"

namespace equisteer {

template <class T>
using MatrixT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

// (K s^2) x N^2; column p holds the patch around pixel p.
template <class T>
MatrixT<T> im2col(const FeatureField<T>& f, int s) {
  const int n = f.side(), k = f.channels(), s2 = s * s;
  const auto offsets = patch_offsets(s);
  MatrixT<T> cols(static_cast<Eigen::Index>(k) * s2, static_cast<Eigen::Index>(n) * n);
  const T* src = f.data().data();
  for (int x0 = 0; x0 < n; ++x0)
    for (int x1 = 0; x1 < n; ++x1) {
      const Eigen::Index p = x0 * n + x1;
      for (int q = 0; q < s2; ++q) {
        const auto& o = offsets[static_cast<std::size_t>(q)];
        const std::size_t base = static_cast<std::size_t>((wrap(x0 + o[0], n) * n + wrap(x1 + o[1], n)) * k);
        for (int c = 0; c < k; ++c) cols(c * s2 + q, p) = src[base + static_cast<std::size_t>(c)];
      }
    }
  return cols;
}

// Adjoint of im2col: scatter-add patch gradients back onto the field.
template <class T>
void col2im_add(const MatrixT<T>& cols, int s, FeatureField<T>& df) {
  const int n = df.side(), k = df.channels(), s2 = s * s;
  const auto offsets = patch_offsets(s);
  T* dst = df.data().data();
  for (int x0 = 0; x0 < n; ++x0)
    for (int x1 = 0; x1 < n; ++x1) {
      const Eigen::Index p = x0 * n + x1;
      for (int q = 0; q < s2; ++q) {
        const auto& o = offsets[static_cast<std::size_t>(q)];
        const std::size_t base = static_cast<std::size_t>((wrap(x0 + o[0], n) * n + wrap(x1 + o[1], n)) * k);
        for (int c = 0; c < k; ++c) dst[base + static_cast<std::size_t>(c)] += cols(c * s2 + q, p);
      }
    }
}

template <class T>
Eigen::Map<const MatrixT<T>> as_matrix(const FeatureField<T>& f) {
  return {f.data().data(), f.channels(), static_cast<Eigen::Index>(f.grid().points())};
}

template <class T>
Eigen::Map<MatrixT<T>> as_matrix(FeatureField<T>& f) {
  return {f.data().data(), f.channels(), static_cast<Eigen::Index>(f.grid().points())};
}

// Raw kernel: weights are K' x (K s^2); the output carries `out_fiber`.
template <class T>
FeatureField<T> correlate_weights(const FeatureField<T>& f, const MatrixT<T>& weights, int s, const FiberSpec& out_fiber) {
  if (weights.cols() != static_cast<Eigen::Index>(f.channels()) * s * s)
    throw FiberMismatch("filter expects " + std::to_string(weights.cols() / (s * s)) + " input channels, field has " + std::to_string(f.channels()));
  FeatureField<T> out(f.grid(), out_fiber);
  if (weights.rows() != out.channels()) throw FiberMismatch("filter rows do not match the output fiber");
  as_matrix(out).noalias() = weights * im2col(f, s);
  return out;
}

template <class T>
FeatureField<T> correlate(const FeatureField<T>& f, const FilterBank& bank) {
  if (f.fiber() != bank.in) throw FiberMismatch("field fiber " + f.fiber().str() + " does not match filter input " + bank.in.str());
  return correlate_weights<T>(f, bank.weights.template cast<T>(), bank.size, bank.out);
}

}  // namespace equisteer
