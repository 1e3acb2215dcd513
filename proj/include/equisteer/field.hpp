// Feature fields on the torus and the induced action of p4m on them:
//   [pi'(t r) f](x) = rho(r) f((t r)^-1 x)

#pragma once

#include <random>

#include "equisteer/capsules.hpp"
#include "equisteer/patch.hpp"

namespace equisteer {

// N x N x K values, channel fastest: index (x0 * N + x1) * K + k.
template <class T>
class FeatureField {
 public:
  FeatureField(TorusGrid grid, FiberSpec fiber)
      : grid_(grid), fiber_(std::move(fiber)), channels_(fiber_.channels()),
        data_(static_cast<std::size_t>(grid_.points() * channels_), T(0)) {}

  FeatureField(TorusGrid grid, FiberSpec fiber, std::vector<T> data)
      : grid_(grid), fiber_(std::move(fiber)), channels_(fiber_.channels()), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(grid_.points() * channels_))
      throw InvalidArgument("field data has " + std::to_string(data_.size()) + " values, expected " +
                            std::to_string(grid_.points() * channels_));
  }

  const TorusGrid& grid() const { return grid_; }
  const FiberSpec& fiber() const { return fiber_; }
  int channels() const { return channels_; }
  int side() const { return grid_.size(); }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  T& at(Point x, int k) { return data_[offset(x) + static_cast<std::size_t>(k)]; }
  T at(Point x, int k) const { return data_[offset(x) + static_cast<std::size_t>(k)]; }

  std::span<T> fiber_at(Point x) { return {data_.data() + offset(x), static_cast<std::size_t>(channels_)}; }
  std::span<const T> fiber_at(Point x) const { return {data_.data() + offset(x), static_cast<std::size_t>(channels_)}; }

  std::size_t offset(Point x) const { return static_cast<std::size_t>(grid_.linear(x) * channels_); }

  template <class U>
  FeatureField<U> cast() const {
    return FeatureField<U>(grid_, fiber_, std::vector<U>(data_.begin(), data_.end()));
  }

 private:
  TorusGrid grid_;
  FiberSpec fiber_;
  int channels_;
  std::vector<T> data_;
};

template <class T, class Rng>
FeatureField<T> random_field(TorusGrid grid, FiberSpec fiber, Rng& rng, double scale = 1.0) {
  FeatureField<T> f(grid, std::move(fiber));
  std::normal_distribution<double> dist(0.0, scale);
  for (T& v : f.data()) v = static_cast<T>(dist(rng));
  return f;
}

template <class T>
double max_abs(const std::vector<T>& v) {
  double m = 0;
  for (T x : v) m = std::max(m, static_cast<double>(x < 0 ? -x : x));
  return m;
}

template <class T>
double l2_norm(const std::vector<T>& v) {
  double s = 0;
  for (T x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

// Transports fibers to their new positions and mixes them with rho(r).
template <class T>
FeatureField<T> induced_act_field(const Representation& fiber_rep, const Isometry& g, const FeatureField<T>& f) {
  if (fiber_rep.dim() != f.channels())
    throw FiberMismatch("fiber representation has dim " + std::to_string(fiber_rep.dim()) + " but the field has " +
                        std::to_string(f.channels()) + " channels");
  if (g.grid() != f.grid()) throw GridMismatch("group element and field live on different grids");
  const int n = f.side(), k = f.channels();
  const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> mix = fiber_rep(g.linear_part()).template cast<T>();
  const Isometry ginv = g.inverse();
  FeatureField<T> out(f.grid(), f.fiber());
  for (int x0 = 0; x0 < n; ++x0)
    for (int x1 = 0; x1 < n; ++x1) {
      const auto src = f.fiber_at(ginv.apply({x0, x1}));
      auto dst = out.fiber_at({x0, x1});
      for (int i = 0; i < k; ++i) {
        T acc = 0;
        for (int j = 0; j < k; ++j) {
          const T c = mix(i, j);
          if (c != T(0)) acc += c * src[static_cast<std::size_t>(j)];
        }
        dst[static_cast<std::size_t>(i)] = acc;
      }
    }
  return out;
}

// Uses the field's own fiber representation.
template <class T>
FeatureField<T> steer(const Isometry& g, const FeatureField<T>& f) {
  return induced_act_field(fiber_rep(f.fiber()), g, f);
}

inline constexpr int kInducedMatrixGuard = 4096;

// Explicit (N^2 K) x (N^2 K) matrix of the induced action; test-sized grids only.
inline Matrix induced_matrix(const Representation& fiber_rep, const Isometry& g, const TorusGrid& grid) {
  const int k = fiber_rep.dim();
  const int size = grid.points() * k;
  if (size > kInducedMatrixGuard)
    throw SizeGuardExceeded("induced_matrix: N^2 K = " + std::to_string(size) + " exceeds " + std::to_string(kInducedMatrixGuard));
  if (g.grid() != grid) throw GridMismatch("group element and grid disagree");
  const Matrix& mix = fiber_rep(g.linear_part());
  Matrix m = Matrix::Zero(size, size);
  const int n = grid.size();
  for (int x0 = 0; x0 < n; ++x0)
    for (int x1 = 0; x1 < n; ++x1) {
      // the fiber at x moves to g x
      const int col = grid.linear({x0, x1}) * k;
      const int row = grid.linear(g.apply({x0, x1})) * k;
      m.block(row, col, k, k) = mix;
    }
  return m;
}

// All of H, `translations` random translations and `products` random elements t r.
template <class Rng>
std::vector<Isometry> sample_group_elements(const TorusGrid& grid, Rng& rng, int translations = 5, int products = 10) {
  std::vector<Isometry> out;
  for (const Dihedral h : d4_elements()) out.push_back(Isometry::point_group(h, grid));
  std::uniform_int_distribution<int> coord(0, grid.size() - 1), elem(0, kGroupOrder - 1);
  for (int i = 0; i < translations; ++i) out.push_back(Isometry::translation({coord(rng), coord(rng)}, grid));
  for (int i = 0; i < products; ++i) {
    const Isometry a(Dihedral::from_index(elem(rng)), {coord(rng), coord(rng)}, grid);
    const Isometry b(Dihedral::from_index(elem(rng)), {coord(rng), coord(rng)}, grid);
    out.push_back(a * b);
  }
  return out;
}

}  // namespace equisteer
