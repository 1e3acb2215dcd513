// Group convolution over p4m for regular-capsule stacks.
//
// A regular field is a function on p4m, F_c(x, b) = f(x)[8c + b], and the layer is
//   F'_j(x, h) = sum_{c, h', u} psi_jc(h^-1 u, h^-1 h') F_c(x + u, h')
// where psi_jc(u, h') is read off the identity rows of the steerable bank. Each
// output plane (j, h) is a plain correlation with the filter transformed by h.

#pragma once

#include "equisteer/field.hpp"
#include "equisteer/filter_bank.hpp"

namespace equisteer {

namespace detail {

inline int regular_copies(const FiberSpec& spec, const char* what) {
  int copies = 0;
  for (const auto& e : spec.entries) {
    if (e.capsule != "regular") throw InvalidArgument(std::string("group convolution needs a pure regular ") + what + " fiber, got " + spec.str());
    copies += e.mult;
  }
  return copies;
}

}  // namespace detail

template <class T>
FeatureField<T> gcnn_oracle(const FeatureField<T>& f, const FilterBank& bank) {
  const int cin = detail::regular_copies(bank.in, "input");
  const int cout = detail::regular_copies(bank.out, "output");
  if (f.fiber() != bank.in) throw FiberMismatch("field fiber " + f.fiber().str() + " does not match filter input " + bank.in.str());
  const int s = bank.size, c = patch_center(s), n = f.side();

  // psi(j, cc, h', u) from the rows of output group coordinate e
  auto psi = [&](int j, int cc, Dihedral hp, Point u) {
    return bank.at(j * kGroupOrder, cc * kGroupOrder + hp.index(), u[0] + c, u[1] + c);
  };

  // planes stacked on the group axis: channel h * cout + j
  std::vector<T> planes(static_cast<std::size_t>(n * n * cout * kGroupOrder), T(0));
  for (const Dihedral h : d4_elements()) {
    const Dihedral hinv = h.inverse();
    for (int j = 0; j < cout; ++j) {
      // transformed filter psi^h(cc, h', u) = psi(cc, h^-1 h', h^-1 u)
      std::vector<std::tuple<Point, int, double>> taps;
      for (int cc = 0; cc < cin; ++cc)
        for (const Dihedral hp : d4_elements())
          for (int a = -c; a <= c; ++a)
            for (int b = -c; b <= c; ++b) {
              const double w = psi(j, cc, hinv * hp, hinv.apply({a, b}));
              if (w != 0) taps.emplace_back(Point{a, b}, cc * kGroupOrder + hp.index(), w);
            }
      const std::size_t ch = static_cast<std::size_t>(h.index() * cout + j);
      for (int x0 = 0; x0 < n; ++x0)
        for (int x1 = 0; x1 < n; ++x1) {
          double acc = 0;
          for (const auto& [u, k, w] : taps) acc += w * static_cast<double>(f.at({wrap(x0 + u[0], n), wrap(x1 + u[1], n)}, k));
          planes[static_cast<std::size_t>(x0 * n + x1) * cout * kGroupOrder + ch] = static_cast<T>(acc);
        }
    }
  }

  // fixed reindexing h * cout + j -> j * 8 + h
  FeatureField<T> out(f.grid(), bank.out);
  for (int p = 0; p < n * n; ++p)
    for (int j = 0; j < cout; ++j)
      for (int h = 0; h < kGroupOrder; ++h)
        out.data()[static_cast<std::size_t>(p * cout * kGroupOrder + j * kGroupOrder + h)] =
            planes[static_cast<std::size_t>(p * cout * kGroupOrder + h * cout + j)];
  return out;
}

}  // namespace equisteer
