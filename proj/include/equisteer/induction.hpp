// Layer-level check of Psi * [pi(g) f] = pi'(g) [Psi * f] on random fields and
// random group elements of p4m.

#pragma once

#include <cstdint>

#include "equisteer/conv.hpp"

namespace equisteer {

struct InductionReport {
  int samples = 0;
  double max_deviation = 0;  // max |lhs - rhs| / max |rhs|, 0 when both vanish
  double max_abs_error = 0;
};

template <class T = float>
InductionReport check_induction_identity(const FilterBank& bank, const TorusGrid& grid, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Representation in_rep = fiber_rep(bank.in), out_rep = fiber_rep(bank.out);
  std::uniform_int_distribution<int> coord(0, grid.size() - 1), elem(0, kGroupOrder - 1);
  InductionReport rep;
  rep.samples = samples;
  for (int i = 0; i < samples; ++i) {
    const FeatureField<T> f = random_field<T>(grid, bank.in, rng);
    const Isometry g(Dihedral::from_index(elem(rng)), {coord(rng), coord(rng)}, grid);
    const FeatureField<T> lhs = correlate(induced_act_field(in_rep, g, f), bank);
    const FeatureField<T> rhs = induced_act_field(out_rep, g, correlate(f, bank));
    double diff = 0;
    for (std::size_t k = 0; k < lhs.data().size(); ++k)
      diff = std::max(diff, std::abs(static_cast<double>(lhs.data()[k]) - static_cast<double>(rhs.data()[k])));
    const double scale = max_abs(rhs.data());
    rep.max_abs_error = std::max(rep.max_abs_error, diff);
    rep.max_deviation = std::max(rep.max_deviation, scale > 0 ? diff / scale : diff);
  }
  return rep;
}

// Regular -> regular layer with a 3 x 3 patch on the 9 x 9 torus.
template <class T = float>
InductionReport check_induction_identity(int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const FiberSpec reg{{"regular", 1}};
  const FilterBank bank = assemble_filter_bank(reg, reg, 3, random_filter_params(reg, reg, 3, rng));
  return check_induction_identity<T>(bank, TorusGrid(9), samples, seed);
}

}  // namespace equisteer
