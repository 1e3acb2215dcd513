// Real representations of D4: the irrep table, characters and type decomposition,
// direct sums, and the regular / quotient permutation representations.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "equisteer/errors.hpp"
#include "equisteer/group.hpp"

namespace equisteer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Representation {
 public:
  Representation() = default;

  // Matrices are given in element-index order (e, r, r2, r3, m, mr, mr2, mr3).
  Representation(std::string name, std::array<Matrix, 8> matrices) : name_(std::move(name)), mats_(std::move(matrices)) {
    const auto d = mats_[0].rows();
    for (const Matrix& m : mats_)
      if (m.rows() != d || m.cols() != d) throw InvalidArgument("representation '" + name_ + "' has non-square or mismatched matrices");
  }

  // Extends a choice of images for the generators r and m to all of D4 via m^a r^b.
  // The result is only a representation if the images satisfy the D4 relations.
  static Representation from_generators(std::string name, const Matrix& r, const Matrix& m) {
    std::array<Matrix, 8> mats;
    for (const Dihedral g : d4_elements()) {
      Matrix x = Matrix::Identity(r.rows(), r.cols());
      for (int k = 0; k < g.rotation_steps(); ++k) x = x * r;
      if (g.reflection()) x = m * x;
      mats[static_cast<std::size_t>(g.index())] = std::move(x);
    }
    return Representation(std::move(name), std::move(mats));
  }

  int dim() const { return static_cast<int>(mats_[0].rows()); }
  const std::string& name() const { return name_; }
  const Matrix& operator()(Dihedral g) const { return mats_[static_cast<std::size_t>(g.index())]; }
  const std::array<Matrix, 8>& matrices() const { return mats_; }

 private:
  std::string name_;
  std::array<Matrix, 8> mats_{};
};

// ---------------------------------------------------------------------------
// Irreducible representations

enum class Irrep { A1 = 0, A2 = 1, B1 = 2, B2 = 3, E = 4 };

inline constexpr std::array<Irrep, 5> kIrreps{Irrep::A1, Irrep::A2, Irrep::B1, Irrep::B2, Irrep::E};

inline std::string irrep_name(Irrep i) {
  static constexpr std::array<const char*, 5> names{"A1", "A2", "B1", "B2", "E"};
  return names[static_cast<std::size_t>(i)];
}

inline int irrep_dim(Irrep i) { return i == Irrep::E ? 2 : 1; }

namespace detail {

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

inline Representation one_dim(std::string name, double rot, double mir) {
  return Representation::from_generators(std::move(name), scalar(rot), scalar(mir));
}

}  // namespace detail

inline Representation irrep(Irrep which) {
  switch (which) {
    case Irrep::A1: return detail::one_dim("A1", 1, 1);
    case Irrep::A2: return detail::one_dim("A2", 1, -1);
    case Irrep::B1: return detail::one_dim("B1", -1, 1);
    case Irrep::B2: return detail::one_dim("B2", -1, -1);
    case Irrep::E: {
      Matrix r(2, 2), m(2, 2);
      r << 0, -1, 1, 0;
      m << -1, 0, 0, 1;
      return Representation::from_generators("E", r, m);
    }
  }
  throw InvalidArgument("unknown irrep");
}

inline std::vector<Representation> irrep_catalog() {
  std::vector<Representation> out;
  for (const Irrep i : kIrreps) out.push_back(irrep(i));
  return out;
}

// k copies of A1.
inline Representation trivial_rep(int dim, std::string name = "trivial") {
  std::array<Matrix, 8> mats;
  for (Matrix& m : mats) m = Matrix::Identity(dim, dim);
  return Representation(std::move(name), std::move(mats));
}

// ---------------------------------------------------------------------------
// Characters

using CharacterVector = std::array<double, 8>;

inline CharacterVector character(const Representation& rho) {
  CharacterVector chi{};
  for (const Dihedral g : d4_elements()) chi[static_cast<std::size_t>(g.index())] = rho(g).trace();
  return chi;
}

inline double char_inner(const CharacterVector& a, const CharacterVector& b) {
  double s = 0;
  for (std::size_t i = 0; i < 8; ++i) s += a[i] * b[i];
  return s / kGroupOrder;
}

// Multiplicities (A1, A2, B1, B2, E).
struct RepType {
  std::array<int, 5> m{};

  int operator[](Irrep i) const { return m[static_cast<std::size_t>(i)]; }
  int dim() const { return m[0] + m[1] + m[2] + m[3] + 2 * m[4]; }
  bool operator==(const RepType&) const = default;

  std::string str() const {
    return "(" + std::to_string(m[0]) + "," + std::to_string(m[1]) + "," + std::to_string(m[2]) + "," +
           std::to_string(m[3]) + "," + std::to_string(m[4]) + ")";
  }
};

inline constexpr double kMultiplicityTolerance = 1e-6;

// Rounds a character inner product that must be a non-negative integer.
inline int integral_multiplicity(double v, const std::string& what) {
  const double r = std::round(v);
  if (std::abs(v - r) > kMultiplicityTolerance || r < 0)
    throw NotARepresentation(what + " = " + std::to_string(v) + " is not a non-negative integer");
  return static_cast<int>(r);
}

inline RepType decompose_type(const Representation& rho) {
  const CharacterVector chi = character(rho);
  RepType t;
  for (const Irrep i : kIrreps)
    t.m[static_cast<std::size_t>(i)] = integral_multiplicity(char_inner(chi, character(irrep(i))), "multiplicity of " + irrep_name(i));
  return t;
}

// ---------------------------------------------------------------------------
// Constructions

inline Representation direct_sum(std::span<const Representation> reps, std::string name = {}) {
  if (reps.empty()) throw InvalidArgument("direct_sum of an empty list");
  int total = 0;
  for (const auto& r : reps) total += r.dim();
  if (name.empty()) {
    for (std::size_t i = 0; i < reps.size(); ++i) name += (i ? "+" : "") + reps[i].name();
  }
  std::array<Matrix, 8> mats;
  for (const Dihedral g : d4_elements()) {
    Matrix m = Matrix::Zero(total, total);
    int off = 0;
    for (const auto& r : reps) {
      m.block(off, off, r.dim(), r.dim()) = r(g);
      off += r.dim();
    }
    mats[static_cast<std::size_t>(g.index())] = std::move(m);
  }
  return Representation(std::move(name), std::move(mats));
}

inline Representation direct_sum(std::initializer_list<Representation> reps, std::string name = {}) {
  const std::vector<Representation> v(reps);
  return direct_sum(std::span<const Representation>(v), std::move(name));
}

// rho(a) f(bK) = f(a^-1 bK): the basis vector of coset bK is sent to that of abK.
inline Representation quotient_rep(const Subgroup& k, std::string name = {}) {
  const std::vector<Coset> cs = cosets(k);
  const int d = static_cast<int>(cs.size());
  if (name.empty()) name = "quotient";
  std::array<Matrix, 8> mats;
  for (const Dihedral a : d4_elements()) {
    Matrix m = Matrix::Zero(d, d);
    for (int j = 0; j < d; ++j) m(coset_of(cs, a * cs[static_cast<std::size_t>(j)].front()), j) = 1;
    mats[static_cast<std::size_t>(a.index())] = std::move(m);
  }
  return Representation(std::move(name), std::move(mats));
}

// Functions on D4; basis vector e_b goes to e_{ab}.
inline Representation regular_rep() { return quotient_rep(Subgroup::trivial(), "regular"); }

// A rho(g) A^-1.
inline Representation conjugate(const Representation& rho, const Matrix& a, std::string name = {}) {
  const Matrix ainv = a.inverse();
  std::array<Matrix, 8> mats;
  for (const Dihedral g : d4_elements()) mats[static_cast<std::size_t>(g.index())] = a * rho(g) * ainv;
  return Representation(name.empty() ? rho.name() + "^A" : std::move(name), std::move(mats));
}

inline bool is_representation(const Representation& rho, double tol) {
  const int d = rho.dim();
  if (d == 0) return true;
  if ((rho(Dihedral{}) - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() > tol) return false;
  for (const Dihedral g : d4_elements())
    for (const Dihedral h : d4_elements())
      if ((rho(g) * rho(h) - rho(g * h)).cwiseAbs().maxCoeff() > tol) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Realization classes

enum class RealizationClass { permutation, signed_permutation, monomial, orthogonal, general };

inline std::string to_string(RealizationClass c) {
  switch (c) {
    case RealizationClass::permutation: return "permutation";
    case RealizationClass::signed_permutation: return "signed-permutation";
    case RealizationClass::monomial: return "monomial";
    case RealizationClass::orthogonal: return "orthogonal";
    case RealizationClass::general: return "general";
  }
  return "general";
}

namespace detail {

// One nonzero per row and column; optionally constrain the nonzero values.
inline bool monomial_pattern(const Matrix& m, double tol, bool unit_magnitude, bool positive) {
  const auto n = m.rows();
  std::vector<int> col_count(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    int row_count = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = m(i, j);
      if (std::abs(v) <= tol) continue;
      ++row_count;
      ++col_count[static_cast<std::size_t>(j)];
      if (unit_magnitude && std::abs(std::abs(v) - 1) > tol) return false;
      if (positive && v < 0) return false;
    }
    if (row_count != 1) return false;
  }
  for (int c : col_count)
    if (c != 1) return false;
  return true;
}

}  // namespace detail

inline RealizationClass realization_class(const Representation& rho, double tol = 1e-12) {
  const auto all = [&](auto pred) {
    for (const Dihedral g : d4_elements())
      if (!pred(rho(g))) return false;
    return true;
  };
  if (all([&](const Matrix& m) { return detail::monomial_pattern(m, tol, true, true); })) return RealizationClass::permutation;
  if (all([&](const Matrix& m) { return detail::monomial_pattern(m, tol, true, false); })) return RealizationClass::signed_permutation;
  if (all([&](const Matrix& m) { return detail::monomial_pattern(m, tol, false, false); })) return RealizationClass::monomial;
  if (all([&](const Matrix& m) { return (m.transpose() * m - Matrix::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff() <= 1e-10; }))
    return RealizationClass::orthogonal;
  return RealizationClass::general;
}

}  // namespace equisteer
