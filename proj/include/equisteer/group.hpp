// Exact arithmetic for the point group D4 and for p4m acting on an odd N x N torus.
//
// Elements of D4 are kept in the canonical form m^a r^b (a in {0,1}, b in {0..3});
// r is the 90-degree rotation [[0,-1],[1,0]] and m the mirror [[-1,0],[0,1]].
// Elements of p4m are pairs (t, h) meaning "first h about the origin, then
// translate by t", realized as the homogeneous matrix [[R, T], [0, 1]] mod N.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "equisteer/errors.hpp"

namespace equisteer {

using IntMat2 = std::array<std::array<int, 2>, 2>;
using IntMat3 = std::array<std::array<long, 3>, 3>;
using Point = std::array<int, 2>;

inline constexpr int kGroupOrder = 8;

class Dihedral {
 public:
  constexpr Dihedral() = default;
  constexpr Dihedral(int reflection, int rotation)
      : a_(reflection & 1), b_(((rotation % 4) + 4) % 4) {}

  static constexpr Dihedral identity() { return {}; }
  static constexpr Dihedral rotation(int steps = 1) { return {0, steps}; }
  static constexpr Dihedral mirror() { return {1, 0}; }

  // Index in the column order e, r, r2, r3, m, mr, mr2, mr3.
  static constexpr Dihedral from_index(int i) { return {i / 4, i % 4}; }
  constexpr int index() const { return 4 * a_ + b_; }

  constexpr int reflection() const { return a_; }
  constexpr int rotation_steps() const { return b_; }

  // r^b m^c = m^c r^((-1)^c b)
  constexpr Dihedral operator*(Dihedral o) const {
    return {a_ + o.a_, (o.a_ ? -b_ : b_) + o.b_};
  }

  constexpr Dihedral inverse() const { return a_ ? *this : Dihedral{0, -b_}; }

  constexpr bool operator==(const Dihedral&) const = default;

  constexpr IntMat2 matrix() const {
    IntMat2 m{{{1, 0}, {0, 1}}};
    constexpr IntMat2 rot{{{0, -1}, {1, 0}}};
    for (int k = 0; k < b_; ++k) m = mul(m, rot);
    if (a_) m = mul(IntMat2{{{-1, 0}, {0, 1}}}, m);
    return m;
  }

  constexpr Point apply(Point x) const {
    const IntMat2 m = matrix();
    return {m[0][0] * x[0] + m[0][1] * x[1], m[1][0] * x[0] + m[1][1] * x[1]};
  }

  std::string name() const {
    static constexpr std::array<const char*, 8> names{"e", "r", "r2", "r3", "m", "mr", "mr2", "mr3"};
    return names[static_cast<std::size_t>(index())];
  }

  static Dihedral parse(std::string_view s) {
    for (int i = 0; i < kGroupOrder; ++i)
      if (from_index(i).name() == s) return from_index(i);
    throw InvalidArgument("unknown D4 element '" + std::string(s) + "'");
  }

 private:
  static constexpr IntMat2 mul(const IntMat2& x, const IntMat2& y) {
    IntMat2 z{};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) z[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
    return z;
  }

  int a_ = 0;
  int b_ = 0;
};

inline constexpr std::array<Dihedral, 8> d4_elements() {
  std::array<Dihedral, 8> out{};
  for (int i = 0; i < kGroupOrder; ++i) out[static_cast<std::size_t>(i)] = Dihedral::from_index(i);
  return out;
}

inline constexpr Dihedral compose(Dihedral g, Dihedral h) { return g * h; }
inline constexpr Dihedral inverse(Dihedral g) { return g.inverse(); }

inline IntMat2 multiply(const IntMat2& x, const IntMat2& y) {
  IntMat2 z{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) z[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
  return z;
}

// Conjugacy classes of D4, each listed by element index.
inline std::vector<std::vector<int>> conjugacy_classes() {
  std::vector<std::vector<int>> classes;
  std::array<bool, 8> seen{};
  for (const Dihedral x : d4_elements()) {
    if (seen[static_cast<std::size_t>(x.index())]) continue;
    std::vector<int> cls;
    for (const Dihedral g : d4_elements()) {
      const int c = (g * x * g.inverse()).index();
      if (std::find(cls.begin(), cls.end(), c) == cls.end()) cls.push_back(c);
    }
    std::sort(cls.begin(), cls.end());
    for (int c : cls) seen[static_cast<std::size_t>(c)] = true;
    classes.push_back(std::move(cls));
  }
  return classes;
}

// ---------------------------------------------------------------------------
// Torus and p4m

inline int wrap(long v, int n) {
  const long r = v % n;
  return static_cast<int>(r < 0 ? r + n : r);
}

class TorusGrid {
 public:
  explicit TorusGrid(int n) : n_(n) {
    if (n < 1 || n % 2 == 0) throw InvalidArgument("torus side must be odd and positive, got " + std::to_string(n));
  }
  int size() const { return n_; }
  int points() const { return n_ * n_; }
  bool contains(Point x) const { return x[0] >= 0 && x[0] < n_ && x[1] >= 0 && x[1] < n_; }
  Point wrap_point(Point x) const { return {wrap(x[0], n_), wrap(x[1], n_)}; }
  int linear(Point x) const { return x[0] * n_ + x[1]; }
  bool operator==(const TorusGrid&) const = default;

 private:
  int n_;
};

class Isometry {
 public:
  Isometry(Dihedral h, Point t, const TorusGrid& grid) : h_(h), t_(grid.wrap_point(t)), n_(grid.size()) {}

  static Isometry identity(const TorusGrid& grid) { return {Dihedral{}, {0, 0}, grid}; }
  static Isometry translation(Point t, const TorusGrid& grid) { return {Dihedral{}, t, grid}; }
  static Isometry point_group(Dihedral h, const TorusGrid& grid) { return {h, {0, 0}, grid}; }

  Dihedral linear_part() const { return h_; }
  Point translation_part() const { return t_; }
  TorusGrid grid() const { return TorusGrid(n_); }

  // (t1 h1)(t2 h2) = (t1 + R1 t2) (h1 h2)
  Isometry operator*(const Isometry& o) const {
    if (o.n_ != n_) throw GridMismatch("composing elements over grids " + std::to_string(n_) + " and " + std::to_string(o.n_));
    const Point rt = h_.apply(o.t_);
    return {h_ * o.h_, {t_[0] + rt[0], t_[1] + rt[1]}, TorusGrid(n_)};
  }

  Isometry inverse() const {
    const Dihedral hi = h_.inverse();
    const Point rt = hi.apply(t_);
    return {hi, {-rt[0], -rt[1]}, TorusGrid(n_)};
  }

  Point apply(Point x) const {
    const Point rx = h_.apply(x);
    return {wrap(static_cast<long>(rx[0]) + t_[0], n_), wrap(static_cast<long>(rx[1]) + t_[1], n_)};
  }

  IntMat3 matrix() const {
    const IntMat2 r = h_.matrix();
    return {{{r[0][0], r[0][1], t_[0]}, {r[1][0], r[1][1], t_[1]}, {0, 0, 1}}};
  }

  // {"h": "mr", "t": [1, 2]} style text, also used as a report key.
  std::string name() const {
    return h_.name() + "@[" + std::to_string(t_[0]) + "," + std::to_string(t_[1]) + "]";
  }

  bool operator==(const Isometry&) const = default;

 private:
  Dihedral h_;
  Point t_;
  int n_;
};

inline Isometry compose(const Isometry& g, const Isometry& h) { return g * h; }
inline Isometry inverse(const Isometry& g) { return g.inverse(); }

inline Point act_on_point(const Isometry& g, Point x, const TorusGrid& grid) {
  if (g.grid() != grid) throw GridMismatch("element and point live on different grids");
  if (!grid.contains(x)) throw InvalidArgument("point outside the grid");
  return g.apply(x);
}

// The pure translation taking the origin to x.
inline Isometry section(Point x, const TorusGrid& grid) {
  if (!grid.contains(x)) throw InvalidArgument("point outside the grid");
  return Isometry::translation(x, grid);
}

// Homogeneous matrix product reduced mod N (translation column only).
inline IntMat3 multiply_mod(const IntMat3& x, const IntMat3& y, int n) {
  IntMat3 z{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) z[i][j] += x[i][k] * y[k][j];
  z[0][2] = wrap(z[0][2], n);
  z[1][2] = wrap(z[1][2], n);
  return z;
}

// ---------------------------------------------------------------------------
// Subgroups and cosets

class Subgroup {
 public:
  // Throws InvalidSubgroup unless the set contains e and is closed under products.
  explicit Subgroup(const std::vector<Dihedral>& elements) {
    for (const Dihedral g : elements) mask_ |= static_cast<std::uint8_t>(1u << g.index());
    validate();
  }

  static Subgroup from_mask(std::uint8_t mask) {
    Subgroup s;
    s.mask_ = mask;
    s.validate();
    return s;
  }

  static Subgroup whole() { return from_mask(0xff); }
  static Subgroup trivial() { return from_mask(0x01); }

  bool contains(Dihedral g) const { return (mask_ >> g.index()) & 1u; }
  std::uint8_t mask() const { return mask_; }
  int order() const { return __builtin_popcount(mask_); }

  std::vector<Dihedral> elements() const {
    std::vector<Dihedral> out;
    for (const Dihedral g : d4_elements())
      if (contains(g)) out.push_back(g);
    return out;
  }

  bool operator==(const Subgroup&) const = default;

  static bool is_closed(std::uint8_t mask) {
    if (!(mask & 1u)) return false;
    for (int i = 0; i < kGroupOrder; ++i) {
      if (!((mask >> i) & 1u)) continue;
      for (int j = 0; j < kGroupOrder; ++j) {
        if (!((mask >> j) & 1u)) continue;
        if (!((mask >> (Dihedral::from_index(i) * Dihedral::from_index(j)).index()) & 1u)) return false;
      }
    }
    return true;
  }

 private:
  Subgroup() = default;

  void validate() const {
    if (!(mask_ & 1u)) throw InvalidSubgroup("subgroup must contain the identity");
    if (!is_closed(mask_)) throw InvalidSubgroup("subset is not closed under composition");
  }

  std::uint8_t mask_ = 0;
};

// All 10 subgroups of D4, ordered by order and then by element mask.
// In a finite group closure under products already implies closure under inverses.
inline std::vector<Subgroup> enumerate_subgroups() {
  std::vector<Subgroup> out;
  for (unsigned mask = 1; mask < 256; mask += 2)
    if (Subgroup::is_closed(static_cast<std::uint8_t>(mask))) out.push_back(Subgroup::from_mask(static_cast<std::uint8_t>(mask)));
  std::stable_sort(out.begin(), out.end(), [](const Subgroup& x, const Subgroup& y) { return x.order() < y.order(); });
  return out;
}

using Coset = std::vector<Dihedral>;

// Left cosets hK ordered by their smallest representative; elements by index.
inline std::vector<Coset> cosets(const Subgroup& k) {
  std::vector<Coset> out;
  std::array<bool, 8> covered{};
  for (const Dihedral h : d4_elements()) {
    if (covered[static_cast<std::size_t>(h.index())]) continue;
    Coset c;
    for (const Dihedral x : k.elements()) c.push_back(h * x);
    std::sort(c.begin(), c.end(), [](Dihedral x, Dihedral y) { return x.index() < y.index(); });
    for (const Dihedral x : c) covered[static_cast<std::size_t>(x.index())] = true;
    out.push_back(std::move(c));
  }
  return out;
}

inline int coset_of(const std::vector<Coset>& cs, Dihedral g) {
  for (std::size_t i = 0; i < cs.size(); ++i)
    if (std::find(cs[i].begin(), cs[i].end(), g) != cs[i].end()) return static_cast<int>(i);
  return -1;
}

}  // namespace equisteer
