#include <gtest/gtest.h>

#include <random>
#include <set>

#include "equisteer/group.hpp"

using namespace equisteer;

namespace {

// The E column of the irrep table, transcribed literally (e, r, r2, r3, m, mr, mr2, mr3).
const std::array<IntMat2, 8> kTableE{{
    {{{1, 0}, {0, 1}}},
    {{{0, -1}, {1, 0}}},
    {{{-1, 0}, {0, -1}}},
    {{{0, 1}, {-1, 0}}},
    {{{-1, 0}, {0, 1}}},
    {{{0, 1}, {1, 0}}},
    {{{1, 0}, {0, -1}}},
    {{{0, -1}, {-1, 0}}},
}};

const Dihedral e = Dihedral::identity();
const Dihedral r = Dihedral::rotation();
const Dihedral m = Dihedral::mirror();

}  // namespace

TEST(Dihedral, MatricesMatchTable) {
  for (const Dihedral g : d4_elements()) EXPECT_EQ(g.matrix(), kTableE[static_cast<std::size_t>(g.index())]) << g.name();
}

TEST(Dihedral, ComposeExamples) {
  EXPECT_EQ(compose(m, r).name(), "mr");
  EXPECT_EQ(compose(r, Dihedral::rotation(3)), e);
  // r * m computed from the table matrices, then looked up in the table.
  const IntMat2 prod = multiply(kTableE[1], kTableE[4]);
  const auto it = std::find(kTableE.begin(), kTableE.end(), prod);
  ASSERT_NE(it, kTableE.end());
  EXPECT_EQ(Dihedral::from_index(static_cast<int>(it - kTableE.begin())).name(), "mr3");
  EXPECT_EQ(compose(r, m).name(), "mr3");
}

TEST(Dihedral, InverseExamples) {
  EXPECT_EQ(inverse(r).name(), "r3");
  EXPECT_EQ(inverse(m), m);
  const Dihedral mr = Dihedral::parse("mr");
  EXPECT_EQ(multiply(kTableE[5], kTableE[5]), kTableE[0]);
  EXPECT_EQ(inverse(mr), mr);
  for (const Dihedral g : d4_elements()) EXPECT_EQ(g * g.inverse(), e);
}

TEST(Dihedral, HomomorphismAndFaithfulness) {
  std::set<IntMat2> distinct;
  for (const Dihedral g : d4_elements()) {
    distinct.insert(g.matrix());
    for (const Dihedral h : d4_elements()) EXPECT_EQ(multiply(g.matrix(), h.matrix()), (g * h).matrix());
  }
  EXPECT_EQ(distinct.size(), 8u);
}

TEST(Dihedral, Associativity) {
  for (const Dihedral a : d4_elements())
    for (const Dihedral b : d4_elements())
      for (const Dihedral c : d4_elements()) EXPECT_EQ((a * b) * c, a * (b * c));
}

TEST(Dihedral, ParseRoundTripAndErrors) {
  for (const Dihedral g : d4_elements()) EXPECT_EQ(Dihedral::parse(g.name()), g);
  EXPECT_THROW(Dihedral::parse("r4"), InvalidArgument);
}

TEST(Dihedral, ConjugacyClasses) {
  // {e}, {r2}, {r, r3}, {m, mr2}, {mr, mr3}
  EXPECT_EQ(conjugacy_classes().size(), 5u);
}

TEST(Torus, RejectsEvenSide) {
  EXPECT_THROW(TorusGrid(4), InvalidArgument);
  EXPECT_NO_THROW(TorusGrid(1));
}

TEST(Torus, ActOnPointExamples) {
  const TorusGrid grid(5);
  EXPECT_EQ(act_on_point(Isometry::identity(grid), {2, 3}, grid), (Point{2, 3}));
  EXPECT_EQ(act_on_point(Isometry::point_group(r, grid), {1, 0}, grid), (Point{0, 1}));
  EXPECT_EQ(act_on_point(Isometry::translation({1, 0}, grid), {4, 0}, grid), (Point{0, 0}));
}

TEST(Torus, ActionIsBijection) {
  const TorusGrid grid(7);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> c(0, 6), h(0, 7);
  for (int trial = 0; trial < 20; ++trial) {
    const Isometry g(Dihedral::from_index(h(rng)), {c(rng), c(rng)}, grid);
    std::set<Point> image;
    for (int a = 0; a < 7; ++a)
      for (int b = 0; b < 7; ++b) image.insert(g.apply({a, b}));
    EXPECT_EQ(image.size(), 49u);
  }
}

TEST(Torus, LeftActionLaw) {
  const TorusGrid grid(9);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> c(0, 8), h(0, 7);
  for (int trial = 0; trial < 100; ++trial) {
    const Isometry g(Dihedral::from_index(h(rng)), {c(rng), c(rng)}, grid);
    const Isometry k(Dihedral::from_index(h(rng)), {c(rng), c(rng)}, grid);
    const Point x{c(rng), c(rng)};
    EXPECT_EQ(act_on_point(g, act_on_point(k, x, grid), grid), act_on_point(compose(g, k), x, grid));
  }
}

TEST(Torus, HomogeneousMatrixIsHomomorphism) {
  const TorusGrid grid(5);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> c(0, 4), h(0, 7);
  for (int trial = 0; trial < 50; ++trial) {
    const Isometry g(Dihedral::from_index(h(rng)), {c(rng), c(rng)}, grid);
    const Isometry k(Dihedral::from_index(h(rng)), {c(rng), c(rng)}, grid);
    EXPECT_EQ(multiply_mod(g.matrix(), k.matrix(), 5), (g * k).matrix());
    EXPECT_EQ(g * g.inverse(), Isometry::identity(grid));
  }
}

TEST(Torus, UniqueFactorization) {
  const TorusGrid grid(5);
  const Isometry g(Dihedral::parse("mr2"), {3, 1}, grid);
  EXPECT_EQ(Isometry::translation(g.translation_part(), grid) * Isometry::point_group(g.linear_part(), grid), g);
}

TEST(Torus, MixingGridsThrows) {
  const TorusGrid a(5), b(7);
  EXPECT_THROW(Isometry::identity(a) * Isometry::identity(b), GridMismatch);
  EXPECT_THROW(act_on_point(Isometry::identity(a), {0, 0}, b), GridMismatch);
}

TEST(Section, Examples) {
  const TorusGrid grid(5);
  EXPECT_EQ(section({0, 0}, grid), Isometry::identity(grid));
  EXPECT_EQ(section({2, 1}, grid), Isometry::translation({2, 1}, grid));
  EXPECT_EQ(section({2, 1}, grid).linear_part(), e);
}

// bar((t r)^-1 . x) = r^-1 t^-1 bar(x) r, checked with homogeneous integer matrices.
TEST(Section, InductionIdentityExact) {
  const TorusGrid grid(9);
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> c(0, 8);
  for (const Dihedral h : d4_elements())
    for (int trial = 0; trial < 20; ++trial) {
      const Isometry t = Isometry::translation({c(rng), c(rng)}, grid);
      const Isometry rot = Isometry::point_group(h, grid);
      const Point x{c(rng), c(rng)};
      const IntMat3 lhs = section((t * rot).inverse().apply(x), grid).matrix();
      IntMat3 rhs = rot.inverse().matrix();
      rhs = multiply_mod(rhs, t.inverse().matrix(), 9);
      rhs = multiply_mod(rhs, section(x, grid).matrix(), 9);
      rhs = multiply_mod(rhs, rot.matrix(), 9);
      EXPECT_EQ(lhs, rhs);
    }
}

TEST(Subgroups, EnumerateGivesTen) {
  const auto subs = enumerate_subgroups();
  ASSERT_EQ(subs.size(), 10u);
  EXPECT_EQ(subs.front(), Subgroup::trivial());
  EXPECT_EQ(subs.back(), Subgroup::whole());
  const Subgroup rr(std::vector<Dihedral>{e, Dihedral::rotation(2)});
  EXPECT_NE(std::find(subs.begin(), subs.end(), rr), subs.end());
  EXPECT_EQ(rr.order(), 2);
  for (const auto& s : subs) {
    EXPECT_TRUE(s.contains(e));
    EXPECT_EQ(8 % s.order(), 0);
    for (const Dihedral g : s.elements()) EXPECT_TRUE(s.contains(g.inverse()));
  }
}

TEST(Subgroups, InvalidSubsetsRejected) {
  EXPECT_THROW(Subgroup(std::vector<Dihedral>{e, r}), InvalidSubgroup);
  EXPECT_THROW(Subgroup(std::vector<Dihedral>{m}), InvalidSubgroup);
}

TEST(Cosets, PartitionProperties) {
  for (const auto& k : enumerate_subgroups()) {
    const auto cs = cosets(k);
    EXPECT_EQ(static_cast<int>(cs.size()), 8 / k.order());
    std::set<int> seen;
    for (const auto& c : cs)
      for (const Dihedral g : c) EXPECT_TRUE(seen.insert(g.index()).second);
    EXPECT_EQ(seen.size(), 8u);
  }
  EXPECT_EQ(cosets(Subgroup::trivial()).size(), 8u);
  EXPECT_EQ(cosets(Subgroup::whole()).size(), 1u);
  EXPECT_EQ(cosets(Subgroup(std::vector<Dihedral>{e, m})).size(), 4u);
}
