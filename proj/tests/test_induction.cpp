#include <gtest/gtest.h>

#include "equisteer/gcnn.hpp"
#include "equisteer/induction.hpp"
#include "support.hpp"

using namespace equisteer;

namespace {

const FiberSpec kReg{{"regular", 1}};

FeatureField<double> integer_field(const TorusGrid& grid, const FiberSpec& fiber, std::mt19937_64& rng) {
  FeatureField<double> f(grid, fiber);
  std::uniform_int_distribution<int> d(-9, 9);
  for (double& v : f.data()) v = d(rng);
  return f;
}

Isometry random_isometry(const TorusGrid& grid, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> c(0, grid.size() - 1), h(0, 7);
  return Isometry(Dihedral::from_index(h(rng)), {c(rng), c(rng)}, grid);
}

}  // namespace

TEST(InducedAction, IdentityLeavesFieldUnchanged) {
  std::mt19937_64 rng(1);
  const TorusGrid grid(5);
  const auto f = random_field<double>(grid, FiberSpec{{"E", 1}, {"regular", 1}}, rng);
  EXPECT_EQ(steer(Isometry::identity(grid), f).data(), f.data());
}

TEST(InducedAction, TrivialFiberIsPixelPermutation) {
  std::mt19937_64 rng(2);
  const TorusGrid grid(7);
  const auto f = random_field<double>(grid, FiberSpec{{"A1", 1}}, rng);
  for (int trial = 0; trial < 10; ++trial) {
    const Isometry g = random_isometry(grid, rng);
    const auto out = steer(g, f);
    for (int a = 0; a < 7; ++a)
      for (int b = 0; b < 7; ++b) EXPECT_EQ(out.at(g.apply({a, b}), 0), f.at({a, b}, 0));
  }
}

TEST(InducedAction, HomomorphismExactForPermutationFibers) {
  std::mt19937_64 rng(3);
  const TorusGrid grid(5);
  const FiberSpec fiber{{"regular", 1}, {"qm", 1}, {"crelu(E)", 1}};
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = integer_field(grid, fiber, rng);
    const Isometry g = random_isometry(grid, rng), h = random_isometry(grid, rng);
    EXPECT_EQ(steer(g * h, f).data(), steer(g, steer(h, f)).data());
  }
}

TEST(InducedAction, Errors) {
  const TorusGrid a(5), b(7);
  const FeatureField<double> f(a, kReg);
  EXPECT_THROW(induced_act_field(irrep(Irrep::E), Isometry::identity(a), f), FiberMismatch);
  EXPECT_THROW(steer(Isometry::identity(b), f), GridMismatch);
  EXPECT_THROW(FeatureField<double>(a, kReg, std::vector<double>(3)), InvalidArgument);
}

TEST(InducedMatrix, Examples) {
  const TorusGrid g3(3), g5(5);
  EXPECT_EQ(induced_matrix(irrep(Irrep::A1), Isometry::identity(g3), g3), Matrix::Identity(9, 9));
  const Matrix p = induced_matrix(irrep(Irrep::A1), Isometry::point_group(Dihedral::rotation(), g3), g3);
  EXPECT_NE(p, Matrix::Identity(9, 9));
  EXPECT_EQ(Matrix(p * p * p * p), Matrix::Identity(9, 9));
  const Matrix em = induced_matrix(irrep(Irrep::E), Isometry::point_group(Dihedral::mirror(), g5), g5);
  for (Eigen::Index i = 0; i < em.rows(); ++i) {
    int nonzero = 0;
    for (Eigen::Index j = 0; j < em.cols(); ++j) {
      const double v = em(i, j);
      EXPECT_TRUE(v == 0 || v == 1 || v == -1);
      nonzero += v != 0;
    }
    EXPECT_EQ(nonzero, 1);
  }
}

TEST(InducedMatrix, AgreesWithFieldActionAndIsHomomorphism) {
  std::mt19937_64 rng(4);
  const TorusGrid grid(5);
  const FiberSpec fiber{{"E", 1}, {"B2", 1}};
  const Representation rep = fiber_rep(fiber);
  for (int trial = 0; trial < 10; ++trial) {
    const Isometry g = random_isometry(grid, rng), h = random_isometry(grid, rng);
    const auto f = random_field<double>(grid, fiber, rng);
    const Vector v = Eigen::Map<const Vector>(f.data().data(), static_cast<Eigen::Index>(f.data().size()));
    const Vector w = induced_matrix(rep, g, grid) * v;
    const auto out = steer(g, f);
    EXPECT_LE((w - Eigen::Map<const Vector>(out.data().data(), w.size())).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(induced_matrix(rep, g * h, grid), Matrix(induced_matrix(rep, g, grid) * induced_matrix(rep, h, grid)));
  }
}

TEST(InducedMatrix, SizeGuard) {
  const TorusGrid grid(25);
  EXPECT_THROW(induced_matrix(regular_rep(), Isometry::identity(grid), grid), SizeGuardExceeded);
}

TEST(SampleElements, Counts) {
  std::mt19937_64 rng(5);
  const auto els = sample_group_elements(TorusGrid(9), rng);
  EXPECT_EQ(els.size(), 8u + 5u + 10u);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(els[static_cast<std::size_t>(i)].translation_part(), (Point{0, 0}));
}

TEST(Correlate, CenterPixelIdentity) {
  std::mt19937_64 rng(6);
  const TorusGrid grid(5);
  const FiberSpec a1{{"A1", 1}};
  FilterBankParams p = zero_filter_params(a1, a1, 1);
  p.at(0, 0)(0, 0) = 1;
  const auto bank = assemble_filter_bank(a1, a1, 1, p);
  EXPECT_EQ(bank.weights(0, 0), 1);
  const auto f = random_field<double>(grid, a1, rng);
  EXPECT_EQ(correlate(f, bank).data(), f.data());
}

TEST(Correlate, ConstantFieldGivesConstantOutput) {
  std::mt19937_64 rng(7);
  const TorusGrid grid(7);
  const FiberSpec in{{"regular", 1}, {"E", 1}}, out{{"qm", 1}, {"A1", 2}};
  const auto bank = assemble_filter_bank(in, out, 3, random_filter_params(in, out, 3, rng));
  FeatureField<double> f(grid, in);
  const Vector fiber = support::random_matrix(in.channels(), 1, rng);
  for (int p = 0; p < 49; ++p)
    for (int k = 0; k < in.channels(); ++k) f.data()[static_cast<std::size_t>(p * in.channels() + k)] = fiber(k);
  // Psi applied to the tiled patch, channel-major
  Vector tiled(in.channels() * 9);
  for (int k = 0; k < in.channels(); ++k) tiled.segment(k * 9, 9).setConstant(fiber(k));
  const Vector expected = bank.weights * tiled;
  const auto g = correlate(f, bank);
  for (int p = 0; p < 49; ++p)
    for (int k = 0; k < out.channels(); ++k) EXPECT_NEAR(g.data()[static_cast<std::size_t>(p * out.channels() + k)], expected(k), 1e-12);
}

TEST(Correlate, MatchesDirectSum) {
  // out(x)[o] = sum_{k,a,b} W(o, k, a, b) f(x + (a - c, b - c))[k]
  std::mt19937_64 rng(8);
  const TorusGrid grid(5);
  const FiberSpec in{{"E", 1}}, out{{"regular", 1}};
  const auto bank = assemble_filter_bank(in, out, 3, random_filter_params(in, out, 3, rng));
  const auto f = random_field<double>(grid, in, rng);
  const auto g = correlate(f, bank);
  for (int x0 = 0; x0 < 5; ++x0)
    for (int x1 = 0; x1 < 5; ++x1)
      for (int o = 0; o < 8; ++o) {
        double acc = 0;
        for (int k = 0; k < 2; ++k)
          for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) acc += bank.at(o, k, a, b) * f.at({wrap(x0 + a - 1, 5), wrap(x1 + b - 1, 5)}, k);
        EXPECT_NEAR(g.at({x0, x1}, o), acc, 1e-12);
      }
}

TEST(Correlate, EquivariantForMixedFibers) {
  std::mt19937_64 rng(9);
  const TorusGrid grid(9);
  const FiberSpec in{{"regular", 1}, {"E", 2}, {"qmr2", 1}}, out{{"B2", 1}, {"r2mr", 2}, {"regular", 1}};
  const auto bank = assemble_filter_bank(in, out, 3, random_filter_params(in, out, 3, rng));
  const auto report = check_induction_identity<float>(bank, grid, 20, 10);
  EXPECT_LE(report.max_deviation, 1e-5);
  const auto report64 = check_induction_identity<double>(bank, grid, 20, 10);
  EXPECT_LE(report64.max_deviation, 1e-12);
  EXPECT_THROW(correlate(FeatureField<double>(grid, out), bank), FiberMismatch);
}

TEST(InductionIdentity, RegularLayerFloat32) {
  const auto report = check_induction_identity<float>(50, 2024);
  EXPECT_EQ(report.samples, 50);
  EXPECT_LE(report.max_deviation, 1e-5);
}

TEST(InductionIdentity, ZeroFilterHasZeroDeviation) {
  const FilterBank bank = assemble_filter_bank(kReg, kReg, 3, zero_filter_params(kReg, kReg, 3));
  EXPECT_EQ(check_induction_identity<float>(bank, TorusGrid(9), 5, 1).max_deviation, 0.0);
}

TEST(InductionIdentity, NonEquivariantFilterIsCaught) {
  std::mt19937_64 rng(11);
  FilterBank bank = assemble_filter_bank(kReg, kReg, 3, random_filter_params(kReg, kReg, 3, rng));
  bank.weights(0, 4) += 0.5;  // off the equivariant subspace
  EXPECT_GT(check_induction_identity<float>(bank, TorusGrid(9), 10, 1).max_deviation, 1e-2);
}

TEST(GroupConvolution, AgreesWithSteerableLayer) {
  std::mt19937_64 rng(12);
  const TorusGrid grid(9);
  const FiberSpec in{{"regular", 2}}, out{{"regular", 3}};
  const auto bank = assemble_filter_bank(in, out, 3, random_filter_params(in, out, 3, rng));
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_field<double>(grid, in, rng);
    const auto a = gcnn_oracle(f, bank), b = correlate(f, bank);
    double worst = 0;
    for (std::size_t k = 0; k < a.data().size(); ++k) worst = std::max(worst, std::abs(a.data()[k] - b.data()[k]));
    EXPECT_LE(worst, 1e-6);
  }
}

TEST(GroupConvolution, DeltaInputGivesTransformedFilters) {
  std::mt19937_64 rng(13);
  const TorusGrid grid(7);
  const auto bank = assemble_filter_bank(kReg, kReg, 3, random_filter_params(kReg, kReg, 3, rng));
  const Point y{3, 3};
  const Dihedral hp = Dihedral::parse("mr");
  FeatureField<double> f(grid, kReg);
  f.at(y, hp.index()) = 1;
  const auto out = gcnn_oracle(f, bank);
  // out(y - u)[h] = psi(h^-1 h', h^-1 u) with psi read from the identity row
  for (const Dihedral h : d4_elements())
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b) {
        const Point u = h.inverse().apply({a, b});
        const double expect = bank.at(0, (h.inverse() * hp).index(), u[0] + 1, u[1] + 1);
        EXPECT_DOUBLE_EQ(out.at({wrap(y[0] - a, 7), wrap(y[1] - b, 7)}, h.index()), expect);
      }
}

TEST(GroupConvolution, ZeroFilterAndErrors) {
  std::mt19937_64 rng(14);
  const TorusGrid grid(5);
  const auto zero = assemble_filter_bank(kReg, kReg, 3, zero_filter_params(kReg, kReg, 3));
  const auto out = gcnn_oracle(random_field<double>(grid, kReg, rng), zero);
  EXPECT_EQ(max_abs(out.data()), 0.0);
  const FiberSpec e{{"E", 1}};
  const auto bank = assemble_filter_bank(e, kReg, 3, random_filter_params(e, kReg, 3, rng));
  EXPECT_THROW(gcnn_oracle(random_field<double>(grid, e, rng), bank), InvalidArgument);
}
