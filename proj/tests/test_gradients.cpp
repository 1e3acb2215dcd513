#include <gtest/gtest.h>

#include "support.hpp"

using namespace equisteer;
using support::finite_difference_check;
using support::FdResult;
using support::loss_only;

namespace {

std::vector<FeatureField<double>> random_batch(const Network& net, int n, std::mt19937_64& rng) {
  std::vector<FeatureField<double>> b;
  for (int i = 0; i < n; ++i) b.push_back(random_field<double>(net.grid, net.input, rng));
  return b;
}

}  // namespace

TEST(Gradients, TwoLayerNetMatchesFiniteDifferences) {
  std::mt19937_64 rng(31);
  const Network net = compile(support::small_network_spec());
  const ParamSet p = init_params(net, 32);
  const auto batch = random_batch(net, 2, rng);
  const FdResult res = finite_difference_check(net, p, batch, {0, 2}, 1e-3);
  EXPECT_EQ(res.checked, p.scalar_count());
  EXPECT_LE(res.worst, 1e-4) << res.where;
}

TEST(Gradients, MixedNetMatchesFiniteDifferences) {
  std::mt19937_64 rng(41);
  NetworkSpec spec = support::mixed_network_spec(5);
  // a 1 x 1 conv after the norm-relu, with a residual add back onto its input
  const FiberSpec h2{{"regular", 1}, {"E", 2}, {"A2", 1}};
  spec.layers.insert(spec.layers.begin() + 4, LayerSpec::conv(h2, h2, 1));
  spec.layers.insert(spec.layers.begin() + 5, LayerSpec::residual(3));
  const Network net = compile(spec);
  InitOptions opt;
  opt.norm_bias = 0.5;
  const ParamSet p = init_params(net, 42, opt);
  const auto batch = random_batch(net, 2, rng);
  const FdResult res = finite_difference_check(net, p, batch, {1, 0}, 1e-3);
  EXPECT_LE(res.worst, 1e-4) << res.where;
}

TEST(Gradients, ReadoutBiasIsMeanResidual) {
  std::mt19937_64 rng(51);
  const Network net = compile(support::small_network_spec());
  const ParamSet p = init_params(net, 52);
  const auto batch = random_batch(net, 4, rng);
  const std::vector<int> labels{0, 1, 2, 1};
  const LossAndGrad lg = loss_and_grad(net, p, batch, labels);
  for (int c = 0; c < 3; ++c) {
    double expect = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto r = forward(net, p, batch[i]);
      const auto pr = softmax<double>(std::span<const double>(r.logits()));
      expect += (pr[static_cast<std::size_t>(c)] - (labels[i] == c)) / 4.0;
    }
    EXPECT_NEAR(lg.grad.layers[4].bias(c), expect, 1e-12);
  }
  EXPECT_NEAR(lg.loss, loss_only(net, p, batch, labels), 1e-12);
}

TEST(Gradients, DeadReluRegionGivesZeroConvGradients) {
  const Network net = compile(support::small_network_spec());
  ParamSet p = init_params(net, 61);
  // Row sums of an A1 -> regular bank are equal across rows, so a constant positive
  // input gives the same pre-activation everywhere; make it negative.
  const auto bank = assemble_filter_bank(net.layer(0).in, net.layer(0).out, 3, p.layers[0].conv);
  const double rowsum = bank.weights.row(0).sum();
  ASSERT_GT(std::abs(rowsum), 1e-6);
  if (rowsum > 0) p.layers[0].conv.at(0, 0) *= -1;
  FeatureField<double> f(net.grid, net.input);
  std::fill(f.data().begin(), f.data().end(), 1.0);
  const LossAndGrad lg = loss_and_grad(net, p, std::vector<FeatureField<double>>{f}, {1});
  EXPECT_TRUE(lg.grad.layers[0].conv.at(0, 0).isZero(0));
  EXPECT_TRUE(lg.grad.layers[2].conv.at(0, 0).isZero(0));
  EXPECT_TRUE(lg.grad.layers[4].weight.isZero(0));
  EXPECT_FALSE(lg.grad.layers[4].bias.isZero(0));
}

TEST(Gradients, Float32AgreesWithFloat64) {
  std::mt19937_64 rng(71);
  const Network net = compile(support::small_network_spec());
  const ParamSet p = init_params(net, 72);
  const auto batch = random_batch(net, 3, rng);
  std::vector<FeatureField<float>> batch32;
  for (const auto& f : batch) batch32.push_back(f.cast<float>());
  const std::vector<int> labels{2, 0, 1};
  const LossAndGrad a = loss_and_grad(net, p, batch, labels), b = loss_and_grad(net, p, batch32, labels);
  EXPECT_NEAR(a.loss, b.loss, 1e-5);
  std::vector<Matrix> ga, gb;
  a.grad.visit([&](const std::string&, const Matrix& m) { ga.push_back(m); });
  b.grad.visit([&](const std::string&, const Matrix& m) { gb.push_back(m); });
  for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_LE((ga[i] - gb[i]).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Gradients, BadInputsRejected) {
  std::mt19937_64 rng(81);
  const Network net = compile(support::small_network_spec());
  const ParamSet p = init_params(net, 82);
  const auto batch = random_batch(net, 1, rng);
  EXPECT_THROW(loss_and_grad(net, p, batch, {3}), InvalidArgument);
  EXPECT_THROW(loss_and_grad(net, p, batch, {}), InvalidArgument);
}
