// Desk-scale training demo: K random patterns stamped on the torus under random
// p4m transformations, classified by an invariant steerable network trained with
// plain mini-batch gradient descent in 32-bit floats.

#pragma once

#include <algorithm>
#include <chrono>
#include <numeric>

#include "equisteer/network.hpp"

namespace equisteer {

struct TrainConfig {
  int classes = 4;
  int grid = 9;
  int pattern = 5;  // side of the stamped template
  int train_per_class = 40;
  int test_per_class = 40;
  double noise = 0.1;
  int epochs = 80;
  int batch_size = 8;
  double learning_rate = 0.3;
  std::uint64_t seed = 7;
  // A batch loss above this multiple of the chance loss log K counts as divergence.
  double divergence_factor = 50;
  // Hidden fibers; empty means the default regular-capsule stack.
  std::vector<FiberSpec> hidden;
};

struct TrainMetrics {
  int epochs = 0;
  int parameters = 0;
  double train_accuracy = 0;
  double test_accuracy = 0;
  double transformed_test_accuracy = 0;
  double invariance_gap = 0;  // transformed minus untransformed test accuracy
  double final_loss = 0;
  std::vector<double> loss_history;  // mean training loss per epoch
  double seconds = 0;
};

// conv(A1 -> h1) -> relu -> ... -> conv(-> A1 x 8) -> relu -> pool -> readout(K)
inline NetworkSpec demo_network(const TrainConfig& cfg) {
  std::vector<FiberSpec> hidden = cfg.hidden;
  if (hidden.empty()) hidden = {FiberSpec{{"regular", 4}}, FiberSpec{{"regular", 4}}};
  NetworkSpec spec{cfg.grid, {}};
  FiberSpec cur{{"A1", 1}};
  for (const FiberSpec& h : hidden) {
    spec.layers.push_back(LayerSpec::conv(cur, h, 3));
    spec.layers.push_back(LayerSpec::nonlinearity(Nonlinearity::relu));
    cur = h;
  }
  spec.layers.push_back(LayerSpec::conv(cur, FiberSpec{{"A1", 8}}, 3));
  spec.layers.push_back(LayerSpec::nonlinearity(Nonlinearity::relu));
  spec.layers.push_back(LayerSpec::pool());
  spec.layers.push_back(LayerSpec::readout(cfg.classes));
  return spec;
}

struct Dataset {
  std::vector<FeatureField<float>> inputs;
  std::vector<int> labels;
};

namespace detail {

inline std::vector<Matrix> make_templates(const TrainConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Matrix> t;
  for (int k = 0; k < cfg.classes; ++k) {
    Matrix m(cfg.pattern, cfg.pattern);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    t.push_back(m);
  }
  return t;
}

// Template placed with a random point-group element at a random position, plus noise.
inline FeatureField<float> stamp(const Matrix& tmpl, const TorusGrid& grid, double noise, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coord(0, grid.size() - 1), elem(0, kGroupOrder - 1);
  std::normal_distribution<double> n(0.0, noise);
  const Dihedral h = Dihedral::from_index(elem(rng));
  const Point at{coord(rng), coord(rng)};
  FeatureField<float> f(grid, FiberSpec{{"A1", 1}});
  for (float& v : f.data()) v = static_cast<float>(n(rng));
  const int c = static_cast<int>(tmpl.rows()) / 2;
  for (int a = 0; a < tmpl.rows(); ++a)
    for (int b = 0; b < tmpl.cols(); ++b) {
      const Point off = h.apply({a - c, b - c});
      f.at(grid.wrap_point({at[0] + off[0], at[1] + off[1]}), 0) += static_cast<float>(tmpl(a, b));
    }
  return f;
}

inline Dataset make_split(const std::vector<Matrix>& templates, const TrainConfig& cfg, int per_class, std::mt19937_64& rng) {
  const TorusGrid grid(cfg.grid);
  Dataset d;
  for (int i = 0; i < per_class; ++i)
    for (int k = 0; k < cfg.classes; ++k) {
      d.inputs.push_back(stamp(templates[static_cast<std::size_t>(k)], grid, cfg.noise, rng));
      d.labels.push_back(k);
    }
  return d;
}

inline int argmax(const std::vector<float>& v) { return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin()); }

}  // namespace detail

inline double accuracy(const Network& net, const ParamSet& p, const std::vector<FilterBank>& banks, const Dataset& d) {
  if (d.inputs.empty()) return 0;
  int hit = 0;
  for (std::size_t i = 0; i < d.inputs.size(); ++i) hit += detail::argmax(forward(net, p, banks, d.inputs[i]).logits()) == d.labels[i];
  return static_cast<double>(hit) / static_cast<double>(d.inputs.size());
}

inline TrainMetrics train_demo(const TrainConfig& cfg) {
  if (cfg.classes < 2 || cfg.epochs < 0 || cfg.batch_size < 1 || cfg.train_per_class < 1 || cfg.pattern < 1 || cfg.pattern % 2 == 0 ||
      cfg.pattern > cfg.grid || !(cfg.learning_rate > 0) || !(cfg.noise >= 0) || !(cfg.divergence_factor > 1))
    throw InvalidArgument("train config: need classes >= 2, epochs >= 0, batch >= 1, an odd pattern no larger than the grid, a positive step, noise >= 0");
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(cfg.seed);
  const Network net = compile(demo_network(cfg));
  InitOptions init;
  init.zero_readout = true;
  ParamSet params = init_params(net, rng(), init);

  const auto templates = detail::make_templates(cfg, rng);
  const Dataset train = detail::make_split(templates, cfg, cfg.train_per_class, rng);
  const Dataset test = detail::make_split(templates, cfg, cfg.test_per_class, rng);
  Dataset moved = test;
  {
    const Representation rep = fiber_rep(net.input);
    std::uniform_int_distribution<int> coord(0, cfg.grid - 1), elem(0, kGroupOrder - 1);
    for (auto& f : moved.inputs) f = induced_act_field(rep, Isometry(Dihedral::from_index(elem(rng)), {coord(rng), coord(rng)}, net.grid), f);
  }

  TrainMetrics m;
  m.parameters = params.scalar_count();
  std::vector<std::size_t> order(train.inputs.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    int batches = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<FeatureField<float>> xs;
      std::vector<int> ys;
      for (std::size_t i = b; i < std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size)); ++i) {
        xs.push_back(train.inputs[order[i]]);
        ys.push_back(train.labels[order[i]]);
      }
      const LossAndGrad lg = loss_and_grad(net, params, xs, ys);
      if (!std::isfinite(lg.loss))
        throw TrainingFailure("loss became non-finite in epoch " + std::to_string(epoch) + "; the step size is too large");
      // With a shifted log-sum-exp the loss stays finite even when every relu has died
      // and the readout bias oscillates, so blow-up is caught here instead.
      if (lg.loss > cfg.divergence_factor * std::log(static_cast<double>(cfg.classes)))
        throw TrainingFailure("loss " + std::to_string(lg.loss) + " in epoch " + std::to_string(epoch) + " exceeds " +
                              std::to_string(cfg.divergence_factor) + " x the chance loss; the step size is too large");
      bool finite = true;
      std::vector<const Matrix*> grads;
      lg.grad.visit([&](const std::string&, const Matrix& g) { grads.push_back(&g); });
      std::size_t t = 0;
      params.visit([&](const std::string&, Matrix& w) {
        w -= cfg.learning_rate * *grads[t++];
        finite = finite && w.allFinite();
      });
      if (!finite) throw TrainingFailure("parameters became non-finite in epoch " + std::to_string(epoch));
      epoch_loss += lg.loss;
      ++batches;
    }
    m.loss_history.push_back(epoch_loss / batches);
  }
  m.epochs = cfg.epochs;
  m.final_loss = m.loss_history.empty() ? std::log(static_cast<double>(cfg.classes)) : m.loss_history.back();

  const auto banks = assemble_banks(net, params);
  m.train_accuracy = accuracy(net, params, banks, train);
  m.test_accuracy = accuracy(net, params, banks, test);
  m.transformed_test_accuracy = accuracy(net, params, banks, moved);
  m.invariance_gap = m.transformed_test_accuracy - m.test_accuracy;
  m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return m;
}

}  // namespace equisteer
