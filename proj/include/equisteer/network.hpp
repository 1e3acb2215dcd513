// Steerable networks: a typed layer list, parameters, forward and reverse passes,
// and the two-path equivariance verifier.
//
// Activations are fields on the torus until a global pool, whose output (and the
// readout's logits) are fields on the 1 x 1 grid carrying only A1 capsules, on
// which every group element acts as the identity.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>

#include "equisteer/conv.hpp"

namespace equisteer {

enum class LayerKind { steerable_conv, nonlinearity, residual_add, global_pool, affine_readout };

inline std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::steerable_conv: return "steerable-conv";
    case LayerKind::nonlinearity: return "nonlinearity";
    case LayerKind::residual_add: return "residual-add";
    case LayerKind::global_pool: return "global-pool";
    case LayerKind::affine_readout: return "affine-readout";
  }
  return "?";
}

inline LayerKind parse_layer_kind(std::string_view s) {
  for (const auto k : {LayerKind::steerable_conv, LayerKind::nonlinearity, LayerKind::residual_add, LayerKind::global_pool,
                       LayerKind::affine_readout})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown layer kind '" + std::string(s) + "'");
}

struct LayerSpec {
  LayerKind kind = LayerKind::steerable_conv;
  FiberSpec in;   // steerable-conv
  FiberSpec out;  // steerable-conv
  int size = 1;   // steerable-conv
  Nonlinearity tag = Nonlinearity::identity;
  int from = -1;    // residual-add: earlier layer output, -1 for the network input
  int classes = 0;  // affine-readout

  static LayerSpec conv(FiberSpec in, FiberSpec out, int s) {
    LayerSpec l;
    l.in = std::move(in);
    l.out = std::move(out);
    l.size = s;
    return l;
  }
  static LayerSpec nonlinearity(Nonlinearity nu) {
    LayerSpec l;
    l.kind = LayerKind::nonlinearity;
    l.tag = nu;
    return l;
  }
  static LayerSpec residual(int from) {
    LayerSpec l;
    l.kind = LayerKind::residual_add;
    l.from = from;
    return l;
  }
  static LayerSpec pool() {
    LayerSpec l;
    l.kind = LayerKind::global_pool;
    return l;
  }
  static LayerSpec readout(int classes) {
    LayerSpec l;
    l.kind = LayerKind::affine_readout;
    l.classes = classes;
    return l;
  }
};

struct NetworkSpec {
  int grid = 9;
  std::vector<LayerSpec> layers;
};

// A validated NetworkSpec: fibers[i] is the output fiber of layer i.
struct Network {
  NetworkSpec spec;
  TorusGrid grid;
  FiberSpec input;
  std::vector<FiberSpec> fibers;
  std::vector<bool> pooled;  // output of layer i lives on the 1 x 1 grid

  const FiberSpec& fiber_before(int i) const { return i == 0 ? input : fibers[static_cast<std::size_t>(i - 1)]; }
  int size() const { return static_cast<int>(spec.layers.size()); }
  const LayerSpec& layer(int i) const { return spec.layers[static_cast<std::size_t>(i)]; }
  int classes() const {
    return !spec.layers.empty() && spec.layers.back().kind == LayerKind::affine_readout ? spec.layers.back().classes : 0;
  }
};

namespace detail {

inline bool all_invariant(const FiberSpec& f) {
  for (const auto& e : f.entries)
    if (e.capsule != "A1") return false;
  return true;
}

inline void check_capsules(const FiberSpec& f, int layer) {
  for (const auto& e : f.entries) try {
      find_capsule(e.capsule);
    } catch (const InvalidArgument& err) {
      throw TypeSystemError(err.what(), layer);
    }
}

}  // namespace detail

// Enforces the capsule type rules layer by layer and throws TypeSystemError
// (or AdmissibilityError) naming the first offending layer.
inline Network compile(const NetworkSpec& spec) {
  if (spec.grid <= 0 || spec.grid % 2 == 0) throw InvalidArgument("grid must be a positive odd integer, got " + std::to_string(spec.grid));
  if (spec.layers.empty()) throw TypeSystemError("network has no layers");
  if (spec.layers.front().kind != LayerKind::steerable_conv)
    throw TypeSystemError("the first layer must be a steerable-conv that declares the input fiber", 0);
  Network net{spec, TorusGrid(spec.grid), spec.layers.front().in, {}, {}};
  detail::check_capsules(net.input, 0);
  FiberSpec cur = net.input;
  bool pooled = false;
  for (int i = 0; i < static_cast<int>(spec.layers.size()); ++i) {
    const LayerSpec& l = spec.layers[static_cast<std::size_t>(i)];
    if (pooled && l.kind != LayerKind::affine_readout)
      throw TypeSystemError(to_string(l.kind) + " after global-pool; only affine-readout may follow", i);
    switch (l.kind) {
      case LayerKind::steerable_conv:
        detail::check_capsules(l.in, i);
        detail::check_capsules(l.out, i);
        if (l.size <= 0 || l.size % 2 == 0) throw TypeSystemError("patch size must be odd, got " + std::to_string(l.size), i);
        if (l.in != cur) throw TypeSystemError("input fiber " + l.in.str() + " does not match incoming fiber " + cur.str(), i);
        cur = l.out;
        break;
      case LayerKind::nonlinearity:
        try {
          cur = act_fiber(cur, l.tag);
        } catch (const AdmissibilityError& e) {
          throw AdmissibilityError(e.what(), i);
        }
        break;
      case LayerKind::residual_add: {
        if (l.from < -1 || l.from >= i) throw TypeSystemError("residual-add source " + std::to_string(l.from) + " is not an earlier layer", i);
        if (l.from >= 0 && net.pooled[static_cast<std::size_t>(l.from)]) throw TypeSystemError("residual-add source is pooled", i);
        const FiberSpec& other = l.from < 0 ? net.input : net.fibers[static_cast<std::size_t>(l.from)];
        if (!check_addable(cur, other))
          throw TypeSystemError("cannot add fibers " + cur.str() + " and " + other.str() + " of different capsule types", i);
        break;
      }
      case LayerKind::global_pool:
        if (!detail::all_invariant(cur)) throw TypeSystemError("global-pool needs an A1-only fiber, got " + cur.str(), i);
        pooled = true;
        break;
      case LayerKind::affine_readout:
        if (!pooled) throw TypeSystemError("affine-readout must follow global-pool", i);
        if (l.classes <= 0) throw TypeSystemError("affine-readout needs a positive class count", i);
        if (i + 1 != static_cast<int>(spec.layers.size())) throw TypeSystemError("affine-readout must be the last layer", i);
        cur = FiberSpec{{"A1", l.classes}};
        break;
    }
    net.fibers.push_back(cur);
    net.pooled.push_back(pooled);
  }
  return net;
}

// ---------------------------------------------------------------------------
// Parameters

struct LayerParams {
  FilterBankParams conv;  // steerable-conv
  Matrix bias;            // norm-relu: one per capsule copy (copies x 1); readout: classes x 1
  Matrix weight;          // readout: classes x K
};

struct ParamSet {
  std::vector<LayerParams> layers;

  // Every tensor with a stable name, in a fixed order.
  template <class F>
  void visit(F&& fn) { visit_impl(*this, fn); }
  template <class F>
  void visit(F&& fn) const { visit_impl(*this, fn); }

  int scalar_count() const {
    int n = 0;
    visit([&](const std::string&, const Matrix& m) { n += static_cast<int>(m.size()); });
    return n;
  }

 private:
  template <class Self, class F>
  static void visit_impl(Self& self, F& fn) {
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      const std::string p = "L" + std::to_string(i) + ".";
      auto& l = self.layers[i];
      for (int a = 0; a < l.conv.in_entries; ++a)
        for (int b = 0; b < l.conv.out_entries; ++b) fn(p + "theta." + std::to_string(a) + "." + std::to_string(b), l.conv.at(a, b));
      if (l.weight.size()) fn(p + "weight", l.weight);
      if (l.bias.size()) fn(p + "bias", l.bias);
    }
  }
};

namespace detail {

inline int capsule_copies(const FiberSpec& f) {
  int n = 0;
  for (const auto& e : f.entries) n += e.mult;
  return n;
}

}  // namespace detail

// Zero tensors of the right shapes.
inline ParamSet zero_params(const Network& net) {
  ParamSet p;
  for (int i = 0; i < net.size(); ++i) {
    const LayerSpec& l = net.layer(i);
    LayerParams lp;
    if (l.kind == LayerKind::steerable_conv) lp.conv = zero_filter_params(l.in, l.out, l.size);
    if (l.kind == LayerKind::nonlinearity && l.tag == Nonlinearity::norm_relu)
      lp.bias = Matrix::Zero(detail::capsule_copies(net.fiber_before(i)), 1);
    if (l.kind == LayerKind::affine_readout) {
      lp.weight = Matrix::Zero(l.classes, net.fiber_before(i).channels());
      lp.bias = Matrix::Zero(l.classes, 1);
    }
    p.layers.push_back(std::move(lp));
  }
  return p;
}

struct InitOptions {
  double conv_gain = 2.0;
  double norm_bias = 0.25;    // biases drawn uniformly from [0, norm_bias]
  bool zero_readout = false;  // constant logits until trained
};

inline ParamSet init_params(const Network& net, std::uint64_t seed, const InitOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  ParamSet p = zero_params(net);
  for (int i = 0; i < net.size(); ++i) {
    const LayerSpec& l = net.layer(i);
    LayerParams& lp = p.layers[static_cast<std::size_t>(i)];
    if (l.kind == LayerKind::steerable_conv) lp.conv = random_filter_params(l.in, l.out, l.size, rng, opt.conv_gain);
    if (l.kind == LayerKind::nonlinearity && l.tag == Nonlinearity::norm_relu) {
      std::uniform_real_distribution<double> u(0.0, opt.norm_bias);
      for (Eigen::Index k = 0; k < lp.bias.size(); ++k) lp.bias(k) = u(rng);
    }
    if (l.kind == LayerKind::affine_readout && !opt.zero_readout) {
      std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(std::max<Eigen::Index>(1, lp.weight.cols())));
      for (Eigen::Index k = 0; k < lp.weight.size(); ++k) lp.weight.data()[k] = n(rng);
    }
  }
  return p;
}

inline void check_params(const Network& net, const ParamSet& p) {
  const ParamSet ref = zero_params(net);
  if (p.layers.size() != ref.layers.size())
    throw InvalidArgument("parameter set has " + std::to_string(p.layers.size()) + " layers, network has " + std::to_string(ref.layers.size()));
  std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> want, got;
  ref.visit([&](const std::string& n, const Matrix& m) { want.push_back({n, {m.rows(), m.cols()}}); });
  p.visit([&](const std::string& n, const Matrix& m) { got.push_back({n, {m.rows(), m.cols()}}); });
  if (want != got) throw InvalidArgument("parameter tensor names or shapes do not match the network");
}

// Filter banks for every conv layer (empty banks elsewhere). Tests may edit the
// raw weights to push a layer off the equivariant subspace.
inline std::vector<FilterBank> assemble_banks(const Network& net, const ParamSet& p) {
  check_params(net, p);
  std::vector<FilterBank> banks(static_cast<std::size_t>(net.size()));
  for (int i = 0; i < net.size(); ++i) {
    const LayerSpec& l = net.layer(i);
    if (l.kind == LayerKind::steerable_conv)
      banks[static_cast<std::size_t>(i)] = assemble_filter_bank(l.in, l.out, l.size, p.layers[static_cast<std::size_t>(i)].conv);
  }
  return banks;
}

// ---------------------------------------------------------------------------
// Forward

template <class T>
struct ForwardResult {
  std::vector<FeatureField<T>> activations;  // output of each layer

  const FeatureField<T>& output() const { return activations.back(); }
  const std::vector<T>& logits() const { return activations.back().data(); }
};

namespace detail {

template <class T>
FeatureField<T> apply_nonlinearity(const FeatureField<T>& f, Nonlinearity nu, const FiberSpec& out_fiber, const Matrix& bias) {
  FeatureField<T> out(f.grid(), out_fiber);
  const auto slots = fiber_layout(f.fiber());
  const int kin = f.channels(), kout = out.channels();
  const int width = nu == Nonlinearity::crelu ? 2 : 1;
  for (int p = 0; p < f.grid().points(); ++p) {
    const T* src = f.data().data() + static_cast<std::size_t>(p) * kin;
    T* dst = out.data().data() + static_cast<std::size_t>(p) * kout;
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const int d = slots[s].capsule->dim(), off = slots[s].offset;
      const T b = bias.size() ? static_cast<T>(bias(static_cast<Eigen::Index>(s))) : T(0);
      apply_capsule_nonlinearity<T>(nu, std::span<const T>(src + off, static_cast<std::size_t>(d)),
                                    std::span<T>(dst + width * off, static_cast<std::size_t>(width * d)), b);
    }
  }
  return out;
}

template <class T>
FeatureField<T> global_pool(const FeatureField<T>& f) {
  FeatureField<T> out(TorusGrid(1), f.fiber());
  const int k = f.channels(), pts = f.grid().points();
  for (int c = 0; c < k; ++c) {
    T acc = 0;
    for (int p = 0; p < pts; ++p) acc += f.data()[static_cast<std::size_t>(p * k + c)];
    out.data()[static_cast<std::size_t>(c)] = acc / static_cast<T>(pts);
  }
  return out;
}

}  // namespace detail

template <class T>
ForwardResult<T> forward(const Network& net, const ParamSet& p, const std::vector<FilterBank>& banks, const FeatureField<T>& input) {
  if (input.fiber() != net.input) throw FiberMismatch("input fiber " + input.fiber().str() + " does not match network input " + net.input.str());
  if (input.grid() != net.grid) throw GridMismatch("input grid does not match the network grid");
  ForwardResult<T> r;
  for (int i = 0; i < net.size(); ++i) {
    const LayerSpec& l = net.layer(i);
    const LayerParams& lp = p.layers[static_cast<std::size_t>(i)];
    const FeatureField<T>& x = i == 0 ? input : r.activations.back();
    switch (l.kind) {
      case LayerKind::steerable_conv:
        r.activations.push_back(correlate(x, banks[static_cast<std::size_t>(i)]));
        break;
      case LayerKind::nonlinearity:
        r.activations.push_back(detail::apply_nonlinearity(x, l.tag, net.fibers[static_cast<std::size_t>(i)], lp.bias));
        break;
      case LayerKind::residual_add: {
        FeatureField<T> y = x;
        const FeatureField<T>& other = l.from < 0 ? input : r.activations[static_cast<std::size_t>(l.from)];
        for (std::size_t k = 0; k < y.data().size(); ++k) y.data()[k] += other.data()[k];
        r.activations.push_back(std::move(y));
        break;
      }
      case LayerKind::global_pool:
        r.activations.push_back(detail::global_pool(x));
        break;
      case LayerKind::affine_readout: {
        FeatureField<T> y(TorusGrid(1), net.fibers[static_cast<std::size_t>(i)]);
        const MatrixT<T> w = lp.weight.template cast<T>();
        const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> xin(x.data().data(), x.channels());
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> out(y.data().data(), y.channels());
        out.noalias() = w * xin + lp.bias.template cast<T>();
        r.activations.push_back(std::move(y));
        break;
      }
    }
  }
  return r;
}

template <class T>
ForwardResult<T> forward(const Network& net, const ParamSet& p, const FeatureField<T>& input) {
  return forward(net, p, assemble_banks(net, p), input);
}

// ---------------------------------------------------------------------------
// Reverse pass for softmax cross-entropy averaged over the batch

struct LossAndGrad {
  double loss = 0;
  ParamSet grad;
  std::vector<std::vector<double>> probabilities;  // per sample
};

template <class T>
std::vector<double> softmax(std::span<const T> logits) {
  std::vector<double> p(logits.size());
  double mx = -INFINITY;
  for (T v : logits) mx = std::max(mx, static_cast<double>(v));
  double z = 0;
  for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(static_cast<double>(logits[i]) - mx);
  for (double& v : p) v /= z;
  return p;
}

namespace detail {

template <class T>
void backward_nonlinearity(const FeatureField<T>& x, Nonlinearity nu, const Matrix& bias, const FeatureField<T>& dy, FeatureField<T>& dx,
                           Matrix* dbias) {
  const auto slots = fiber_layout(x.fiber());
  const int kin = x.channels(), kout = dy.channels();
  for (int p = 0; p < x.grid().points(); ++p) {
    const T* v = x.data().data() + static_cast<std::size_t>(p) * kin;
    const T* g = dy.data().data() + static_cast<std::size_t>(p) * kout;
    T* d = dx.data().data() + static_cast<std::size_t>(p) * kin;
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const int dim = slots[s].capsule->dim(), off = slots[s].offset;
      switch (nu) {
        case Nonlinearity::identity:
          for (int i = 0; i < dim; ++i) d[off + i] += g[off + i];
          break;
        case Nonlinearity::relu:
          for (int i = 0; i < dim; ++i) d[off + i] += v[off + i] > 0 ? g[off + i] : T(0);
          break;
        case Nonlinearity::crelu:
          for (int i = 0; i < dim; ++i) {
            if (v[off + i] > 0) d[off + i] += g[2 * off + i];
            if (v[off + i] < 0) d[off + i] -= g[2 * off + dim + i];
          }
          break;
        case Nonlinearity::norm_relu: {
          // y = v (n - b) / n; dy/dv = I - b (I / n - v v^T / n^3), dy/db = -v / n
          const T n = permutation_invariant_norm(std::span<const T>(v + off, static_cast<std::size_t>(dim)));
          const T b = static_cast<T>(bias(static_cast<Eigen::Index>(s)));
          if (!(n > b && n > T(0))) break;
          T vg = 0;
          for (int i = 0; i < dim; ++i) vg += v[off + i] * g[off + i];
          for (int i = 0; i < dim; ++i) d[off + i] += g[off + i] - b * (g[off + i] / n - v[off + i] * vg / (n * n * n));
          (*dbias)(static_cast<Eigen::Index>(s)) -= static_cast<double>(vg / n);
          break;
        }
      }
    }
  }
}

}  // namespace detail

template <class T>
LossAndGrad loss_and_grad(const Network& net, const ParamSet& p, const std::vector<FeatureField<T>>& batch, const std::vector<int>& labels) {
  if (net.classes() == 0) throw InvalidArgument("loss needs a network ending in affine-readout");
  if (batch.size() != labels.size() || batch.empty()) throw InvalidArgument("batch and labels must be non-empty and of equal length");
  const std::vector<FilterBank> banks = assemble_banks(net, p);
  std::vector<MatrixT<T>> weights(banks.size());
  for (std::size_t i = 0; i < banks.size(); ++i) weights[i] = banks[i].weights.template cast<T>();

  LossAndGrad out;
  out.grad = zero_params(net);
  std::vector<Matrix> dweights(banks.size());
  for (std::size_t i = 0; i < banks.size(); ++i) dweights[i] = Matrix::Zero(banks[i].weights.rows(), banks[i].weights.cols());
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  for (std::size_t sample = 0; sample < batch.size(); ++sample) {
    const FeatureField<T>& input = batch[sample];
    const ForwardResult<T> fwd = forward(net, p, banks, input);
    const int label = labels[sample];
    if (label < 0 || label >= net.classes()) throw InvalidArgument("label " + std::to_string(label) + " out of range");
    auto probs = softmax<T>(std::span<const T>(fwd.logits()));
    out.loss -= std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-300)) * inv_b;

    // gradient buffers for every activation, plus the input
    std::vector<FeatureField<T>> grads;
    for (const auto& a : fwd.activations) grads.emplace_back(a.grid(), a.fiber());
    FeatureField<T> dinput(input.grid(), input.fiber());
    for (int c = 0; c < net.classes(); ++c)
      grads.back().data()[static_cast<std::size_t>(c)] = static_cast<T>((probs[static_cast<std::size_t>(c)] - (c == label)) * inv_b);
    out.probabilities.push_back(std::move(probs));

    for (int i = net.size() - 1; i >= 0; --i) {
      const LayerSpec& l = net.layer(i);
      const auto ui = static_cast<std::size_t>(i);
      const FeatureField<T>& x = i == 0 ? input : fwd.activations[ui - 1];
      FeatureField<T>& dx = i == 0 ? dinput : grads[ui - 1];
      const FeatureField<T>& dy = grads[ui];
      LayerParams& g = out.grad.layers[ui];
      switch (l.kind) {
        case LayerKind::steerable_conv: {
          const MatrixT<T> cols = im2col(x, l.size);
          const auto dym = as_matrix(dy);
          dweights[ui] += (dym * cols.transpose()).template cast<double>();
          const MatrixT<T> dcols = weights[ui].transpose() * dym;
          col2im_add(dcols, l.size, dx);
          break;
        }
        case LayerKind::nonlinearity:
          detail::backward_nonlinearity(x, l.tag, p.layers[ui].bias, dy, dx, &g.bias);
          break;
        case LayerKind::residual_add: {
          FeatureField<T>& dother = l.from < 0 ? dinput : grads[static_cast<std::size_t>(l.from)];
          for (std::size_t k = 0; k < dy.data().size(); ++k) {
            dx.data()[k] += dy.data()[k];
            dother.data()[k] += dy.data()[k];
          }
          break;
        }
        case LayerKind::global_pool: {
          const int k = x.channels(), pts = x.grid().points();
          for (int pt = 0; pt < pts; ++pt)
            for (int c = 0; c < k; ++c) dx.data()[static_cast<std::size_t>(pt * k + c)] += dy.data()[static_cast<std::size_t>(c)] / static_cast<T>(pts);
          break;
        }
        case LayerKind::affine_readout: {
          const auto& w = p.layers[ui].weight;
          for (int c = 0; c < l.classes; ++c) {
            const double gc = static_cast<double>(dy.data()[static_cast<std::size_t>(c)]);
            g.bias(c) += gc;
            for (int k = 0; k < x.channels(); ++k) {
              g.weight(c, k) += gc * static_cast<double>(x.data()[static_cast<std::size_t>(k)]);
              dx.data()[static_cast<std::size_t>(k)] += static_cast<T>(w(c, k) * gc);
            }
          }
          break;
        }
      }
    }
  }
  for (int i = 0; i < net.size(); ++i) {
    const LayerSpec& l = net.layer(i);
    if (l.kind == LayerKind::steerable_conv)
      out.grad.layers[static_cast<std::size_t>(i)].conv = pullback_filter_grad(l.in, l.out, l.size, dweights[static_cast<std::size_t>(i)]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Two-path verification

struct VerifyReport {
  double max_rel_error = 0;
  std::vector<double> per_layer;
  std::map<std::string, double> per_element;  // keyed by element name
  double tol = 0;
  bool pass = false;
  int trials = 0;
  int elements = 0;
};

// ||a - b|| / ||b||; 0 when both vanish.
template <class T>
double relative_error(const std::vector<T>& a, const std::vector<T>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    num += d * d;
    den += static_cast<double>(b[i]) * static_cast<double>(b[i]);
  }
  if (den == 0) return std::sqrt(num);
  return std::sqrt(num / den);
}

// For each trial input f and each sampled g, compares every layer of forward(pi(g) f)
// with pi'(g) applied to the same layer of forward(f). Pooled layers are invariant.
template <class T>
VerifyReport verify_equivariance(const Network& net, const ParamSet& p, const std::vector<FilterBank>& banks, int trials, std::uint64_t seed,
                                 double tol) {
  std::mt19937_64 rng(seed);
  VerifyReport rep;
  rep.tol = tol;
  rep.trials = trials;
  rep.per_layer.assign(static_cast<std::size_t>(net.size()), 0.0);
  std::vector<Representation> reps;
  for (const auto& f : net.fibers) reps.push_back(fiber_rep(f));
  const Representation in_rep = fiber_rep(net.input);
  const std::vector<Isometry> elements = sample_group_elements(net.grid, rng);
  rep.elements = static_cast<int>(elements.size());
  for (int t = 0; t < trials; ++t) {
    const FeatureField<T> f = random_field<T>(net.grid, net.input, rng);
    const ForwardResult<T> base = forward(net, p, banks, f);
    for (const Isometry& g : elements) {
      const ForwardResult<T> moved = forward(net, p, banks, induced_act_field(in_rep, g, f));
      double worst = 0;
      for (int i = 0; i < net.size(); ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const FeatureField<T>& a = moved.activations[ui];
        const double err = net.pooled[ui] ? relative_error(a.data(), base.activations[ui].data())
                                          : relative_error(a.data(), induced_act_field(reps[ui], g, base.activations[ui]).data());
        rep.per_layer[ui] = std::max(rep.per_layer[ui], err);
        worst = std::max(worst, err);
      }
      double& slot = rep.per_element[g.name()];
      slot = std::max(slot, worst);
      rep.max_rel_error = std::max(rep.max_rel_error, worst);
    }
  }
  rep.pass = rep.max_rel_error <= tol;
  return rep;
}

template <class T>
VerifyReport verify_equivariance(const Network& net, const ParamSet& p, int trials, std::uint64_t seed, double tol) {
  return verify_equivariance<T>(net, p, assemble_banks(net, p), trials, seed, tol);
}

}  // namespace equisteer
