// Equivariant filter banks assembled from per-capsule-pair intertwiner bases.
//
// For input entry i (n_i copies of capsule rho^i) and output entry j (m_j copies
// of rho^j) the parameters are Theta^{ij} of shape dim Hom x (n_i m_j); column
// b * n_i + a fills the block mapping input copy a to output copy b with
// reshape(psi^{ij} Theta^{ij}[:, col]). The full bank is K' x (K s^2).

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <random>
#include <shared_mutex>
#include <tuple>

#include "equisteer/capsules.hpp"
#include "equisteer/patch.hpp"

namespace equisteer {

struct BasisKey {
  std::string in;
  std::string out;
  int size = 1;
  auto operator<=>(const BasisKey&) const = default;
};

// Read-mostly cache of Hom(patch(in, s), out) bases. Concurrent readers, and
// insertions from any thread; a racing duplicate insert keeps the first value.
class BasisCatalogue {
 public:
  std::shared_ptr<const IntertwinerBasis> get(const BasisKey& key) {
    {
      std::shared_lock lock(mutex_);
      if (auto it = bases_.find(key); it != bases_.end()) return it->second;
    }
    Compute hook;
    {
      std::shared_lock lock(mutex_);
      hook = hook_;
    }
    auto basis = std::make_shared<const IntertwinerBasis>(hook ? hook(key) : compute(key));
    std::unique_lock lock(mutex_);
    return bases_.emplace(key, std::move(basis)).first->second;
  }

  std::shared_ptr<const IntertwinerBasis> get(const std::string& in, const std::string& out, int s) { return get(BasisKey{in, out, s}); }

  void insert(const BasisKey& key, IntertwinerBasis basis) {
    std::unique_lock lock(mutex_);
    bases_.emplace(key, std::make_shared<const IntertwinerBasis>(std::move(basis)));
  }

  bool contains(const BasisKey& key) const {
    std::shared_lock lock(mutex_);
    return bases_.count(key) > 0;
  }

  std::vector<std::pair<BasisKey, std::shared_ptr<const IntertwinerBasis>>> snapshot() const {
    std::shared_lock lock(mutex_);
    return {bases_.begin(), bases_.end()};
  }

  // Replaces how missing bases are produced; an empty function restores the default.
  using Compute = std::function<IntertwinerBasis(const BasisKey&)>;
  void set_compute(Compute fn) {
    std::unique_lock lock(mutex_);
    hook_ = std::move(fn);
  }

  static IntertwinerBasis compute(const BasisKey& key) {
    const PatchRep pi = build_patch_rep(find_capsule(key.in)->rep, key.size);
    return hom_basis(pi.rep, find_capsule(key.out)->rep);
  }

 private:
  mutable std::shared_mutex mutex_;
  std::map<BasisKey, std::shared_ptr<const IntertwinerBasis>> bases_;
  Compute hook_;
};

inline BasisCatalogue& basis_catalogue() {
  static BasisCatalogue catalogue;
  return catalogue;
}

struct FilterBankParams {
  int in_entries = 0;
  int out_entries = 0;
  std::vector<Matrix> theta;  // index i * out_entries + j

  Matrix& at(int i, int j) { return theta[static_cast<std::size_t>(i * out_entries + j)]; }
  const Matrix& at(int i, int j) const { return theta[static_cast<std::size_t>(i * out_entries + j)]; }

  int scalar_count() const {
    int n = 0;
    for (const auto& t : theta) n += static_cast<int>(t.size());
    return n;
  }
};

struct FilterBank {
  FiberSpec in;
  FiberSpec out;
  int size = 1;
  Matrix weights;  // K' x (K s^2)

  int out_channels() const { return static_cast<int>(weights.rows()); }
  int in_channels() const { return static_cast<int>(weights.cols()) / (size * size); }
  double at(int o, int k, int a, int b) const { return weights(o, (k * size + a) * size + b); }
};

namespace detail {

struct EntryBlock {
  std::string capsule;
  int mult;
  int dim;
  int offset;  // first channel of the entry
};

inline std::vector<EntryBlock> entry_blocks(const FiberSpec& spec) {
  std::vector<EntryBlock> out;
  int off = 0;
  for (const auto& e : spec.entries) {
    const int d = find_capsule(e.capsule)->dim();
    out.push_back({e.capsule, e.mult, d, off});
    off += d * e.mult;
  }
  return out;
}

}  // namespace detail

// Expected shapes of every Theta^{ij}; also a zero initialization.
inline FilterBankParams zero_filter_params(const FiberSpec& in, const FiberSpec& out, int s, BasisCatalogue& cat = basis_catalogue()) {
  require_odd_patch(s);
  FilterBankParams p;
  p.in_entries = static_cast<int>(in.entries.size());
  p.out_entries = static_cast<int>(out.entries.size());
  for (const auto& ei : in.entries)
    for (const auto& ej : out.entries) {
      const auto basis = cat.get(ei.capsule, ej.capsule, s);
      p.theta.push_back(Matrix::Zero(basis->size(), static_cast<Eigen::Index>(ei.mult) * ej.mult));
    }
  return p;
}

// sum_ij dim Hom(patch(rho^i, s), rho^j) n_i m_j
inline int parameter_count(const FiberSpec& in, const FiberSpec& out, int s, BasisCatalogue& cat = basis_catalogue()) {
  return zero_filter_params(in, out, s, cat).scalar_count();
}

// Entries of Psi have variance about 2 / (K s^2) when inputs are unit variance.
template <class Rng>
FilterBankParams random_filter_params(const FiberSpec& in, const FiberSpec& out, int s, Rng& rng, double gain = 2.0,
                                      BasisCatalogue& cat = basis_catalogue()) {
  FilterBankParams p = zero_filter_params(in, out, s, cat);
  const double fan_in = std::max(1, in.channels() * s * s);
  for (std::size_t i = 0; i < in.entries.size(); ++i)
    for (std::size_t j = 0; j < out.entries.size(); ++j) {
      Matrix& t = p.at(static_cast<int>(i), static_cast<int>(j));
      if (t.rows() == 0) continue;
      const double block = static_cast<double>(find_capsule(in.entries[i].capsule)->dim()) * s * s *
                           find_capsule(out.entries[j].capsule)->dim();
      const double sigma = std::sqrt(gain * block / static_cast<double>(t.rows()) / fan_in);
      std::normal_distribution<double> dist(0.0, sigma);
      for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = dist(rng);
    }
  return p;
}

inline void check_param_shapes(const FiberSpec& in, const FiberSpec& out, int s, const FilterBankParams& params, BasisCatalogue& cat) {
  const FilterBankParams ref = zero_filter_params(in, out, s, cat);
  if (params.theta.size() != ref.theta.size() || params.in_entries != ref.in_entries || params.out_entries != ref.out_entries)
    throw InvalidArgument("filter bank params: expected " + std::to_string(ref.theta.size()) + " capsule-pair blocks");
  for (std::size_t k = 0; k < ref.theta.size(); ++k)
    if (params.theta[k].rows() != ref.theta[k].rows() || params.theta[k].cols() != ref.theta[k].cols())
      throw InvalidArgument("filter bank params: block " + std::to_string(k) + " has shape " + std::to_string(params.theta[k].rows()) +
                            "x" + std::to_string(params.theta[k].cols()) + ", expected " + std::to_string(ref.theta[k].rows()) + "x" +
                            std::to_string(ref.theta[k].cols()));
}

inline FilterBank assemble_filter_bank(const FiberSpec& in, const FiberSpec& out, int s, const FilterBankParams& params,
                                       BasisCatalogue& cat = basis_catalogue()) {
  require_odd_patch(s);
  check_param_shapes(in, out, s, params, cat);
  const auto ins = detail::entry_blocks(in);
  const auto outs = detail::entry_blocks(out);
  const int s2 = s * s;
  FilterBank bank{in, out, s, Matrix::Zero(out.channels(), static_cast<Eigen::Index>(in.channels()) * s2)};
  for (std::size_t i = 0; i < ins.size(); ++i)
    for (std::size_t j = 0; j < outs.size(); ++j) {
      const Matrix& theta = params.at(static_cast<int>(i), static_cast<int>(j));
      if (theta.size() == 0) continue;
      const auto basis = cat.get(ins[i].capsule, outs[j].capsule, s);
      const Matrix blocks = basis->basis * theta;
      const int rows = outs[j].dim, cols = ins[i].dim * s2;
      for (int b = 0; b < outs[j].mult; ++b)
        for (int a = 0; a < ins[i].mult; ++a)
          bank.weights.block(outs[j].offset + b * rows, (ins[i].offset + a * ins[i].dim) * s2, rows, cols) =
              unflatten_rows(blocks.col(b * ins[i].mult + a), rows, cols);
    }
  return bank;
}

// Gradient of a scalar loss w.r.t. every Theta^{ij} given its gradient w.r.t. the
// assembled bank: dTheta = psi^T vec(dPsi block).
inline FilterBankParams pullback_filter_grad(const FiberSpec& in, const FiberSpec& out, int s, const Matrix& dweights,
                                             BasisCatalogue& cat = basis_catalogue()) {
  FilterBankParams g = zero_filter_params(in, out, s, cat);
  const auto ins = detail::entry_blocks(in);
  const auto outs = detail::entry_blocks(out);
  const int s2 = s * s;
  for (std::size_t i = 0; i < ins.size(); ++i)
    for (std::size_t j = 0; j < outs.size(); ++j) {
      Matrix& theta = g.at(static_cast<int>(i), static_cast<int>(j));
      if (theta.size() == 0) continue;
      const auto basis = cat.get(ins[i].capsule, outs[j].capsule, s);
      const int rows = outs[j].dim, cols = ins[i].dim * s2;
      for (int b = 0; b < outs[j].mult; ++b)
        for (int a = 0; a < ins[i].mult; ++a) {
          const Matrix block = dweights.block(outs[j].offset + b * rows, (ins[i].offset + a * ins[i].dim) * s2, rows, cols);
          theta.col(b * ins[i].mult + a) = basis->basis.transpose() * flatten_rows(block);
        }
    }
  return g;
}

// Layer-level utilization from the full input patch rep and output fiber rep.
inline Rational layer_utilization(const FiberSpec& in, const FiberSpec& out, int s) {
  return parameter_utilization(build_patch_rep(fiber_rep(in), s).rep, fiber_rep(out));
}

}  // namespace equisteer
