// Capsule catalogue, admissible nonlinearities and fiber stacks.
//
// Base capsules are the five irreps and the nine quotient capsules on D4/K
// (A1 doubles as the quotient by the whole group). Applying CReLU to capsule X
// yields the derived capsule "crelu(X)"; derived ids resolve on demand.

#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <span>

#include "equisteer/representation.hpp"

namespace equisteer {

enum class Nonlinearity { identity, relu, crelu, norm_relu };

enum class NonlinearityKind { identity, relu, any_elementwise, crelu, concat, norm_acting };

inline std::string to_string(Nonlinearity nu) {
  switch (nu) {
    case Nonlinearity::identity: return "identity";
    case Nonlinearity::relu: return "relu";
    case Nonlinearity::crelu: return "crelu";
    case Nonlinearity::norm_relu: return "norm-relu";
  }
  return "identity";
}

inline Nonlinearity parse_nonlinearity(std::string_view s) {
  for (const auto nu : {Nonlinearity::identity, Nonlinearity::relu, Nonlinearity::crelu, Nonlinearity::norm_relu})
    if (to_string(nu) == s) return nu;
  throw InvalidArgument("unknown nonlinearity tag '" + std::string(s) + "'");
}

inline std::string to_string(NonlinearityKind k) {
  switch (k) {
    case NonlinearityKind::identity: return "identity";
    case NonlinearityKind::relu: return "relu";
    case NonlinearityKind::any_elementwise: return "any-elementwise";
    case NonlinearityKind::crelu: return "crelu";
    case NonlinearityKind::concat: return "concat";
    case NonlinearityKind::norm_acting: return "norm-acting";
  }
  return "identity";
}

inline NonlinearityKind kind_of(Nonlinearity nu) {
  switch (nu) {
    case Nonlinearity::identity: return NonlinearityKind::identity;
    case Nonlinearity::relu: return NonlinearityKind::relu;
    case Nonlinearity::crelu: return NonlinearityKind::crelu;
    case Nonlinearity::norm_relu: return NonlinearityKind::norm_acting;
  }
  return NonlinearityKind::identity;
}

// Permutation matrices commute with every elementwise map; signed permutations
// with concatenated maps nu'(x) = (nu(x), nu(-x)); monomials only with scale-free
// ones such as CReLU; orthogonal matrices with maps acting on the norm alone.
inline std::set<NonlinearityKind> admissible_kinds(RealizationClass c) {
  using K = NonlinearityKind;
  switch (c) {
    case RealizationClass::permutation: return {K::identity, K::relu, K::any_elementwise, K::crelu, K::concat, K::norm_acting};
    case RealizationClass::signed_permutation: return {K::identity, K::crelu, K::concat, K::norm_acting};
    case RealizationClass::monomial: return {K::identity, K::crelu};
    case RealizationClass::orthogonal: return {K::identity, K::norm_acting};
    case RealizationClass::general: return {K::identity};
  }
  return {K::identity};
}

struct Capsule {
  std::string id;
  Representation rep;
  RealizationClass realization = RealizationClass::general;
  std::set<NonlinearityKind> admissible;

  int dim() const { return rep.dim(); }
  bool admits(Nonlinearity nu) const { return admissible.count(kind_of(nu)) > 0; }
};

inline Capsule make_capsule(std::string id, Representation rep) {
  const RealizationClass c = realization_class(rep);
  return {std::move(id), std::move(rep), c, admissible_kinds(c)};
}

// Subgroups K behind the quotient capsules, by capsule id.
inline const std::vector<std::pair<std::string, std::vector<std::string>>>& quotient_subgroups() {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> table{
      {"regular", {"e"}},
      {"qm", {"e", "m"}},
      {"qmr", {"e", "mr"}},
      {"qmr2", {"e", "mr2"}},
      {"qmr3", {"e", "mr3"}},
      {"r2", {"e", "r2"}},
      {"r", {"e", "r", "r2", "r3"}},
      {"r2m", {"e", "r2", "m", "mr2"}},
      {"r2mr", {"e", "r2", "mr", "mr3"}},
      {"A1", {"e", "r", "r2", "r3", "m", "mr", "mr2", "mr3"}},
  };
  return table;
}

inline Subgroup subgroup_from_names(const std::vector<std::string>& names) {
  std::vector<Dihedral> els;
  for (const auto& n : names) els.push_back(Dihedral::parse(n));
  return Subgroup(els);
}

inline const std::vector<Capsule>& capsule_catalog() {
  static const std::vector<Capsule> catalog = [] {
    std::vector<Capsule> c;
    for (const Irrep i : kIrreps) c.push_back(make_capsule(irrep_name(i), irrep(i)));
    for (const auto& [id, names] : quotient_subgroups()) {
      if (id == "A1") continue;
      c.push_back(make_capsule(id, quotient_rep(subgroup_from_names(names), id)));
    }
    return c;
  }();
  return catalog;
}

// Post-activation representation: nu(rho(h) v) = rho'(h) nu(v).
// CReLU and other concatenations (nu(v), nu(-v)) stack a positive block then a
// negative block; a coefficient c at (i, j) routes j+ -> i+ and j- -> i- when
// c > 0, and j+ -> i- and j- -> i+ when c < 0, with weight |c|.
inline Representation act_rep(const Capsule& capsule, NonlinearityKind kind) {
  if (!capsule.admissible.count(kind))
    throw AdmissibilityError("nonlinearity '" + to_string(kind) + "' is not admissible for capsule '" + capsule.id + "'");
  if (kind != NonlinearityKind::crelu && kind != NonlinearityKind::concat) return capsule.rep;
  const int d = capsule.dim();
  std::array<Matrix, 8> mats;
  for (const Dihedral g : d4_elements()) {
    const Matrix& m = capsule.rep(g);
    Matrix out = Matrix::Zero(2 * d, 2 * d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const double c = m(i, j);
        if (c > 0) {
          out(i, j) = c;
          out(d + i, d + j) = c;
        } else if (c < 0) {
          out(d + i, j) = -c;
          out(i, d + j) = -c;
        }
      }
    mats[static_cast<std::size_t>(g.index())] = std::move(out);
  }
  return Representation("crelu(" + capsule.id + ")", std::move(mats));
}

inline Representation act_rep(const Capsule& capsule, Nonlinearity nu) { return act_rep(capsule, kind_of(nu)); }

inline std::string act_capsule_id(const std::string& id, Nonlinearity nu) {
  return nu == Nonlinearity::crelu ? "crelu(" + id + ")" : id;
}

namespace detail {

class CapsuleRegistry {
 public:
  std::shared_ptr<const Capsule> find(std::string_view id) {
    {
      std::shared_lock lock(mutex_);
      if (auto it = derived_.find(std::string(id)); it != derived_.end()) return it->second;
    }
    auto made = build(id);
    std::unique_lock lock(mutex_);
    return derived_.emplace(std::string(id), std::move(made)).first->second;
  }

 private:
  std::shared_ptr<const Capsule> build(std::string_view id) {
    for (const Capsule& c : capsule_catalog())
      if (c.id == id) return std::make_shared<const Capsule>(c);
    constexpr std::string_view prefix = "crelu(";
    if (id.starts_with(prefix) && id.ends_with(")")) {
      const auto inner = find(id.substr(prefix.size(), id.size() - prefix.size() - 1));
      return std::make_shared<const Capsule>(make_capsule(std::string(id), act_rep(*inner, Nonlinearity::crelu)));
    }
    throw InvalidArgument("unknown capsule id '" + std::string(id) + "'");
  }

  std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const Capsule>, std::less<>> derived_;
};

}  // namespace detail

inline std::shared_ptr<const Capsule> find_capsule(std::string_view id) {
  static detail::CapsuleRegistry registry;
  return registry.find(id);
}

// ---------------------------------------------------------------------------
// Fibers

struct FiberEntry {
  std::string capsule;
  int mult = 0;
  bool operator==(const FiberEntry&) const = default;
};

struct FiberSpec {
  std::vector<FiberEntry> entries;

  FiberSpec() = default;
  FiberSpec(std::initializer_list<FiberEntry> e) : entries(e) {
    for (const auto& x : entries)
      if (x.mult < 0) throw InvalidArgument("negative capsule multiplicity");
  }
  explicit FiberSpec(std::vector<FiberEntry> e) : entries(std::move(e)) {
    for (const auto& x : entries)
      if (x.mult < 0) throw InvalidArgument("negative capsule multiplicity");
  }

  int channels() const {
    int k = 0;
    for (const auto& e : entries) k += e.mult * find_capsule(e.capsule)->dim();
    return k;
  }

  std::string str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < entries.size(); ++i)
      s += (i ? "," : "") + std::string("(") + entries[i].capsule + "," + std::to_string(entries[i].mult) + ")";
    return s + "]";
  }

  bool operator==(const FiberSpec&) const = default;
};

// One capsule copy inside a fiber: which entry it belongs to and where its channels start.
struct CapsuleSlot {
  std::shared_ptr<const Capsule> capsule;
  int entry = 0;
  int copy = 0;
  int offset = 0;
};

inline std::vector<CapsuleSlot> fiber_layout(const FiberSpec& spec) {
  std::vector<CapsuleSlot> slots;
  int offset = 0;
  for (std::size_t e = 0; e < spec.entries.size(); ++e) {
    const auto cap = find_capsule(spec.entries[e].capsule);
    for (int c = 0; c < spec.entries[e].mult; ++c) {
      slots.push_back({cap, static_cast<int>(e), c, offset});
      offset += cap->dim();
    }
  }
  return slots;
}

// Block diagonal with the capsules in listed order, copies contiguous.
inline Representation fiber_rep(const FiberSpec& spec) {
  std::vector<Representation> blocks;
  for (const auto& slot : fiber_layout(spec)) blocks.push_back(slot.capsule->rep);
  if (blocks.empty()) {
    std::array<Matrix, 8> mats;
    for (Matrix& m : mats) m = Matrix(0, 0);
    return Representation(spec.str(), std::move(mats));
  }
  return direct_sum(std::span<const Representation>(blocks), spec.str());
}

// Residual additions require the identical ordered capsule stack, not just equal width.
inline bool check_addable(const FiberSpec& a, const FiberSpec& b) { return a == b; }

inline FiberSpec act_fiber(const FiberSpec& spec, Nonlinearity nu) {
  FiberSpec out;
  for (const auto& e : spec.entries) {
    const auto cap = find_capsule(e.capsule);
    if (!cap->admits(nu))
      throw AdmissibilityError("nonlinearity '" + to_string(nu) + "' is not admissible for capsule '" + cap->id + "'");
    out.entries.push_back({act_capsule_id(e.capsule, nu), e.mult});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pointwise evaluation on one capsule copy

// Euclidean norm summed in order of increasing magnitude, so that any signed
// permutation of v yields a bit-identical result.
template <class T>
T permutation_invariant_norm(std::span<const T> v) {
  std::vector<T> mag(v.begin(), v.end());
  for (T& x : mag) x = x < 0 ? -x : x;
  std::sort(mag.begin(), mag.end());
  T s = 0;
  for (T x : mag) s += x * x;
  return std::sqrt(s);
}

// out has dim(in) entries, or 2*dim(in) for CReLU.
template <class T>
void apply_capsule_nonlinearity(Nonlinearity nu, std::span<const T> in, std::span<T> out, T bias = T(0)) {
  const std::size_t d = in.size();
  switch (nu) {
    case Nonlinearity::identity:
      std::copy(in.begin(), in.end(), out.begin());
      return;
    case Nonlinearity::relu:
      for (std::size_t i = 0; i < d; ++i) out[i] = in[i] > 0 ? in[i] : T(0);
      return;
    case Nonlinearity::crelu:
      for (std::size_t i = 0; i < d; ++i) {
        out[i] = in[i] > 0 ? in[i] : T(0);
        out[d + i] = in[i] < 0 ? -in[i] : T(0);
      }
      return;
    case Nonlinearity::norm_relu: {
      const T n = permutation_invariant_norm(in);
      const T scale = n > bias && n > T(0) ? (n - bias) / n : T(0);
      for (std::size_t i = 0; i < d; ++i) out[i] = in[i] * scale;
      return;
    }
  }
}

}  // namespace equisteer
