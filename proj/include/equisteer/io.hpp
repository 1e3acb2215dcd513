// Serialization: SFT1 tensors, SFA1 named-tensor archives (parameters and the
// basis cache), and JSON forms of representations, fibers, networks and reports.
//
// SFT1: "SFT1", u32 rank, rank x u32 dims, prod(dims) x f32 payload, row-major,
// all little-endian. SFA1: "SFA1", u32 count, then per record u32 name length,
// name bytes and one SFT1 tensor.

#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>

#include "equisteer/train.hpp"
#include "json.hpp"

namespace equisteer {

using Json = nlohmann::ordered_json;

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t elements() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
  bool operator==(const Tensor& o) const {
    if (dims != o.dims || data.size() != o.data.size()) return false;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (std::bit_cast<std::uint32_t>(data[i]) != std::bit_cast<std::uint32_t>(o.data[i])) return false;
    return true;
  }
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff), static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError(std::string("truncated file while reading ") + what);
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 | static_cast<std::uint32_t>(b[2]) << 16 |
         static_cast<std::uint32_t>(b[3]) << 24;
}

inline void expect_magic(std::istream& is, std::string_view magic) {
  char m[4] = {};
  if (!is.read(m, 4) || std::string_view(m, 4) != magic) throw FormatError("bad magic, expected " + std::string(magic));
}

constexpr std::uint32_t kMaxRank = 16;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 31;

}  // namespace detail

inline void write_tensor(std::ostream& os, const Tensor& t) {
  if (t.data.size() != t.elements()) throw InvalidArgument("tensor payload does not match its dims");
  os.write("SFT1", 4);
  detail::put_u32(os, static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) detail::put_u32(os, d);
  for (float v : t.data) detail::put_u32(os, std::bit_cast<std::uint32_t>(v));
}

inline Tensor read_tensor(std::istream& is) {
  detail::expect_magic(is, "SFT1");
  Tensor t;
  const std::uint32_t rank = detail::get_u32(is, "rank");
  if (rank > detail::kMaxRank) throw FormatError("tensor rank " + std::to_string(rank) + " is implausible");
  std::uint64_t n = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    t.dims.push_back(detail::get_u32(is, "dims"));
    n *= t.dims.back();
    if (n > detail::kMaxElements) throw FormatError("tensor is too large");
  }
  t.data.resize(static_cast<std::size_t>(n));
  for (float& v : t.data) v = std::bit_cast<float>(detail::get_u32(is, "payload"));
  return t;
}

inline void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("cannot write " + path.string());
  write_tensor(os, t);
}

inline Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot read " + path.string());
  return read_tensor(is);
}

inline Tensor to_tensor(const Matrix& m) {
  Tensor t{{static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())}, {}};
  t.data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.data.push_back(static_cast<float>(m(i, j)));
  return t;
}

inline Matrix to_matrix(const Tensor& t) {
  if (t.dims.size() != 2) throw FormatError("expected a rank-2 tensor, got rank " + std::to_string(t.dims.size()));
  Matrix m(t.dims[0], t.dims[1]);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = t.data[static_cast<std::size_t>(i * m.cols() + j)];
  return m;
}

// ---------------------------------------------------------------------------
// Archives

using Archive = std::vector<std::pair<std::string, Tensor>>;

inline void write_archive(std::ostream& os, const Archive& a) {
  os.write("SFA1", 4);
  detail::put_u32(os, static_cast<std::uint32_t>(a.size()));
  for (const auto& [name, t] : a) {
    detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(os, t);
  }
}

inline Archive read_archive(std::istream& is) {
  detail::expect_magic(is, "SFA1");
  const std::uint32_t count = detail::get_u32(is, "record count");
  Archive a;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = detail::get_u32(is, "name length");
    if (len > 4096) throw FormatError("record name is implausibly long");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw FormatError("truncated file while reading a record name");
    a.emplace_back(std::move(name), read_tensor(is));
  }
  return a;
}

inline void save_archive(const std::filesystem::path& path, const Archive& a) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("cannot write " + path.string());
  write_archive(os, a);
}

inline Archive load_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot read " + path.string());
  return read_archive(is);
}

inline Archive params_to_archive(const ParamSet& p) {
  Archive a;
  p.visit([&](const std::string& name, const Matrix& m) { a.emplace_back(name, to_tensor(m)); });
  return a;
}

// Every expected tensor must be present with its exact shape; extra records are an error.
inline ParamSet params_from_archive(const Network& net, const Archive& a) {
  std::map<std::string, const Tensor*> byname;
  for (const auto& [name, t] : a)
    if (!byname.emplace(name, &t).second) throw FormatError("duplicate tensor '" + name + "'");
  ParamSet p = zero_params(net);
  std::size_t used = 0;
  p.visit([&](const std::string& name, Matrix& m) {
    const auto it = byname.find(name);
    if (it == byname.end()) throw FormatError("missing tensor '" + name + "'");
    const Matrix v = to_matrix(*it->second);
    if (v.rows() != m.rows() || v.cols() != m.cols())
      throw FormatError("tensor '" + name + "' has shape " + std::to_string(v.rows()) + "x" + std::to_string(v.cols()) + ", expected " +
                        std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    m = v;
    ++used;
  });
  if (used != byname.size()) throw FormatError("archive has tensors the network does not use");
  return p;
}

// ---------------------------------------------------------------------------
// Basis cache

inline std::string cache_key(const BasisKey& k) { return k.in + "|" + k.out + "|" + std::to_string(k.size); }

inline BasisKey parse_cache_key(const std::string& s) {
  const auto a = s.find('|'), b = s.rfind('|');
  if (a == std::string::npos || a == b) throw FormatError("bad cache key '" + s + "'");
  try {
    return {s.substr(0, a), s.substr(a + 1, b - a - 1), std::stoi(s.substr(b + 1))};
  } catch (const std::logic_error&) {
    throw FormatError("bad cache key '" + s + "'");
  }
}

// A float32 basis read back from disk: project each element onto the Hom space
// again and re-orthonormalize. nullopt if it no longer spans a space of the right size.
inline std::optional<IntertwinerBasis> restore_basis(const BasisKey& key, const Matrix& stored) {
  const PatchRep pi = build_patch_rep(find_capsule(key.in)->rep, key.size);
  const Representation& rho = find_capsule(key.out)->rep;
  const int n = intertwining_number(pi.rep, rho);
  IntertwinerBasis out;
  out.in_dim = pi.dim();
  out.out_dim = rho.dim();
  if (stored.rows() != static_cast<Eigen::Index>(out.in_dim) * out.out_dim || stored.cols() != n) return std::nullopt;
  if (n == 0) {
    out.basis = Matrix(stored.rows(), 0);
    return out;
  }
  Matrix projected(stored.rows(), n);
  for (int k = 0; k < n; ++k)
    projected.col(k) = flatten_rows(project_equivariant(unflatten_rows(stored.col(k), out.out_dim, out.in_dim), pi.rep, rho));
  const Eigen::JacobiSVD<Matrix> svd(projected);
  if (svd.singularValues()(n - 1) < 0.5) return std::nullopt;
  const Matrix q = Eigen::HouseholderQR<Matrix>(projected).householderQ() * Matrix::Identity(projected.rows(), n);
  out.basis = detail::canonical_basis(q);
  return out;
}

namespace detail {

// Advisory lock on a sidecar file, held for the object's lifetime.
class FileLock {
 public:
  FileLock(const std::filesystem::path& target, bool exclusive) {
    const std::string lock = target.string() + ".lock";
    fd_ = ::open(lock.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ >= 0) ::flock(fd_, exclusive ? LOCK_EX : LOCK_SH);
  }
  ~FileLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace detail

struct CacheLoadReport {
  int loaded = 0;
  int rejected = 0;
};

// Disk-backed basis cache. The float32 tensor is the stored artifact and the
// basis in use is always restore_basis of it, for fresh and loaded entries
// alike, so results do not depend on whether the cache was warm.
class BasisStore {
 public:
  explicit BasisStore(BasisCatalogue& cat = basis_catalogue()) : cat_(cat) {
    cat_.set_compute([this](const BasisKey& key) { return compute(key); });
  }
  ~BasisStore() { cat_.set_compute({}); }
  BasisStore(const BasisStore&) = delete;
  BasisStore& operator=(const BasisStore&) = delete;

  // Missing file is an empty cache; records that fail restore_basis are skipped.
  CacheLoadReport load(const std::filesystem::path& path) {
    CacheLoadReport r;
    if (!std::filesystem::exists(path)) return r;
    Archive a;
    {
      detail::FileLock lock(path, false);
      a = load_archive(path);
    }
    for (auto& [name, t] : a) {
      std::optional<IntertwinerBasis> b;
      BasisKey key;
      try {
        key = parse_cache_key(name);
        b = restore_basis(key, to_matrix(t));
      } catch (const InvalidArgument&) {
      }
      if (!b) {
        ++r.rejected;
        continue;
      }
      {
        std::lock_guard lock(mutex_);
        stored_.emplace(key, std::move(t));
      }
      cat_.insert(key, std::move(*b));
      ++r.loaded;
    }
    return r;
  }

  // Concurrent writers serialize on the lock and the last one wins.
  void save(const std::filesystem::path& path) const {
    Archive a;
    {
      std::lock_guard lock(mutex_);
      for (const auto& [key, t] : stored_) a.emplace_back(cache_key(key), t);
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    detail::FileLock lock(path, true);
    const std::filesystem::path tmp = path.string() + ".tmp";
    save_archive(tmp, a);
    std::filesystem::rename(tmp, path);
  }

  // The stored tensor for a key, computing the basis if needed.
  Tensor tensor(const BasisKey& key) {
    cat_.get(key);
    std::lock_guard lock(mutex_);
    return stored_.at(key);
  }

  bool dirty() const {
    std::lock_guard lock(mutex_);
    return added_;
  }

 private:
  IntertwinerBasis compute(const BasisKey& key) {
    Tensor t = to_tensor(BasisCatalogue::compute(key).basis);
    std::optional<IntertwinerBasis> b = restore_basis(key, to_matrix(t));
    if (!b) throw NumericalFailure("basis " + cache_key(key) + " does not survive float32 storage");
    std::lock_guard lock(mutex_);
    stored_.emplace(key, std::move(t));
    added_ = true;
    return std::move(*b);
  }

  BasisCatalogue& cat_;
  mutable std::mutex mutex_;
  std::map<BasisKey, Tensor> stored_;
  bool added_ = false;
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

template <class F>
auto json_guard(const std::string& what, F&& fn) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    throw FormatError(what + ": " + e.what());
  }
}

inline Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Matrix json_matrix(const Json& j, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) throw FormatError("matrix must have " + std::to_string(dim) + " rows");
  Matrix m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != dim) throw FormatError("matrix must have " + std::to_string(dim) + " columns");
    for (int k = 0; k < dim; ++k) {
      if (!row[static_cast<std::size_t>(k)].is_number()) throw FormatError("matrix entries must be numbers");
      m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
  }
  return m;
}

}  // namespace detail

inline Json to_json(const Representation& rho) {
  Json mats = Json::object();
  for (const Dihedral g : d4_elements()) mats[g.name()] = detail::matrix_json(rho(g));
  return {{"dim", rho.dim()}, {"matrices", mats}};
}

// Shapes are checked here; the homomorphism property is not.
inline Representation representation_from_json(const Json& j, std::string name = "file") {
  return detail::json_guard("representation", [&] {
    if (!j.is_object() || !j.contains("dim") || !j.contains("matrices")) throw FormatError("representation needs 'dim' and 'matrices'");
    const int dim = j.at("dim").get<int>();
    if (dim < 0) throw FormatError("negative dimension");
    std::array<Matrix, 8> mats;
    for (const Dihedral g : d4_elements()) {
      if (!j.at("matrices").contains(g.name())) throw FormatError("missing matrix for element " + g.name());
      mats[static_cast<std::size_t>(g.index())] = detail::json_matrix(j.at("matrices").at(g.name()), dim);
    }
    return Representation(std::move(name), std::move(mats));
  });
}

inline Json to_json(const RepType& t) {
  Json m = Json::object();
  for (const Irrep i : kIrreps) m[irrep_name(i)] = t.m[static_cast<std::size_t>(i)];
  return m;
}

inline Json to_json(const FiberSpec& f) {
  Json a = Json::array();
  for (const auto& e : f.entries) a.push_back({{"capsule", e.capsule}, {"mult", e.mult}});
  return a;
}

inline FiberSpec fiber_from_json(const Json& j) {
  return detail::json_guard("fiber", [&] {
    if (!j.is_array()) throw FormatError("fiber must be an array of {capsule, mult}");
    std::vector<FiberEntry> e;
    for (const Json& x : j) e.push_back({x.at("capsule").get<std::string>(), x.at("mult").get<int>()});
    return FiberSpec(std::move(e));
  });
}

inline Json to_json(const LayerSpec& l) {
  Json j{{"kind", to_string(l.kind)}};
  switch (l.kind) {
    case LayerKind::steerable_conv:
      j["in"] = to_json(l.in);
      j["out"] = to_json(l.out);
      j["s"] = l.size;
      break;
    case LayerKind::nonlinearity: j["tag"] = to_string(l.tag); break;
    case LayerKind::residual_add: j["from"] = l.from; break;
    case LayerKind::global_pool: break;
    case LayerKind::affine_readout: j["classes"] = l.classes; break;
  }
  return j;
}

inline Json to_json(const NetworkSpec& spec) {
  Json layers = Json::array();
  for (const auto& l : spec.layers) layers.push_back(to_json(l));
  return {{"grid", spec.grid}, {"layers", layers}};
}

inline NetworkSpec network_from_json(const Json& j) {
  return detail::json_guard("network", [&] {
    NetworkSpec spec;
    spec.grid = j.at("grid").get<int>();
    for (const Json& x : j.at("layers")) {
      LayerSpec l;
      l.kind = parse_layer_kind(x.at("kind").get<std::string>());
      switch (l.kind) {
        case LayerKind::steerable_conv:
          l.in = fiber_from_json(x.at("in"));
          l.out = fiber_from_json(x.at("out"));
          l.size = x.at("s").get<int>();
          break;
        case LayerKind::nonlinearity: l.tag = parse_nonlinearity(x.at("tag").get<std::string>()); break;
        case LayerKind::residual_add: l.from = x.value("from", -1); break;
        case LayerKind::global_pool: break;
        case LayerKind::affine_readout: l.classes = x.at("classes").get<int>(); break;
      }
      spec.layers.push_back(std::move(l));
    }
    return spec;
  });
}

inline Json to_json(const VerifyReport& r) {
  Json per_element = Json::object();
  for (const auto& [k, v] : r.per_element) per_element[k] = v;
  return {{"max_rel_error", r.max_rel_error}, {"per_layer", r.per_layer}, {"per_element", per_element}, {"tol", r.tol},
          {"pass", r.pass}, {"trials", r.trials}, {"elements", r.elements}};
}

inline Json to_json(const TrainConfig& c) {
  Json hidden = Json::array();
  for (const auto& h : c.hidden) hidden.push_back(to_json(h));
  return {{"classes", c.classes}, {"grid", c.grid}, {"pattern", c.pattern}, {"train_per_class", c.train_per_class},
          {"test_per_class", c.test_per_class}, {"noise", c.noise}, {"epochs", c.epochs}, {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate}, {"seed", c.seed}, {"divergence_factor", c.divergence_factor}, {"hidden", hidden}};
}

// Absent keys keep their defaults; unknown keys are rejected.
inline TrainConfig train_config_from_json(const Json& j) {
  return detail::json_guard("train config", [&] {
    if (!j.is_object()) throw FormatError("train config must be an object");
    const Json known = to_json(TrainConfig{});
    for (const auto& [k, v] : j.items())
      if (!known.contains(k)) throw FormatError("unknown train config key '" + k + "'");
    TrainConfig c;
    c.classes = j.value("classes", c.classes);
    c.grid = j.value("grid", c.grid);
    c.pattern = j.value("pattern", c.pattern);
    c.train_per_class = j.value("train_per_class", c.train_per_class);
    c.test_per_class = j.value("test_per_class", c.test_per_class);
    c.noise = j.value("noise", c.noise);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.seed = j.value("seed", c.seed);
    c.divergence_factor = j.value("divergence_factor", c.divergence_factor);
    if (j.contains("hidden"))
      for (const Json& h : j.at("hidden")) c.hidden.push_back(fiber_from_json(h));
    return c;
  });
}

inline Json to_json(const TrainMetrics& m) {
  return {{"epochs", m.epochs}, {"parameters", m.parameters}, {"train_accuracy", m.train_accuracy}, {"test_accuracy", m.test_accuracy},
          {"transformed_test_accuracy", m.transformed_test_accuracy}, {"invariance_gap", m.invariance_gap},
          {"final_loss", m.final_loss}, {"loss_history", m.loss_history}};
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot read " + path.string());
  try {
    return Json::parse(is);
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace equisteer
