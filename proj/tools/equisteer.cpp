// equisteer command-line tool.
//
// Exit codes: 0 pass, 1 threshold fail, 2 bad input, 3 type-system violation,
// 4 runtime or numerical failure. With --json every command prints one envelope
// {command, input_digest, tool_version, result, pass, timestamp} on stdout.

#include <openssl/evp.h>

#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "equisteer/io.hpp"
#include "equisteer/version.hpp"

using namespace equisteer;

namespace {

enum Exit { kPass = 0, kThreshold = 1, kBadInput = 2, kTypeSystem = 3, kRuntime = 4 };

struct Outcome {
  Json result;
  bool pass = true;
  std::string text;  // human-readable form
};

// Everything that determines a command's result, hashed into input_digest.
class Digest {
 public:
  void add(std::string_view part) {
    buf_.append(part);
    buf_.push_back('\0');
  }
  void add_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw InvalidArgument("cannot read " + p.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    add(ss.str());
  }
  std::string hex() const {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(buf_.data(), buf_.size(), md, &len, EVP_sha256(), nullptr)) throw NumericalFailure("sha256 failed");
    std::ostringstream ss;
    for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return "sha256:" + ss.str();
  }

 private:
  std::string buf_;
};

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<std::filesystem::path> cache_path(bool disabled) {
  if (disabled) return std::nullopt;
  if (const char* p = std::getenv("EQUISTEER_CACHE"); p && *p) return std::filesystem::path(p);
  if (const char* x = std::getenv("XDG_CACHE_HOME"); x && *x) return std::filesystem::path(x) / "equisteer" / "bases.sfa";
  if (const char* h = std::getenv("HOME"); h && *h) return std::filesystem::path(h) / ".cache" / "equisteer" / "bases.sfa";
  return std::nullopt;
}

// Loads the basis cache for the command's lifetime and writes back new entries.
class CacheSession {
 public:
  explicit CacheSession(bool disabled) : path_(cache_path(disabled)) {
    if (!path_) return;
    try {
      const CacheLoadReport r = store_.load(*path_);
      if (r.rejected) std::cerr << "warning: ignored " << r.rejected << " stale basis cache records in " << path_->string() << "\n";
    } catch (const Error& e) {
      std::cerr << "warning: basis cache " << path_->string() << " unreadable (" << e.what() << "); recomputing\n";
    }
  }
  ~CacheSession() {
    if (!path_ || !store_.dirty()) return;
    try {
      store_.save(*path_);
    } catch (const std::exception& e) {
      std::cerr << "warning: could not write basis cache " << path_->string() << ": " << e.what() << "\n";
    }
  }
  BasisStore& store() { return store_; }

 private:
  std::optional<std::filesystem::path> path_;
  BasisStore store_;
};

std::string format_matrix(const Matrix& m) {
  std::ostringstream ss;
  ss << "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ss << (i ? "; " : "");
    for (Eigen::Index j = 0; j < m.cols(); ++j) ss << (j ? " " : "") << m(i, j);
  }
  return ss.str() + "]";
}

// ---------------------------------------------------------------------------
// Commands

Outcome cmd_irreps(const std::string& group) {
  if (group != "d4") throw InvalidArgument("unsupported group '" + group + "'; only d4 is available");
  Outcome out;
  Json list = Json::array();
  std::ostringstream text;
  text << "irreps of D4 (elements e r r2 r3 m mr mr2 mr3)\n";
  for (const Irrep i : kIrreps) {
    const Representation rho = irrep(i);
    const CharacterVector chi = character(rho);
    Json j = to_json(rho);
    j["name"] = irrep_name(i);
    j["character"] = chi;
    list.push_back(j);
    text << irrep_name(i) << "  dim " << rho.dim() << "  chi";
    for (double c : chi) text << " " << c;
    text << "  r " << format_matrix(rho(Dihedral::rotation())) << "  m " << format_matrix(rho(Dihedral::mirror())) << "\n";
  }
  out.result = {{"group", "d4"}, {"irreps", list}};
  out.text = text.str();
  return out;
}

Representation resolve_rep(const std::string& spec, Digest& digest) {
  if (spec.starts_with("pi0:")) {
    const std::string dims = spec.substr(4);
    const auto x = dims.find('x');
    int s = 0, t = 0;
    try {
      if (x == std::string::npos) throw std::invalid_argument("no x");
      std::size_t used = 0;
      s = std::stoi(dims.substr(0, x), &used);
      if (used != x) throw std::invalid_argument("trailing");
      t = std::stoi(dims.substr(x + 1), &used);
      if (used != dims.size() - x - 1) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw InvalidArgument("builtin '" + spec + "' must look like pi0:SxS");
    }
    if (s != t) throw InvalidArgument("pi0 patches are square, got " + dims);
    return build_pi0(s, 1).rep;
  }
  if (spec.starts_with("builtin:")) return find_capsule(spec.substr(8))->rep;
  digest.add_file(spec);
  return representation_from_json(read_json_file(spec), spec);
}

Outcome cmd_decompose(const std::string& spec, Digest& digest) {
  const Representation rho = resolve_rep(spec, digest);
  if (!is_representation(rho, 1e-9)) throw NotARepresentation("'" + spec + "' does not satisfy rho(g) rho(h) = rho(gh)");
  const RepType t = decompose_type(rho);
  Outcome out;
  out.result = {{"rep", spec}, {"dim", rho.dim()}, {"type", std::vector<int>(t.m.begin(), t.m.end())}, {"multiplicities", to_json(t)}};
  out.text = spec + ": dim " + std::to_string(rho.dim()) + ", type " + t.str() + "\n";
  return out;
}

Outcome cmd_homs(const std::string& in, const std::string& out_id, int s, const std::string& emit, CacheSession& cache) {
  require_odd_patch(s);
  const BasisKey key{in, out_id, s};
  const auto basis = basis_catalogue().get(key);
  const int n = basis->size();
  Outcome out;
  Json mu = nullptr;
  std::string mu_text = "undefined";
  if (n > 0) {
    const Rational r = Rational::make(static_cast<long>(basis->in_dim) * basis->out_dim, n);
    mu = {{"num", r.num}, {"den", r.den}, {"value", r.value()}};
    mu_text = r.str();
  }
  const double residual = [&] {
    double worst = 0;
    const PatchRep pi = build_patch_rep(find_capsule(in)->rep, s);
    for (int k = 0; k < n; ++k) worst = std::max(worst, equivariance_residual(basis->element(k), pi.rep, find_capsule(out_id)->rep));
    return worst;
  }();
  out.result = {{"in", in}, {"out", out_id}, {"s", s}, {"patch_dim", basis->in_dim}, {"out_dim", basis->out_dim}, {"dim_hom", n},
                {"utilization", mu}, {"max_residual", residual}};
  out.text = "Hom(patch(" + in + ", " + std::to_string(s) + "), " + out_id + "): dim " + std::to_string(n) + ", utilization " + mu_text + "\n";
  if (!emit.empty()) {
    save_tensor(emit, cache.store().tensor(key));
    out.result["emitted"] = emit;
    out.text += "basis written to " + emit + "\n";
  }
  return out;
}

Outcome cmd_verify(const std::string& net_path, const std::string& params_path, int trials, std::uint64_t seed, double tol, int precision,
                   Digest& digest) {
  if (trials < 1) throw InvalidArgument("--trials must be positive");
  if (!(tol >= 0)) throw InvalidArgument("--tol must be non-negative");
  digest.add_file(net_path);
  const Network net = compile(network_from_json(read_json_file(net_path)));
  ParamSet p;
  if (params_path.empty()) {
    p = init_params(net, seed);
  } else {
    digest.add_file(params_path);
    p = params_from_archive(net, load_archive(params_path));
  }
  const VerifyReport rep = precision == 64 ? verify_equivariance<double>(net, p, trials, seed, tol) : verify_equivariance<float>(net, p, trials, seed, tol);
  Outcome out;
  out.result = to_json(rep);
  out.result["precision"] = precision;
  out.pass = rep.pass;
  std::ostringstream text;
  text << "max relative error " << rep.max_rel_error << " over " << rep.elements << " elements x " << rep.trials << " trials (" << precision
       << "-bit), tol " << tol << ": " << (rep.pass ? "PASS" : "FAIL") << "\n";
  for (std::size_t i = 0; i < rep.per_layer.size(); ++i) text << "  layer " << i << " " << to_string(net.layer(static_cast<int>(i)).kind) << " " << rep.per_layer[i] << "\n";
  out.text = text.str();
  return out;
}

constexpr double kTrainAccuracyTarget = 0.95;
constexpr double kInvarianceGapTarget = 0.001;

Outcome cmd_train_demo(const std::string& config_path, std::optional<std::uint64_t> seed, Digest& digest) {
  TrainConfig cfg;
  if (!config_path.empty()) {
    digest.add_file(config_path);
    cfg = train_config_from_json(read_json_file(config_path));
  }
  if (seed) cfg.seed = *seed;
  const TrainMetrics m = train_demo(cfg);
  Outcome out;
  out.pass = m.train_accuracy >= kTrainAccuracyTarget && std::abs(m.invariance_gap) <= kInvarianceGapTarget;
  out.result = {{"config", to_json(cfg)}, {"metrics", to_json(m)},
                {"thresholds", {{"train_accuracy", kTrainAccuracyTarget}, {"invariance_gap", kInvarianceGapTarget}}}};
  std::ostringstream text;
  text << "train accuracy " << m.train_accuracy << ", test accuracy " << m.test_accuracy << ", transformed test accuracy "
       << m.transformed_test_accuracy << ", gap " << m.invariance_gap << ", final loss " << m.final_loss << ": " << (out.pass ? "PASS" : "FAIL")
       << "\n";
  out.text = text.str();
  return out;
}

Json envelope(const std::string& command, const Digest& digest, const Json& result, bool pass) {
  return {{"command", command}, {"input_digest", digest.hex()}, {"tool_version", std::string(kVersion)}, {"result", result},
          {"pass", pass}, {"timestamp", utc_timestamp()}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"equisteer: steerable CNNs on the p4m torus"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kVersion));
  bool json = false, no_cache = false;
  app.add_flag("--json", json, "Print a JSON report envelope");
  app.add_flag("--no-cache", no_cache, "Do not read or write the basis cache");

  std::string group = "d4";
  auto* irreps = app.add_subcommand("irreps", "List the irreducible representations");
  irreps->add_option("--group", group, "Point group")->capture_default_str();

  std::string rep_spec;
  auto* decompose = app.add_subcommand("decompose", "Type vector of a representation");
  decompose->add_option("--rep", rep_spec, "JSON file, pi0:SxS, or builtin:<capsule>")->required();

  std::string in_id, out_id, emit;
  int size = 0;
  auto* homs = app.add_subcommand("homs", "Intertwiner space between a capsule patch and a capsule");
  homs->add_option("--in", in_id, "Input capsule")->required();
  homs->add_option("--out", out_id, "Output capsule")->required();
  homs->add_option("--size", size, "Odd patch size")->required();
  homs->add_option("--emit", emit, "Write the basis as an SFT1 tensor");

  std::string net_path, params_path;
  int trials = 2, precision = 32;
  std::uint64_t seed = 0;
  double tol = 1e-5;
  auto* verify = app.add_subcommand("verify", "Two-path equivariance check of a network");
  verify->add_option("--net", net_path, "Network JSON")->required();
  verify->add_option("--params", params_path, "Parameter archive (random from --seed if absent)");
  verify->add_option("--trials", trials, "Random inputs")->capture_default_str();
  verify->add_option("--seed", seed, "Seed")->capture_default_str();
  verify->add_option("--tol", tol, "Relative error threshold")->capture_default_str();
  verify->add_option("--precision", precision, "32 or 64")->check(CLI::IsMember({32, 64}))->capture_default_str();

  std::string config_path, metrics_path;
  std::optional<std::uint64_t> train_seed;
  auto* train = app.add_subcommand("train-demo", "Train the invariant classifier on synthetic patterns");
  train->add_option("--config", config_path, "Config JSON (defaults if absent)");
  train->add_option("--out", metrics_path, "Write the metrics envelope here");
  train->add_option("--seed", train_seed, "Overrides the config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kPass : kBadInput;
  }

  auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  Digest digest;
  digest.add(command);
  for (int i = 1; i < argc; ++i)
    if (std::string_view(argv[i]) != "--json" && std::string_view(argv[i]) != "--no-cache") digest.add(argv[i]);

  int code = kPass;
  Json result;
  bool pass = false;
  try {
    CacheSession cache(no_cache || command == "irreps" || command == "decompose");
    Outcome o;
    if (sub == irreps) o = cmd_irreps(group);
    else if (sub == decompose) o = cmd_decompose(rep_spec, digest);
    else if (sub == homs) o = cmd_homs(in_id, out_id, size, emit, cache);
    else if (sub == verify) o = cmd_verify(net_path, params_path, trials, seed, tol, precision, digest);
    else o = cmd_train_demo(config_path, train_seed, digest);
    result = o.result;
    pass = o.pass;
    code = pass ? kPass : kThreshold;
    if (!json) std::cout << o.text;
  } catch (const TypeSystemError& e) {
    code = kTypeSystem;
    result = {{"error", e.what()}, {"kind", "type-system"}};
    if (e.layer()) result["layer"] = *e.layer();
  } catch (const NotARepresentation& e) {
    code = kTypeSystem;
    result = {{"error", e.what()}, {"kind", "not-a-representation"}};
  } catch (const InvalidArgument& e) {
    code = kBadInput;
    result = {{"error", e.what()}, {"kind", "bad-input"}};
  } catch (const TrainingFailure& e) {
    code = kRuntime;
    result = {{"error", e.what()}, {"kind", "training-failure"}};
  } catch (const std::exception& e) {
    code = kRuntime;
    result = {{"error", e.what()}, {"kind", "runtime"}};
  }
  if (result.contains("error")) std::cerr << "error: " << result["error"].get<std::string>() << "\n";

  const Json env = envelope(command, digest, result, pass);
  if (json) std::cout << env.dump(2) << "\n";
  if (!metrics_path.empty() && code != kBadInput) {
    std::ofstream os(metrics_path);
    if (!os) {
      std::cerr << "error: cannot write " << metrics_path << "\n";
      return kBadInput;
    }
    os << env.dump(2) << "\n";
  }
  return code;
}
