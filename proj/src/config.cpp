#include "nlhom/config.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace nlhom {
namespace {

using json = nlohmann::json;

/// Reads one JSON object, tracks the consumed keys and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    return number_at(raw(key), field(key));
  }
  std::optional<double> optional_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number_at(raw(key), field(key));
  }
  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    return integer_at(raw(key), field(key));
  }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
    return v.get<bool>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }
  std::string required_string(const std::string& key) {
    if (!has(key)) throw ConfigError(field(key), "required field is missing");
    return string(key, {});
  }
  Eigen::Vector3d vec3(const std::string& key, const Eigen::Vector3d& fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_array() || v.size() != 3) throw ConfigError(field(key), "expected an array of 3 numbers");
    Eigen::Vector3d out;
    for (int i = 0; i < 3; ++i) out[i] = number_at(v[std::size_t(i)], field(key));
    return out;
  }
  Eigen::Vector3i ivec3(const std::string& key) {
    if (!has(key)) return Eigen::Vector3i::Zero();
    const json& v = raw(key);
    if (!v.is_array() || v.size() != 3) throw ConfigError(field(key), "expected an array of 3 integers");
    Eigen::Vector3i out;
    for (int i = 0; i < 3; ++i) out[i] = integer_at(v[std::size_t(i)], field(key));
    return out;
  }
  std::array<std::string, 3> strings3(const std::string& key) {
    if (!has(key)) throw ConfigError(field(key), "required field is missing");
    const json& v = raw(key);
    if (!v.is_array() || v.size() != 3) throw ConfigError(field(key), "expected an array of 3 strings");
    std::array<std::string, 3> out;
    for (std::size_t i = 0; i < 3; ++i) {
      if (!v[i].is_string()) throw ConfigError(field(key), "expected an array of 3 strings");
      out[i] = v[i].get<std::string>();
    }
    return out;
  }
  Section child(const std::string& key) { return Section(raw(key), field(key)); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown field");
  }

  static double number_at(const json& v, const std::string& f) {
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    }
    if (!v.is_number()) throw ConfigError(f, "expected a number");
    return v.get<double>();
  }
  static int integer_at(const json& v, const std::string& f) {
    if (!v.is_number_integer()) throw ConfigError(f, "expected an integer");
    return v.get<int>();
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

/// Rethrows DSL errors under the config path of the offending field.
template <typename F>
auto with_field(const std::string& field, F&& make) {
  try {
    return make();
  } catch (const ExpressionError& e) {
    std::string what = e.what();
    const std::string prefix = e.field() + ": ";
    if (!e.field().empty() && what.rfind(prefix, 0) == 0) what = what.substr(prefix.size());
    throw ExpressionError(field, what, e.offset(), e.length());
  }
}

NormalizationMode normalization(Section& s, NormalizationMode fallback) {
  const std::string mode = s.string("normalization", fallback == NormalizationMode::analytic ? "analytic" : "quadrature");
  if (mode == "analytic") return NormalizationMode::analytic;
  if (mode == "quadrature") return NormalizationMode::quadrature;
  throw ConfigError(s.field("normalization"), "expected \"analytic\" or \"quadrature\"");
}

void require_positive(double v, const std::string& field) {
  if (!(v > 0.0) || std::isnan(v)) throw ConfigError(field, "must be positive");
}

RadialProfile parse_profile(Section s) {
  RadialProfile p;
  const std::string kind = s.string("kind", "bump_quadratic");
  if (kind == "bump_quadratic") {
    p.kind = RadialProfile::Kind::bump_quadratic;
    p.radius = s.number("radius", 1.0);
    require_positive(p.radius, s.field("radius"));
  } else if (kind == "truncated_gaussian") {
    p.kind = RadialProfile::Kind::truncated_gaussian;
    p.sigma = s.number("sigma", 0.3);
    p.radius = s.number("truncation", std::numeric_limits<double>::infinity());
    require_positive(p.sigma, s.field("sigma"));
    require_positive(p.radius, s.field("truncation"));
  } else if (kind == "indicator_shell") {
    p.kind = RadialProfile::Kind::indicator_shell;
    p.inner = s.number("inner", 0.0);
    p.outer = s.number("outer", 1.0);
    if (!(p.inner >= 0.0 && p.outer > p.inner)) throw ConfigError(s.field("outer"), "need 0 <= inner < outer");
  } else {
    throw ConfigError(s.field("kind"), "unknown radial profile \"" + kind + "\"");
  }
  s.finish();
  return p;
}

KernelSpec parse_rho(Section s) {
  const std::string family = s.string("family", "bump_quadratic");
  KernelSpec k;
  if (family == "bump_quadratic") {
    const double r = s.number("radius", 1.0);
    require_positive(r, s.field("radius"));
    k = KernelSpec::bump_quadratic(r, normalization(s, NormalizationMode::analytic));
  } else if (family == "truncated_gaussian") {
    const double sigma = s.number("sigma", 0.3);
    const double trunc = s.number("truncation", std::numeric_limits<double>::infinity());
    require_positive(sigma, s.field("sigma"));
    require_positive(trunc, s.field("truncation"));
    k = KernelSpec::truncated_gaussian(sigma, trunc, normalization(s, NormalizationMode::analytic));
  } else if (family == "indicator_shell") {
    const double inner = s.number("inner", 0.0), outer = s.number("outer", 1.0);
    if (!(inner >= 0.0 && outer > inner)) throw ConfigError(s.field("outer"), "need 0 <= inner < outer");
    k = KernelSpec::indicator_shell(inner, outer, normalization(s, NormalizationMode::analytic));
  } else if (family == "expression") {
    const std::string src = s.required_string("expression");
    const double support = s.number("support", 1.0);
    require_positive(support, s.field("support"));
    const NormalizationMode mode = normalization(s, NormalizationMode::quadrature);
    k = with_field(s.field("expression"), [&] { return KernelSpec::expression(src, support, mode); });
  } else {
    throw ConfigError(s.field("family"), "unknown kernel family \"" + family + "\"");
  }
  if (auto r = s.optional_number("coercivity_radius")) {
    require_positive(*r, s.field("coercivity_radius"));
    k.set_coercivity_radius(*r);
  }
  s.finish();
  return k;
}

VectorKernelSpec parse_nu(Section s) {
  const std::string family = s.string("family", "axial");
  VectorKernelSpec k;
  if (family == "zero") {
    k = VectorKernelSpec::zero();
  } else if (family == "axial" || family == "fixed_direction") {
    const RadialProfile p = s.has("profile") ? parse_profile(s.child("profile")) : RadialProfile{};
    const NormalizationMode mode = normalization(s, NormalizationMode::analytic);
    if (family == "axial") {
      k = VectorKernelSpec::axial(p, mode);
    } else {
      const Eigen::Vector3d e = s.vec3("direction", Eigen::Vector3d::UnitX());
      if (!(e.norm() > 0.0)) throw ConfigError(s.field("direction"), "must be nonzero");
      k = VectorKernelSpec::fixed_direction(e.normalized(), p, mode);
    }
  } else if (family == "expression") {
    const auto comps = s.strings3("components");
    const double support = s.number("support", 1.0);
    require_positive(support, s.field("support"));
    const NormalizationMode mode = normalization(s, NormalizationMode::quadrature);
    k = with_field(s.field("components"), [&] { return VectorKernelSpec::expression(comps, support, mode); });
  } else {
    throw ConfigError(s.field("family"), "unknown vector kernel family \"" + family + "\"");
  }
  s.finish();
  return k;
}

CoefficientSpec parse_coefficient(Section s, const std::string& name, bool symmetric) {
  const std::string kind = s.string("kind", "constant");
  CoefficientSpec c;
  if (kind == "constant") {
    const double v = s.number("value", symmetric ? 1.0 : 0.0);
    if (!std::isfinite(v)) throw ConfigError(s.field("value"), "must be finite");
    c = CoefficientSpec::constant(v);
  } else if (kind == "separable") {
    const std::string f = s.required_string("f"), g = s.required_string("g");
    c = with_field(s.field("f/g"), [&] { return CoefficientSpec::separable(f, g); });
  } else if (kind == "fourier") {
    const double mean = s.number("mean", 0.0);
    std::vector<CoefficientSpec::FourierMode> modes;
    if (s.has("modes")) {
      const json& arr = s.raw("modes");
      if (!arr.is_array()) throw ConfigError(s.field("modes"), "expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        Section m(arr[i], s.field("modes") + "[" + std::to_string(i) + "]");
        CoefficientSpec::FourierMode mode;
        mode.k = m.ivec3("k");
        mode.kp = m.ivec3("kp");
        mode.cos_amp = m.number("cos", 0.0);
        mode.sin_amp = m.number("sin", 0.0);
        m.finish();
        modes.push_back(mode);
      }
    }
    c = CoefficientSpec::fourier(mean, std::move(modes));
  } else if (kind == "expression") {
    const std::string src = s.required_string("expression");
    c = with_field(s.field("expression"), [&] { return CoefficientSpec::expression(src); });
  } else {
    throw ConfigError(s.field("kind"), "unknown coefficient kind \"" + kind + "\"");
  }
  c.name = name;
  if (symmetric) {
    if (s.has("a0")) {
      c.a0_declared = s.number("a0", 0.0);
    } else if (c.is_constant()) {
      c.a0_declared = c.constant_value();
    } else {
      throw ConfigError(s.field("a0"), "required for a non-constant coefficient");
    }
    require_positive(c.a0_declared, s.field("a0"));
  }
  if (auto sup = s.optional_number("sup_bound")) {
    require_positive(*sup, s.field("sup_bound"));
    c.sup_bound = *sup;
  }
  s.finish();
  return c;
}

MagnetizationFamily parse_magnetization(Section s) {
  const std::string family = s.string("family", "helix");
  MagnetizationFamily m;
  if (family == "helix") {
    const Eigen::Vector3d axis = s.vec3("axis", Eigen::Vector3d::UnitZ());
    if (!(axis.norm() > 0.0)) throw ConfigError(s.field("axis"), "must be nonzero");
    m = MagnetizationFamily::helix(axis.normalized(), s.number("pitch", 1.0));
  } else if (family == "constant") {
    const Eigen::Vector3d d = s.vec3("direction", Eigen::Vector3d::UnitZ());
    if (!(d.norm() > 0.0)) throw ConfigError(s.field("direction"), "must be nonzero");
    m = MagnetizationFamily::constant(d.normalized());
  } else if (family == "bloch_wall") {
    const Eigen::Vector3d nrm = s.vec3("normal", Eigen::Vector3d::UnitX());
    if (!(nrm.norm() > 0.0)) throw ConfigError(s.field("normal"), "must be nonzero");
    const double width = s.number("width", 0.1);
    require_positive(width, s.field("width"));
    m = MagnetizationFamily::bloch_wall(nrm.normalized(), s.number("center", 0.5), width);
  } else if (family == "expression") {
    const auto comps = s.strings3("components");
    m = with_field(s.field("components"), [&] { return MagnetizationFamily::expression(comps); });
  } else {
    throw ConfigError(s.field("family"), "unknown magnetization family \"" + family + "\"");
  }
  s.finish();
  return m;
}

void parse_macro(Section s, MacroConfig& macro) {
  if (s.has("M")) {
    const int M = s.integer("M", 0);
    if (M < 1) throw ConfigError(s.field("M"), "must be a positive integer");
    macro.M = M;
  }
  const bool hasP = s.has("P"), hasEps = s.has("eps");
  if (hasP && hasEps) throw ConfigError(s.field("eps"), "give either P or eps, not both");
  if (hasP || hasEps) {
    const std::string key = hasP ? "P" : "eps";
    const json& v = s.raw(key);
    const std::string f = s.field(key);
    auto one = [&](const json& x) {
      if (hasP) {
        const int P = Section::integer_at(x, f);
        if (P < 1) throw ConfigError(f, "must be a positive integer");
        return P;
      }
      const double eps = Section::number_at(x, f);
      try {
        return reciprocal(eps);
      } catch (const Error& e) {
        throw CommensurabilityError(f, e.what());
      }
    };
    if (v.is_array()) {
      for (const auto& x : v) macro.P.push_back(one(x));
      if (macro.P.empty()) throw ConfigError(f, "must not be empty");
    } else {
      macro.P.push_back(one(v));
    }
  }
  if (s.has("magnetization")) macro.magnetization = parse_magnetization(s.child("magnetization"));
  s.finish();
}

void check_macro(const Config& c) {
  const int n = c.lattice.n;
  if (c.macro.M) {
    const int M = *c.macro.M;
    if (c.macro.P.empty()) {
      if (M % n != 0) {
        std::ostringstream msg;
        msg << "M = " << M << " is not a multiple of the cell grid n = " << n
            << " (need M = P n with integer P = 1/eps)";
        throw CommensurabilityError("macro.M", msg.str());
      }
      return;
    }
    for (int P : c.macro.P)
      if (M != P * n) {
        std::ostringstream msg;
        msg << "M = " << M << " differs from P n = " << P << " * " << n << " = " << P * n;
        throw CommensurabilityError("macro.M", msg.str());
      }
  }
}

void apply_override(json& root, const Override& o) {
  const std::string& path = o.first;
  if (path.empty()) throw ConfigError("", "empty override key");
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError(path, "malformed override key");
    if (dot == std::string::npos) {
      if (node->contains(key) && ((*node)[key].is_object() || (*node)[key].is_array()))
        throw ConfigError(path, "only scalar fields can be overridden");
      json value = json::parse(o.second, nullptr, false);
      if (value.is_discarded()) value = o.second;
      if (value.is_object() || value.is_array())
        throw ConfigError(path, "only scalar fields can be overridden");
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) (*node)[key] = json::object();
    node = &(*node)[key];
    if (!node->is_object()) throw ConfigError(path, "override path crosses a non-object field");
    start = dot + 1;
  }
}

}  // namespace

double Config::lattice_radius() const {
  return lattice.radius ? *lattice.radius : default_lattice_radius(rho, nu, lattice.tail_tol);
}

XiLattice Config::build_lattice() const { return XiLattice::build(lattice.n, lattice_radius(), rho, nu); }

CellInputs Config::cell_inputs() const {
  CellInputs in;
  in.a = a;
  in.kappa = kappa;
  in.lattice = build_lattice();
  in.options = solver;
  return in;
}

VerificationSetup Config::setup() const {
  VerificationSetup s;
  s.rho = rho;
  s.nu = nu;
  s.a = a;
  s.kappa = kappa;
  s.radius = lattice_radius();
  s.options = solver;
  return s;
}

Scenario Config::make_scenario() const {
  Scenario sc;
  sc.name = scenario.name;
  sc.setup = setup();
  sc.n = lattice.n;
  sc.magnetization = macro.magnetization;
  if (!macro.P.empty()) {
    sc.eps_list.clear();
    for (int P : macro.P) sc.eps_list.push_back(1.0 / double(P));
  }
  sc.reference_energy = scenario.reference_energy;
  sc.plain_gap_tolerance = scenario.plain_gap_tolerance;
  sc.recovery_gap_tolerance = scenario.recovery_gap_tolerance;
  return sc;
}

int Config::macro_P(std::size_t i) const {
  if (i < macro.P.size()) return macro.P[i];
  if (macro.M) return *macro.M / lattice.n;
  throw ConfigError("macro", "no M or P given");
}

int Config::macro_M(std::size_t i) const {
  if (macro.M) return *macro.M;
  return macro_P(i) * lattice.n;
}

Config parse_config(std::string_view text, const std::vector<Override>& overrides) {
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("", "top level must be an object");
  for (const auto& o : overrides) apply_override(root, o);

  Config c;
  Section top(root, "");
  if (top.has("kernels")) {
    Section k = top.child("kernels");
    if (k.has("rho")) c.rho = parse_rho(k.child("rho"));
    if (k.has("nu")) c.nu = parse_nu(k.child("nu"));
    k.finish();
  }
  if (top.has("coefficients")) {
    Section k = top.child("coefficients");
    if (k.has("a")) c.a = parse_coefficient(k.child("a"), "a", true);
    if (k.has("kappa")) c.kappa = parse_coefficient(k.child("kappa"), "kappa", false);
    k.finish();
  }
  c.a.name = "a";
  c.kappa.name = "kappa";
  if (top.has("lattice")) {
    Section s = top.child("lattice");
    c.lattice.n = s.integer("n", 8);
    if (c.lattice.n < 1) throw ConfigError("lattice.n", "must be a positive integer");
    if (auto r = s.optional_number("R")) {
      require_positive(*r, "lattice.R");
      if (!std::isfinite(*r)) throw ConfigError("lattice.R", "must be finite");
      c.lattice.radius = *r;
    }
    c.lattice.tail_tol = s.number("tail_tol", 1e-8);
    require_positive(c.lattice.tail_tol, "lattice.tail_tol");
    s.finish();
  }
  if (top.has("macro")) parse_macro(top.child("macro"), c.macro);
  if (top.has("solver")) {
    Section s = top.child("solver");
    c.solver.cg_tol = s.number("cg_tol", 1e-10);
    require_positive(c.solver.cg_tol, "solver.cg_tol");
    c.solver.max_iter_factor = s.number("max_iter_factor", 10.0);
    require_positive(c.solver.max_iter_factor, "solver.max_iter_factor");
    c.solver.jacobi = s.boolean("jacobi", false);
    c.solver.cache_coefficients = s.boolean("cache", false);
    s.finish();
  }
  if (top.has("output")) {
    Section s = top.child("output");
    c.output.directory = s.string("directory", ".");
    c.output.prefix = s.string("prefix", "nlhom");
    if (s.has("formats")) {
      const json& f = s.raw("formats");
      if (!f.is_array()) throw ConfigError("output.formats", "expected an array of strings");
      c.output.json = c.output.csv = c.output.binary = false;
      for (const auto& x : f) {
        const std::string v = x.is_string() ? x.get<std::string>() : "";
        if (v == "json") c.output.json = true;
        else if (v == "csv") c.output.csv = true;
        else if (v == "binary") c.output.binary = true;
        else throw ConfigError("output.formats", "expected \"json\", \"csv\" or \"binary\"");
      }
    }
    s.finish();
  }
  if (top.has("verification")) {
    Section s = top.child("verification");
    auto& v = c.verification;
    const double seed = s.number("seed", 0.0);
    if (!(seed >= 0.0) || seed != std::floor(seed)) throw ConfigError("verification.seed", "must be a nonnegative integer");
    v.seed = std::uint64_t(seed);
    v.n = s.integer("n", v.n);
    v.draws = s.integer("draws", v.draws);
    v.samples = s.integer("samples", v.samples);
    v.M = s.integer("M", v.M);
    v.eps = s.number("eps", v.eps);
    if (v.n < 1 || v.draws < 1 || v.samples < 1 || v.M < 1)
      throw ConfigError("verification", "n, draws, samples and M must be positive");
    int P = 0;
    try {
      P = reciprocal(v.eps);
    } catch (const Error& e) {
      throw CommensurabilityError("verification.eps", e.what());
    }
    if (v.M % P != 0)
      throw CommensurabilityError("verification.M", "M must be a multiple of 1/eps");
    s.finish();
  }
  if (top.has("scenario")) {
    Section s = top.child("scenario");
    c.scenario.name = s.string("name", c.scenario.name);
    c.scenario.reference_energy = s.optional_number("reference_energy");
    c.scenario.plain_gap_tolerance = s.optional_number("plain_gap_tolerance");
    c.scenario.recovery_gap_tolerance = s.optional_number("recovery_gap_tolerance");
    if (c.scenario.plain_gap_tolerance) require_positive(*c.scenario.plain_gap_tolerance, "scenario.plain_gap_tolerance");
    if (c.scenario.recovery_gap_tolerance)
      require_positive(*c.scenario.recovery_gap_tolerance, "scenario.recovery_gap_tolerance");
    s.finish();
  }
  top.finish();
  check_macro(c);
  return c;
}

Config load_config(const std::string& path, const std::vector<Override>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides);
}

}  // namespace nlhom
