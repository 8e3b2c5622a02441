#include "nlobc/config.hpp"

#include "nlobc/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace nlobc {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string shortest(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string format_list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + shortest(v[i]);
  return s + "]";
}

std::string format_point(const Point& p) {
  return format_list(std::vector<double>(p.data(), p.data() + p.size()));
}

// Splits "[a, b, [c, d]]" into top-level items; unbracketed text splits on
// commas, or on whitespace when it has none.
std::vector<std::string> split_list(const std::string& text) {
  std::string s = trim(text);
  bool bracketed = false;
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') {
    int depth = 0;
    bool outer = true;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '[') ++depth;
      if (s[i] == ']') --depth;
      if (depth == 0 && i + 1 < s.size()) outer = false;
    }
    if (outer) {
      s = s.substr(1, s.size() - 2);
      bracketed = true;
    }
  }
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  if (!bracketed && s.find(',') == std::string::npos) {
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
  }
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '[' || c == '(') ++depth;
    if (c == ']' || c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

// Records every key it is asked for, with the value in force.
class Reader {
 public:
  Reader(const std::map<std::string, std::string>& raw, std::string source)
      : raw_(raw), source_(std::move(source)) {}

  bool has(const std::string& k) const { return raw_.count(k) > 0; }

  [[noreturn]] void fail(const std::string& k, const std::string& why) const {
    throw Error(ErrorCode::ConfigError, source_ + ": " + k + ": " + why);
  }

  std::string text(const std::string& k, const std::string& def) {
    const auto it = raw_.find(k);
    const std::string v = it == raw_.end() ? def : it->second;
    used_.insert(k);
    effective_[k] = v;
    return v;
  }

  std::string required(const std::string& k) {
    if (!has(k)) fail(k, "required key is missing");
    return text(k, "");
  }

  double parse_number(const std::string& k, const std::string& v) const {
    try {
      const Expression e = Expression::parse(v);
      if (!e.is_constant()) fail(k, "expected a constant, got '" + v + "'");
      return e(Point());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConfigError) throw;
      fail(k, e.what());
    }
  }

  double number(const std::string& k, double def) {
    if (!has(k)) {
      used_.insert(k);
      effective_[k] = shortest(def);
      return def;
    }
    const double v = parse_number(k, text(k, ""));
    effective_[k] = raw_.at(k);
    return v;
  }

  /// "auto" (or absent) yields nullopt; the caller echoes the resolved value.
  std::optional<double> number_or_auto(const std::string& k) {
    const std::string v = trim(text(k, "auto"));
    if (v == "auto") return std::nullopt;
    return parse_number(k, v);
  }

  void resolve(const std::string& k, double v) { effective_[k] = "auto (" + shortest(v) + ")"; }

  long integer(const std::string& k, long def) {
    if (!has(k)) {
      used_.insert(k);
      effective_[k] = std::to_string(def);
      return def;
    }
    const double v = number(k, 0.0);
    if (v != std::floor(v)) fail(k, "expected an integer");
    return static_cast<long>(v);
  }

  bool boolean(const std::string& k, bool def) {
    const std::string v = trim(text(k, def ? "true" : "false"));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail(k, "expected a boolean, got '" + v + "'");
  }

  std::string choice(const std::string& k, const std::string& def,
                     const std::vector<std::string>& options) {
    const std::string v = trim(text(k, def));
    if (std::find(options.begin(), options.end(), v) == options.end()) {
      std::string all;
      for (const auto& o : options) all += (all.empty() ? "" : ", ") + o;
      fail(k, "'" + v + "' is not one of " + all);
    }
    return v;
  }

  std::vector<double> numbers(const std::string& k, const std::string& def) {
    std::vector<double> out;
    for (const auto& item : split_list(text(k, def))) out.push_back(parse_number(k, item));
    return out;
  }

  Point point(const std::string& k, int dim_hint = 0) {
    const std::vector<double> v = numbers(k, "");
    if (v.empty() || v.size() > static_cast<std::size_t>(kMaxDim)) fail(k, "expected 1 to 3 coordinates");
    if (dim_hint > 0 && static_cast<int>(v.size()) != dim_hint) {
      fail(k, "expected " + std::to_string(dim_hint) + " coordinates");
    }
    Point p(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) p(static_cast<Eigen::Index>(i)) = v[i];
    return p;
  }

  std::vector<Point> points(const std::string& k, int dim) {
    std::vector<Point> out;
    const std::string v = text(k, "[]");
    for (const auto& item : split_list(v)) {
      std::vector<double> c;
      for (const auto& s : split_list(item)) c.push_back(parse_number(k, s));
      if (static_cast<int>(c.size()) != dim) fail(k, "point '" + item + "' has the wrong dimension");
      Point p(dim);
      for (int a = 0; a < dim; ++a) p(a) = c[static_cast<std::size_t>(a)];
      out.push_back(p);
    }
    return out;
  }

  Expression expression(const std::string& k, const std::string& def, int dim) {
    const std::string v = text(k, def);
    return parse_expr(k, v, dim);
  }

  Expression parse_expr(const std::string& k, const std::string& v, int dim) const {
    try {
      Expression e = Expression::parse(v);
      if (e.max_coordinate() > dim) fail(k, "'" + v + "' uses a coordinate beyond dimension " + std::to_string(dim));
      return e;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConfigError) throw;
      fail(k, e.what());
    }
  }

  VectorField vector_field(const std::string& k, const std::string& v, int dim) {
    const auto items = split_list(v);
    if (static_cast<int>(items.size()) != dim) fail(k, "expected " + std::to_string(dim) + " components");
    std::vector<Expression> comps;
    for (const auto& s : items) comps.push_back(parse_expr(k, s, dim));
    return [comps, dim](const Point& x) {
      Point out(dim);
      for (int a = 0; a < dim; ++a) out(a) = comps[static_cast<std::size_t>(a)](x);
      return out;
    };
  }

  /// A scalar expression s means s I; otherwise a bracketed matrix.
  MatrixField matrix_field(const std::string& k, const std::string& v, int dim) {
    const std::string s = trim(v);
    if (s.empty() || s.front() != '[') {
      const Expression e = parse_expr(k, s, dim);
      return [e, dim](const Point& x) {
        return SquareMatrix(e(x) * SquareMatrix::Identity(dim, dim));
      };
    }
    const auto rows = split_list(s);
    if (static_cast<int>(rows.size()) != dim) fail(k, "expected " + std::to_string(dim) + " rows");
    std::vector<Expression> entries;
    for (const auto& r : rows) {
      const auto cols = split_list(r);
      if (static_cast<int>(cols.size()) != dim) fail(k, "expected " + std::to_string(dim) + " columns");
      for (const auto& c : cols) entries.push_back(parse_expr(k, c, dim));
    }
    return [entries, dim](const Point& x) {
      SquareMatrix m(dim, dim);
      for (int a = 0; a < dim; ++a) {
        for (int b = 0; b < dim; ++b) m(a, b) = entries[static_cast<std::size_t>(a * dim + b)](x);
      }
      return m;
    };
  }

  void finish() const {
    for (const auto& [k, v] : raw_) {
      if (!used_.count(k)) fail(k, "unknown key");
    }
  }

  std::map<std::string, std::string>& effective() { return effective_; }

 private:
  const std::map<std::string, std::string>& raw_;
  std::string source_;
  std::set<std::string> used_;
  std::map<std::string, std::string> effective_;
};

Domain read_domain(Reader& r) {
  const std::string type =
      r.choice("domain.shape", "interval", {"interval", "box", "ball", "polygon", "halfspace", "implicit"});
  if (type == "interval") return Domain::interval(r.number("domain.a", 0.0), r.number("domain.b", 1.0));
  if (type == "box") {
    const Point lo = r.point("domain.lo");
    return Domain::box(lo, r.point("domain.hi", static_cast<int>(lo.size())));
  }
  if (type == "ball") {
    const Point c = r.point("domain.center");
    return Domain::ball(c, r.number("domain.radius", 1.0));
  }
  if (type == "polygon") {
    std::vector<Point> v = r.points("domain.vertices", 2);
    if (v.size() < 3) r.fail("domain.vertices", "a polygon needs at least 3 vertices");
    return Domain::polygon(std::move(v));
  }
  if (type == "halfspace") {
    const Point p = r.point("domain.point");
    return Domain::half_space(p, r.point("domain.normal", static_cast<int>(p.size())));
  }
  ImplicitSdf s;
  s.lo = r.point("domain.lo");
  const int dim = static_cast<int>(s.lo.size());
  s.hi = r.point("domain.hi", dim);
  s.sdf = r.parse_expr("domain.sdf", r.required("domain.sdf"), dim).as_field();
  s.lipschitz = r.number("domain.lipschitz", 1.0);
  return Domain::implicit(std::move(s), r.boolean("domain.convex", false));
}

// Lattice over the box [lo, hi] used for sampled defaults and checks.
std::vector<Point> lattice(const Point& lo, const Point& hi, int per_axis) {
  const int dim = static_cast<int>(lo.size());
  std::vector<Point> out;
  int total = 1;
  for (int a = 0; a < dim; ++a) total *= per_axis;
  for (int k = 0; k < total; ++k) {
    Point p(dim);
    int rem = k;
    for (int a = 0; a < dim; ++a) {
      const int i = rem % per_axis;
      rem /= per_axis;
      p(a) = lo(a) + (hi(a) - lo(a)) * (i + 0.5) / per_axis;
    }
    out.push_back(p);
  }
  return out;
}

std::pair<Point, Point> sample_box(const Domain& d, double margin) {
  if (d.bounded()) {
    auto [lo, hi] = d.bounding_box();
    return {(lo.array() - margin).matrix(), (hi.array() + margin).matrix()};
  }
  const int dim = d.dimension();
  return {Point::Constant(dim, -5.0), Point::Constant(dim, 5.0)};
}

ObliqueField read_field(Reader& r, const Domain& domain, double margin) {
  const int dim = domain.dimension();
  const Expression g = r.expression("field.g", "0", dim);
  const bool g_zero = g.is_constant() && g(Point::Zero(dim)) == 0.0;
  const std::string kind = trim(r.text("field.gamma", "normal"));
  ObliqueField f;
  double nu = 1.0, bound = 1.0;
  if (kind == "normal") {
    f = ObliqueField::normal(domain, g.as_field());
  } else if (kind == "rotated") {
    if (dim != 2) r.fail("field.gamma", "the rotated field is planar");
    const double c = r.number("field.tangent", 0.3);
    f = ObliqueField::normal(domain, g.as_field());
    f.gamma = [domain, c](const Point& x) {
      const Point n = domain.extended_normal(x);
      Point v(2);
      v << n(0) - c * n(1), n(1) + c * n(0);
      return Point(v / v.norm());
    };
    f.is_normal = false;
    f.one_sided = false;
    nu = 1.0 / std::sqrt(1.0 + c * c);
  } else {
    f.gamma = r.vector_field("field.gamma", kind, dim);
    f.g = g.as_field();
    f.is_normal = false;
    const auto [lo, hi] = sample_box(domain, margin);
    bound = 0.0;
    for (const Point& x : lattice(lo, hi, dim == 3 ? 17 : 65)) bound = std::max(bound, f.gamma(x).norm());
    nu = domain.bounded() ? check_field(f, domain).min_gamma_dot_n : 1.0;
  }
  f.g_zero = g_zero;
  const auto declared = [&](const std::string& k, double def) {
    const auto v = r.number_or_auto(k);
    if (!v) r.resolve(k, def);
    return v.value_or(def);
  };
  f.nu = declared("field.nu", nu);
  f.gamma_bound = declared("field.gamma_bound", bound);
  f.lipschitz_gamma = r.number("field.L", f.lipschitz_gamma);
  f.lipschitz_g = r.number("field.L_g", f.lipschitz_g);
  f.growth_c = r.number("field.c_tilde", f.growth_c);
  f.g_compact = r.boolean("field.g_compact", g_zero);
  return f;
}

std::optional<LevyModel> read_levy(Reader& r, int dim) {
  const std::string m = r.choice("levy.measure", "none", {"none", "fractional", "tempered", "compound"});
  if (m == "none") return std::nullopt;
  LevyModel lm;
  lm.dimension = dim;
  bool auto_c = false;
  const auto c_alpha = [&] {
    const auto v = r.number_or_auto("levy.c_alpha");
    auto_c = !v;
    return v.value_or(0.0);
  };
  if (m == "fractional") {
    lm.measure = FractionalLaplacian{r.number("levy.alpha", 1.0), c_alpha()};
  } else if (m == "tempered") {
    const double alpha = r.number("levy.alpha", 1.0);
    lm.measure = TemperedStable{alpha, r.number("levy.rate", 1.0), c_alpha()};
  } else {
    CompoundPoisson cp;
    cp.density = r.parse_expr("levy.density", r.required("levy.density"), dim).as_field();
    cp.support_radius = r.number("levy.support_radius", 1.0);
    cp.breakpoints = r.numbers("levy.breakpoints", "[]");
    lm.measure = cp;
  }
  if (auto_c) r.resolve("levy.c_alpha", lm.c_alpha());
  lm.trunc_radius = r.number("levy.trunc_radius", 50.0);
  lm.radial_nodes = static_cast<int>(r.integer("levy.radial_nodes", 16));
  lm.angular_nodes = static_cast<int>(r.integer("levy.angular_nodes", 32));
  lm.fold_tail = r.boolean("levy.fold_tail", false);
  lm.delta_safety = r.number("levy.delta_safety", 64.0);
  const std::string jump = r.choice("levy.jump", "identity", {"identity", "affine"});
  if (jump == "affine") {
    AffineStateJump a;
    a.sigma = r.matrix_field("levy.sigma", r.required("levy.sigma"), dim);
    a.bound = r.number("levy.jump_bound", 1.0);
    lm.jump_map = a;
    lm.jump_bound = a.bound;
  }
  try {
    LevyModel check = lm;
    check.delta = 0.5;
    build_quadrature(check, dim, 0.5);
  } catch (const Error& e) {
    r.fail("levy", e.what());
  }
  return lm;
}

LinearRecord read_record(Reader& r, const std::string& prefix, int dim) {
  LinearRecord rec;
  rec.a = r.number(prefix + "a", 0.0);
  const std::string A = r.text(prefix + "A", "0");
  const std::string b = r.text(prefix + "b", "0");
  const std::string lam = r.text(prefix + "lambda", "1");
  const std::string f = r.text(prefix + "f", "0");
  if (trim(A) != "0") rec.A = r.matrix_field(prefix + "A", A, dim);
  if (trim(b) != "0") rec.b = r.vector_field(prefix + "b", b, dim);
  rec.lambda = r.parse_expr(prefix + "lambda", lam, dim).as_field();
  rec.f = r.parse_expr(prefix + "f", f, dim).as_field();
  rec.description = "a=" + shortest(rec.a) + "; A=" + A + "; b=" + b + "; lambda=" + lam + "; f=" + f;
  return rec;
}

Nonlinearity read_nonlinearity(Reader& r, const Domain& domain, double margin) {
  const int dim = domain.dimension();
  const std::string type = r.choice("F.type", "linear", {"linear", "bellman"});
  std::vector<LinearRecord> recs;
  if (type == "linear") {
    recs.push_back(read_record(r, "F.", dim));
  } else {
    const long k = r.integer("F.controls", 2);
    if (k < 1) r.fail("F.controls", "need at least one control");
    for (long i = 1; i <= k; ++i) recs.push_back(read_record(r, "F." + std::to_string(i) + ".", dim));
  }
  const auto declared = r.number_or_auto("F.lambda0");
  double lambda0 = std::numeric_limits<double>::infinity();
  if (declared) {
    lambda0 = *declared;
  } else {
    const auto [lo, hi] = sample_box(domain, margin);
    for (const Point& x : lattice(lo, hi, dim == 3 ? 17 : 65)) {
      for (const auto& rec : recs) lambda0 = std::min(lambda0, rec.lambda(x));
    }
    r.resolve("F.lambda0", lambda0);
  }
  if (!(lambda0 > 0)) r.fail("F.lambda0", "lambda0 must be > 0 (got " + shortest(lambda0) + ")");
  return Nonlinearity::bellman(std::move(recs), lambda0);
}

// Median far-jump length; the default margin covers twice that.
double median_jump(const LevyModel& lm, double delta) {
  if (const auto* cp = std::get_if<CompoundPoisson>(&lm.measure)) return 0.5 * cp->support_radius;
  const double alpha = std::holds_alternative<FractionalLaplacian>(lm.measure)
                           ? std::get<FractionalLaplacian>(lm.measure).alpha
                           : std::get<TemperedStable>(lm.measure).alpha;
  const double a = std::pow(delta, -alpha), b = std::pow(lm.trunc_radius, -alpha);
  return std::pow(a - 0.5 * (a - b), -1.0 / alpha);
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& source) {
  RunConfig cfg;
  cfg.source = source;
  std::istringstream is{std::string(text)};
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, where + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::ConfigError, where + ": empty key");
    if (!section.empty()) key = section + "." + key;
    if (cfg.raw.count(key)) throw Error(ErrorCode::ConfigError, where + ": " + key + ": duplicate key");
    cfg.raw[key] = trim(line.substr(eq + 1));
  }

  Reader r(cfg.raw, source);
  try {
    cfg.domain = read_domain(r);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    r.fail("domain", e.what());
  }
  const int dim = cfg.domain.dimension();

  cfg.levy = read_levy(r, dim);
  cfg.grid.h = r.number("grid.h", 0.05);
  if (!(cfg.grid.h > 0)) r.fail("grid.h", "must be > 0");
  const auto delta = r.number_or_auto("levy.delta");
  double eff_delta = 0.0;
  if (cfg.levy) {
    eff_delta = delta.value_or(std::max(cfg.grid.h, 0.1 * std::sqrt(cfg.grid.h)));
    if (delta) cfg.levy->delta = *delta;
    else r.resolve("levy.delta", eff_delta);
    if (eff_delta > cfg.levy->delta_safety * cfg.grid.h) {
      r.fail("levy.delta", "delta = " + shortest(eff_delta) + " exceeds delta_safety * h = " +
                               shortest(cfg.levy->delta_safety * cfg.grid.h));
    }
  }
  const auto margin = r.number_or_auto("grid.margin");
  cfg.grid.margin = margin.value_or(cfg.levy ? std::max(1.0, 2.0 * median_jump(*cfg.levy, eff_delta)) : 1.0);
  if (!margin) r.resolve("grid.margin", cfg.grid.margin);
  cfg.grid.alignment = r.choice("grid.alignment", "cell", {"cell", "vertex"}) == "cell"
                           ? Alignment::CellCentered
                           : Alignment::Vertex;
  if (r.has("grid.lo") || r.has("grid.hi")) {
    cfg.grid.lo = r.point("grid.lo", dim);
    cfg.grid.hi = r.point("grid.hi", dim);
  }
  if (cfg.levy && !cfg.levy->fold_tail && cfg.grid.margin < cfg.levy->trunc_radius) {
    cfg.warnings.push_back("grid.margin " + shortest(cfg.grid.margin) + " < levy.trunc_radius " +
                           shortest(cfg.levy->trunc_radius) +
                           ": landings beyond the box use the exterior closure");
  }

  cfg.field = read_field(r, cfg.domain, cfg.grid.margin);
  {
    const std::string shape = r.text("domain.shape", "interval");
    const bool corners = (shape == "box" && dim > 1) || shape == "polygon";
    if (corners && !(cfg.field.is_normal && cfg.field.g_zero)) {
      r.fail("field.gamma", "a domain with corners admits only gamma = normal and g = 0");
    }
  }
  cfg.nl = read_nonlinearity(r, cfg.domain, cfg.grid.margin);

  SolverConfig& s = cfg.solver;
  s.bc_mode = r.choice("solver.bc_mode", "penalized", {"penalized", "direct"}) == "penalized"
                  ? BcMode::Penalized
                  : BcMode::DirectExtension;
  s.kappa_schedule = r.numbers("solver.kappa_schedule", format_list(default_kappa_schedule()));
  if (s.kappa_schedule.empty()) r.fail("solver.kappa_schedule", "empty schedule");
  for (std::size_t k = 0; k < s.kappa_schedule.size(); ++k) {
    if (!(s.kappa_schedule[k] > 0) || (k > 0 && !(s.kappa_schedule[k] < s.kappa_schedule[k - 1]))) {
      r.fail("solver.kappa_schedule", "must be positive and strictly decreasing");
    }
  }
  s.tol_residual = r.number("solver.tol_residual", 1e-8);
  s.max_iters = static_cast<int>(r.integer("solver.max_iters", 200000));
  s.iteration = r.choice("solver.iteration", "policy", {"policy", "explicit"}) == "policy"
                    ? IterationKind::Policy
                    : IterationKind::Explicit;
  s.rho = r.number_or_auto("solver.rho").value_or(0.0);
  s.tol_kappa = r.number_or_auto("solver.tol_kappa").value_or(0.0);
  if (s.tol_kappa <= 0) r.resolve("solver.tol_kappa", 10 * s.tol_residual);
  s.flatten_radius = r.number_or_auto("solver.flatten_radius").value_or(-1.0);
  s.check_monotonicity = r.boolean("solver.check_monotonicity", true);
  s.threads = static_cast<int>(r.integer("solver.threads", 1));
  s.flow.distance_ratio = r.number("solver.flow_distance_ratio", s.flow.distance_ratio);
  s.flow.start_fraction = r.number("solver.flow_start_fraction", s.flow.start_fraction);

  JumpProcessConfig& mc = cfg.mc;
  mc.time_step = r.number("mc.time_step", mc.time_step);
  mc.max_step = r.number("mc.max_step", mc.max_step);
  if (const auto T = r.number_or_auto("mc.horizon")) mc.horizon = *T;
  mc.target_accuracy = r.number("mc.target_accuracy", mc.target_accuracy);
  mc.n_paths = r.integer("mc.n_paths", mc.n_paths);
  mc.rng_seed = static_cast<std::uint64_t>(r.integer("mc.seed", 1));
  mc.boundary_bridge = r.boolean("mc.bridge", true);
  mc.delta = r.number_or_auto("mc.delta").value_or(0.0);
  if (mc.delta <= 0 && cfg.levy) r.resolve("mc.delta", eff_delta);
  mc.delta = mc.delta > 0 ? mc.delta : eff_delta;
  mc.flow = s.flow;
  mc.threads = s.threads;
  cfg.mc_points = r.points("mc.points", dim);

  FlowOptions& fo = cfg.flow;
  fo.step = r.number_or_auto("flow.step").value_or(0.0);
  fo.event_tol = r.number_or_auto("flow.event_tol").value_or(0.0);
  fo.distance_ratio = r.number("flow.distance_ratio", 0.0);
  fo.safety = r.number("flow.safety", 4.0);
  fo.hermite_events = r.boolean("flow.hermite", false);
  if (const auto tm = r.number_or_auto("flow.tau_max")) fo.tau_max = *tm;
  cfg.flow_points = r.points("flow.points", dim);
  cfg.flow.record_path = r.boolean("flow.path", false);

  cfg.sweep_h = r.numbers("sweep.h", "[1/16, 1/32, 1/64]");
  if (r.has("sweep.exact")) cfg.exact = r.expression("sweep.exact", "", dim);

  for (const auto& t : split_list(r.text("validate.allow", "[]"))) cfg.allow.insert(t);

  cfg.output.directory = r.text("output.directory", ".");
  cfg.output.precision = static_cast<int>(r.integer("output.precision", 17));
  if (cfg.output.precision < 1 || cfg.output.precision > 17) r.fail("output.precision", "must be in 1..17");

  r.finish();
  cfg.effective = std::move(r.effective());
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

const ValidationItem* ValidationReport::first_violation(const std::set<std::string>& allow) const {
  for (const auto& it : items) {
    if (!it.pass && !allow.count(it.tag)) return &it;
  }
  return nullptr;
}

ValidationReport validate_config(const RunConfig& cfg) {
  ValidationReport rep;
  const Domain& d = cfg.domain;
  const int dim = d.dimension();
  const auto [lo, hi] = sample_box(d, cfg.grid.margin);
  const std::vector<Point> pts = lattice(lo, hi, dim == 3 ? 7 : dim == 2 ? 15 : 64);

  const AssumptionReport ar = verify_assumptions(cfg.nl, pts, 200);
  const std::map<std::string, std::string> tags = {
      {"A2", "A2"}, {"ellipticity_X", "A3"}, {"ellipticity_l", "A4"}, {"A4", "A4"}};
  for (const auto& c : ar.checks) rep.items.push_back({tags.at(c.name), c.pass, c.detail});

  double mf = 0.0;
  for (const Point& x : pts) {
    if (d.dist_to_closure(x) > 0) continue;
    mf = std::max(mf, std::abs(cfg.nl.evaluate(x, 0.0, Point::Zero(dim), SquareMatrix::Zero(dim, dim), 0.0)));
  }
  rep.items.push_back({"A5", std::isfinite(mf), "M_F = sup |F(x,0,0,0,0)| ~ " + shortest(mf)});

  if (d.bounded()) {
    const FieldCheck fc = check_field(cfg.field, d);
    std::string msg = "min gamma.n = " + shortest(fc.min_gamma_dot_n) + ", declared nu = " +
                      shortest(cfg.field.nu) + "; max |gamma| = " + shortest(fc.max_gamma_norm);
    for (const auto& m : fc.messages) msg += "; " + m;
    rep.items.push_back({"BC1", fc.nu_ok && fc.bound_ok && fc.min_gamma_dot_n > 0, msg});
  }

  // Flows from the box corners must reach the domain.
  {
    bool ok = true;
    std::string msg = "flows from the box corners reach the domain";
    const int corners = 1 << dim;
    for (int c = 0; c < corners && ok; ++c) {
      Point y(dim);
      for (int a = 0; a < dim; ++a) y(a) = ((c >> a) & 1) ? hi(a) : lo(a);
      if (d.dist_to_closure(y) == 0.0) continue;
      try {
        const FlowResult fr = integrate_flow(cfg.field, d, y, cfg.flow);
        if (!cfg.field.g_compact && cfg.field.growth_c > 0 &&
            fr.tau > cfg.field.growth_c * (1.0 + y.norm())) {
          ok = false;
          msg = "tau = " + shortest(fr.tau) + " exceeds c_tilde (1 + |y|) at " + format_point(y);
        }
      } catch (const Error& e) {
        ok = false;
        msg = std::string("flow from ") + format_point(y) + ": " + e.what();
      }
    }
    rep.items.push_back({"BC2", ok, msg});
  }

  if (cfg.levy) {
    const IntegrabilityReport ir = check_exterior_integrability(*cfg.levy, cfg.field, d);
    rep.items.push_back({"BC3", ir.ok, ir.message});
  }
  return rep;
}

Problem make_problem(const RunConfig& cfg, std::optional<double> h) {
  GridOptions g = cfg.grid;
  if (h) g.h = *h;
  return Problem::make(cfg.domain, g, cfg.nl, cfg.levy, cfg.field, cfg.solver);
}

namespace {

class Csv {
 public:
  Csv(const std::filesystem::path& path, const RunConfig& cfg, const std::string& subcommand,
      const std::vector<std::string>& columns, const std::map<std::string, std::string>& extra = {})
      : out_(path), precision_(cfg.output.precision) {
    if (!out_) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
    out_ << "# nlobc " << subcommand << "\n";
    for (const auto& [k, v] : cfg.effective) out_ << "# " << k << " = " << v << "\n";
    for (const auto& [k, v] : extra) out_ << "# " << k << " = " << v << "\n";
    for (const auto& w : cfg.warnings) out_ << "# warning: " << w << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
  }

  Csv& num(double v) {
    sep();
    if (std::isnan(v)) out_ << "nan";
    else if (std::isinf(v)) out_ << (v > 0 ? "inf" : "-inf");
    else {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.*g", precision_, v);
      out_ << buf;
    }
    return *this;
  }
  Csv& str(const std::string& s) {
    sep();
    out_ << s;
    return *this;
  }
  Csv& point(const Point& p) {
    for (int a = 0; a < p.size(); ++a) num(p(a));
    return *this;
  }
  void end() {
    out_ << "\n";
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ",";
    first_ = false;
  }
  std::ofstream out_;
  int precision_;
  bool first_ = true;
};

std::vector<std::string> coord_columns(int dim, const std::string& prefix) {
  std::vector<std::string> c;
  for (int a = 1; a <= dim; ++a) c.push_back(prefix + std::to_string(a));
  return c;
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

double closure_sup(const Problem& p, const Eigen::VectorXd& u, const std::function<double(int)>& f) {
  double m = 0.0;
  for (int i = 0; i < p.grid->size(); ++i) {
    if (p.in_closure(i)) m = std::max(m, std::abs(f(i)));
  }
  (void)u;
  return m;
}

int run_validate(const RunConfig& cfg, std::ostream& out) {
  const ValidationReport rep = validate_config(cfg);
  for (const auto& it : rep.items) {
    out << (it.pass ? "[ok]   " : cfg.allow.count(it.tag) ? "[warn] " : "[FAIL] ") << it.tag << ": "
        << it.detail << "\n";
  }
  for (const auto& w : cfg.warnings) out << "[note] " << w << "\n";
  if (const auto* v = rep.first_violation(cfg.allow)) {
    out << "ValidationError: " << v->tag << " violated\n";
    return kExitValidation;
  }
  return kExitOk;
}

void require_valid(const RunConfig& cfg, std::ostream& err) {
  const ValidationReport rep = validate_config(cfg);
  for (const auto& it : rep.items) {
    if (!it.pass && cfg.allow.count(it.tag)) err << "warning: " << it.tag << " violated (allowed): " << it.detail << "\n";
  }
  if (const auto* v = rep.first_violation(cfg.allow)) {
    throw Error(ErrorCode::ValidationError, v->tag + ": " + v->detail);
  }
}

std::map<std::string, std::string> solution_info(const Problem& p, const Solution& s) {
  std::map<std::string, std::string> m;
  for (const auto& [k, v] : s.metadata) m["result." + k] = v;
  m["result.converged"] = s.converged ? "true" : "false";
  m["result.iterations"] = std::to_string(s.iterations);
  m["result.nodes"] = std::to_string(p.grid->size());
  if (p.table) {
    m["result.delta"] = shortest(p.table->delta());
    m["result.far_mass"] = shortest(p.table->far_mass());
    m["result.tail_mass"] = shortest(p.table->tail_mass());
  }
  m["result.far_field"] = p.config.bc_mode == BcMode::Penalized
                              ? "constant extrapolation of the nearest box value"
                              : "transport extension closure";
  return m;
}

int run_solve(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& out) {
  const Problem p = make_problem(cfg);
  const Solution s = solve(p);
  const int dim = p.grid->dimension();
  const auto info = solution_info(p, s);
  {
    Csv csv(dir / "solution.csv", cfg, "solve", cat(coord_columns(dim, "x"), {"class", "value"}), info);
    for (int i = 0; i < p.grid->size(); ++i) {
      csv.point(p.grid->node(i)).str(to_string(p.grid->node_class(i))).num(s.values[i]).end();
    }
  }
  {
    Csv csv(dir / "history.csv", cfg, "solve", {"iter", "residual", "kappa"}, info);
    for (std::size_t k = 0; k < s.residual_history.size(); ++k) {
      csv.num(static_cast<double>(k)).num(s.residual_history[k]).num(s.history_kappa[k]).end();
    }
  }
  if (!s.kappa_trace.empty()) {
    Csv csv(dir / "kappa_trace.csv", cfg, "solve", {"kappa", "delta", "iterations", "residual"}, info);
    for (const auto& k : s.kappa_trace) {
      csv.num(k.kappa).num(k.delta).num(k.iterations).num(k.residual).end();
    }
  }
  double umax = 0.0;
  for (int i = 0; i < p.grid->size(); ++i) {
    if (p.in_closure(i)) umax = std::max(umax, std::abs(s.values[i]));
  }
  out << "solve: " << p.grid->size() << " nodes, h = " << p.grid->h() << ", mode "
      << to_string(p.config.bc_mode) << "\n"
      << "  converged " << (s.converged ? "yes" : "no") << " after " << s.iterations
      << " iterations, final residual "
      << (s.residual_history.empty() ? 0.0 : s.residual_history.back()) << "\n"
      << "  sup over closure |u| = " << umax;
  if (s.bound_checked) out << " (bound M_F/lambda0 = " << s.bound << (s.bound_ok ? ", ok" : ", VIOLATED") << ")";
  out << "\n";
  for (const auto& k : s.kappa_trace) out << "  kappa " << k.kappa << ": delta " << k.delta << "\n";
  for (const auto& w : cfg.warnings) out << "  note: " << w << "\n";
  out << "  wrote " << (dir / "solution.csv").string() << "\n";
  return s.converged ? kExitOk : kExitNoConvergence;
}

int run_flow(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& out) {
  const int dim = cfg.domain.dimension();
  Csv csv(dir / "flow.csv", cfg, "flow",
          cat(cat(coord_columns(dim, "y"), {"dist", "tau"}),
              cat(coord_columns(dim, "end"), {"g_integral", "status"})));
  std::optional<Csv> path;
  if (cfg.flow.record_path) {
    path.emplace(dir / "flow_path.csv", cfg, "flow", cat({"point", "t"}, coord_columns(dim, "x")));
  }
  int failures = 0;
  for (std::size_t k = 0; k < cfg.flow_points.size(); ++k) {
    const Point& y = cfg.flow_points[k];
    csv.point(y).num(cfg.domain.dist_to_closure(y));
    try {
      const FlowResult r = integrate_flow(cfg.field, cfg.domain, y, cfg.flow);
      csv.num(r.tau).point(r.endpoint).num(r.g_integral).str("ok").end();
      if (path) {
        for (const auto& ps : r.path) path->num(static_cast<double>(k)).num(ps.t).point(ps.x).end();
      }
      out << "flow from " << format_point(y) << ": tau = " << r.tau << ", endpoint "
          << format_point(r.endpoint) << "\n";
    } catch (const Error& e) {
      ++failures;
      csv.num(std::nan("")).point(Point::Constant(dim, std::nan(""))).num(std::nan(""))
          .str(std::string(to_string(e.code())))
          .end();
      out << "flow from " << format_point(y) << ": " << e.what() << "\n";
    }
  }
  return failures ? kExitValidation : kExitOk;
}

int run_sweep(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& out) {
  if (cfg.sweep_h.size() < 2) throw Error(ErrorCode::ConfigError, "sweep.h: need at least two spacings");
  std::vector<Problem> probs;
  std::vector<Solution> sols;
  for (double h : cfg.sweep_h) {
    probs.push_back(make_problem(cfg, h));
    sols.push_back(solve(probs.back()));
    if (!sols.back().converged) return kExitNoConvergence;
  }
  const std::size_t n = cfg.sweep_h.size();
  std::vector<double> err(n, std::nan(""));
  if (cfg.exact) {
    for (std::size_t k = 0; k < n; ++k) {
      const Problem& p = probs[k];
      err[k] = closure_sup(p, sols[k].values,
                           [&](int i) { return sols[k].values[i] - (*cfg.exact)(p.grid->node(i)); });
    }
  } else {
    // Successive differences on the coarser grid's closure nodes.
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const Problem& p = probs[k];
      err[k] = closure_sup(p, sols[k].values, [&](int i) {
        return sols[k].values[i] - probs[k + 1].grid->interpolate_value(sols[k + 1].values, p.grid->node(i));
      });
    }
  }
  Csv csv(dir / "orders.csv", cfg, "sweep", {"h", "error", "order"},
          {{"sweep.error", cfg.exact ? "sup over closure nodes of |u_h - exact|"
                                     : "sup over closure nodes of |u_h - u_next|"}});
  double min_order = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    double order = std::nan("");
    if (k > 0 && std::isfinite(err[k]) && std::isfinite(err[k - 1])) {
      order = std::log(err[k - 1] / err[k]) / std::log(cfg.sweep_h[k - 1] / cfg.sweep_h[k]);
      min_order = std::min(min_order, order);
    }
    csv.num(cfg.sweep_h[k]).num(err[k]).num(order).end();
    out << "h = " << cfg.sweep_h[k] << ": error " << err[k];
    if (!std::isnan(order)) out << ", observed order " << order;
    out << "\n";
  }
  out << "minimum observed order " << min_order << "\n";
  return kExitOk;
}

int run_mc(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream& out) {
  const Problem p = make_problem(cfg);
  const Solution s = solve(p);
  if (!s.converged) return kExitNoConvergence;
  JumpProcessConfig mc = cfg.mc;
  if (p.table) mc.delta = p.table->delta();
  const int dim = p.grid->dimension();
  Csv csv(dir / "mc.csv", cfg, "mc-validate",
          cat(coord_columns(dim, "x"), {"estimate", "std_error", "solver_value", "z_score"}),
          solution_info(p, s));
  for (const Point& x : cfg.mc_points) {
    const McEstimate e = simulate_value(cfg.nl, cfg.levy, cfg.field, cfg.domain, x, mc);
    const double v = p.grid->interpolate_value(s.values, x);
    const double diff = e.estimate - v;
    const double z = e.std_error > 0 ? diff / e.std_error : (diff == 0 ? 0.0 : std::copysign(INFINITY, diff));
    csv.point(x).num(e.estimate).num(e.std_error).num(v).num(z).end();
    out << "x = " << format_point(x) << ": estimate " << e.estimate << " +- " << e.std_error
        << ", solver " << v << ", z = " << z << "\n";
  }
  return kExitOk;
}

}  // namespace

int run(const std::string& subcommand, RunConfig cfg, const RunOptions& opts, std::ostream& out,
        std::ostream& err) {
  try {
    if (opts.seed) {
      cfg.mc.rng_seed = *opts.seed;
      cfg.effective["mc.seed"] = std::to_string(*opts.seed);
    }
    if (opts.threads) {
      cfg.solver.threads = cfg.mc.threads = std::max(1, *opts.threads);
      cfg.effective["solver.threads"] = std::to_string(cfg.solver.threads);
    }
    if (opts.out_dir) {
      cfg.output.directory = *opts.out_dir;
      cfg.effective["output.directory"] = *opts.out_dir;
    }
    const std::filesystem::path dir = cfg.output.directory;
    std::filesystem::create_directories(dir);
    out.precision(10);
    if (subcommand == "validate") return run_validate(cfg, out);
    if (subcommand == "flow") return run_flow(cfg, dir, out);
    if (subcommand != "solve" && subcommand != "sweep" && subcommand != "mc-validate") {
      err << "unknown subcommand '" << subcommand << "'\n";
      return kExitConfig;
    }
    require_valid(cfg, err);
    if (subcommand == "solve") return run_solve(cfg, dir, out);
    if (subcommand == "sweep") return run_sweep(cfg, dir, out);
    return run_mc(cfg, dir, out);
  } catch (const Error& e) {
    err << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::ConfigError:
      case ErrorCode::DeltaTooLarge: return kExitConfig;
      case ErrorCode::ValidationError:
      case ErrorCode::NonIntegrable:
      case ErrorCode::NoHit: return kExitValidation;
      case ErrorCode::NoConvergence:
      case ErrorCode::StiffPenalty: return kExitNoConvergence;
      default: return kExitFailure;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace nlobc
