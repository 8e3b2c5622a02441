#include "nlobc/config.hpp"
#include "nlobc/error.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace nlobc;

namespace {

Point to_point(const std::vector<double>& v) {
  if (v.empty() || v.size() > static_cast<std::size_t>(kMaxDim)) {
    throw Error(ErrorCode::InvalidArgument, "points need 1 to 3 coordinates");
  }
  Point p(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) p(static_cast<int>(i)) = v[i];
  return p;
}

std::vector<double> from_point(const Point& p) { return {p.data(), p.data() + p.size()}; }

py::dict solution_dict(const Problem& p, const Solution& s) {
  const Grid& g = *p.grid;
  Eigen::MatrixXd nodes(g.size(), g.dimension());
  std::vector<std::string> classes;
  classes.reserve(static_cast<std::size_t>(g.size()));
  for (int i = 0; i < g.size(); ++i) {
    nodes.row(i) = g.node(i).transpose();
    classes.emplace_back(to_string(g.node_class(i)));
  }
  py::list trace;
  for (const KappaStep& k : s.kappa_trace) {
    trace.append(py::dict(py::arg("kappa") = k.kappa, py::arg("delta") = k.delta,
                          py::arg("iterations") = k.iterations, py::arg("residual") = k.residual));
  }
  return py::dict(py::arg("nodes") = nodes, py::arg("classes") = classes, py::arg("values") = s.values,
                  py::arg("converged") = s.converged, py::arg("iterations") = s.iterations,
                  py::arg("residual_history") = s.residual_history, py::arg("kappa_trace") = trace,
                  py::arg("h") = g.h());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Solver for nonlocal elliptic equations with oblique boundary conditions";

  static py::exception<Error> exc(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      exc(e.what());
    }
  });

  py::class_<Domain>(m, "Domain")
      .def_static(
          "interval", [](double a, double b) { return Domain::interval(a, b); }, py::arg("a"), py::arg("b"))
      .def_static(
          "box", [](const std::vector<double>& lo, const std::vector<double>& hi) { return Domain::box(to_point(lo), to_point(hi)); },
          py::arg("lo"), py::arg("hi"))
      .def_static(
          "ball", [](const std::vector<double>& c, double r) { return Domain::ball(to_point(c), r); },
          py::arg("center"), py::arg("radius"))
      .def_static(
          "polygon",
          [](const std::vector<std::vector<double>>& vs) {
            std::vector<Point> pts;
            for (const auto& v : vs) pts.push_back(to_point(v));
            return Domain::polygon(pts);
          },
          py::arg("vertices"))
      .def_static(
          "half_space",
          [](const std::vector<double>& p, const std::vector<double>& n) { return Domain::half_space(to_point(p), to_point(n)); },
          py::arg("point"), py::arg("outward_normal"))
      .def_property_readonly("dimension", &Domain::dimension)
      .def_property_readonly("diameter", &Domain::diameter)
      .def_property_readonly("bounded", &Domain::bounded)
      .def_property_readonly("convex", &Domain::convex)
      .def("dist_to_closure", [](const Domain& d, const std::vector<double>& x) { return d.dist_to_closure(to_point(x)); })
      .def("signed_distance", [](const Domain& d, const std::vector<double>& x) { return d.signed_distance(to_point(x)); })
      .def("exact_signed_distance",
           [](const Domain& d, const std::vector<double>& x) { return d.exact_signed_distance(to_point(x)); })
      .def("truncated_distance",
           [](const Domain& d, const std::vector<double>& x) { return d.truncated_distance(to_point(x)); })
      .def("normal", [](const Domain& d, const std::vector<double>& x) { return from_point(d.normal(to_point(x))); })
      .def("closest_point",
           [](const Domain& d, const std::vector<double>& x) { return from_point(d.closest_point(to_point(x))); });

  py::class_<RunConfig>(m, "Config")
      .def_static(
          "parse", [](const std::string& text, const std::string& source) { return parse_config(text, source); },
          py::arg("text"), py::arg("source") = "<string>")
      .def_static("load", &load_config, py::arg("path"))
      .def_readonly("effective", &RunConfig::effective)
      .def_readonly("warnings", &RunConfig::warnings)
      .def_readonly("domain", &RunConfig::domain);

  m.def("fractional_constant", &fractional_constant, py::arg("dim"), py::arg("alpha"));

  m.def(
      "evaluate",
      [](const std::string& expr, const std::vector<double>& x) { return Expression::parse(expr)(to_point(x)); },
      py::arg("expression"), py::arg("x") = std::vector<double>{0.0});

  m.def(
      "validate",
      [](const RunConfig& cfg) {
        ValidationReport rep;
        {
          py::gil_scoped_release release;
          rep = validate_config(cfg);
        }
        py::list out;
        for (const ValidationItem& it : rep.items) {
          out.append(py::dict(py::arg("tag") = it.tag, py::arg("pass") = it.pass, py::arg("detail") = it.detail));
        }
        return out;
      },
      py::arg("config"));

  m.def(
      "solve",
      [](const RunConfig& cfg, std::optional<double> h) {
        std::optional<Problem> p;
        std::optional<Solution> s;
        {
          py::gil_scoped_release release;
          p = make_problem(cfg, h);
          s = nlobc::solve(*p);
        }
        return solution_dict(*p, *s);
      },
      py::arg("config"), py::arg("h") = py::none());

  m.def(
      "flow",
      [](const RunConfig& cfg, const std::vector<double>& y) {
        const FlowResult r = integrate_flow(cfg.field, cfg.domain, to_point(y), cfg.flow);
        return py::dict(py::arg("tau") = r.tau, py::arg("endpoint") = from_point(r.endpoint),
                        py::arg("g_integral") = r.g_integral, py::arg("converged") = r.converged);
      },
      py::arg("config"), py::arg("y"));

  m.def(
      "simulate_value",
      [](const RunConfig& cfg, const std::vector<double>& x, std::optional<long> n_paths,
         std::optional<std::uint64_t> seed) {
        JumpProcessConfig mc = cfg.mc;
        if (n_paths) mc.n_paths = *n_paths;
        if (seed) mc.rng_seed = *seed;
        McEstimate e;
        {
          py::gil_scoped_release release;
          e = nlobc::simulate_value(cfg.nl, cfg.levy, cfg.field, cfg.domain, to_point(x), mc);
        }
        return py::dict(py::arg("estimate") = e.estimate, py::arg("std_error") = e.std_error,
                        py::arg("n_paths") = e.n_paths, py::arg("horizon") = e.horizon);
      },
      py::arg("config"), py::arg("x"), py::arg("n_paths") = py::none(), py::arg("seed") = py::none());

  m.def(
      "run",
      [](const std::string& subcommand, const RunConfig& cfg, std::optional<std::string> out_dir,
         std::optional<std::uint64_t> seed, std::optional<int> threads) {
        RunOptions o{std::move(out_dir), seed, threads};
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = nlobc::run(subcommand, cfg, o, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("subcommand"), py::arg("config"), py::arg("out_dir") = py::none(), py::arg("seed") = py::none(),
      py::arg("threads") = py::none());
}
