#pragma once

#include "nlobc/expression.hpp"
#include "nlobc/flow.hpp"
#include "nlobc/geometry.hpp"
#include "nlobc/grid.hpp"
#include "nlobc/levy.hpp"
#include "nlobc/mc_oracle.hpp"
#include "nlobc/nonlinearity.hpp"
#include "nlobc/solver.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace nlobc {

struct OutputOptions {
  std::string directory = ".";
  int precision = 17;
};

/// A parsed run configuration: `section.key = value` lines (or `[section]`
/// headers followed by `key = value`), `#` comments. Numbers may be constant
/// expressions (`pi/64`); fields are expressions in x1..x3; vectors and
/// matrices use brackets: `[x1, -x2]`, `[[1, 0], [0, 1]]`.
struct RunConfig {
  std::string source;
  std::map<std::string, std::string> raw;
  /// Every setting in force, defaults included, as echoed in run metadata.
  std::map<std::string, std::string> effective;
  std::vector<std::string> warnings;

  Domain domain = Domain::interval(0, 1);
  ObliqueField field;
  std::optional<LevyModel> levy;
  Nonlinearity nl = Nonlinearity::linear({}, 1.0);
  GridOptions grid;
  SolverConfig solver;
  JumpProcessConfig mc;
  std::vector<Point> mc_points;
  FlowOptions flow;
  std::vector<Point> flow_points;
  std::vector<double> sweep_h;
  std::optional<Expression> exact;
  /// Assumption tags whose violation is reported but not fatal.
  std::set<std::string> allow;
  OutputOptions output;
};

/// Throws ConfigError naming the offending key.
RunConfig parse_config(std::string_view text, const std::string& source = "<string>");
RunConfig load_config(const std::string& path);

struct ValidationItem {
  /// Assumption tag: BC1, BC2, BC3, A2, A3, A4, A5, or "delta".
  std::string tag;
  bool pass = true;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  /// First failing item not covered by `allow`, if any.
  const ValidationItem* first_violation(const std::set<std::string>& allow) const;
};

ValidationReport validate_config(const RunConfig& cfg);

/// Problem for the configured grid, with the grid spacing optionally replaced.
Problem make_problem(const RunConfig& cfg, std::optional<double> h = std::nullopt);

struct RunOptions {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitNoConvergence = 4;

/// Runs solve, flow, validate, sweep or mc-validate. Artifacts go to the
/// output directory; the summary goes to `out`, diagnostics to `err`.
int run(const std::string& subcommand, RunConfig cfg, const RunOptions& opts, std::ostream& out,
        std::ostream& err);

}  // namespace nlobc
