#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "paroc/kkt.hpp"
#include "paroc/model.hpp"

namespace paroc {

/// Artifact version stamped into every serialized report.
inline constexpr const char* kVersion = "0.1.0";

/// Everything a batch run needs: the problem data plus mesh, seed, solver
/// knobs and output location. Problem files carry only the problem; run
/// files reference a problem file and add the rest.
struct RunConfig {
  ProblemSpec spec;
  /// Canonical rendering of the problem block, embedded in outputs so a
  /// report is interpretable without the original file.
  std::string problem_text;
  int nx = 8;
  int nt = 8;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  NcpConfig ncp;
  /// Empty means the default plan radii.
  std::vector<double> sweep_radii;
  int threads = 0;
};

/// Parses a `schema = 1`, `kind = problem` key-value text. Unknown keys,
/// duplicates, missing required keys and malformed values are ConfigErrors
/// naming the offending key. `base_dir` resolves a grid-valued parameter.w
/// path; pass the config file's directory.
ProblemSpec parse_problem_text(const std::string& text,
                               const std::string& base_dir = ".");

/// Canonical problem rendering: fixed key order, shortest round-trip floats,
/// canonical expression text. parse . render is the identity on rendered
/// text.
std::string problem_to_text(const ProblemSpec& spec);

/// Loads a problem (`kind = problem`) or run (`kind = run`) file; a run file
/// names its problem file relative to its own directory. The returned
/// problem_text is always the canonical rendering.
RunConfig load_config(const std::string& path);

}  // namespace paroc
