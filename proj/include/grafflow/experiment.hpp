#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "grafflow/analytic_library.hpp"
#include "grafflow/fd_discretization.hpp"
#include "grafflow/gfdn_flow.hpp"
#include "grafflow/graph_model.hpp"

namespace grafflow {

enum class ExperimentKind { SingleRun, ConvergenceStudy, QualitativeChecks };

const char* to_string(ExperimentKind kind);

/// Exactly one of the fields is used, in this order of precedence.
struct MeshSpec {
  std::map<std::string, std::size_t> per_edge;
  std::optional<std::size_t> points_per_edge;
  std::optional<std::size_t> total_points;
  std::optional<double> dx;
};

Mesh build_mesh(const MetricGraph& graph, const MeshSpec& spec);

struct ReferenceSpec {
  enum class Kind { None, KirchhoffSoliton, Delta, DeltaPrime, FieldFile };
  Kind kind = Kind::None;
  double mass = 0.0;
  double omega = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  // delta_prime only: "ground", "symmetric" or "asymmetric".
  std::string branch = "ground";
  std::filesystem::path file;
};

struct QualitativeSpec {
  std::string junction;
  std::vector<std::string> main_line;
  std::vector<std::string> localized;
  double exclusion_radius = 5.0;
  double monotone_from = 10.0;
};

struct ExperimentSpec {
  std::string name;
  ExperimentKind kind = ExperimentKind::SingleRun;
  MetricGraph graph;
  MeshSpec mesh;
  FlowConfig flow;
  // Initial nodal values come from this field file when set.
  std::optional<std::filesystem::path> initial_file;
  ReferenceSpec reference;
  std::vector<double> dx_ladder;
  std::size_t threads = 0;
  QualitativeSpec qualitative;
  std::filesystem::path output_dir;

  /// Cross-field checks; InvalidSpec on failure.
  void validate() const;
};

/// Environment variable naming the root for relative output directories.
inline constexpr const char* kOutputRootEnv = "GRAFFLOW_OUTPUT_ROOT";

/// Parses a spec document. Relative file names resolve against base_dir;
/// with paper_scale the document's "paper_scale" object is merge-patched
/// over it first.
ExperimentSpec parse_spec(const nlohmann::json& doc, const std::filesystem::path& base_dir, bool paper_scale = false);
ExperimentSpec load_spec(const std::filesystem::path& path, bool paper_scale = false);

struct Overrides {
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::size_t> max_iterations;
  std::optional<double> dt;
  std::optional<double> tolerance;
};

void apply_overrides(ExperimentSpec& spec, const Overrides& overrides);

/// Reference values on the mesh plus closed-form numbers when available.
struct Reference {
  Field values;
  std::optional<AnalyticState> state;
};

struct ErrorReport {
  double linf = 0.0;
  double l2 = 0.0;
  // Which copy of the reference matched: sign and, for delta', mirror.
  double sign = 1.0;
  bool mirrored = false;
  Field pointwise;
};

/// Smallest-error comparison over the symmetries of the problem: the global
/// phase (+-1) and, for delta' references, the edge-swap mirror.
ErrorReport compare_to_reference(const Discretization& disc, const Field& numeric, const ReferenceSpec& spec,
                                 const Reference& reference);

Reference build_reference(const ReferenceSpec& spec, const Discretization& disc);

struct RunReport {
  std::string name;
  Discretization disc;
  FlowResult flow;
  double final_energy = 0.0;
  double final_mass = 0.0;
  double chemical_potential = 0.0;
  double stationarity = 0.0;
  std::optional<Reference> reference;
  std::optional<ErrorReport> error;
  double seconds = 0.0;
};

RunReport run_single(const ExperimentSpec& spec);

struct ConvergenceRow {
  double dx = 0.0;
  std::size_t total_nodes = 0;
  std::size_t iterations = 0;
  std::string termination;
  double linf = 0.0;
  double l2 = 0.0;
  // Order between this row and the previous one; absent on the first row.
  std::optional<double> local_order;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  double slope = 0.0;
};

/// Least-squares slope of log(error) against log(dx).
double fitted_slope(const std::vector<double>& dx, const std::vector<double>& error);

ConvergenceTable run_convergence(const ExperimentSpec& spec);

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct QualitativeReport {
  RunReport run;
  std::vector<CheckOutcome> checks;
  bool passed() const;
};

/// Localization of the global maximum away from the main line and monotone
/// decay along the main line.
std::vector<CheckOutcome> qualitative_checks(const Discretization& disc, const Field& field, const QualitativeSpec& spec);

QualitativeReport run_qualitative(const ExperimentSpec& spec);

// Output files. Coordinates are arclength from the edge start, or signed
// distance from the centre on a two-edge star (first edge negative).
void write_field_csv(std::ostream& os, const Discretization& disc, const Field& field);
void write_history_csv(std::ostream& os, const std::vector<HistoryRecord>& history);
void write_error_csv(std::ostream& os, const Discretization& disc, const ErrorReport& error);
void write_convergence_csv(std::ostream& os, const ConvergenceTable& table);
nlohmann::json summary_json(const ExperimentSpec& spec, const RunReport& report);

/// Reads a field written by write_field_csv back onto the same mesh.
Field read_field_csv(std::istream& is, const Discretization& disc);
Field load_field_csv(const std::filesystem::path& path, const Discretization& disc);

/// Runs the experiment and writes its artifacts. Files are staged and moved
/// into place only after everything succeeded. Returns the process exit
/// status: 0, or 3 when qualitative checks fail.
int run_experiment(const ExperimentSpec& spec);

}  // namespace grafflow
