#include "grafflow/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "grafflow/error.hpp"
#include "grafflow/graph_io.hpp"

namespace grafflow {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::SingleRun: return "single_run";
    case ExperimentKind::ConvergenceStudy: return "convergence_study";
    case ExperimentKind::QualitativeChecks: return "qualitative_checks";
  }
  return "unknown";
}

Mesh build_mesh(const MetricGraph& graph, const MeshSpec& spec) {
  if (!spec.per_edge.empty()) {
    std::vector<std::size_t> counts(graph.edges().size(), 0);
    for (const auto& [id, n] : spec.per_edge) {
      const auto e = graph.find_edge(id);
      if (!e) throw Error(ErrorKind::InvalidSpec, "mesh names unknown edge '" + id + "'");
      counts[*e] = n;
    }
    for (std::size_t e = 0; e < counts.size(); ++e) {
      if (counts[e] == 0) throw Error(ErrorKind::InvalidSpec, "mesh has no node count for edge '" + graph.edge(e).id + "'");
    }
    return build_mesh(graph, std::span<const std::size_t>(counts));
  }
  if (spec.points_per_edge) {
    std::vector<std::size_t> counts(graph.edges().size(), *spec.points_per_edge);
    return build_mesh(graph, std::span<const std::size_t>(counts));
  }
  if (spec.total_points) return build_mesh_with_total(graph, *spec.total_points);
  if (spec.dx) return build_mesh(graph, *spec.dx);
  throw Error(ErrorKind::InvalidSpec, "mesh needs one of per_edge, points_per_edge, total_points, dx");
}

void ExperimentSpec::validate() const {
  try {
    flow.validate();
  } catch (const Error& err) {
    throw Error(ErrorKind::InvalidSpec, err.what());
  }
  if (reference.kind == ReferenceSpec::Kind::FieldFile && !fs::exists(reference.file)) {
    throw Error(ErrorKind::InvalidSpec, "reference field file " + reference.file.string() + " does not exist");
  }
  if (initial_file && !fs::exists(*initial_file)) {
    throw Error(ErrorKind::InvalidSpec, "initial field file " + initial_file->string() + " does not exist");
  }
  if (kind == ExperimentKind::ConvergenceStudy) {
    if (dx_ladder.size() < 3) throw Error(ErrorKind::InvalidSpec, "convergence study needs at least 3 dx values");
    for (std::size_t i = 0; i < dx_ladder.size(); ++i) {
      if (!(dx_ladder[i] > 0.0)) throw Error(ErrorKind::InvalidSpec, "dx values must be positive");
      if (i > 0 && !(dx_ladder[i] < dx_ladder[i - 1])) {
        throw Error(ErrorKind::InvalidSpec, "dx values must be strictly decreasing");
      }
    }
    if (reference.kind == ReferenceSpec::Kind::None || reference.kind == ReferenceSpec::Kind::FieldFile) {
      throw Error(ErrorKind::InvalidSpec, "convergence study needs an analytic reference");
    }
  }
  if (kind == ExperimentKind::QualitativeChecks) {
    const auto& q = qualitative;
    if (!graph.find_vertex(q.junction)) throw Error(ErrorKind::InvalidSpec, "unknown junction '" + q.junction + "'");
    if (q.main_line.empty()) throw Error(ErrorKind::InvalidSpec, "qualitative checks need main_line edges");
    for (const auto* list : {&q.main_line, &q.localized}) {
      for (const auto& id : *list) {
        if (!graph.find_edge(id)) throw Error(ErrorKind::InvalidSpec, "unknown edge '" + id + "'");
      }
    }
    const auto j = *graph.find_vertex(q.junction);
    for (const auto& id : q.main_line) {
      const auto& e = graph.edge(*graph.find_edge(id));
      if (e.from != j && e.to != j) throw Error(ErrorKind::InvalidSpec, "main-line edge '" + id + "' does not touch the junction");
    }
  }
}

namespace {

fs::path resolve(const fs::path& base, const std::string& name) {
  const fs::path p(name);
  return p.is_absolute() ? p : base / p;
}

Nonlinearity nonlinearity_from_json(const json& doc) {
  if (doc.is_string()) {
    const auto s = doc.get<std::string>();
    if (s == "cubic") return Nonlinearity::cubic();
    if (s == "none") return Nonlinearity::none();
    throw Error(ErrorKind::InvalidSpec, "unknown nonlinearity '" + s + "'");
  }
  const auto type = doc.value("type", std::string("power"));
  if (type == "power") return Nonlinearity::power(doc.value("sign", 1.0), doc.value("p", 3.0));
  if (type == "double_power") return Nonlinearity::double_power(doc.at("p").get<double>(), doc.at("q").get<double>());
  throw Error(ErrorKind::InvalidSpec, "unknown nonlinearity type '" + type + "'");
}

GaussianBump bump_from_json(const json& doc, double edge_length) {
  GaussianBump b;
  b.amplitude = doc.value("amplitude", b.amplitude);
  b.width = doc.value("width", b.width);
  b.sign = doc.value("sign", b.sign);
  if (doc.contains("center")) {
    const auto& c = doc.at("center");
    if (c.is_string()) {
      const auto s = c.get<std::string>();
      if (s == "start") b.center = 0.0;
      else if (s == "end") b.center = edge_length;
      else throw Error(ErrorKind::InvalidSpec, "bump center must be a number, 'start' or 'end'");
    } else {
      b.center = c.get<double>();
    }
  }
  return b;
}

ReferenceSpec reference_from_json(const json& doc, const fs::path& base) {
  ReferenceSpec r;
  const auto type = doc.at("type").get<std::string>();
  if (type == "kirchhoff_soliton") {
    r.kind = ReferenceSpec::Kind::KirchhoffSoliton;
    r.mass = doc.value("mass", 0.0);
  } else if (type == "delta") {
    r.kind = ReferenceSpec::Kind::Delta;
    r.omega = doc.at("omega").get<double>();
    r.alpha = doc.at("alpha").get<double>();
  } else if (type == "delta_prime") {
    r.kind = ReferenceSpec::Kind::DeltaPrime;
    r.omega = doc.at("omega").get<double>();
    r.beta = doc.at("beta").get<double>();
    r.branch = doc.value("branch", r.branch);
    if (r.branch != "ground" && r.branch != "symmetric" && r.branch != "asymmetric") {
      throw Error(ErrorKind::InvalidSpec, "delta_prime branch must be ground, symmetric or asymmetric");
    }
  } else if (type == "field") {
    r.kind = ReferenceSpec::Kind::FieldFile;
    r.file = resolve(base, doc.at("file").get<std::string>());
  } else {
    throw Error(ErrorKind::InvalidSpec, "unknown reference type '" + type + "'");
  }
  return r;
}

std::optional<AnalyticState> analytic_state(const ReferenceSpec& r, double flow_mass) {
  switch (r.kind) {
    case ReferenceSpec::Kind::KirchhoffSoliton: return kirchhoff_soliton(r.mass > 0.0 ? r.mass : flow_mass);
    case ReferenceSpec::Kind::Delta: return delta_ground_state(r.omega, r.alpha);
    case ReferenceSpec::Kind::DeltaPrime: {
      if (r.branch == "ground") return delta_prime_ground_state(r.omega, r.beta);
      const auto states = delta_prime_states(r.omega, r.beta);
      for (const auto& s : states) {
        const bool asym = s.kind == StateKind::DeltaPrimeAsymmetric;
        if (asym == (r.branch == "asymmetric")) return s;
      }
      throw Error(ErrorKind::InvalidSpec, "no asymmetric delta' state at this frequency");
    }
    default: return std::nullopt;
  }
}

}  // namespace

ExperimentSpec parse_spec(const json& input, const fs::path& base_dir, bool paper_scale) {
  json doc = input;
  if (paper_scale) {
    if (!doc.contains("paper_scale")) throw Error(ErrorKind::InvalidSpec, "spec has no paper_scale profile");
    const json patch = doc.at("paper_scale");
    doc.merge_patch(patch);
  }
  ExperimentSpec spec;
  try {
    spec.name = doc.value("name", std::string("experiment"));
    const auto kind = doc.value("kind", std::string("single_run"));
    if (kind == "single_run") spec.kind = ExperimentKind::SingleRun;
    else if (kind == "convergence_study") spec.kind = ExperimentKind::ConvergenceStudy;
    else if (kind == "qualitative_checks") spec.kind = ExperimentKind::QualitativeChecks;
    else throw Error(ErrorKind::InvalidSpec, "unknown experiment kind '" + kind + "'");

    if (!doc.contains("graph")) throw Error(ErrorKind::InvalidSpec, "spec needs a graph");
    const auto& g = doc.at("graph");
    if (g.is_string()) {
      const auto path = resolve(base_dir, g.get<std::string>());
      if (!fs::exists(path)) throw Error(ErrorKind::Io, "graph file " + path.string() + " does not exist");
      spec.graph = load_graph(path);
    } else {
      spec.graph = graph_from_json(g);
    }

    const auto mesh = doc.value("mesh", json::object());
    if (mesh.contains("per_edge")) spec.mesh.per_edge = mesh.at("per_edge").get<std::map<std::string, std::size_t>>();
    if (mesh.contains("points_per_edge")) spec.mesh.points_per_edge = mesh.at("points_per_edge").get<std::size_t>();
    if (mesh.contains("total_points")) spec.mesh.total_points = mesh.at("total_points").get<std::size_t>();
    if (mesh.contains("dx")) spec.mesh.dx = mesh.at("dx").get<double>();

    if (doc.contains("reference")) spec.reference = reference_from_json(doc.at("reference"), base_dir);

    const auto flow = doc.value("flow", json::object());
    auto& cfg = spec.flow;
    if (flow.contains("mass")) {
      cfg.mass = flow.at("mass").get<double>();
    } else if (spec.reference.kind == ReferenceSpec::Kind::Delta || spec.reference.kind == ReferenceSpec::Kind::DeltaPrime ||
               (spec.reference.kind == ReferenceSpec::Kind::KirchhoffSoliton && spec.reference.mass > 0.0)) {
      // The flow runs at the mass of the reference state.
      cfg.mass = analytic_state(spec.reference, 0.0)->mass;
    }
    if (spec.reference.kind == ReferenceSpec::Kind::KirchhoffSoliton && !(spec.reference.mass > 0.0)) {
      spec.reference.mass = cfg.mass;
    }
    cfg.dt = flow.value("dt", cfg.dt);
    cfg.tolerance = flow.value("tolerance", cfg.tolerance);
    cfg.max_iterations = flow.value("max_iterations", cfg.max_iterations);
    if (flow.contains("nonlinearity")) cfg.nonlinearity = nonlinearity_from_json(flow.at("nonlinearity"));
    if (flow.contains("initial")) {
      const auto& init = flow.at("initial");
      if (init.contains("file")) spec.initial_file = resolve(base_dir, init.at("file").get<std::string>());
      if (init.contains("gaussian")) cfg.initial.fallback = bump_from_json(init.at("gaussian"), 0.0);
      if (init.contains("per_edge")) {
        for (const auto& [id, b] : init.at("per_edge").items()) {
          const auto e = spec.graph.find_edge(id);
          if (!e) throw Error(ErrorKind::InvalidSpec, "initial datum names unknown edge '" + id + "'");
          cfg.initial.per_edge[id] = bump_from_json(b, spec.graph.edge(*e).length);
        }
      }
    }

    if (doc.contains("convergence")) {
      const auto& c = doc.at("convergence");
      spec.dx_ladder = c.at("dx").get<std::vector<double>>();
      spec.threads = c.value("threads", std::size_t{0});
    }
    if (doc.contains("qualitative")) {
      const auto& q = doc.at("qualitative");
      spec.qualitative.junction = q.at("junction").get<std::string>();
      spec.qualitative.main_line = q.at("main_line").get<std::vector<std::string>>();
      spec.qualitative.localized = q.value("localized", std::vector<std::string>{});
      spec.qualitative.exclusion_radius = q.value("exclusion_radius", spec.qualitative.exclusion_radius);
      spec.qualitative.monotone_from = q.value("monotone_from", spec.qualitative.monotone_from);
    }

    fs::path out = doc.value("output_dir", "out/" + spec.name);
    if (out.is_relative()) {
      if (const char* root = std::getenv(kOutputRootEnv); root && *root) out = fs::path(root) / out;
    }
    spec.output_dir = out;
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::InvalidSpec, std::string("malformed spec: ") + ex.what());
  }
  spec.validate();
  return spec;
}

ExperimentSpec load_spec(const fs::path& path, bool paper_scale) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open spec file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::InvalidSpec, std::string("spec is not valid JSON: ") + ex.what());
  }
  return parse_spec(doc, path.parent_path(), paper_scale);
}

void apply_overrides(ExperimentSpec& spec, const Overrides& o) {
  if (o.output_dir) spec.output_dir = *o.output_dir;
  if (o.max_iterations) spec.flow.max_iterations = *o.max_iterations;
  if (o.dt) spec.flow.dt = *o.dt;
  if (o.tolerance) spec.flow.tolerance = *o.tolerance;
  spec.validate();
}

Reference build_reference(const ReferenceSpec& spec, const Discretization& disc) {
  Reference ref;
  if (spec.kind == ReferenceSpec::Kind::FieldFile) {
    ref.values = load_field_csv(spec.file, disc);
    return ref;
  }
  ref.state = analytic_state(spec, 0.0);
  if (!ref.state) throw Error(ErrorKind::InvalidSpec, "no reference configured");
  ref.values = sample_on_mesh(*ref.state, disc.graph, disc.mesh);
  return ref;
}

ErrorReport compare_to_reference(const Discretization& disc, const Field& numeric, const ReferenceSpec& spec,
                                 const Reference& reference) {
  std::vector<std::pair<bool, Field>> copies{{false, reference.values}};
  if (spec.kind == ReferenceSpec::Kind::DeltaPrime && reference.state) {
    copies.emplace_back(true, sample_on_mesh(mirror_image(*reference.state), disc.graph, disc.mesh));
  }
  std::optional<ErrorReport> best;
  for (const auto& [mirrored, values] : copies) {
    for (const double sign : {1.0, -1.0}) {
      ErrorReport r;
      r.sign = sign;
      r.mirrored = mirrored;
      r.pointwise = (numeric - sign * values).cwiseAbs();
      r.linf = r.pointwise.size() ? r.pointwise.maxCoeff() : 0.0;
      if (!best || r.linf < best->linf) best = std::move(r);
    }
  }
  const Field diff = numeric - best->sign * (best->mirrored ? copies[1].second : copies[0].second);
  best->l2 = weighted_l2(disc, diff);
  return *best;
}

RunReport run_single(const ExperimentSpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport report{spec.name, discretize(spec.graph, build_mesh(spec.graph, spec.mesh)), {}, 0.0, 0.0, 0.0, 0.0, {}, {}, 0.0};
  const auto& disc = report.disc;

  FlowConfig cfg = spec.flow;
  if (spec.initial_file) cfg.initial.values = load_field_csv(*spec.initial_file, disc);
  if (spec.reference.kind != ReferenceSpec::Kind::None) report.reference = build_reference(spec.reference, disc);

  report.flow = run_flow(disc, cfg);
  if (report.flow.reason == Termination::SolverFailure) {
    throw Error(ErrorKind::LinearSolveFailure, report.flow.message);
  }
  const auto& psi = report.flow.field;
  report.final_energy = discrete_energy(disc, psi, cfg.nonlinearity);
  report.final_mass = disc.mass(psi);
  report.chemical_potential = chemical_potential(disc, psi, cfg.nonlinearity);
  report.stationarity = stationarity_residual(disc, psi, cfg.nonlinearity);
  if (report.reference) report.error = compare_to_reference(disc, psi, spec.reference, *report.reference);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

double fitted_slope(const std::vector<double>& dx, const std::vector<double>& error) {
  if (dx.size() != error.size() || dx.size() < 2) throw Error(ErrorKind::InvalidParameter, "slope fit needs matching samples");
  const double n = static_cast<double>(dx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    const double x = std::log(dx[i]);
    const double y = std::log(error[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ConvergenceTable run_convergence(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.kind != ExperimentKind::ConvergenceStudy) throw Error(ErrorKind::InvalidSpec, "not a convergence study");
  const auto n = spec.dx_ladder.size();
  std::vector<ConvergenceRow> rows(n);
  std::vector<std::exception_ptr> failures(n);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        ExperimentSpec one = spec;
        one.kind = ExperimentKind::SingleRun;
        one.mesh = MeshSpec{};
        one.mesh.dx = spec.dx_ladder[i];
        const auto r = run_single(one);
        rows[i] = {r.disc.mesh.max_spacing(), r.disc.size(), r.flow.iterations, to_string(r.flow.reason),
                   r.error->linf, r.error->l2, std::nullopt};
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  std::size_t threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  ConvergenceTable table;
  std::vector<double> dx, err;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) rows[i].local_order = std::log(rows[i - 1].linf / rows[i].linf) / std::log(rows[i - 1].dx / rows[i].dx);
    dx.push_back(rows[i].dx);
    err.push_back(rows[i].linf);
  }
  table.rows = std::move(rows);
  table.slope = fitted_slope(dx, err);
  return table;
}

bool QualitativeReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckOutcome& c) { return c.passed; });
}

std::vector<CheckOutcome> qualitative_checks(const Discretization& disc, const Field& field, const QualitativeSpec& q) {
  const auto& graph = disc.graph;
  const auto& mesh = disc.mesh;
  const auto junction = graph.vertex_index(q.junction);
  auto contains = [](const std::vector<std::string>& list, const std::string& id) {
    return std::find(list.begin(), list.end(), id) != list.end();
  };
  auto distance = [&](std::size_t e, std::size_t k) {
    const double x = mesh.coordinate(e, k);
    return graph.edge(e).from == junction ? x : mesh.length(e) - x;
  };

  std::vector<CheckOutcome> out;
  {
    std::size_t best_e = 0, best_k = 1;
    double best = -1.0;
    for (std::size_t e = 0; e < mesh.edge_count(); ++e) {
      for (std::size_t k = 1; k <= mesh.node_count(e); ++k) {
        const double v = std::abs(field(static_cast<Eigen::Index>(mesh.index(e, k))));
        if (v > best) {
          best = v;
          best_e = e;
          best_k = k;
        }
      }
    }
    const auto& id = graph.edge(best_e).id;
    const bool on_main = contains(q.main_line, id);
    const bool ok = contains(q.localized, id) || (on_main && distance(best_e, best_k) <= q.exclusion_radius);
    std::ostringstream os;
    os << std::setprecision(6) << "max |psi| = " << best << " on edge " << id << " at x = " << mesh.coordinate(best_e, best_k);
    if (on_main) os << " (distance " << distance(best_e, best_k) << " from " << q.junction << ")";
    out.push_back({"localized_maximum", ok, os.str()});
  }
  for (const auto& id : q.main_line) {
    const auto e = graph.edge_index(id);
    std::vector<std::pair<double, double>> samples;
    for (std::size_t k = 1; k <= mesh.node_count(e); ++k) {
      const double d = distance(e, k);
      if (d > q.monotone_from) samples.emplace_back(d, std::abs(field(static_cast<Eigen::Index>(mesh.index(e, k)))));
    }
    std::sort(samples.begin(), samples.end());
    std::ostringstream os;
    bool ok = true;
    for (std::size_t i = 1; i < samples.size(); ++i) {
      if (!(samples[i].second < samples[i - 1].second)) {
        ok = false;
        os << std::setprecision(6) << "|psi| on edge " << id << " does not decrease at distance " << samples[i].first << " ("
           << samples[i - 1].second << " -> " << samples[i].second << ")";
        break;
      }
    }
    if (ok) os << samples.size() << " nodes beyond distance " << q.monotone_from << " strictly decreasing";
    out.push_back({"monotone_decay:" + id, ok, os.str()});
  }
  return out;
}

QualitativeReport run_qualitative(const ExperimentSpec& spec) {
  spec.validate();
  QualitativeReport report{run_single(spec), {}};
  report.checks = qualitative_checks(report.run.disc, report.run.flow.field, spec.qualitative);
  return report;
}

namespace {

// Signed distance from the centre on a two-edge star, edge coordinate
// otherwise.
std::vector<std::vector<double>> output_coordinates(const Discretization& disc) {
  const auto& mesh = disc.mesh;
  std::vector<std::vector<double>> xs(mesh.edge_count());
  std::optional<TwoStarLayout> star;
  try {
    star = two_star_layout(disc.graph);
  } catch (const Error&) {
  }
  for (std::size_t e = 0; e < mesh.edge_count(); ++e) {
    for (std::size_t k = 1; k <= mesh.node_count(e); ++k) {
      if (star) {
        const double d = distance_from_center(*star, mesh, e, k);
        xs[e].push_back(e == 0 ? -d : d);
      } else {
        xs[e].push_back(mesh.coordinate(e, k));
      }
    }
  }
  return xs;
}

void full_precision(std::ostream& os) { os << std::setprecision(17); }

}  // namespace

void write_field_csv(std::ostream& os, const Discretization& disc, const Field& field) {
  full_precision(os);
  os << "edge,x,value\n";
  const auto xs = output_coordinates(disc);
  for (std::size_t e = 0; e < disc.mesh.edge_count(); ++e) {
    for (std::size_t k = 1; k <= disc.mesh.node_count(e); ++k) {
      os << disc.graph.edge(e).id << ',' << xs[e][k - 1] << ',' << field(static_cast<Eigen::Index>(disc.mesh.index(e, k)))
         << '\n';
    }
  }
}

void write_history_csv(std::ostream& os, const std::vector<HistoryRecord>& history) {
  full_precision(os);
  os << "iteration,energy,mass,mu,step_diff\n";
  for (const auto& h : history) {
    os << h.iteration << ',' << h.energy << ',' << h.mass << ',' << h.chemical_potential << ',' << h.step_difference << '\n';
  }
}

void write_error_csv(std::ostream& os, const Discretization& disc, const ErrorReport& error) {
  full_precision(os);
  os << "edge,x,abs_error\n";
  const auto xs = output_coordinates(disc);
  for (std::size_t e = 0; e < disc.mesh.edge_count(); ++e) {
    for (std::size_t k = 1; k <= disc.mesh.node_count(e); ++k) {
      os << disc.graph.edge(e).id << ',' << xs[e][k - 1] << ','
         << error.pointwise(static_cast<Eigen::Index>(disc.mesh.index(e, k))) << '\n';
    }
  }
}

void write_convergence_csv(std::ostream& os, const ConvergenceTable& table) {
  full_precision(os);
  os << "dx,nodes,iterations,termination,linf_error,l2_error,local_order\n";
  for (const auto& r : table.rows) {
    os << r.dx << ',' << r.total_nodes << ',' << r.iterations << ',' << r.termination << ',' << r.linf << ',' << r.l2 << ',';
    if (r.local_order) os << *r.local_order;
    os << '\n';
  }
}

json summary_json(const ExperimentSpec& spec, const RunReport& r) {
  json s;
  s["name"] = spec.name;
  s["kind"] = to_string(spec.kind);
  s["termination"] = to_string(r.flow.reason);
  s["iterations"] = r.flow.iterations;
  s["final_energy"] = r.final_energy;
  s["final_mass"] = r.final_mass;
  s["chemical_potential"] = r.chemical_potential;
  s["stationarity_residual"] = r.stationarity;
  s["total_nodes"] = r.disc.size();
  s["max_dx"] = r.disc.mesh.max_spacing();
  s["mass"] = spec.flow.mass;
  s["dt"] = spec.flow.dt;
  s["tolerance"] = spec.flow.tolerance;
  if (!r.flow.history.empty()) s["final_step_diff"] = r.flow.history.back().step_difference;
  if (r.reference && r.reference->state) {
    const auto& st = *r.reference->state;
    s["reference"] = {{"state", st.describe()}, {"omega", st.omega}, {"mass", st.mass}, {"energy", st.energy}};
    s["energy_error"] = r.final_energy - st.energy;
  }
  if (r.error) {
    s["linf_error"] = r.error->linf;
    s["l2_error"] = r.error->l2;
    s["matched"] = {{"sign", r.error->sign}, {"mirrored", r.error->mirrored}};
  }
  return s;
}

Field read_field_csv(std::istream& is, const Discretization& disc) {
  const auto& mesh = disc.mesh;
  const auto xs = output_coordinates(disc);
  std::vector<std::size_t> seen(mesh.edge_count(), 0);
  Field f = Field::Zero(static_cast<Eigen::Index>(mesh.total_nodes()));

  std::string line;
  if (!std::getline(is, line) || line.rfind("edge,x,value", 0) != 0) {
    throw Error(ErrorKind::Io, "field file must start with the header edge,x,value");
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw Error(ErrorKind::Io, "field file line " + std::to_string(lineno) + " is malformed");
    const auto e = disc.graph.find_edge(line.substr(0, c1));
    if (!e) throw Error(ErrorKind::DimensionMismatch, "field file names unknown edge on line " + std::to_string(lineno));
    char* end = nullptr;
    const double x = std::strtod(line.c_str() + c1 + 1, &end);
    const double v = std::strtod(line.c_str() + c2 + 1, &end);
    const auto k = ++seen[*e];
    if (k > mesh.node_count(*e)) throw Error(ErrorKind::DimensionMismatch, "field file has too many nodes on edge " + disc.graph.edge(*e).id);
    if (std::abs(x - xs[*e][k - 1]) > 1e-9 * (1.0 + std::abs(x))) {
      throw Error(ErrorKind::DimensionMismatch, "field file coordinates do not match the mesh on line " + std::to_string(lineno));
    }
    f(static_cast<Eigen::Index>(mesh.index(*e, k))) = v;
  }
  for (std::size_t e = 0; e < mesh.edge_count(); ++e) {
    if (seen[e] != mesh.node_count(e)) {
      throw Error(ErrorKind::DimensionMismatch, "field file has " + std::to_string(seen[e]) + " nodes on edge " +
                                                    disc.graph.edge(e).id + ", mesh has " + std::to_string(mesh.node_count(e)));
    }
  }
  return f;
}

Field load_field_csv(const fs::path& path, const Discretization& disc) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open field file " + path.string());
  return read_field_csv(in, disc);
}

namespace {

// Collects output files in a scratch directory next to the destination and
// moves them into place only once every file is written.
class Staging {
 public:
  explicit Staging(fs::path target) : target_(std::move(target)) {
    const auto parent = target_.has_parent_path() ? target_.parent_path() : fs::path(".");
    fs::create_directories(parent);
    dir_ = parent / ("." + target_.filename().string() + ".staging-" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Staging() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }

  std::ofstream open(const std::string& name) {
    std::ofstream os(dir_ / name);
    if (!os) throw Error(ErrorKind::Io, "cannot write " + (dir_ / name).string());
    names_.push_back(name);
    return os;
  }

  void commit() {
    fs::create_directories(target_);
    for (const auto& n : names_) fs::rename(dir_ / n, target_ / n);
  }

 private:
  fs::path target_;
  fs::path dir_;
  std::vector<std::string> names_;
};

void write_json(std::ofstream os, const json& j) {
  os << j.dump(2) << '\n';
  if (!os) throw Error(ErrorKind::Io, "failed writing JSON output");
}

void write_run(Staging& stage, const RunReport& r, const json& summary) {
  {
    auto os = stage.open("field.csv");
    write_field_csv(os, r.disc, r.flow.field);
  }
  {
    auto os = stage.open("history.csv");
    write_history_csv(os, r.flow.history);
  }
  if (r.error) {
    auto os = stage.open("error.csv");
    write_error_csv(os, r.disc, *r.error);
  }
  write_json(stage.open("summary.json"), summary);
}

}  // namespace

int run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  try {
    switch (spec.kind) {
      case ExperimentKind::SingleRun: {
        const auto r = run_single(spec);
        Staging stage(spec.output_dir);
        write_run(stage, r, summary_json(spec, r));
        stage.commit();
        return 0;
      }
      case ExperimentKind::ConvergenceStudy: {
        const auto table = run_convergence(spec);
        Staging stage(spec.output_dir);
        {
          auto os = stage.open("convergence.csv");
          write_convergence_csv(os, table);
        }
        json rows = json::array();
        for (const auto& r : table.rows) {
          rows.push_back({{"dx", r.dx}, {"nodes", r.total_nodes}, {"iterations", r.iterations}, {"termination", r.termination},
                          {"linf_error", r.linf}, {"l2_error", r.l2},
                          {"local_order", r.local_order ? json(*r.local_order) : json(nullptr)}});
        }
        write_json(stage.open("summary.json"),
                   {{"name", spec.name}, {"kind", to_string(spec.kind)}, {"fitted_slope", table.slope}, {"rows", rows}});
        stage.commit();
        return 0;
      }
      case ExperimentKind::QualitativeChecks: {
        const auto q = run_qualitative(spec);
        Staging stage(spec.output_dir);
        json checks = json::array();
        for (const auto& c : q.checks) checks.push_back({{"check", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        auto summary = summary_json(spec, q.run);
        summary["checks_passed"] = q.passed();
        write_run(stage, q.run, summary);
        write_json(stage.open("qualitative.json"), {{"name", spec.name}, {"passed", q.passed()}, {"checks", checks}});
        stage.commit();
        return q.passed() ? 0 : 3;
      }
    }
  } catch (const fs::filesystem_error& ex) {
    throw Error(ErrorKind::Io, ex.what());
  }
  return 1;
}

}  // namespace grafflow
