// grafflow: ground states of NLS on metric graphs by normalized gradient flow.
//
//   grafflow run <spec.json>       single flow, writes field/history/summary
//   grafflow converge <spec.json>  dx ladder against an analytic reference
//   grafflow check <spec.json>     flow plus localization/decay checks

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "grafflow/error.hpp"
#include "grafflow/experiment.hpp"

namespace {

struct CommonFlags {
  std::string spec;
  std::string out;
  bool paper_scale = false;
  std::optional<std::size_t> max_iter;
  std::optional<double> dt;
  std::optional<double> eps;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("spec", f.spec, "experiment spec (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output directory (overrides the experiment file)");
  cmd->add_flag("--paper-scale", f.paper_scale, "apply the experiment file's paper_scale profile (full-size runs)");
  cmd->add_option("--max-iter", f.max_iter, "maximum number of iterations");
  cmd->add_option("--dt", f.dt, "time step");
  cmd->add_option("--eps", f.eps, "stopping tolerance on the step difference");
}

int report_error(const std::string& kind, const std::string& message) {
  nlohmann::json j{{"error", kind}, {"message", message}};
  std::cerr << j.dump() << '\n';
  return 1;
}

int execute(const CommonFlags& f, grafflow::ExperimentKind expected) {
  using namespace grafflow;
  try {
    auto spec = load_spec(f.spec, f.paper_scale);
    if (spec.kind != expected) {
      throw Error(ErrorKind::InvalidSpec, std::string("spec kind is ") + to_string(spec.kind) + ", command expects " +
                                               to_string(expected));
    }
    Overrides o;
    if (!f.out.empty()) o.output_dir = f.out;
    o.max_iterations = f.max_iter;
    o.dt = f.dt;
    o.tolerance = f.eps;
    apply_overrides(spec, o);

    const int status = run_experiment(spec);
    std::cout << spec.output_dir.string() << '\n';
    return status;
  } catch (const Error& e) {
    return report_error(std::string(to_string(e.kind())), e.what());
  } catch (const std::exception& e) {
    return report_error("Internal", e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ground states of NLS on metric graphs by normalized gradient flow"};
  app.require_subcommand(1);

  CommonFlags run_f, conv_f, check_f;
  auto* run = app.add_subcommand("run", "single flow run");
  auto* conv = app.add_subcommand("converge", "convergence study over a dx ladder");
  auto* check = app.add_subcommand("check", "flow run followed by qualitative checks");
  add_common(run, run_f);
  add_common(conv, conv_f);
  add_common(check, check_f);

  CLI11_PARSE(app, argc, argv);

  using grafflow::ExperimentKind;
  if (run->parsed()) return execute(run_f, ExperimentKind::SingleRun);
  if (conv->parsed()) return execute(conv_f, ExperimentKind::ConvergenceStudy);
  return execute(check_f, ExperimentKind::QualitativeChecks);
}
