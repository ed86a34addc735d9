#include "msrl/commands.hpp"

#include "msrl/critical_period.hpp"
#include "msrl/format.hpp"
#include "msrl/mdp_io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace msrl::cli {

namespace fs = std::filesystem;

namespace {

fs::path prepare_output(const ExperimentConfig &config) {
  const fs::path dir(config.output.directory);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::ofstream out(dir / "resolved_config.json");
  out << to_json(config).dump(2) << '\n';
  return dir;
}

std::ofstream open_output(const fs::path &path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

int max_stage(const ExperimentConfig &config) { return config.guidance.stages.back(); }

void require_layout_env(const ExperimentConfig &config, const char *command) {
  if (!config.env.mdp_file.empty())
    throw ConfigError(std::string("env.mdp_file is only supported by solve, not ") + command);
}

const StageSchedule &single_schedule(const ExperimentConfig &config) {
  if (config.schedule.transitions.size() != 1)
    throw ConfigError("train needs exactly one schedule in schedule.transitions");
  return config.schedule.transitions.front();
}

std::string flag_string(const gridnav::NavState &s) {
  std::string out(1, s.goal_bonus_taken ? '1' : '0');
  for (bool f : s.non_goal_flags) out += f ? '1' : '0';
  return out;
}

void write_policy_set(std::ostream &out, const PolicySet &set) {
  out << "# msrl policy_set v1\nstate,actions\n";
  for (std::size_t s = 0; s < set.per_state_actions.size(); ++s) {
    out << s << ',';
    for (std::size_t k = 0; k < set.per_state_actions[s].size(); ++k)
      out << (k ? " " : "") << set.per_state_actions[s][k];
    out << '\n';
  }
}

}  // namespace

void apply_overrides(ExperimentConfig &config, const Overrides &overrides, Command command) {
  if (overrides.out_dir) {
    if (overrides.out_dir->empty()) throw ConfigError("--out must not be empty");
    config.output.directory = *overrides.out_dir;
  }
  if (overrides.workers) {
    if (*overrides.workers < 1) throw ConfigError("--workers must be positive");
    config.schedule.workers = *overrides.workers;
  }
  if (overrides.seed) {
    switch (command) {
      case Command::validate:
      case Command::solve:
        config.env.layout_seed = *overrides.seed;
        break;
      case Command::train:
        config.trainer.seed = *overrides.seed;
        break;
      case Command::sweep:
        config.schedule.seeds = {*overrides.seed};
        break;
    }
  }
}

int cmd_validate(const ExperimentConfig &config, std::ostream &log) {
  require_layout_env(config, "validate");
  const fs::path dir = prepare_output(config);
  const EnvSpec env = config.env_spec();
  const bool want_support = config.measurement.checks != NestingChecks::optimality;
  const bool want_optimality = config.measurement.checks != NestingChecks::support;

  auto csv = open_output(dir / "violations.csv");
  auto report = open_output(dir / "report.txt");
  csv << "# msrl violations v1\nlayout_seed,check,stage,state,action\n";
  report << "nesting checks: " << to_string(config.measurement.checks)
         << "  direction: " << to_string(config.measurement.direction)
         << "  support on: " << (config.guidance.shaping_only ? "shaping component" : "full reward") << '\n';

  std::size_t failed_layouts = 0, support_total = 0, optimality_total = 0;
  const auto layouts = evaluation_layouts(env);
  for (const auto &layout : layouts) {
    const auto genv = gridnav::GridNavEnv::make(layout, max_stage(config), env.options);
    const gridnav::NavModel model(genv, max_stage(config), env.state_cap);
    NestingReport r;
    if (want_support) r.merge(check_support_nesting(model.guidance(config.guidance.stages, config.guidance.shaping_only)));
    if (want_optimality)
      r.merge(check_optimality_nesting(model.guidance(config.guidance.stages), config.measurement.tie_tol,
                                       config.measurement.direction, config.measurement.vi_tol));
    for (const auto &v : r.support_violations) csv << layout.seed << ",support," << v.stage << ',' << v.state << ",\n";
    for (const auto &v : r.optimality_violations)
      csv << layout.seed << ",optimality," << v.stage << ',' << v.state << ',' << v.action << '\n';
    support_total += r.support_violations.size();
    optimality_total += r.optimality_violations.size();
    if (!r.ok()) ++failed_layouts;
    report << "layout " << layout.seed << ": support "
           << (want_support ? (r.support_ok() ? "ok" : "VIOLATED") : "skipped") << " ("
           << r.support_violations.size() << "), optimality "
           << (want_optimality ? (r.optimality_ok() ? "ok" : "VIOLATED") : "skipped") << " ("
           << r.optimality_violations.size() << ")\n";
  }
  report << "layouts: " << layouts.size() << "  failing: " << failed_layouts
         << "  support violations: " << support_total << "  optimality violations: " << optimality_total << '\n';
  log << "validate: " << layouts.size() - failed_layouts << '/' << layouts.size() << " layouts pass\n";
  return failed_layouts == 0 ? kOk : kValidationFailure;
}

int cmd_solve(const ExperimentConfig &config, std::ostream &log) {
  const fs::path dir = prepare_output(config);
  const double tie_tol = config.measurement.tie_tol;
  const double vi_tol = config.measurement.vi_tol;

  if (!config.env.mdp_file.empty()) {
    std::ifstream in(config.env.mdp_file);
    if (!in) throw ConfigError("cannot open env.mdp_file " + config.env.mdp_file);
    TabularMDP<double> mdp = [&] {
      try {
        return read_mdp_text<double>(in);
      } catch (const std::invalid_argument &e) {
        throw ConfigError(config.env.mdp_file + ": " + e.what());
      }
    }();
    const auto v = value_iteration(mdp, vi_tol);
    auto values = open_output(dir / "values.csv");
    values << "# msrl values v1\nstate,value\n";
    for (Index s = 0; s < v.size(); ++s) values << s << ',' << format_fixed(v[s], 9) << '\n';
    auto policies = open_output(dir / "policy_set.csv");
    write_policy_set(policies, optimal_policy_set(mdp, tie_tol, vi_tol));
    log << "solve: " << mdp.n_states() << " states, V*(0) = " << format_fixed(v[0], 9) << '\n';
    return kOk;
  }

  const EnvSpec env = config.env_spec();
  const auto layout = evaluation_layouts(env).front();
  auto layout_file = open_output(dir / "layout.txt");
  layout_file << gridnav::render_layout(layout);
  const auto genv = gridnav::GridNavEnv::make(layout, max_stage(config), env.options);
  const gridnav::NavModel model(genv, max_stage(config), env.state_cap);
  for (int stage : config.guidance.stages) {
    const auto mdp = model.mdp(stage);
    const auto v = value_iteration(mdp, vi_tol);
    const std::string suffix = "_stage" + std::to_string(stage) + ".csv";
    auto values = open_output(dir / ("values" + suffix));
    values << "# msrl values v1\nstate,kind,row,col,steps_left,flags,value\n";
    for (Index s = 0; s < model.n_states(); ++s) {
      values << s << ',';
      if (s < model.n_live_states()) {
        const auto &st = model.state(s);
        values << "live," << st.cell.row << ',' << st.cell.col << ',' << st.steps_left << ',' << flag_string(st);
      } else {
        values << gridnav::to_string(model.outcome_of(s)) << ",,,,";
      }
      values << ',' << format_fixed(v[s], 9) << '\n';
    }
    auto policies = open_output(dir / ("policy_set" + suffix));
    write_policy_set(policies, optimal_policy_set(mdp, tie_tol, vi_tol));
    log << "solve: stage " << stage << ", " << model.n_states() << " states, V*(start) = "
        << format_fixed(v[model.start_state()], 6) << '\n';
  }
  return kOk;
}

int cmd_train(const ExperimentConfig &config, std::ostream &log) {
  require_layout_env(config, "train");
  const StageSchedule &schedule = single_schedule(config);
  const fs::path dir = prepare_output(config);
  const Experiment ex = build_experiment(config.env_spec(), config.guidance.stages, config.measurement.anchor,
                                         config.measurement.vi_tol);
  const TrainingTrace trace = train(ex.family, schedule, config.trainer);
  const auto l = convergence_step(trace, ex.anchors, config.measurement.eps);

  auto trace_csv = open_output(dir / "trace.csv");
  write_trace_csv(trace_csv, trace);
  auto policy = open_output(dir / "policy.txt");
  write_policy_table(policy, trace.snapshots.back());
  auto snaps = open_output(dir / "snapshots.csv");
  snaps << "# msrl snapshots v1\nstep,digest,success\n";
  double final_success = 0.0;
  for (const auto &snap : trace.snapshots) {
    final_success = ex.success(snap, config.measurement.episodes_per_env);
    snaps << snap.step << ',' << snap.digest << ',' << format_fixed(final_success) << '\n';
  }
  auto report = open_output(dir / "report.txt");
  report << "schedule " << to_string(schedule) << "  seed " << config.trainer.seed << '\n'
         << "convergence step L (eps " << format_number(config.measurement.eps) << ", anchor "
         << to_string(config.measurement.anchor) << "): " << (l ? std::to_string(*l) : "NOT_CONVERGED") << '\n'
         << "final success rate: " << format_fixed(final_success, 3) << '\n'
         << "episodes: " << trace.episodes.size() << '\n';
  log << "train: L = " << (l ? std::to_string(*l) : "NOT_CONVERGED") << ", success " << format_fixed(final_success, 3)
      << '\n';
  return kOk;
}

int cmd_sweep(const ExperimentConfig &config, std::ostream &log) {
  require_layout_env(config, "sweep");
  const fs::path dir = prepare_output(config);
  const SweepSpec spec = config.sweep_spec();
  const SweepResult result = [&] {
    try {
      return run_sweep(spec);
    } catch (const std::invalid_argument &e) {
      throw ConfigError(e.what());
    }
  }();
  const auto policy = config.measurement.not_converged;
  auto cells = open_output(dir / "cells.csv");
  write_cells_csv(cells, result);
  auto summary = open_output(dir / "summary.csv");
  write_summary_csv(summary, result, policy);
  auto curves = open_output(dir / "curves.dat");
  write_curves(curves, result);
  auto report = open_output(dir / "report.txt");
  const bool converged = write_report(report, result, policy);
  std::size_t failures = 0;
  for (const auto &cell : result.cells) failures += cell.error.empty() ? 0 : 1;
  log << "sweep: " << result.cells.size() << " runs, " << failures << " failed"
      << (converged ? "" : ", ALL_DIVERGED") << '\n';
  return converged ? kOk : kAllDiverged;
}

int run_command(Command command, const ExperimentConfig &config, std::ostream &log) {
  switch (command) {
    case Command::validate:
      return cmd_validate(config, log);
    case Command::solve:
      return cmd_solve(config, log);
    case Command::train:
      return cmd_train(config, log);
    case Command::sweep:
      return cmd_sweep(config, log);
  }
  return kUsageError;
}

}  // namespace msrl::cli
