#include "msrl/critical_period.hpp"

#include "msrl/format.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace msrl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::pair<double, double> mean_std(const std::vector<double> &xs) {
  if (xs.empty()) return {kInf, kInf};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

std::string label_for(std::size_t schedule, bool baseline) {
  return baseline ? "uni" : "multi_" + std::to_string(schedule + 1);
}

std::string csv_safe(std::string text) {
  std::replace(text.begin(), text.end(), ',', ';');
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

std::size_t schedule_columns(const SweepResult &result) {
  std::size_t n = result.baseline ? result.baseline->size() : 1;
  for (const auto &s : result.schedules) n = std::max(n, s.size());
  return n;
}

void write_schedule_columns(std::ostream &out, const StageSchedule &schedule, std::size_t columns) {
  for (std::size_t i = 0; i < columns; ++i) {
    out << ',';
    if (i < schedule.size()) out << schedule.transitions()[i];
  }
}

}  // namespace

const char *to_string(AnchorChoice anchor) { return anchor == AnchorChoice::first ? "first" : "last"; }
const char *to_string(NotConvergedPolicy policy) {
  return policy == NotConvergedPolicy::strict ? "strict" : "lenient";
}

std::vector<gridnav::LayoutSpec> evaluation_layouts(const EnvSpec &env) {
  if (env.level == 1) return {gridnav::make_level(1, env.grid_size, env.layout_seed)};
  if (env.eval_set_size < 1) throw std::invalid_argument("evaluation_layouts: eval_set_size must be positive");
  std::vector<gridnav::LayoutSpec> out;
  for (int i = 0; i < env.eval_set_size; ++i)
    out.push_back(gridnav::make_level(env.level, env.grid_size, env.layout_seed + static_cast<std::uint64_t>(i)));
  return out;
}

double Experiment::success(const Snapshot &snapshot, int episodes_per_env) const {
  return gridnav::success_rate(
      envs,
      [&](std::size_t i, const gridnav::NavState &state) {
        const Index s = models[i].index_of(state);
        if (s < 0) throw std::logic_error("Experiment::success: simulator state missing from the model");
        const Index o = family.tasks[i].observation[static_cast<std::size_t>(s)];
        return static_cast<gridnav::Action>(snapshot.greedy.at(static_cast<std::size_t>(o)));
      },
      episodes_per_env);
}

Experiment build_experiment(const EnvSpec &env, const std::vector<int> &stages, AnchorChoice anchor,
                            double vi_tol) {
  if (stages.empty()) throw std::invalid_argument("build_experiment: no guidance stages");
  const int flag_stage = *std::max_element(stages.begin(), stages.end());
  Experiment ex;
  for (const auto &layout : evaluation_layouts(env)) {
    ex.envs.push_back(gridnav::GridNavEnv::make(layout, flag_stage, env.options));
    ex.models.emplace_back(ex.envs.back(), flag_stage, env.state_cap);
  }
  ex.family = make_family(ex.models, stages, env.observation);
  ex.anchors = make_anchors(ex.family, anchor == AnchorChoice::first ? 0 : stages.size() - 1, vi_tol);
  return ex;
}

SweepSpec SweepSpec::normalized() const {
  SweepSpec out = *this;
  if (out.schedule_grid.empty() && !out.uni_stage_baseline)
    throw std::invalid_argument("SweepSpec: empty schedule grid");
  if (out.seeds.empty()) throw std::invalid_argument("SweepSpec: no seeds");
  std::sort(out.seeds.begin(), out.seeds.end());
  out.seeds.erase(std::unique(out.seeds.begin(), out.seeds.end()), out.seeds.end());
  for (const auto &s : out.schedule_grid)
    if (s.size() != stages.size()) throw std::invalid_argument("SweepSpec: schedule length differs from stage count");
  if (out.trainer.total_steps <= 0) {
    std::int64_t last = 0;
    for (const auto &s : out.schedule_grid) last = std::max(last, s.last());
    if (last == 0) throw std::invalid_argument("SweepSpec: total_steps required for a baseline-only sweep");
    out.trainer.total_steps = last;
  }
  if (!(out.eps > 0) || !std::isfinite(out.eps)) throw std::invalid_argument("SweepSpec: eps must be positive");
  if (out.workers < 1) out.workers = 1;
  return out;
}

std::vector<ScheduleSummary> SweepResult::summarize(NotConvergedPolicy policy) const {
  std::vector<ScheduleSummary> out;
  const std::size_t groups = schedules.size() + (baseline ? 1 : 0);
  for (std::size_t g = 0; g < groups; ++g) {
    const bool is_base = g == schedules.size();
    ScheduleSummary sum{label_for(g, is_base), is_base ? *baseline : schedules[g], is_base, 0, 0, 0, 0, 0, 0};
    std::vector<double> ls, successes;
    bool any_missing = false;
    for (const auto &cell : cells) {
      if (cell.schedule != g) continue;
      ++sum.runs;
      successes.push_back(cell.final_success);
      if (cell.convergence) {
        ++sum.converged;
        ls.push_back(static_cast<double>(*cell.convergence));
      } else {
        any_missing = true;
      }
    }
    if (policy == NotConvergedPolicy::strict && any_missing) {
      sum.mean_l = sum.std_l = kInf;
    } else {
      std::tie(sum.mean_l, sum.std_l) = mean_std(ls);
    }
    std::tie(sum.mean_success, sum.std_success) = mean_std(successes);
    out.push_back(std::move(sum));
  }
  return out;
}

CellResult run_cell(const Experiment &experiment, const SweepSpec &spec, const StageSchedule &schedule,
                    bool baseline, std::uint64_t seed) {
  CellResult cell;
  cell.baseline = baseline;
  cell.seed = seed;
  try {
    TrainerConfig cfg = spec.trainer;
    cfg.seed = seed;
    const TrainingTrace trace =
        baseline ? train(experiment.family.select_stages({experiment.family.n_stages() - 1}), schedule, cfg)
                 : train(experiment.family, schedule, cfg);
    cell.convergence = convergence_step(trace, experiment.anchors, spec.eps);
    for (const auto &snap : trace.snapshots)
      cell.success_curve.emplace_back(snap.step, experiment.success(snap, spec.episodes_per_env));
    cell.final_success = cell.success_curve.back().second;
    for (const auto &e : trace.episodes) {
      if (e.outcome == gridnav::Outcome::goal) ++cell.goal_episodes;
      else if (e.outcome == gridnav::Outcome::non_goal) ++cell.non_goal_episodes;
      else ++cell.timeout_episodes;
    }
  } catch (const std::exception &e) {
    cell.convergence.reset();
    cell.final_success = 0.0;
    cell.error = e.what();
  }
  return cell;
}

SweepResult run_sweep(const SweepSpec &spec) {
  const SweepSpec norm = spec.normalized();
  return run_sweep(norm, build_experiment(norm.env, norm.stages, norm.anchor, norm.vi_tol));
}

SweepResult run_sweep(const SweepSpec &spec, const Experiment &experiment) {
  const SweepSpec norm = spec.normalized();
  SweepResult result;
  result.schedules = norm.schedule_grid;
  result.seeds = norm.seeds;
  if (norm.uni_stage_baseline) result.baseline = StageSchedule({norm.trainer.total_steps});

  struct Job {
    std::size_t group;
    bool baseline;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t g = 0; g < result.schedules.size(); ++g)
    for (auto seed : result.seeds) jobs.push_back({g, false, seed});
  if (result.baseline)
    for (auto seed : result.seeds) jobs.push_back({result.schedules.size(), true, seed});

  result.cells.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job &job = jobs[i];
      const StageSchedule &schedule = job.baseline ? *result.baseline : result.schedules[job.group];
      result.cells[i] = run_cell(experiment, norm, schedule, job.baseline, job.seed);
      result.cells[i].schedule = job.group;
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(norm.workers), std::max<std::size_t>(1, jobs.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  return result;
}

StageSchedule critical_period(const SweepResult &result, NotConvergedPolicy policy) {
  std::optional<ScheduleSummary> best;
  for (const auto &sum : result.summarize(policy)) {
    if (sum.baseline || !std::isfinite(sum.mean_l)) continue;
    if (!best || sum.mean_l < best->mean_l || (sum.mean_l == best->mean_l && sum.schedule < best->schedule))
      best = sum;
  }
  if (!best) throw AllDivergedError();
  return best->schedule;
}

ComparisonReport compare_uni_multi(const SweepResult &result) {
  if (!result.baseline) throw std::invalid_argument("compare_uni_multi: sweep has no uni-stage baseline");
  ComparisonReport report;
  std::optional<ScheduleSummary> best;
  for (const auto &sum : result.summarize()) {
    if (sum.baseline) {
      report.uni_mean = sum.mean_success;
      report.uni_std = sum.std_success;
      continue;
    }
    if (!best || sum.mean_success > best->mean_success ||
        (sum.mean_success == best->mean_success && sum.schedule < best->schedule))
      best = sum;
  }
  const std::size_t base_group = result.schedules.size();
  std::size_t best_group = 0;
  if (best) {
    report.best_multi = best->schedule;
    report.best_multi_mean = best->mean_success;
    report.best_multi_std = best->std_success;
    best_group = static_cast<std::size_t>(
        std::find(result.schedules.begin(), result.schedules.end(), best->schedule) - result.schedules.begin());
  }
  for (const auto &cell : result.cells) {
    if (cell.schedule == base_group) report.uni_per_seed.push_back(cell.final_success);
    else if (best && cell.schedule == best_group) report.best_multi_per_seed.push_back(cell.final_success);
  }
  return report;
}

void write_cells_csv(std::ostream &out, const SweepResult &result) {
  const std::size_t cols = schedule_columns(result);
  out << "# msrl sweep_cells v1\nlabel";
  for (std::size_t i = 0; i < cols; ++i) out << ",t_" << i + 1;
  out << ",seed,L,success,goal_episodes,non_goal_episodes,timeout_episodes,error\n";
  for (const auto &cell : result.cells) {
    const StageSchedule &schedule = cell.baseline ? *result.baseline : result.schedules[cell.schedule];
    out << label_for(cell.schedule, cell.baseline);
    write_schedule_columns(out, schedule, cols);
    out << ',' << cell.seed << ',' << (cell.convergence ? std::to_string(*cell.convergence) : "NOT_CONVERGED") << ','
        << format_fixed(cell.final_success) << ',' << cell.goal_episodes << ',' << cell.non_goal_episodes << ','
        << cell.timeout_episodes << ',' << csv_safe(cell.error) << '\n';
  }
}

void write_summary_csv(std::ostream &out, const SweepResult &result, NotConvergedPolicy policy) {
  const std::size_t cols = schedule_columns(result);
  out << "# msrl sweep_summary v1 not_converged=" << to_string(policy) << "\nlabel";
  for (std::size_t i = 0; i < cols; ++i) out << ",t_" << i + 1;
  out << ",runs,converged,mean_L,std_L,mean_success,std_success\n";
  for (const auto &sum : result.summarize(policy)) {
    out << sum.label;
    write_schedule_columns(out, sum.schedule, cols);
    out << ',' << sum.runs << ',' << sum.converged << ',' << format_fixed(sum.mean_l, 3) << ','
        << format_fixed(sum.std_l, 3) << ',' << format_fixed(sum.mean_success) << ','
        << format_fixed(sum.std_success) << '\n';
  }
}

void write_curves(std::ostream &out, const SweepResult &result) {
  const std::size_t groups = result.schedules.size() + (result.baseline ? 1 : 0);
  out << "# msrl success_curves v1: one block per schedule; columns step mean_success std_success\n";
  for (std::size_t g = 0; g < groups; ++g) {
    const bool is_base = g == result.schedules.size();
    std::vector<const CellResult *> members;
    for (const auto &cell : result.cells)
      if (cell.schedule == g && cell.error.empty()) members.push_back(&cell);
    out << "# " << label_for(g, is_base) << ' ' << to_string(is_base ? *result.baseline : result.schedules[g]) << '\n';
    if (!members.empty()) {
      for (std::size_t k = 0; k < members.front()->success_curve.size(); ++k) {
        std::vector<double> xs;
        for (const auto *m : members) xs.push_back(m->success_curve[k].second);
        const auto [mean, sd] = mean_std(xs);
        out << members.front()->success_curve[k].first << ' ' << format_fixed(mean) << ' ' << format_fixed(sd) << '\n';
      }
    }
    out << "\n\n";
  }
}

bool write_report(std::ostream &out, const SweepResult &result, NotConvergedPolicy policy) {
  bool converged = true;
  out << "critical period (" << to_string(policy) << " NOT_CONVERGED handling)\n";
  try {
    const StageSchedule best = critical_period(result, policy);
    for (const auto &sum : result.summarize(policy))
      if (!sum.baseline && sum.schedule == best)
        out << "  t* = " << to_string(best) << "  mean L = " << format_fixed(sum.mean_l, 1) << " +- "
            << format_fixed(sum.std_l, 1) << '\n';
    if (best.size() >= 2)
      out << "  stage-2 window = [" << best.transitions()[0] << ", " << best.transitions()[1] << ")\n";
  } catch (const AllDivergedError &) {
    converged = false;
    out << "  ALL_DIVERGED: no schedule reached eps-convergence on every seed\n";
  }

  out << "\nfinal success rate by schedule (fallback comparator)\n";
  for (const auto &sum : result.summarize(policy))
    out << "  " << sum.label << ' ' << to_string(sum.schedule) << "  success " << format_fixed(sum.mean_success, 3)
        << " +- " << format_fixed(sum.std_success, 3) << "  converged " << sum.converged << '/' << sum.runs << '\n';

  if (result.baseline) {
    const ComparisonReport cmp = compare_uni_multi(result);
    out << "\nuni- vs multi-stage\n";
    if (cmp.best_multi)
      out << "  best multi " << to_string(*cmp.best_multi) << "  " << format_fixed(cmp.best_multi_mean, 3) << " +- "
          << format_fixed(cmp.best_multi_std, 3) << '\n';
    else
      out << "  best multi: none\n";
    out << "  uni        " << format_fixed(cmp.uni_mean, 3) << " +- " << format_fixed(cmp.uni_std, 3) << '\n';
    out << "  margin     " << format_fixed(cmp.margin(), 3) << '\n';
  }
  return converged;
}

}  // namespace msrl
