#include "msrl/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <utility>

namespace msrl {

using nlohmann::json;

namespace {

template <typename E>
using NameTable = std::vector<std::pair<const char *, E>>;

const NameTable<gridnav::Metric> kMetrics{{"chebyshev", gridnav::Metric::chebyshev},
                                          {"manhattan", gridnav::Metric::manhattan},
                                          {"euclidean", gridnav::Metric::euclidean}};
const NameTable<ObservationMode> kObservations{{"position", ObservationMode::position},
                                               {"state", ObservationMode::state}};
const NameTable<gridnav::BonusSemantics> kSemantics{{"one_time", gridnav::BonusSemantics::one_time},
                                                    {"per_step", gridnav::BonusSemantics::per_step}};
const NameTable<Algorithm> kAlgorithms{{"q_learning", Algorithm::q_learning},
                                       {"actor_critic", Algorithm::actor_critic}};
const NameTable<AnchorChoice> kAnchors{{"first", AnchorChoice::first}, {"last", AnchorChoice::last}};
const NameTable<NestingDirection> kDirections{{"shrinking", NestingDirection::shrinking},
                                              {"growing", NestingDirection::growing}};
const NameTable<NestingChecks> kChecks{
    {"both", NestingChecks::both}, {"support", NestingChecks::support}, {"optimality", NestingChecks::optimality}};
const NameTable<NotConvergedPolicy> kNotConverged{{"strict", NotConvergedPolicy::strict},
                                                  {"lenient", NotConvergedPolicy::lenient}};

template <typename E>
const char *name_of(const NameTable<E> &table, E value) {
  for (const auto &[name, v] : table)
    if (v == value) return name;
  throw std::logic_error("name_of: unnamed enumerator");
}

/// Reads the members of one JSON object and rejects any it was not asked about.
class ObjectReader {
 public:
  ObjectReader(const json &obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string &key, const std::string &msg) const {
    throw ConfigError(where_ + "." + key + ": " + msg);
  }
  [[noreturn]] void fail(const std::string &msg) const { throw ConfigError(where_ + ": " + msg); }

  const json *find(const char *key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  template <typename T>
  void read(const char *key, T &out) {
    if (const json *v = find(key)) convert(*v, key, out);
  }

  template <typename E>
  void read_enum(const char *key, const NameTable<E> &table, E &out) {
    const json *v = find(key);
    if (!v) return;
    if (!v->is_string()) fail(key, "expected a string");
    const auto text = v->get<std::string>();
    for (const auto &[name, value] : table)
      if (text == name) {
        out = value;
        return;
      }
    std::string allowed;
    for (const auto &entry : table) allowed += std::string(allowed.empty() ? "" : ", ") + entry.first;
    fail(key, "unknown value '" + text + "' (expected one of: " + allowed + ")");
  }

  void finish() const {
    for (const auto &item : obj_.items())
      if (!seen_.count(item.key())) fail(item.key(), "unknown key");
  }

 private:
  void convert(const json &v, const char *key, bool &out) const {
    if (!v.is_boolean()) fail(key, "expected a boolean");
    out = v.get<bool>();
  }
  void convert(const json &v, const char *key, int &out) const {
    if (!v.is_number_integer()) fail(key, "expected an integer");
    const auto x = v.get<std::int64_t>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) fail(key, "out of range");
    out = static_cast<int>(x);
  }
  void convert(const json &v, const char *key, std::int64_t &out) const {
    if (!v.is_number_integer() || (v.is_number_unsigned() && v.get<std::uint64_t>() > INT64_MAX))
      fail(key, "expected an integer");
    out = v.get<std::int64_t>();
  }
  void convert(const json &v, const char *key, std::uint64_t &out) const {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      fail(key, "expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  void convert(const json &v, const char *key, double &out) const {
    if (!v.is_number()) fail(key, "expected a number");
    out = v.get<double>();
  }
  void convert(const json &v, const char *key, std::string &out) const {
    if (!v.is_string()) fail(key, "expected a string");
    out = v.get<std::string>();
  }
  template <typename T>
  void convert(const json &v, const char *key, std::optional<T> &out) const {
    T x{};
    convert(v, key, x);
    out = x;
  }
  template <typename T>
  void convert(const json &v, const char *key, std::vector<T> &out) const {
    if (!v.is_array()) fail(key, "expected an array");
    out.clear();
    for (const auto &item : v) {
      T x{};
      convert(item, key, x);
      out.push_back(std::move(x));
    }
  }

  const json &obj_;
  std::string where_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string &where, const std::string &msg) {
  if (!ok) throw ConfigError(where + ": " + msg);
}

EnvConfig parse_env(const json &doc) {
  EnvConfig c;
  ObjectReader r(doc, "env");
  r.read("level", c.level);
  r.read("grid_size", c.grid_size);
  r.read("layout_seed", c.layout_seed);
  r.read("eval_set_size", c.eval_set_size);
  r.read("time_limit", c.time_limit);
  r.read_enum("metric", kMetrics, c.metric);
  r.read("gamma", c.gamma);
  r.read_enum("observation", kObservations, c.observation);
  r.read("state_cap", c.state_cap);
  r.read("mdp_file", c.mdp_file);
  r.finish();
  require(c.level >= 1 && c.level <= 3, "env.level", "must be 1, 2 or 3");
  require(c.grid_size >= 5 && c.grid_size % 2 == 1, "env.grid_size", "must be odd and at least 5");
  require(c.eval_set_size >= 1, "env.eval_set_size", "must be positive");
  require(!c.time_limit || *c.time_limit >= 1, "env.time_limit", "must be positive");
  require(c.gamma >= 0.0 && c.gamma < 1.0, "env.gamma", "must lie in [0, 1)");
  require(c.state_cap >= 1, "env.state_cap", "must be positive");
  return c;
}

GuidanceConfig parse_guidance(const json &doc) {
  GuidanceConfig c;
  ObjectReader r(doc, "guidance");
  r.read("stages", c.stages);
  r.read_enum("semantics", kSemantics, c.semantics);
  r.read("shaping_only", c.shaping_only);
  if (const json *rw = r.find("rewards")) {
    ObjectReader rr(*rw, "guidance.rewards");
    auto &p = c.rewards;
    rr.read("goal", p.goal);
    rr.read("non_goal", p.non_goal);
    rr.read("timeout", p.timeout);
    rr.read("step", p.step);
    rr.read("goal_bonus", p.goal_bonus);
    rr.read("non_goal_penalty", p.non_goal_penalty);
    rr.finish();
  }
  r.finish();
  c.rewards.semantics = c.semantics;
  require(!c.stages.empty(), "guidance.stages", "must not be empty");
  for (std::size_t i = 0; i < c.stages.size(); ++i) {
    require(c.stages[i] >= 1 && c.stages[i] <= 3, "guidance.stages", "stages are 1, 2 or 3");
    require(i == 0 || c.stages[i] > c.stages[i - 1], "guidance.stages", "must be strictly increasing");
  }
  for (double x : {c.rewards.goal, c.rewards.non_goal, c.rewards.timeout, c.rewards.step, c.rewards.goal_bonus,
                   c.rewards.non_goal_penalty})
    require(std::isfinite(x), "guidance.rewards", "values must be finite");
  return c;
}

StageSchedule make_schedule(const std::vector<std::int64_t> &t, const std::string &where) {
  try {
    return StageSchedule(t);
  } catch (const std::invalid_argument &e) {
    throw ConfigError(where + ": " + e.what());
  }
}

ScheduleConfig parse_schedule(const json &doc) {
  ScheduleConfig c;
  ObjectReader r(doc, "schedule");
  std::vector<std::vector<std::int64_t>> explicit_list;
  r.read("transitions", explicit_list);
  const json *grid_doc = r.find("grid");
  r.read("seeds", c.seeds);
  r.read("uni_stage_baseline", c.uni_stage_baseline);
  r.read("workers", c.workers);
  r.finish();

  require(explicit_list.empty() || !grid_doc, "schedule", "give either transitions or grid, not both");
  if (grid_doc) {
    ScheduleGrid grid;
    ObjectReader g(*grid_doc, "schedule.grid");
    g.read("t1", grid.t1);
    g.read("offsets", grid.offsets);
    g.finish();
    require(!grid.t1.empty() && !grid.offsets.empty(), "schedule.grid", "t1 and offsets must be non-empty");
    try {
      c.transitions = grid.expand();
    } catch (const std::invalid_argument &e) {
      throw ConfigError(std::string("schedule.grid: ") + e.what());
    }
  } else if (!explicit_list.empty()) {
    for (const auto &t : explicit_list) c.transitions.push_back(make_schedule(t, "schedule.transitions"));
  } else {
    c.transitions = ScheduleGrid{{10'000, 20'000, 30'000}, {{0, 20'000, 40'000}}}.expand();
  }
  require(!c.seeds.empty(), "schedule.seeds", "must not be empty");
  require(c.workers >= 1, "schedule.workers", "must be positive");
  return c;
}

TrainerConfig parse_trainer(const json &doc) {
  TrainerConfig c;
  ObjectReader r(doc, "trainer");
  r.read_enum("algorithm", kAlgorithms, c.algorithm);
  r.read("learning_rate", c.learning_rate);
  r.read("learning_rate_power", c.learning_rate_power);
  r.read("actor_learning_rate", c.actor_learning_rate);
  r.read("critic_learning_rate", c.critic_learning_rate);
  r.read("epsilon_start", c.epsilon_start);
  r.read("epsilon_end", c.epsilon_end);
  r.read("epsilon_decay_steps", c.epsilon_decay_steps);
  r.read("temperature", c.temperature);
  r.read("total_steps", c.total_steps);
  r.read("snapshot_every", c.snapshot_every);
  r.read("seed", c.seed);
  r.finish();
  require(c.total_steps >= 0, "trainer.total_steps", "must not be negative");
  require(c.snapshot_every >= 0, "trainer.snapshot_every", "must not be negative");
  require(c.epsilon_decay_steps >= 0, "trainer.epsilon_decay_steps", "must not be negative");
  return c;
}

MeasurementConfig parse_measurement(const json &doc) {
  MeasurementConfig c;
  ObjectReader r(doc, "measurement");
  r.read("eps", c.eps);
  r.read_enum("anchor", kAnchors, c.anchor);
  r.read("tie_tol", c.tie_tol);
  r.read("vi_tol", c.vi_tol);
  r.read_enum("direction", kDirections, c.direction);
  r.read_enum("checks", kChecks, c.checks);
  r.read_enum("not_converged", kNotConverged, c.not_converged);
  r.read("episodes_per_env", c.episodes_per_env);
  r.finish();
  require(c.eps > 0 && std::isfinite(c.eps), "measurement.eps", "must be positive and finite");
  require(c.tie_tol > 0 && std::isfinite(c.tie_tol), "measurement.tie_tol", "must be positive and finite");
  require(c.vi_tol > 0 && std::isfinite(c.vi_tol), "measurement.vi_tol", "must be positive and finite");
  require(c.episodes_per_env >= 1, "measurement.episodes_per_env", "must be positive");
  return c;
}

OutputConfig parse_output(const json &doc) {
  OutputConfig c;
  ObjectReader r(doc, "output");
  r.read("directory", c.directory);
  r.finish();
  require(!c.directory.empty(), "output.directory", "must not be empty");
  return c;
}

}  // namespace

std::vector<StageSchedule> ScheduleGrid::expand() const {
  std::vector<StageSchedule> out;
  for (auto t : t1)
    for (const auto &offs : offsets) {
      std::vector<std::int64_t> ts;
      for (auto o : offs) ts.push_back(t + o);
      out.emplace_back(std::move(ts));
    }
  return out;
}

const char *to_string(NestingChecks checks) { return name_of(kChecks, checks); }

EnvSpec ExperimentConfig::env_spec() const {
  EnvSpec spec;
  spec.level = env.level;
  spec.grid_size = env.grid_size;
  spec.layout_seed = env.layout_seed;
  spec.eval_set_size = env.eval_set_size;
  spec.options.time_limit = env.time_limit;
  spec.options.metric = env.metric;
  spec.options.rewards = guidance.rewards;
  spec.options.rewards.semantics = guidance.semantics;
  spec.options.gamma = env.gamma;
  spec.observation = env.observation;
  spec.state_cap = env.state_cap;
  return spec;
}

SweepSpec ExperimentConfig::sweep_spec() const {
  SweepSpec spec;
  spec.env = env_spec();
  spec.stages = guidance.stages;
  spec.schedule_grid = schedule.transitions;
  spec.seeds = schedule.seeds;
  spec.eps = measurement.eps;
  spec.vi_tol = measurement.vi_tol;
  spec.trainer = trainer;
  spec.uni_stage_baseline = schedule.uni_stage_baseline;
  spec.anchor = measurement.anchor;
  spec.workers = schedule.workers;
  spec.episodes_per_env = measurement.episodes_per_env;
  return spec;
}

ExperimentConfig parse_config(const json &doc) {
  ExperimentConfig c;
  ObjectReader r(doc, "config");
  static const json empty = json::object();
  auto block = [&](const char *key) -> const json & {
    const json *v = r.find(key);
    return v ? *v : empty;
  };
  c.env = parse_env(block("env"));
  c.guidance = parse_guidance(block("guidance"));
  c.schedule = parse_schedule(block("schedule"));
  c.trainer = parse_trainer(block("trainer"));
  c.measurement = parse_measurement(block("measurement"));
  c.output = parse_output(block("output"));
  r.finish();

  for (const auto &s : c.schedule.transitions)
    require(s.size() == c.guidance.stages.size(), "schedule.transitions",
            "schedule " + to_string(s) + " does not have one transition per guidance stage");
  if (!c.env.time_limit) c.env.time_limit = gridnav::default_time_limit(c.env.level);
  if (c.trainer.total_steps == 0) {
    for (const auto &s : c.schedule.transitions) c.trainer.total_steps = std::max(c.trainer.total_steps, s.last());
  }
  if (c.trainer.snapshot_every == 0) c.trainer.snapshot_every = c.trainer.resolved_snapshot_every();
  if (c.trainer.epsilon_decay_steps == 0) c.trainer.epsilon_decay_steps = c.trainer.resolved_epsilon_decay_steps();
  try {
    for (const auto &s : c.schedule.transitions) c.trainer.validate(s);
  } catch (const std::invalid_argument &e) {
    throw ConfigError(std::string("trainer: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error &e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(doc);
}

json to_json(const ExperimentConfig &c) {
  json out;
  out["env"] = {{"level", c.env.level},
                {"grid_size", c.env.grid_size},
                {"layout_seed", c.env.layout_seed},
                {"eval_set_size", c.env.eval_set_size},
                {"time_limit", c.env.time_limit.value_or(gridnav::default_time_limit(c.env.level))},
                {"metric", name_of(kMetrics, c.env.metric)},
                {"gamma", c.env.gamma},
                {"observation", name_of(kObservations, c.env.observation)},
                {"state_cap", c.env.state_cap},
                {"mdp_file", c.env.mdp_file}};
  const auto &p = c.guidance.rewards;
  out["guidance"] = {{"stages", c.guidance.stages},
                     {"semantics", name_of(kSemantics, c.guidance.semantics)},
                     {"shaping_only", c.guidance.shaping_only},
                     {"rewards",
                      {{"goal", p.goal},
                       {"non_goal", p.non_goal},
                       {"timeout", p.timeout},
                       {"step", p.step},
                       {"goal_bonus", p.goal_bonus},
                       {"non_goal_penalty", p.non_goal_penalty}}}};
  json transitions = json::array();
  for (const auto &s : c.schedule.transitions) transitions.push_back(s.transitions());
  out["schedule"] = {{"transitions", transitions},
                     {"seeds", c.schedule.seeds},
                     {"uni_stage_baseline", c.schedule.uni_stage_baseline},
                     {"workers", c.schedule.workers}};
  const auto &t = c.trainer;
  out["trainer"] = {{"algorithm", name_of(kAlgorithms, t.algorithm)},
                    {"learning_rate", t.learning_rate},
                    {"learning_rate_power", t.learning_rate_power},
                    {"actor_learning_rate", t.actor_learning_rate},
                    {"critic_learning_rate", t.critic_learning_rate},
                    {"epsilon_start", t.epsilon_start},
                    {"epsilon_end", t.epsilon_end},
                    {"epsilon_decay_steps", t.epsilon_decay_steps},
                    {"temperature", t.temperature},
                    {"total_steps", t.total_steps},
                    {"snapshot_every", t.snapshot_every},
                    {"seed", t.seed}};
  const auto &m = c.measurement;
  out["measurement"] = {{"eps", m.eps},
                        {"anchor", name_of(kAnchors, m.anchor)},
                        {"tie_tol", m.tie_tol},
                        {"vi_tol", m.vi_tol},
                        {"direction", name_of(kDirections, m.direction)},
                        {"checks", name_of(kChecks, m.checks)},
                        {"not_converged", name_of(kNotConverged, m.not_converged)},
                        {"episodes_per_env", m.episodes_per_env}};
  out["output"] = {{"directory", c.output.directory}};
  return out;
}

}  // namespace msrl
