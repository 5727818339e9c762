#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ldbuffer/crosscheck.hpp"
#include "ldbuffer/equilibrium.hpp"
#include "ldbuffer/error.hpp"
#include "ldbuffer/model.hpp"
#include "ldbuffer/pathspace.hpp"
#include "ldbuffer/ratefn.hpp"
#include "ldbuffer/simulate.hpp"
#include "ldbuffer/varsolver.hpp"

namespace ldb::cli {

namespace {

using nlohmann::json;

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// JSON has no infinity; unbounded values are written as null.
json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

void emit(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

void with_output(const std::string& path, std::ostream& fallback,
                 const std::function<void(std::ostream&)>& write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  std::ofstream file(path);
  if (!file) fail(ErrorKind::IoError, "cannot write " + path);
  write(file);
}

Vector require_dim(const std::vector<double>& v, const JumpModel& model, const char* flag) {
  if (static_cast<int>(v.size()) != model.dim())
    throw CLI::ValidationError(flag, "expected " + std::to_string(model.dim()) + " components");
  return to_vector(v);
}

struct Common {
  std::string model_path;
  unsigned threads = 0;
};

void add_model(CLI::App* app, Common& c) {
  app->add_option("--model", c.model_path, "model JSON file")->required()->check(CLI::ExistingFile);
}

void add_threads(CLI::App* app, Common& c) {
  app->add_option("--threads", c.threads, "worker threads (0 = LDBUFFER_THREADS or all cores)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Large-deviation buffer overflow toolkit", "ldbuffer"};
  app.require_subcommand(1);
  Common common;
  std::function<void()> action;

  // model validate
  auto* model_cmd = app.add_subcommand("model", "model utilities");
  model_cmd->require_subcommand(1);
  auto* validate_cmd = model_cmd->add_subcommand(
      "validate",
      "check a model file.\nOutput JSON: {\"ok\": bool, \"failures\": [string], \"K\": int, "
      "\"transitions\": int}");
  add_model(validate_cmd, common);
  validate_cmd->callback([&] {
    action = [&] {
      const JumpModel model = load_model(common.model_path);
      const ValidationReport report = validate(model);
      emit(out, json{{"ok", report.ok()},
                     {"failures", report.failures},
                     {"K", model.dim()},
                     {"transitions", model.num_transitions()}});
      if (!report.ok()) fail(ErrorKind::InvalidArgument, "model failed validation");
    };
  });

  // rate eval
  std::vector<double> rate_x, rate_y, rate_frozen;
  auto* rate_cmd = app.add_subcommand("rate", "local cost utilities");
  rate_cmd->require_subcommand(1);
  auto* eval_cmd = rate_cmd->add_subcommand(
      "eval",
      "evaluate the local cost l(x, y).\nOutput JSON: {\"value\": num|null, \"theta\": [num], "
      "\"hamiltonian_rates\": [num]}");
  add_model(eval_cmd, common);
  eval_cmd->add_option("--x", rate_x, "state x (comma separated)")->required()->delimiter(',');
  eval_cmd->add_option("--y", rate_y, "velocity y (comma separated)")->required()->delimiter(',');
  eval_cmd->add_option("--frozen-at", rate_frozen, "freeze rates at this anchor")->delimiter(',');
  eval_cmd->callback([&] {
    action = [&] {
      const JumpModel model = load_model(common.model_path);
      const Vector x = require_dim(rate_x, model, "--x");
      const Vector y = require_dim(rate_y, model, "--y");
      const CostModel cost = rate_frozen.empty()
                                 ? CostModel::state_dependent(model)
                                 : CostModel::frozen(freeze(model, require_dim(rate_frozen, model, "--frozen-at")));
      const DualSolve d = cost.cost(x, y);
      emit(out, json{{"value", number(d.value)},
                     {"theta", to_json(d.theta_star)},
                     {"hamiltonian_rates", to_json(cost.rates_at(x))}});
    };
  });

  // solve
  std::vector<double> solve_x0, solve_frozen;
  double solve_b = 1.0;
  double solve_T = 0.0;
  std::string solve_out, solve_buffer_out;
  SolverOptions solver;
  auto* solve_cmd = app.add_subcommand(
      "solve",
      "minimum-cost path to buffer level B (free terminal time unless --T).\n"
      "Output JSON: {\"T\", \"cost\", \"buffer_terminal\", \"active\", \"starts\", \"spread\", "
      "\"multiplier\", \"evaluations\", \"concavity_gap\", \"min_inflow_margin\"}; "
      "path CSV t,x1..xK via --out, buffer CSV t,B via --buffer-out");
  add_model(solve_cmd, common);
  add_threads(solve_cmd, common);
  solve_cmd->add_option("--x0", solve_x0, "start point on/above <x,a> = C")->required()->delimiter(',');
  solve_cmd->add_option("--B", solve_b, "buffer level")->required()->check(CLI::NonNegativeNumber);
  solve_cmd->add_option("--T", solve_T, "fixed terminal time (0 = free)")->check(CLI::NonNegativeNumber);
  solve_cmd->add_option("--frozen-at", solve_frozen, "freeze rates at this anchor")->delimiter(',');
  solve_cmd->add_option("--grid", solver.grid, "segments per path")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--starts", solver.starts, "multi-starts per terminal time")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--seed", solver.seed, "seed for randomized starts");
  solve_cmd->add_option("--t-initial", solver.t_initial, "initial terminal time guess")->check(CLI::NonNegativeNumber);
  solve_cmd->add_option("--t-min", solver.t_min, "lower bracket cap")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--t-max", solver.t_max, "upper bracket cap")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--t-tol", solver.t_rel_tol, "relative golden-section width")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--out", solve_out, "path CSV file");
  solve_cmd->add_option("--buffer-out", solve_buffer_out, "buffer trace CSV file");
  solve_cmd->callback([&] {
    action = [&] {
      const JumpModel model = load_model(common.model_path);
      const Vector x0 = require_dim(solve_x0, model, "--x0");
      const CostModel cost = solve_frozen.empty()
                                 ? CostModel::state_dependent(model)
                                 : CostModel::frozen(freeze(model, require_dim(solve_frozen, model, "--frozen-at")));
      solver.threads = common.threads;
      json j;
      std::optional<Path> path;
      if (solve_T > 0.0) {
        const FixedTimeSolution s = solve_fixed_T(cost, x0, solve_T, solve_b, solver);
        j = json{{"T", solve_T},
                 {"cost", s.cost},
                 {"buffer_terminal", s.buffer_terminal},
                 {"multiplier", s.multiplier},
                 {"outer_iterations", s.outer_iterations},
                 {"newton_iterations", s.newton_iterations}};
        path = s.path;
      } else {
        const VariationalSolution s = solve_problem_A(cost, x0, solve_b, solver);
        j = json{{"T", s.T},
                 {"cost", s.cost},
                 {"buffer_terminal", s.buffer_terminal},
                 {"active", s.active},
                 {"starts", s.starts},
                 {"spread", s.spread},
                 {"multiplier", s.multiplier},
                 {"evaluations", s.evaluations}};
        path = s.path;
      }
      const Vector& a = model.buffer_weights();
      const std::vector<double> g = path->net_inflow(a, model.drain());
      j["concavity_gap"] = concavity_gap(*path, a);
      j["min_inflow_margin"] = *std::min_element(g.begin(), g.end());
      emit(out, j);
      if (!solve_out.empty()) with_output(solve_out, out, [&](std::ostream& o) { write_path_csv(o, *path); });
      if (!solve_buffer_out.empty())
        with_output(solve_buffer_out, out, [&](std::ostream& o) {
          write_buffer_csv(o, buffer_value(*path, a, model.drain()));
        });
    };
  });

  // rescale-study
  std::vector<double> study_x, study_b{0.5, 0.1, 0.02};
  SolverOptions study_solver;
  auto* study_cmd = app.add_subcommand(
      "rescale-study",
      "small-buffer rescaling study around the upcrossing point.\n"
      "Output JSON: {\"x_star\": [num], \"reference_T\", \"reference_cost\", \"rows\": "
      "[{\"B\", \"T\", \"scaled_T\", \"cost\", \"scaled_cost\", \"distance\", \"time_error\"}]}");
  add_model(study_cmd, common);
  add_threads(study_cmd, common);
  study_cmd->add_option("--x-star", study_x, "hyperplane point (default: Poisson upcrossing point)")->delimiter(',');
  study_cmd->add_option("--B-list", study_b, "strictly decreasing buffer levels")->delimiter(',');
  study_cmd->add_option("--grid", study_solver.grid, "segments per path")->check(CLI::PositiveNumber);
  study_cmd->add_option("--starts", study_solver.starts, "multi-starts")->check(CLI::PositiveNumber);
  study_cmd->add_option("--seed", study_solver.seed, "seed for randomized starts");
  study_cmd->callback([&] {
    action = [&] {
      const JumpModel model = load_model(common.model_path);
      const Vector x_star = study_x.empty()
                                ? upcrossing_point(model, SteadyForm::OpenPoisson).x_star
                                : require_dim(study_x, model, "--x-star");
      study_solver.threads = common.threads;
      const ConvergenceTable table = small_buffer_study(model, x_star, study_b, study_solver);
      json rows = json::array();
      for (const ConvergenceRow& r : table.rows)
        rows.push_back(json{{"B", r.b_level},
                            {"T", r.T},
                            {"scaled_T", r.scaled_T},
                            {"cost", r.cost},
                            {"scaled_cost", r.scaled_cost},
                            {"distance", r.distance},
                            {"time_error", r.time_error}});
      emit(out, json{{"x_star", to_json(x_star)},
                     {"reference_T", table.reference_T},
                     {"reference_cost", table.reference_cost},
                     {"rows", rows}});
    };
  });

  // fluid
  std::vector<double> fluid_x0;
  double fluid_horizon = 1.0;
  double fluid_step = 0.01;
  std::string fluid_out;
  auto* fluid_cmd = app.add_subcommand(
      "fluid",
      "integrate the fluid limit dz/dt = v(z).\nOutput CSV: t,x1..xK (stdout or --out)");
  add_model(fluid_cmd, common);
  fluid_cmd->add_option("--x0", fluid_x0, "start state")->required()->delimiter(',');
  fluid_cmd->add_option("--horizon", fluid_horizon, "end time")->check(CLI::PositiveNumber);
  fluid_cmd->add_option("--step", fluid_step, "sample spacing")->check(CLI::PositiveNumber);
  fluid_cmd->add_option("--out", fluid_out, "CSV file");
  fluid_cmd->callback([&] {
    action = [&] {
      const JumpModel model = load_model(common.model_path);
      const FluidTrajectory traj =
          fluid_trajectory(model, require_dim(fluid_x0, model, "--x0"), fluid_horizon, fluid_step);
      with_output(fluid_out, out, [&](std::ostream& o) {
        o << "t";
        for (int j = 1; j <= model.dim(); ++j) o << ",x" << j;
        o << '\n' << std::setprecision(17);
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
          o << traj.times[i];
          for (int j = 0; j < model.dim(); ++j) o << ',' << traj.states[i](j);
          o << '\n';
        }
      });
    };
  });

  // upcross
  std::string steady_form = "poisson";
  std::vector<double> upcross_pi;
  double population = 0.0;
  auto* upcross_cmd = app.add_subcommand(
      "upcross",
      "attracting point q and minimum-entropy point x* on <x,a> = C.\n"
      "Output JSON: {\"q\": [num], \"q_stable\": bool, \"x_star\": [num], \"beta\", \"entropy\", "
      "\"residual\", \"hessian_positive\", \"x_dot_v\", \"a_dot_v\"}");
  add_model(upcross_cmd, common);
  upcross_cmd->add_option("--steady-form", steady_form, "poisson | multinomial")
      ->check(CLI::IsMember({"poisson", "multinomial"}));
  upcross_cmd->add_option("--pi", upcross_pi, "steady-state means (default q)")->delimiter(',');
  upcross_cmd->add_option("--population", population, "closed population (default sum q)");
  upcross_cmd->callback([&] {
    action = [&] {
      const JumpModel model = load_model(common.model_path);
      const AttractingPoint q = attracting_point(model);
      std::optional<Vector> pi;
      if (!upcross_pi.empty()) pi = require_dim(upcross_pi, model, "--pi");
      const UpcrossResult r = upcrossing_point(
          model, steady_form == "poisson" ? SteadyForm::OpenPoisson : SteadyForm::ClosedMultinomial,
          pi, population);
      emit(out, json{{"q", to_json(q.q)},
                     {"q_stable", q.stable},
                     {"x_star", to_json(r.x_star)},
                     {"beta", r.beta},
                     {"entropy", r.entropy},
                     {"residual", r.residual},
                     {"hessian_positive", r.hessian_positive},
                     {"x_dot_v", r.x_dot_v},
                     {"a_dot_v", r.a_dot_v}});
    };
  });

  // simulation commands share these
  int sim_n = 100;
  std::vector<double> sim_x0;
  double sim_horizon = 1.0;
  double sim_b = std::numeric_limits<double>::infinity();
  std::uint64_t sim_seed = 0;
  std::uint64_t sim_trials = 1000;
  double sim_burn_in = 0.0;
  std::string sim_out;
  auto add_sim = [&](CLI::App* cmd, bool needs_b) {
    add_model(cmd, common);
    add_threads(cmd, common);
    cmd->add_option("--n", sim_n, "scale n")->check(CLI::PositiveNumber);
    cmd->add_option("--x0", sim_x0, "start state on (1/n) Z^K")->required()->delimiter(',');
    cmd->add_option("--horizon", sim_horizon, "time horizon")->check(CLI::NonNegativeNumber);
    auto* b = cmd->add_option("--B", sim_b, "overflow level")->check(CLI::NonNegativeNumber);
    if (needs_b) b->required();
    cmd->add_option("--seed", sim_seed, "random seed");
    cmd->add_option("--burn-in", sim_burn_in, "burn-in time before the window")->check(CLI::NonNegativeNumber);
  };
  auto sim_options = [&] {
    SimOptions o;
    o.threads = common.threads;
    o.burn_in = sim_burn_in;
    return o;
  };

  auto* simulate_cmd = app.add_subcommand(
      "simulate",
      "one exact SSA run of (z_n, b_n).\nOutput CSV: t,x1..xK,b,event (stdout or --out); "
      "summary JSON {\"events\", \"overflow_time\", \"dead\", \"cap_hits\"} on stdout when --out is set");
  add_sim(simulate_cmd, false);
  simulate_cmd->add_option("--out", sim_out, "trace CSV file");
  simulate_cmd->callback([&] {
    action = [&] {
      const JumpModel model = load_model(common.model_path);
      const SimRun run = ssa_simulate(model, sim_n, require_dim(sim_x0, model, "--x0"),
                                      sim_horizon, sim_b, sim_seed, sim_options());
      with_output(sim_out, out, [&](std::ostream& o) { write_run_csv(o, run); });
      if (!sim_out.empty())
        emit(out, json{{"events", run.events},
                       {"overflow_time", run.overflow_time ? json(*run.overflow_time) : json(nullptr)},
                       {"dead", run.dead},
                       {"cap_hits", run.cap_hits}});
    };
  });

  auto* overflow_cmd = app.add_subcommand(
      "overflow",
      "Monte Carlo overflow probability.\nOutput JSON: {\"n\", \"B\", \"trials\", \"hits\", "
      "\"p_hat\", \"ci95\": [lo, hi], \"log_rate\" (null = infinite), \"log_rate_ci\": [lo, hi], "
      "\"cap_hits\", \"dead_runs\"}");
  add_sim(overflow_cmd, true);
  overflow_cmd->add_option("--trials", sim_trials, "independent trials")->check(CLI::PositiveNumber);
  overflow_cmd->callback([&] {
    action = [&] {
      const JumpModel model = load_model(common.model_path);
      const OverflowEstimate e =
          overflow_probability(model, sim_n, require_dim(sim_x0, model, "--x0"), sim_b, sim_horizon,
                               sim_trials, sim_seed, sim_options());
      emit(out, json{{"n", e.n},
                     {"B", e.b_level},
                     {"trials", e.trials},
                     {"hits", e.hits},
                     {"p_hat", e.p_hat},
                     {"ci95", {e.ci_low, e.ci_high}},
                     {"log_rate", number(e.log_rate)},
                     {"log_rate_ci", {number(e.log_rate_low), number(e.log_rate_high)}},
                     {"cap_hits", e.cap_hits},
                     {"dead_runs", e.dead_runs}});
    };
  });

  double cond_window = 1.0;
  int cond_mesh = 200;
  std::uint64_t cond_max_hits = 200;
  auto* conditional_cmd = app.add_subcommand(
      "conditional",
      "mean path of runs that overflow, aligned at the overflow time.\n"
      "Output CSV: t,x1..xK,envelope (stdout or --out; t = window is the overflow instant)");
  add_sim(conditional_cmd, true);
  conditional_cmd->add_option("--trials", sim_trials, "independent trials")->check(CLI::PositiveNumber);
  conditional_cmd->add_option("--window", cond_window, "window length before overflow")->check(CLI::PositiveNumber);
  conditional_cmd->add_option("--mesh", cond_mesh, "mesh points")->check(CLI::Range(2, 1 << 20));
  conditional_cmd->add_option("--max-hits", cond_max_hits, "hits used for the statistics")->check(CLI::PositiveNumber);
  conditional_cmd->add_option("--out", sim_out, "CSV file");
  conditional_cmd->callback([&] {
    action = [&] {
      const JumpModel model = load_model(common.model_path);
      const ConditionalPaths c = conditional_paths(
          model, sim_n, require_dim(sim_x0, model, "--x0"), sim_b, sim_horizon, sim_trials, sim_seed,
          cond_window, cond_mesh, cond_max_hits, sim_options());
      with_output(sim_out, out, [&](std::ostream& o) {
        o << "t";
        for (int j = 1; j <= model.dim(); ++j) o << ",x" << j;
        o << ",envelope\n" << std::setprecision(17);
        for (std::size_t m = 0; m < c.times.size(); ++m) {
          o << c.times[m];
          for (int j = 0; j < model.dim(); ++j) o << ',' << c.mean(j, static_cast<Eigen::Index>(m));
          o << ',' << c.envelope[m] << '\n';
        }
      });
    };
  });

  // bd-rate
  std::string source_path;
  double bd_b = 1.0;
  double bd_c = 0.0;
  auto* bd_cmd = app.add_subcommand(
      "bd-rate",
      "overflow decay rate of one Markov fluid source (inf over t of sup over theta).\n"
      "Output JSON: {\"rate\" (null = infinite), \"t_star\", \"theta_star\", \"mean_rate\", \"peak_rate\"}");
  bd_cmd->add_option("--source", source_path, "source JSON {\"Q\": [[..]], \"rates\": [..]}")
      ->required()
      ->check(CLI::ExistingFile);
  bd_cmd->add_option("--b", bd_b, "scaled buffer level")->check(CLI::PositiveNumber);
  bd_cmd->add_option("--c", bd_c, "drain rate")->required();
  bd_cmd->callback([&] {
    action = [&] {
      const SourceModel src = load_source(source_path);
      const DecayRate r = bd_decay_rate(src, bd_b, bd_c);
      emit(out, json{{"rate", number(r.rate)},
                     {"t_star", r.t_star},
                     {"theta_star", r.theta_star},
                     {"mean_rate", src.mean_rate()},
                     {"peak_rate", src.peak_rate()}});
    };
  });

  try {
    app.parse(argc, argv);
    if (!action) throw CLI::CallForHelp();
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    action();
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << json{{"kind", std::string(kind_name(e.kind()))}, {"message", e.what()}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << json{{"kind", "Internal"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace ldb::cli
