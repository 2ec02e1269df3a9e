#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "kktplan/belief.hpp"
#include "kktplan/extraction.hpp"
#include "kktplan/io.hpp"
#include "kktplan/plot.hpp"
#include "kktplan/policy.hpp"
#include "kktplan/sampled_planners.hpp"
#include "kktplan/sim.hpp"

#ifndef KKTPLAN_VERSION
#define KKTPLAN_VERSION "dev"
#endif

namespace kktplan::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Common {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string out;
  bool verbose = false;
};

struct LatticeFlags {
  double resolution = 0.0;
  std::size_t max_step = 0;
  std::string diagonal = "auto";
};

struct Options {
  Common common;
  LatticeFlags lattice;
  // extract
  std::string engine = "enumerate";
  double grid_h = 0.05;
  std::size_t partitions = 1;
  // plan
  std::string variant = "epsmin";
  double eps = 0.1;
  double buffer = 0.0;
  std::size_t samples = 32;
  std::size_t scenario_samples = 200;
  double beta = 1.0;
  bool linear = false;
  std::string roadmap;
  // simulate / benchmark
  std::string policy = "epsmin";
  std::string policies = "epsmin,scenario,optimistic";
  std::size_t trials = 1;
  std::size_t bench_trials = 100;
  std::size_t tree_depth = 0;
  std::string sensor = "bump";
  std::string trigger = "on-unsafe";
  double rho = 0.0;
  std::size_t threads = 0;
  std::string histogram;
  // plot
  std::vector<std::string> plan_files;
  std::string trace_file;
  std::string belief_file;
  std::string title;
  // rerun
  std::string manifest;
};

class Log {
 public:
  explicit Log(bool on) : on_(on), t0_(std::chrono::steady_clock::now()) {}
  void operator()(const std::string& msg) const {
    if (!on_) return;
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    std::fprintf(stderr, "[%8.3f s] %s\n", s, msg.c_str());
  }

 private:
  bool on_;
  std::chrono::steady_clock::time_point t0_;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Lattice lattice_for(const Scenario& sc, const LatticeFlags& f) {
  const Dynamics& dyn = sc.task.dynamics;
  double r = f.resolution;
  std::size_t max_step = f.max_step;
  bool diagonal = true;
  if (r <= 0.0 && sc.lattice.resolution > 0.0) {
    r = sc.lattice.resolution;
    if (f.max_step == 0) max_step = sc.lattice.max_step;
    diagonal = sc.lattice.diagonal;
  }
  if (r <= 0.0) {
    double w = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < dyn.dim; ++i) w = std::min(w, dyn.state_bounds.width(i));
    r = w / 20.0;
  }
  if (f.diagonal == "on") diagonal = true;
  if (f.diagonal == "off") diagonal = false;
  return Lattice::for_dynamics(dyn, r, max_step, diagonal);
}

Belief belief_for(const Scenario& sc, const Options& o, const Log& log) {
  if (sc.demos.empty()) {
    log("no demonstrations: belief is uniform over the prior");
    return belief_from_support(BoxUnion{sc.model.theta_prior()});
  }
  ExtractionOptions eo;
  eo.engine = parse_engine(o.engine);
  eo.grid_h = o.grid_h;
  const ExtractionResult r = o.partitions > 1 ? extract_partitioned(sc.demos, sc.task, sc.model, o.partitions, eo)
                                              : extract(sc.demos, sc.task, sc.model, eo);
  log("extracted " + std::to_string(r.f_theta.size()) + " boxes in " + std::to_string(r.iterations) + " iterations");
  return belief_from_extraction(r);
}

PolicyConfig policy_config(const Scenario& sc, const Options& o, const std::string& planner) {
  PolicyConfig c;
  c.planner = parse_policy_planner(planner);
  c.lattice = lattice_for(sc, o.lattice);
  c.eps = o.eps;
  c.optimistic_buffer = o.buffer;
  c.scenario_samples = o.scenario_samples;
  c.roadmap_samples = o.samples;
  c.btp_beta = o.beta;
  c.seed = o.common.seed;
  c.tree_depth = o.tree_depth;
  if (o.trigger == "on-unsafe") {
    c.trigger = Trigger::OnUnsafe;
  } else if (o.trigger == "improve") {
    c.trigger = Trigger::OnUnsafeOrImprove;
  } else {
    throw ValidationError("trigger", "expected on-unsafe or improve");
  }
  c.rho = o.rho;
  c.validate();
  return c;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw ValidationError("policies", "empty list");
  return out;
}

std::string numbered(const std::string& out, std::size_t i) {
  const fs::path p(out);
  fs::path name = p.stem();
  name += "_" + std::to_string(i);
  name += p.extension();
  return (p.parent_path() / name).string();
}

std::string with_suffix(const std::string& out, const std::string& suffix) {
  const fs::path p(out);
  fs::path name = p.stem();
  name += suffix;
  name += p.extension();
  return (p.parent_path() / name).string();
}

void write_file(const std::string& path, const std::string& text, std::vector<std::string>& outputs) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  write_text_file(path, text);
  outputs.push_back(path);
}

void write_manifest(const std::string& command, const std::vector<std::string>& args, const Options& o,
                    const std::vector<std::string>& outputs) {
  json m{{"command", command},
         {"argv", args},
         {"scenario", o.common.scenario},
         {"seed", o.common.seed},
         {"version", KKTPLAN_VERSION},
         {"outputs", outputs}};
  write_text_file(manifest_path(o.common.out), m.dump(2) + "\n");
}

// ---- commands -------------------------------------------------------------

int cmd_extract(const Options& o, std::vector<std::string>& outputs, const Log& log) {
  const Scenario sc = load_scenario(o.common.scenario);
  ExtractionOptions eo;
  eo.engine = parse_engine(o.engine);
  eo.grid_h = o.grid_h;
  const ExtractionResult r = o.partitions > 1 ? extract_partitioned(sc.demos, sc.task, sc.model, o.partitions, eo)
                                              : extract(sc.demos, sc.task, sc.model, eo);
  log("extraction done: " + std::to_string(r.f_theta.size()) + " boxes");
  json doc = boxes_to_json(r.f_theta);
  doc["iterations"] = r.iterations;
  doc["engine"] = to_string(r.engine);
  write_file(o.common.out, doc.dump(2) + "\n", outputs);
  return kExitOk;
}

int cmd_plan(const Options& o, std::vector<std::string>& outputs, const Log& log) {
  const Scenario sc = load_scenario(o.common.scenario);
  const Belief belief = belief_for(sc, o, log);
  const bool roadmap_variant = o.variant == "mcr" || o.variant == "btp";
  if (roadmap_variant && !o.roadmap.empty()) {
    const Roadmap rm = roadmap_from_json(json::parse(read_text_file(o.roadmap)));
    const auto samples = sample_belief(belief, o.samples, o.common.seed);
    SampledOptions so;
    so.spacing = lattice_for(sc, o.lattice).spacing();
    json doc;
    if (o.variant == "mcr") {
      const McrResult r = mcr_plan(rm, samples, sc.model, so);
      if (r.path.empty()) throw InfeasibleError("no roadmap path from start to goal");
      doc = {{"path", r.path}, {"cost", r.cost}, {"violated", r.violated}, {"n_samples", samples.size()}};
    } else {
      const EdgeBeliefs eb = estimate_edge_safety(rm, samples, sc.model, so);
      const auto path = btp_plan(rm, eb, o.beta, o.linear);
      if (path.empty()) throw InfeasibleError("no roadmap path with positive safety estimate");
      doc = {{"path", path}, {"cost", path_cost(rm, path)}, {"edge_p_safe", eb.p_safe}};
    }
    write_file(o.common.out, doc.dump(2) + "\n", outputs);
    return kExitOk;
  }
  const PolicyConfig cfg = policy_config(sc, o, o.variant);
  const Plan plan = plan_with(cfg, belief, sc.task, sc.model);
  log("planned: cost " + num(plan.cost) + ", covered " + num(plan.covered_prob));
  json doc = plan_to_json(plan);
  doc["variant"] = o.variant;
  doc["p_safe"] = prob_traj_safe(belief, sc.task, sc.model, plan.traj, cfg.lattice.spacing());
  write_file(o.common.out, doc.dump(2) + "\n", outputs);
  fs::path csv = fs::path(o.common.out).replace_extension(".csv");
  if (csv == fs::path(o.common.out)) csv = with_suffix(o.common.out, "_traj");
  write_file(csv.string(), trajectory_to_csv(plan.traj), outputs);
  return kExitOk;
}

int cmd_simulate(const Options& o, std::vector<std::string>& outputs, const Log& log) {
  if (o.trials < 1) throw ValidationError("trials", "must be at least 1");
  const Scenario sc = load_scenario(o.common.scenario);
  const Belief belief = belief_for(sc, o, log);
  const PolicyConfig cfg = policy_config(sc, o, o.policy);
  EpisodeOptions ep;
  ep.sensor.kind = parse_sensor_kind(o.sensor);
  std::shared_ptr<const PolicyTree> tree;
  if (o.tree_depth > 0) {
    if (ep.sensor.kind != SensorKind::Bump) throw ValidationError("tree-depth", "contingency trees need bump sensing");
    tree = build_tree(belief, sc.task, cfg, sc.model);
    log("tree built: " + std::to_string(tree->n_nodes()) + " nodes");
  }
  for (std::size_t i = 0; i < o.trials; ++i) {
    const Point theta = trial_theta(belief, o.common.seed, i);
    const ExecutionTrace tr = run_episode(sc.task, sc.model, belief, theta, cfg, ep, o.common.seed ^ i, tree);
    log("trial " + std::to_string(i) + ": " + std::to_string(tr.violations) + " violations" +
        (tr.reached_goal ? "" : ", " + tr.failure));
    std::ostringstream os;
    write_trace_csv(os, tr);
    write_file(o.trials == 1 ? o.common.out : numbered(o.common.out, i), os.str(), outputs);
  }
  return kExitOk;
}

int cmd_benchmark(const Options& o, std::vector<std::string>& outputs, const Log& log) {
  const Scenario sc = load_scenario(o.common.scenario);
  const Belief belief = belief_for(sc, o, log);
  std::vector<NamedPolicy> pols;
  for (const auto& name : split_list(o.policies)) pols.push_back({name, policy_config(sc, o, name)});
  BenchmarkOptions bo;
  bo.n_trials = o.bench_trials;
  bo.seed = o.common.seed;
  bo.threads = o.threads;
  bo.episode.sensor.kind = parse_sensor_kind(o.sensor);
  const auto metrics = benchmark(sc.task, sc.model, belief, pols, bo);
  std::ostringstream ms;
  write_metrics_csv(ms, metrics);
  write_file(o.common.out, ms.str(), outputs);

  // Histogram of the first policy, with the override law when its tree is a chain.
  std::optional<OverrideLaw> law;
  if (bo.episode.sensor.kind == SensorKind::Bump) {
    const auto tree = build_tree(belief, sc.task, pols.front().config, sc.model);
    if (auto chain = override_chain(*tree)) law = theoretical_override_law(*chain);
  }
  const auto hist = violation_histogram(metrics.front().violations);
  std::ostringstream hs;
  write_histogram_csv(hs, hist, law ? &*law : nullptr);
  write_file(o.histogram.empty() ? with_suffix(o.common.out, "_hist") : o.histogram, hs.str(), outputs);
  if (law) log("total variation to the override law: " + num(total_variation(hist, *law)));
  return kExitOk;
}

// States and override positions from a trace CSV.
void read_trace(const std::string& path, std::vector<Point>& states, std::vector<Point>& violations) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) return;
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  std::vector<std::size_t> xcols;
  std::size_t vcol = cols.size();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i].size() > 1 && cols[i][0] == 'x') xcols.push_back(i);
    if (cols[i] == "violation_flag") vcol = i;
  }
  if (xcols.empty() || vcol == cols.size()) throw ParseError(path, "not a trace file");
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) f.push_back(c);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != cols.size()) throw ParseError(path, "ragged row");
    Point x;
    for (std::size_t i : xcols) x.push_back(std::stod(f[i]));
    if (f[vcol] == "1") {
      violations.push_back(x);
    } else if (states.empty() || states.back() != x) {
      states.push_back(x);
    }
  }
}

int cmd_plot(const Options& o, std::vector<std::string>& outputs, const Log& log) {
  const Scenario sc = load_scenario(o.common.scenario);
  PlotInput in;
  in.scenario = &sc;
  in.title = o.title;
  if (!o.belief_file.empty()) in.f_theta = boxes_from_json(json::parse(read_text_file(o.belief_file)));
  for (const auto& f : o.plan_files) in.plans.push_back(plan_from_json(json::parse(read_text_file(f))).traj);
  if (!o.trace_file.empty()) read_trace(o.trace_file, in.trace, in.violations);
  if (o.tree_depth > 0) {
    const Belief belief = belief_for(sc, o, log);
    if (in.f_theta.empty()) in.f_theta = belief.support();
    PolicyConfig cfg = policy_config(sc, o, o.policy);
    const auto tree = build_tree(belief, sc.task, cfg, sc.model);
    std::vector<const PolicyNode*> st{&tree->root()};
    while (!st.empty()) {
      const PolicyNode* n = st.back();
      st.pop_back();
      if (n != &tree->root() && n->plan) in.contingencies.push_back(n->plan->traj);
      for (const auto& [key, c] : n->children) st.push_back(c.get());
    }
  }
  write_file(o.common.out, render_svg(in), outputs);
  return kExitOk;
}

// ---- parsing --------------------------------------------------------------

void add_common(CLI::App* sub, Options& o, bool needs_scenario = true) {
  auto* s = sub->add_option("--scenario", o.common.scenario, "scenario JSON file");
  if (needs_scenario) s->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", o.common.seed, "random seed");
  sub->add_option("--out", o.common.out, "output file")->required();
  sub->add_flag("--verbose", o.common.verbose, "progress on stderr");
}

void add_lattice(CLI::App* sub, Options& o) {
  sub->add_option("--resolution", o.lattice.resolution, "lattice resolution (default: scenario hint)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--max-step", o.lattice.max_step, "largest control multiple per axis, 0 = bounds");
  sub->add_option("--diagonal", o.lattice.diagonal, "diagonal moves")->check(CLI::IsMember({"auto", "on", "off"}));
  sub->add_option("--engine", o.engine, "extraction engine")->check(CLI::IsMember({"enumerate", "carve", "grid"}));
}

void add_policy(CLI::App* sub, Options& o) {
  sub->add_option("--eps", o.eps, "chance-constraint level")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--buffer", o.buffer, "optimistic inflation")->check(CLI::NonNegativeNumber);
  sub->add_option("--samples", o.samples, "belief samples for mcr and btp")->check(CLI::PositiveNumber);
  sub->add_option("--scenario-samples", o.scenario_samples, "sample cap of the scenario baseline");
  sub->add_option("--beta", o.beta, "btp risk weight")->check(CLI::NonNegativeNumber);
  sub->add_option("--trigger", o.trigger, "replan trigger")->check(CLI::IsMember({"on-unsafe", "improve"}));
  sub->add_option("--rho", o.rho, "improvement factor for --trigger improve");
}

const std::vector<std::string> kPlanners{"epsmin", "ratio", "cc", "safe", "scenario", "optimistic", "mcr", "btp"};

int dispatch(const std::vector<std::string>& args, bool allow_rerun);

int cmd_rerun(const Options& o) {
  const json m = json::parse(read_text_file(o.manifest));
  if (!m.contains("argv") || !m["argv"].is_array()) throw ParseError("argv", "manifest has no argv");
  const auto args = m["argv"].get<std::vector<std::string>>();
  return dispatch(args, false);
}

int dispatch(const std::vector<std::string>& args, bool allow_rerun) {
  Options o;
  CLI::App app{"Constraint learning and planning under uncertainty", "kktplan"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(KKTPLAN_VERSION));

  auto* ex = app.add_subcommand("extract", "consistent parameter set from the demonstrations");
  add_common(ex, o);
  ex->add_option("--engine", o.engine, "extraction engine")->check(CLI::IsMember({"enumerate", "carve", "grid"}));
  ex->add_option("--grid-h", o.grid_h, "grid engine resolution")->check(CLI::PositiveNumber);
  ex->add_option("--partitions", o.partitions, "parallel prior partitions")->check(CLI::PositiveNumber);

  auto* pl = app.add_subcommand("plan", "open-loop plan under the belief");
  add_common(pl, o);
  add_lattice(pl, o);
  add_policy(pl, o);
  pl->add_option("--variant", o.variant, "planner")->check(CLI::IsMember(kPlanners));
  pl->add_option("--roadmap", o.roadmap, "roadmap JSON for mcr and btp")->check(CLI::ExistingFile);
  pl->add_flag("--linear", o.linear, "btp with the linear penalty");

  auto* si = app.add_subcommand("simulate", "closed-loop episodes under sampled ground truth");
  add_common(si, o);
  add_lattice(si, o);
  add_policy(si, o);
  si->add_option("--policy", o.policy, "planner")->check(CLI::IsMember(kPlanners));
  si->add_option("--trials", o.trials, "episodes; several write numbered traces")->check(CLI::PositiveNumber);
  si->add_option("--tree-depth", o.tree_depth, "precomputed contingency depth, 0 = replan online");
  si->add_option("--sensor", o.sensor, "sensing model")->check(CLI::IsMember({"bump", "lidar", "contact"}));

  auto* be = app.add_subcommand("benchmark", "violation statistics over sampled ground truth");
  add_common(be, o);
  add_lattice(be, o);
  add_policy(be, o);
  be->add_option("--policies", o.policies, "comma-separated planners");
  be->add_option("--trials", o.bench_trials, "ground-truth draws")->check(CLI::PositiveNumber);
  be->add_option("--sensor", o.sensor, "sensing model")->check(CLI::IsMember({"bump", "lidar", "contact"}));
  be->add_option("--threads", o.threads, "worker threads, 0 = all cores");
  be->add_option("--histogram", o.histogram, "histogram CSV (default: <out>_hist.csv)");

  auto* pt = app.add_subcommand("plot", "SVG of the scenario, plans and traces");
  add_common(pt, o);
  add_lattice(pt, o);
  add_policy(pt, o);
  pt->add_option("--plan", o.plan_files, "plan JSON, repeatable")->check(CLI::ExistingFile);
  pt->add_option("--trace", o.trace_file, "trace CSV")->check(CLI::ExistingFile);
  pt->add_option("--belief", o.belief_file, "parameter boxes JSON")->check(CLI::ExistingFile);
  pt->add_option("--policy", o.policy, "planner for contingencies")->check(CLI::IsMember(kPlanners));
  pt->add_option("--tree-depth", o.tree_depth, "draw contingency plans to this depth");
  pt->add_option("--title", o.title, "figure title");

  CLI::App* re = nullptr;
  if (allow_rerun) {
    re = app.add_subcommand("rerun", "repeat a command from its manifest");
    re->add_option("--manifest", o.manifest, "manifest JSON")->required()->check(CLI::ExistingFile);
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitInvalid;
  }

  if (re && re->parsed()) return cmd_rerun(o);
  const Log log(o.common.verbose);
  std::vector<std::string> outputs;
  std::string command;
  int code = kExitOk;
  if (ex->parsed()) {
    command = "extract";
    code = cmd_extract(o, outputs, log);
  } else if (pl->parsed()) {
    command = "plan";
    code = cmd_plan(o, outputs, log);
  } else if (si->parsed()) {
    command = "simulate";
    code = cmd_simulate(o, outputs, log);
  } else if (be->parsed()) {
    command = "benchmark";
    code = cmd_benchmark(o, outputs, log);
  } else if (pt->parsed()) {
    command = "plot";
    code = cmd_plot(o, outputs, log);
  }
  if (code == kExitOk) write_manifest(command, args, o, outputs);
  return code;
}

}  // namespace

std::string manifest_path(const std::string& out) { return out + ".manifest.json"; }

int run(const std::vector<std::string>& args) {
  try {
    return dispatch(args, true);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const EmptyBeliefError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const ParseError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const json::exception& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace kktplan::cli
