#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "kktplan/io.hpp"

namespace kktplan {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& field, std::initializer_list<const char*> allowed,
                    std::initializer_list<const char*> required) {
  if (!j.is_object()) throw ParseError(field, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) throw ParseError(field + "." + it.key(), "unknown field");
  }
  for (const char* r : required) {
    if (!j.contains(r)) throw ParseError(field + "." + r, "missing field");
  }
}

double get_number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ParseError(field, "expected a number");
  return j.get<double>();
}

std::size_t get_count(const json& j, const std::string& field) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw ParseError(field, "expected a nonnegative integer");
  return j.get<std::size_t>();
}

Point get_point(const json& j, const std::string& field) {
  if (!j.is_array()) throw ParseError(field, "expected an array of numbers");
  Point p;
  p.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) p.push_back(get_number(j[i], field + "[" + std::to_string(i) + "]"));
  return p;
}

std::vector<Point> get_points(const json& j, const std::string& field) {
  if (!j.is_array()) throw ParseError(field, "expected an array");
  std::vector<Point> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_point(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

// [[lo...], [hi...]]
Box get_bounds(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2) throw ParseError(field, "expected [[lo...], [hi...]]");
  Point lo = get_point(j[0], field + "[0]");
  Point hi = get_point(j[1], field + "[1]");
  try {
    return Box(std::move(lo), std::move(hi));
  } catch (const GeometryError& e) {
    throw ValidationError(field, e.what());
  }
}

json bounds_to_json(const Box& b) { return json::array({b.lo(), b.hi()}); }

std::string get_string(const json& j, const std::string& field) {
  if (!j.is_string()) throw ParseError(field, "expected a string");
  return j.get<std::string>();
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

json box_to_json(const Box& b) { return json{{"lo", b.lo()}, {"hi", b.hi()}}; }

Box box_from_json(const json& j, const std::string& field) {
  require_object(j, field, {"lo", "hi"}, {"lo", "hi"});
  Point lo = get_point(j["lo"], field + ".lo");
  Point hi = get_point(j["hi"], field + ".hi");
  try {
    return Box(std::move(lo), std::move(hi));
  } catch (const GeometryError& e) {
    throw ValidationError(field, e.what());
  }
}

json boxes_to_json(const BoxUnion& u) {
  json boxes = json::array();
  for (const auto& b : u) boxes.push_back(box_to_json(b));
  return json{{"dim", u.dim()}, {"boxes", boxes}};
}

BoxUnion boxes_from_json(const json& j, const std::string& field) {
  if (!j.is_object() || !j.contains("boxes")) throw ParseError(field, "expected an object with a boxes array");
  const json& arr = j["boxes"];
  if (!arr.is_array()) throw ParseError(field + ".boxes", "expected an array");
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    boxes.push_back(box_from_json(arr[i], field + ".boxes[" + std::to_string(i) + "]"));
  }
  std::size_t dim = j.contains("dim") ? get_count(j["dim"], field + ".dim") : 0;
  if (boxes.empty()) return BoxUnion(dim);
  try {
    return BoxUnion(std::move(boxes));
  } catch (const GeometryError& e) {
    throw ValidationError(field, e.what());
  }
}

std::string boxes_to_csv(const BoxUnion& u) {
  std::ostringstream os;
  for (std::size_t i = 0; i < u.dim(); ++i) os << "lo_" << i << ",";
  for (std::size_t i = 0; i < u.dim(); ++i) os << "hi_" << i << ",";
  os << "volume\n";
  for (const auto& b : u) {
    for (double v : b.lo()) os << fmt_double(v) << ",";
    for (double v : b.hi()) os << fmt_double(v) << ",";
    os << fmt_double(box_volume(b)) << "\n";
  }
  return os.str();
}

json trajectory_to_json(const Trajectory& traj) { return json::array({traj.states, traj.controls}); }

Trajectory trajectory_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2) throw ParseError(field, "expected [[states...], [controls...]]");
  Trajectory t;
  t.states = get_points(j[0], field + ".states");
  t.controls = get_points(j[1], field + ".controls");
  return t;
}

std::string trajectory_to_csv(const Trajectory& traj) {
  std::ostringstream os;
  const std::size_t n = traj.states.empty() ? 0 : traj.states.front().size();
  const std::size_t m = traj.controls.empty() ? 0 : traj.controls.front().size();
  os << "t";
  for (std::size_t i = 0; i < n; ++i) os << ",x_" << i;
  for (std::size_t i = 0; i < m; ++i) os << ",u_" << i;
  os << "\n";
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    os << t;
    for (double v : traj.states[t]) os << "," << fmt_double(v);
    for (std::size_t i = 0; i < m; ++i) {
      os << ",";
      if (t < traj.controls.size()) os << fmt_double(traj.controls[t][i]);
    }
    os << "\n";
  }
  return os.str();
}

Scenario scenario_from_json(const json& doc) {
  require_object(doc, "scenario", {"version", "dynamics", "task", "model", "demos", "lattice"},
                 {"version", "dynamics", "task", "model"});
  if (!doc["version"].is_number_integer()) throw ParseError("version", "expected an integer");
  if (doc["version"].get<int>() != kScenarioVersion) {
    throw ValidationError("version", "unsupported schema version " + doc["version"].dump());
  }

  Scenario sc;
  const json& jd = doc["dynamics"];
  require_object(jd, "dynamics", {"kind", "dim", "dt", "state_bounds", "control_bounds"},
                 {"kind", "dim", "dt", "state_bounds", "control_bounds"});
  Dynamics& dyn = sc.task.dynamics;
  dyn.kind = parse_dynamics_kind(get_string(jd["kind"], "dynamics.kind"));
  dyn.dim = get_count(jd["dim"], "dynamics.dim");
  if (dyn.dim == 0) throw ValidationError("dynamics.dim", "must be positive");
  dyn.dt = get_number(jd["dt"], "dynamics.dt");
  if (!(dyn.dt > 0.0)) throw ValidationError("dynamics.dt", "must be positive");
  dyn.state_bounds = get_bounds(jd["state_bounds"], "dynamics.state_bounds");
  dyn.control_bounds = get_bounds(jd["control_bounds"], "dynamics.control_bounds");
  if (dyn.state_bounds.dim() != dyn.state_dim()) {
    throw ValidationError("dynamics.state_bounds", "expected dimension " + std::to_string(dyn.state_dim()));
  }
  if (dyn.control_bounds.dim() != dyn.control_dim()) {
    throw ValidationError("dynamics.control_bounds", "expected dimension " + std::to_string(dyn.control_dim()));
  }

  const json& jt = doc["task"];
  require_object(jt, "task", {"T", "cost", "x0", "xg", "known_unsafe"}, {"T", "cost", "x0", "xg"});
  Task& task = sc.task;
  task.horizon = get_count(jt["T"], "task.T");
  if (task.horizon < 2) throw ValidationError("task.T", "must be at least 2");
  task.cost = parse_cost_kind(get_string(jt["cost"], "task.cost"));
  task.start = get_point(jt["x0"], "task.x0");
  task.goal = get_point(jt["xg"], "task.xg");
  if (task.start.size() != dyn.state_dim()) throw ValidationError("task.x0", "state dimension mismatch");
  if (task.goal.size() != dyn.state_dim()) throw ValidationError("task.xg", "state dimension mismatch");
  if (!dyn.state_bounds.contains(task.start, 1e-9)) throw ValidationError("task.x0", "outside state bounds");
  if (!dyn.state_bounds.contains(task.goal, 1e-9)) throw ValidationError("task.xg", "outside state bounds");
  task.known_unsafe = BoxUnion(dyn.dim);
  if (jt.contains("known_unsafe")) {
    const json& ku = jt["known_unsafe"];
    if (!ku.is_array()) throw ParseError("task.known_unsafe", "expected an array");
    std::vector<Box> boxes;
    for (std::size_t i = 0; i < ku.size(); ++i) {
      const std::string f = "task.known_unsafe[" + std::to_string(i) + "]";
      Box b = box_from_json(ku[i], f);
      if (b.dim() != dyn.dim) throw ValidationError(f, "expected workspace dimension " + std::to_string(dyn.dim));
      boxes.push_back(std::move(b));
    }
    for (const auto& b : boxes) {
      if (b.contains_strict(dyn.position(task.start))) throw ValidationError("task.x0", "inside a known unsafe box");
      if (b.contains_strict(dyn.position(task.goal))) throw ValidationError("task.xg", "inside a known unsafe box");
    }
    task.known_unsafe = BoxUnion(std::move(boxes));
  }

  const json& jm = doc["model"];
  require_object(jm, "model", {"phi", "n_obs", "theta_prior"}, {"phi", "n_obs", "theta_prior"});
  std::vector<PhiKind> phis;
  std::vector<std::size_t> n_obs;
  if (jm["phi"].is_array()) {
    for (std::size_t i = 0; i < jm["phi"].size(); ++i) {
      phis.push_back(parse_phi_kind(get_string(jm["phi"][i], "model.phi[" + std::to_string(i) + "]")));
    }
  } else {
    phis.push_back(parse_phi_kind(get_string(jm["phi"], "model.phi")));
  }
  if (jm["n_obs"].is_array()) {
    for (std::size_t i = 0; i < jm["n_obs"].size(); ++i) {
      n_obs.push_back(get_count(jm["n_obs"][i], "model.n_obs[" + std::to_string(i) + "]"));
    }
  } else {
    n_obs.push_back(get_count(jm["n_obs"], "model.n_obs"));
  }
  Box prior = box_from_json(jm["theta_prior"], "model.theta_prior");
  sc.model = ConstraintModel::make(dyn, phis, n_obs, std::move(prior));

  if (doc.contains("demos")) {
    const json& jdem = doc["demos"];
    if (!jdem.is_array()) throw ParseError("demos", "expected an array");
    for (std::size_t i = 0; i < jdem.size(); ++i) {
      const std::string f = "demos[" + std::to_string(i) + "]";
      Trajectory t = trajectory_from_json(jdem[i], f);
      check_trajectory(dyn, t, 1e-9, f);
      sc.demos.push_back(std::move(t));
    }
  }
  if (doc.contains("lattice")) {
    const json& jl = doc["lattice"];
    require_object(jl, "lattice", {"resolution", "max_step", "diagonal"}, {"resolution"});
    sc.lattice.resolution = get_number(jl["resolution"], "lattice.resolution");
    if (!(sc.lattice.resolution > 0.0)) throw ValidationError("lattice.resolution", "must be positive");
    if (jl.contains("max_step")) sc.lattice.max_step = get_count(jl["max_step"], "lattice.max_step");
    if (jl.contains("diagonal")) {
      if (!jl["diagonal"].is_boolean()) throw ParseError("lattice.diagonal", "expected a boolean");
      sc.lattice.diagonal = jl["diagonal"].get<bool>();
    }
  }
  return sc;
}

json scenario_to_json(const Scenario& sc) {
  const Task& task = sc.task;
  const Dynamics& dyn = task.dynamics;
  json known = json::array();
  for (const auto& b : task.known_unsafe) known.push_back(box_to_json(b));

  json phi, n_obs;
  const auto& blocks = sc.model.blocks();
  if (blocks.size() == 1) {
    phi = to_string(blocks[0].phi);
    n_obs = blocks[0].n_obs;
  } else {
    phi = json::array();
    n_obs = json::array();
    for (const auto& b : blocks) {
      phi.push_back(to_string(b.phi));
      n_obs.push_back(b.n_obs);
    }
  }
  json demos = json::array();
  for (const auto& d : sc.demos) demos.push_back(trajectory_to_json(d));

  json doc{
      {"version", kScenarioVersion},
      {"dynamics",
       {{"kind", to_string(dyn.kind)},
        {"dim", dyn.dim},
        {"dt", dyn.dt},
        {"state_bounds", bounds_to_json(dyn.state_bounds)},
        {"control_bounds", bounds_to_json(dyn.control_bounds)}}},
      {"task",
       {{"T", task.horizon},
        {"cost", to_string(task.cost)},
        {"x0", task.start},
        {"xg", task.goal},
        {"known_unsafe", known}}},
      {"model", {{"phi", phi}, {"n_obs", n_obs}, {"theta_prior", box_to_json(sc.model.theta_prior())}}},
      {"demos", demos},
  };
  if (sc.lattice.resolution > 0.0) {
    doc["lattice"] = {{"resolution", sc.lattice.resolution},
                      {"max_step", sc.lattice.max_step},
                      {"diagonal", sc.lattice.diagonal}};
  }
  return doc;
}

json roadmap_to_json(const Roadmap& rm) {
  json edges = json::array();
  for (const auto& e : rm.edges) edges.push_back(json::array({e.u, e.v, e.cost}));
  return json{{"vertices", rm.vertices}, {"edges", edges}, {"start", rm.start}, {"goal", rm.goal}};
}

Roadmap roadmap_from_json(const json& j) {
  require_object(j, "roadmap", {"vertices", "edges", "start", "goal"}, {"vertices", "edges", "start", "goal"});
  Roadmap rm;
  rm.vertices = get_points(j["vertices"], "vertices");
  if (!j["edges"].is_array()) throw ParseError("edges", "expected an array");
  for (std::size_t i = 0; i < j["edges"].size(); ++i) {
    const std::string f = "edges[" + std::to_string(i) + "]";
    const json& e = j["edges"][i];
    if (!e.is_array() || e.size() != 3) throw ParseError(f, "expected [i, j, cost]");
    rm.edges.push_back({get_count(e[0], f + "[0]"), get_count(e[1], f + "[1]"), get_number(e[2], f + "[2]")});
  }
  rm.start = get_count(j["start"], "start");
  rm.goal = get_count(j["goal"], "goal");
  rm.validate();
  return rm;
}

json plan_to_json(const Plan& plan) {
  json chosen = json::array();
  for (const auto& b : plan.chosen_boxes) chosen.push_back(box_to_json(b));
  return json{{"trajectory", trajectory_to_json(plan.traj)},
              {"chosen_boxes", chosen},
              {"covered_prob", plan.covered_prob},
              {"cost", plan.cost},
              {"epsilon_achieved", plan.epsilon_achieved},
              {"samples", plan.samples}};
}

Plan plan_from_json(const json& j) {
  require_object(j, "plan", {"trajectory", "chosen_boxes", "covered_prob", "cost", "epsilon_achieved", "samples", "variant", "p_safe"},
                 {"trajectory"});
  Plan p;
  p.traj = trajectory_from_json(j["trajectory"], "trajectory");
  if (j.contains("chosen_boxes")) {
    if (!j["chosen_boxes"].is_array()) throw ParseError("chosen_boxes", "expected an array");
    for (std::size_t i = 0; i < j["chosen_boxes"].size(); ++i) {
      p.chosen_boxes.push_back(box_from_json(j["chosen_boxes"][i], "chosen_boxes[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("covered_prob")) p.covered_prob = get_number(j["covered_prob"], "covered_prob");
  if (j.contains("cost")) p.cost = get_number(j["cost"], "cost");
  if (j.contains("epsilon_achieved")) p.epsilon_achieved = get_number(j["epsilon_achieved"], "epsilon_achieved");
  if (j.contains("samples")) p.samples = get_points(j["samples"], "samples");
  return p;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, "cannot open file");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

Scenario load_scenario(const std::string& path) {
  const std::string text = read_text_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path, e.what());
  }
  return scenario_from_json(doc);
}

void save_scenario(const std::string& path, const Scenario& sc) {
  write_text_file(path, scenario_to_json(sc).dump(2) + "\n");
}

}  // namespace kktplan
