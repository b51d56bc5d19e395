#include "formnet/scenario.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "formnet/graph.hpp"

namespace formnet {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw Error("scenario.schema", path + ": " + what);
}

const json* find(const json& j, const std::string& key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) schema_error(path, "expected a number");
  return j.get<double>();
}

double number_or(const json& obj, const std::string& key, double fallback,
                 const std::string& path) {
  const json* v = find(obj, key);
  return v ? get_number(*v, path + "." + key) : fallback;
}

int int_or(const json& obj, const std::string& key, int fallback,
           const std::string& path) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) schema_error(path + "." + key, "expected an integer");
  return v->get<int>();
}

std::string string_or(const json& obj, const std::string& key, std::string fallback,
                      const std::string& path) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_string()) schema_error(path + "." + key, "expected a string");
  return v->get<std::string>();
}

std::vector<double> number_list(const json& j, const std::string& path) {
  if (!j.is_array()) schema_error(path, "expected an array of numbers");
  std::vector<double> out;
  for (size_t i = 0; i < j.size(); ++i)
    out.push_back(get_number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

// scalar -> constant vector broadcast, array -> exact-length vector
Eigen::VectorXd vector_or_broadcast(const json& j, int length, const std::string& path) {
  if (j.is_number()) return Eigen::VectorXd::Constant(length, j.get<double>());
  std::vector<double> vals = number_list(j, path);
  if (static_cast<int>(vals.size()) != length)
    schema_error(path, "expected " + std::to_string(length) + " entries, got " +
                           std::to_string(vals.size()));
  return Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

json agent_spec_json(const Scenario::AgentSpec& a) {
  json j;
  j["model"] = a.model;
  if (a.model == "vehicle_drag") {
    j["c_d"] = a.c_d;
    j["w"] = a.w;
  } else if (a.model == "lti_first_order") {
    j["s"] = a.s;
  } else if (a.model == "custom_polynomial") {
    j["f"] = a.f_coeffs;
    j["h"] = a.h_coeffs;
  }
  return j;
}

}  // namespace

Graph Scenario::graph() const {
  if (graph_family == "path") return Graph::path(graph_n);
  if (graph_family == "cycle") return Graph::cycle(graph_n);
  if (graph_family == "complete") return Graph::complete(graph_n);
  if (graph_family == "star") return Graph::star(graph_n);
  if (graph_family == "explicit") return Graph(graph_n, graph_edges);
  throw Error("scenario.schema", "graph.family: unknown family '" + graph_family + "'");
}

namespace {

std::shared_ptr<const Agent> build_agent(const Scenario::AgentSpec& spec) {
  if (spec.model == "integrator") return std::make_shared<IntegratorAgent>();
  if (spec.model == "vehicle_drag")
    return std::make_shared<VehicleAgent>(spec.c_d, spec.w);
  if (spec.model == "lti_first_order")
    return std::make_shared<LtiFirstOrderAgent>(spec.s);
  if (spec.model == "custom_polynomial") {
    auto horner = [](std::vector<double> coeffs) {
      return [coeffs](double x) {
        double acc = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
        return acc;
      };
    };
    return std::make_shared<ControlAffineAgent>(horner(spec.f_coeffs),
                                                [](double) { return 1.0; },
                                                horner(spec.h_coeffs), spec.w);
  }
  throw Error("scenario.schema", "agents.model: unknown model '" + spec.model + "'");
}

}  // namespace

Network Scenario::build_network() const {
  Graph g = graph();
  std::vector<std::shared_ptr<const Agent>> built;
  if (random_vehicles) {
    Rng rng(seed);
    for (int i = 0; i < g.num_vertices(); ++i) {
      double cd = rng.log_uniform(cd_lo, cd_hi);
      double w = rng.uniform(w_lo, w_hi);
      built.push_back(std::make_shared<VehicleAgent>(cd, w));
    }
  } else {
    for (const auto& spec : agents) built.push_back(build_agent(spec));
  }

  std::vector<std::shared_ptr<const EdgeController>> ctrls;
  for (int e = 0; e < g.num_edges(); ++e) {
    if (controller_type == "proportional")
      ctrls.push_back(std::make_shared<ProportionalController>(zeta_star(e)));
    else if (controller_type == "integrator")
      ctrls.push_back(std::make_shared<IntegratorController>());
    else
      throw Error("scenario.schema",
                  "controllers.type: unknown type '" + controller_type + "'");
  }
  return Network::make(std::move(g), std::move(built), std::move(ctrls));
}

Eigen::VectorXd Scenario::initial_state(const Network& net) const {
  const int n = net.num_agents();
  if (x0_policy == "zeros") return Eigen::VectorXd::Zero(n);
  if (x0_policy == "explicit") {
    require(x0_values.size() == n, "scenario.invalid",
            "sim.x0 length does not match agent count");
    return x0_values;
  }
  if (x0_policy == "random") {
    Rng rng(seed ^ 0x7830ULL);
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x(i) = rng.uniform(x0_lo, x0_hi);
    return x;
  }
  throw Error("scenario.schema", "sim.x0: unknown policy '" + x0_policy + "'");
}

Algorithm1Options Scenario::algorithm1_options() const {
  Algorithm1Options opts;
  opts.beta_small = beta_small;
  opts.beta_third = beta_third;
  opts.third_offset_factor = third_offset_factor;
  opts.experiment.dt = sim.dt;
  opts.experiment.t_max = experiment_t_max;
  opts.experiment.window = sim.window;
  opts.experiment.tolerance = tol_experiment;
  return opts;
}

SynthesisOptions Scenario::synthesis_options() const {
  SynthesisOptions opts;
  opts.method = method;
  opts.m_mode = m_mode;
  opts.measurements_per_agent = measurements_per_agent;
  opts.beta_refine = beta_refine;
  opts.algorithm1 = algorithm1_options();
  opts.seed = seed;
  return opts;
}

Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "scenario.io", "cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str(), path);
}

Scenario parse_scenario_text(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("scenario.schema", origin + ": " + e.what());
  }
  if (!root.is_object()) schema_error(origin, "top level must be an object");

  Scenario sc;
  sc.name = string_or(root, "name", "scenario", "");
  if (const json* s = find(root, "seed")) {
    if (!s->is_number_integer() || s->get<long long>() < 0)
      schema_error("seed", "expected a nonnegative integer");
    sc.seed = s->get<std::uint64_t>();
  }

  // graph
  const json* jg = find(root, "graph");
  if (!jg || !jg->is_object()) schema_error("graph", "required object");
  sc.graph_family = string_or(*jg, "family", "explicit", "graph");
  sc.graph_n = int_or(*jg, "n", 0, "graph");
  if (sc.graph_n <= 0) schema_error("graph.n", "expected a positive integer");
  if (const json* je = find(*jg, "edges")) {
    if (!je->is_array()) schema_error("graph.edges", "expected an array of [i, j] pairs");
    for (size_t k = 0; k < je->size(); ++k) {
      const json& e = (*je)[k];
      std::string p = "graph.edges[" + std::to_string(k) + "]";
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
          !e[1].is_number_integer())
        schema_error(p, "expected [i, j] with integer endpoints");
      sc.graph_edges.push_back({e[0].get<int>(), e[1].get<int>()});
    }
  }
  Graph g = sc.graph();  // validates family + edges early
  const int n = g.num_vertices();
  const int m = g.num_edges();

  // agents
  const json* ja = find(root, "agents");
  if (!ja) schema_error("agents", "required");
  if (ja->is_object() && find(*ja, "random_vehicles")) {
    const json& rv = *find(*ja, "random_vehicles");
    if (!rv.is_object()) schema_error("agents.random_vehicles", "expected an object");
    sc.random_vehicles = true;
    if (const json* r = find(rv, "c_d_range")) {
      auto v = number_list(*r, "agents.random_vehicles.c_d_range");
      if (v.size() != 2 || v[0] <= 0.0 || v[1] < v[0])
        schema_error("agents.random_vehicles.c_d_range", "expected [lo, hi] with 0 < lo <= hi");
      sc.cd_lo = v[0];
      sc.cd_hi = v[1];
    }
    if (const json* r = find(rv, "w_range")) {
      auto v = number_list(*r, "agents.random_vehicles.w_range");
      if (v.size() != 2 || v[1] < v[0])
        schema_error("agents.random_vehicles.w_range", "expected [lo, hi]");
      sc.w_lo = v[0];
      sc.w_hi = v[1];
    }
  } else {
    auto parse_agent = [&](const json& j, const std::string& path) {
      if (!j.is_object()) schema_error(path, "expected an object");
      Scenario::AgentSpec spec;
      spec.model = string_or(j, "model", "", path);
      if (spec.model.empty()) schema_error(path + ".model", "required");
      spec.c_d = number_or(j, "c_d", 1.0, path);
      spec.w = number_or(j, "w", 0.0, path);
      spec.s = number_or(j, "s", 1.0, path);
      if (const json* f = find(j, "f")) spec.f_coeffs = number_list(*f, path + ".f");
      if (const json* h = find(j, "h")) spec.h_coeffs = number_list(*h, path + ".h");
      if (spec.model == "custom_polynomial" && spec.h_coeffs.empty())
        spec.h_coeffs = {0.0, 1.0};
      return spec;
    };
    if (ja->is_array()) {
      if (static_cast<int>(ja->size()) != n)
        schema_error("agents", "expected " + std::to_string(n) + " entries");
      for (size_t i = 0; i < ja->size(); ++i)
        sc.agents.push_back(parse_agent((*ja)[i], "agents[" + std::to_string(i) + "]"));
    } else if (ja->is_object()) {
      Scenario::AgentSpec spec = parse_agent(*ja, "agents");
      sc.agents.assign(n, spec);
    } else {
      schema_error("agents", "expected an object or an array");
    }
  }

  // controllers
  if (const json* jc = find(root, "controllers")) {
    if (!jc->is_object()) schema_error("controllers", "expected an object");
    sc.controller_type = string_or(*jc, "type", "proportional", "controllers");
  }

  // goal
  Eigen::MatrixXd inc = incidence_matrix(g);
  const json* jgoal = find(root, "goal");
  if (jgoal && !jgoal->is_object()) schema_error("goal", "expected an object");
  if (jgoal && find(*jgoal, "zeta_star"))
    sc.zeta_star = vector_or_broadcast(*find(*jgoal, "zeta_star"), m, "goal.zeta_star");
  else
    sc.zeta_star = Eigen::VectorXd::Zero(m);
  double zres = edge_space_residual(inc, sc.zeta_star);
  require(zres <= 1e-8, "scenario.invalid",
          "goal.zeta_star is not realizable on this graph (distance " +
              std::to_string(zres) + " from Im(E^T))");
  sc.epsilon = jgoal ? number_or(*jgoal, "epsilon", 0.2, "goal") : 0.2;
  if (sc.epsilon <= 0.0) schema_error("goal.epsilon", "expected a positive number");
  if (jgoal && find(*jgoal, "y_star")) {
    Eigen::VectorXd ys = vector_or_broadcast(*find(*jgoal, "y_star"), n, "goal.y_star");
    require((inc.transpose() * ys - sc.zeta_star).lpNorm<Eigen::Infinity>() <= 1e-8,
            "scenario.invalid", "goal.y_star does not realize goal.zeta_star");
    sc.y_star = ys;
  }

  // gains
  if (const json* jga = find(root, "gains"))
    sc.gains = vector_or_broadcast(*jga, m, "gains");
  else
    sc.gains = Eigen::VectorXd::Ones(m);
  if ((sc.gains.array() <= 0.0).any()) schema_error("gains", "gains must be positive");

  // sim
  if (const json* js = find(root, "sim")) {
    if (!js->is_object()) schema_error("sim", "expected an object");
    sc.sim.dt = number_or(*js, "dt", sc.sim.dt, "sim");
    sc.sim.t_max = number_or(*js, "t_max", sc.sim.t_max, "sim");
    sc.sim.record_stride = int_or(*js, "record_stride", sc.sim.record_stride, "sim");
    sc.sim.window = number_or(*js, "window", sc.sim.window, "sim");
    sc.sim.tolerance = number_or(*js, "tol_network", sc.sim.tolerance, "sim");
    sc.tol_experiment = number_or(*js, "tol_experiment", sc.tol_experiment, "sim");
    sc.experiment_t_max = number_or(*js, "experiment_t_max", sc.experiment_t_max, "sim");
    if (const json* jx = find(*js, "x0")) {
      if (jx->is_string()) {
        sc.x0_policy = jx->get<std::string>();
        if (sc.x0_policy != "zeros" && sc.x0_policy != "random")
          schema_error("sim.x0", "expected \"zeros\", \"random\" or an array");
      } else {
        sc.x0_policy = "explicit";
        sc.x0_values = vector_or_broadcast(*jx, n, "sim.x0");
      }
    }
    if (const json* jr = find(*js, "x0_range")) {
      auto v = number_list(*jr, "sim.x0_range");
      if (v.size() != 2 || v[1] < v[0]) schema_error("sim.x0_range", "expected [lo, hi]");
      sc.x0_lo = v[0];
      sc.x0_hi = v[1];
    }
    if (sc.sim.dt <= 0.0) schema_error("sim.dt", "expected a positive number");
    if (sc.sim.t_max <= 0.0) schema_error("sim.t_max", "expected a positive number");
    if (sc.sim.record_stride < 1) schema_error("sim.record_stride", "expected >= 1");
  }

  // synthesis
  sc.a0 = Eigen::VectorXd::Constant(m, 0.1);
  if (const json* jy = find(root, "synthesis")) {
    if (!jy->is_object()) schema_error("synthesis", "expected an object");
    std::string method = string_or(*jy, "method", "three_experiments", "synthesis");
    if (method == "three_experiments")
      sc.method = MiMethod::three_experiments;
    else if (method == "chain")
      sc.method = MiMethod::chain;
    else if (method == "lti_exact")
      sc.method = MiMethod::lti_exact;
    else if (method == "oracle_true")
      sc.method = MiMethod::oracle_true;
    else
      schema_error("synthesis.method", "unknown method '" + method + "'");

    std::string mode = string_or(*jy, "m_mode", "per_edge", "synthesis");
    if (mode == "per_edge" || mode == "per-edge")
      sc.m_mode = MMode::per_edge;
    else if (mode == "euclidean")
      sc.m_mode = MMode::euclidean;
    else
      schema_error("synthesis.m_mode", "expected \"euclidean\" or \"per_edge\"");

    std::string ss = string_or(*jy, "steady_state", "oracle", "synthesis");
    if (ss == "oracle")
      sc.steady_state = SteadyStateMode::oracle;
    else if (ss == "simulate")
      sc.steady_state = SteadyStateMode::simulate;
    else
      schema_error("synthesis.steady_state", "expected \"oracle\" or \"simulate\"");

    sc.measurements_per_agent =
        int_or(*jy, "measurements_per_agent", sc.measurements_per_agent, "synthesis");
    if (sc.measurements_per_agent < 1)
      schema_error("synthesis.measurements_per_agent", "expected >= 1");
    sc.beta_small = number_or(*jy, "beta_small", sc.beta_small, "synthesis");
    sc.beta_third = number_or(*jy, "beta_third", sc.beta_third, "synthesis");
    sc.third_offset_factor =
        number_or(*jy, "third_offset_factor", sc.third_offset_factor, "synthesis");
    sc.beta_refine = number_or(*jy, "beta_refine", sc.beta_refine, "synthesis");
    sc.h_step = number_or(*jy, "h", sc.h_step, "synthesis");
    sc.max_iterations = int_or(*jy, "max_iter", sc.max_iterations, "synthesis");
    if (const json* ja0 = find(*jy, "a0"))
      sc.a0 = vector_or_broadcast(*ja0, m, "synthesis.a0");
    if ((sc.a0.array() <= 0.0).any()) schema_error("synthesis.a0", "gains must be positive");
    if (const json* jr = find(*jy, "ramp_schedule"))
      sc.ramp_schedule = number_list(*jr, "synthesis.ramp_schedule");
  }

  // meip
  if (const json* jm = find(root, "meip")) {
    if (!jm->is_object()) schema_error("meip", "expected an object");
    if (const json* jd = find(*jm, "domain")) {
      auto v = number_list(*jd, "meip.domain");
      if (v.size() != 2 || v[1] <= v[0]) schema_error("meip.domain", "expected [lo, hi]");
      sc.meip.domain = {v[0], v[1]};
    }
    sc.meip.grid = int_or(*jm, "grid", sc.meip.grid, "meip");
    sc.meip.divergence_threshold =
        number_or(*jm, "divergence_threshold", sc.meip.divergence_threshold, "meip");
  }

  // canonical effective configuration (keys sorted by nlohmann's object order)
  json eff;
  eff["name"] = sc.name;
  eff["seed"] = sc.seed;
  eff["graph"] = {{"family", sc.graph_family}, {"n", sc.graph_n}};
  if (!sc.graph_edges.empty()) {
    json edges = json::array();
    for (const Edge& e : sc.graph_edges) edges.push_back({e.i, e.j});
    eff["graph"]["edges"] = edges;
  }
  if (sc.random_vehicles) {
    eff["agents"] = {{"random_vehicles",
                      {{"c_d_range", {sc.cd_lo, sc.cd_hi}},
                       {"w_range", {sc.w_lo, sc.w_hi}}}}};
  } else {
    json arr = json::array();
    for (const auto& a : sc.agents) arr.push_back(agent_spec_json(a));
    eff["agents"] = arr;
  }
  eff["controllers"] = {{"type", sc.controller_type}};
  eff["goal"]["zeta_star"] = std::vector<double>(sc.zeta_star.data(),
                                                 sc.zeta_star.data() + m);
  eff["goal"]["epsilon"] = sc.epsilon;
  if (sc.y_star)
    eff["goal"]["y_star"] =
        std::vector<double>(sc.y_star->data(), sc.y_star->data() + n);
  eff["gains"] = std::vector<double>(sc.gains.data(), sc.gains.data() + m);
  eff["sim"] = {{"dt", sc.sim.dt},
                {"t_max", sc.sim.t_max},
                {"record_stride", sc.sim.record_stride},
                {"window", sc.sim.window},
                {"tol_network", sc.sim.tolerance},
                {"tol_experiment", sc.tol_experiment},
                {"experiment_t_max", sc.experiment_t_max},
                {"x0", sc.x0_policy},
                {"x0_range", {sc.x0_lo, sc.x0_hi}}};
  if (sc.x0_policy == "explicit")
    eff["sim"]["x0"] = std::vector<double>(sc.x0_values.data(), sc.x0_values.data() + n);
  eff["synthesis"] = {
      {"method",
       sc.method == MiMethod::three_experiments ? "three_experiments"
       : sc.method == MiMethod::chain           ? "chain"
       : sc.method == MiMethod::lti_exact       ? "lti_exact"
                                                : "oracle_true"},
      {"m_mode", to_string(sc.m_mode)},
      {"steady_state", sc.steady_state == SteadyStateMode::oracle ? "oracle" : "simulate"},
      {"measurements_per_agent", sc.measurements_per_agent},
      {"beta_small", sc.beta_small},
      {"beta_third", sc.beta_third},
      {"third_offset_factor", sc.third_offset_factor},
      {"beta_refine", sc.beta_refine},
      {"h", sc.h_step},
      {"a0", std::vector<double>(sc.a0.data(), sc.a0.data() + m)},
      {"max_iter", sc.max_iterations},
      {"ramp_schedule", sc.ramp_schedule}};
  eff["meip"] = {{"domain", {sc.meip.domain.lo, sc.meip.domain.hi}},
                 {"grid", sc.meip.grid},
                 {"divergence_threshold", sc.meip.divergence_threshold}};

  sc.effective_json = eff.dump(2);
  sc.config_hash = fnv1a(sc.effective_json);
  return sc;
}

}  // namespace formnet
