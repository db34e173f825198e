#include "batchvr/experiment.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace batchvr {

using nlohmann::json;

namespace {

std::string reg_kind_name(Regularizer::Kind k) {
  switch (k) {
    case Regularizer::Kind::None:
      return "none";
    case Regularizer::Kind::L1:
      return "l1";
    case Regularizer::Kind::L2:
      return "l2";
  }
  return "none";
}

Regularizer reg_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "none") return Regularizer::none();
    throw std::invalid_argument("reg must be \"none\" or {\"kind\", \"lambda\"}");
  }
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "none") return Regularizer::none();
  const double lambda = j.at("lambda").get<double>();
  if (kind == "l1") return Regularizer::l1(lambda);
  if (kind == "l2") return Regularizer::l2(lambda);
  throw std::invalid_argument("unknown regulariser '" + kind + "'");
}

json reg_to_json(const Regularizer& r) {
  if (r.kind == Regularizer::Kind::None) return "none";
  return {{"kind", reg_kind_name(r.kind)}, {"lambda", r.lambda}};
}

StepPolicy gamma_from_json(const json& j, std::optional<double> tau) {
  const double t = tau.value_or(0.25);
  if (j.is_number()) return StepPolicy::explicit_step(j.get<double>());
  if (j.is_object()) {
    if (j.contains("prop2")) return StepPolicy::dependent(j.at("prop2").get<double>());
    if (j.contains("prop1")) return StepPolicy::adaptive();
    throw std::invalid_argument("gamma object must be {\"prop2\": tau}");
  }
  const std::string s = j.get<std::string>();
  if (s == "prop1") return StepPolicy::adaptive();
  if (s == "prop2") return StepPolicy::dependent(t);
  if (s.rfind("prop2(", 0) == 0 && s.back() == ')') {
    const std::string inner = s.substr(6, s.size() - 7);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), v);
    if (ec != std::errc() || ptr != inner.data() + inner.size())
      throw std::invalid_argument("cannot read tau in '" + s + "'");
    return StepPolicy::dependent(v);
  }
  throw std::invalid_argument("gamma must be prop1, prop2, prop2(tau) or a number");
}

json gamma_to_json(const StepPolicy& p) {
  switch (p.kind) {
    case StepPolicy::Kind::Adaptive:
      return "prop1";
    case StepPolicy::Kind::Dependent:
      return "prop2(" + format_number(p.tau) + ")";
    case StepPolicy::Kind::Explicit:
      return p.gamma;
  }
  return "prop1";
}

// Keys that may appear in a config without affecting the run: planner
// output and the sidecar's resolved block.
const std::set<std::string>& passive_keys() {
  static const std::set<std::string> keys = {"n",   "kappa",      "tau",     "B_star",
                                             "rho", "gamma_valid", "mu",      "clamped",
                                             "residual", "resolved", "B_unconstrained",
                                             "diagnostic"};
  return keys;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

json synthetic_spec_to_json(const SyntheticSpec& s) {
  json j = {{"n", s.n},
            {"d", s.d},
            {"density", s.density},
            {"kappa", s.target_kappa},
            {"seed", s.seed},
            {"column_spread", s.column_spread}};
  if (s.l1_lambda) j["l1_lambda"] = *s.l1_lambda;
  return j;
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
  static const std::set<std::string> known = {"n",    "d",             "density",  "kappa",
                                              "seed", "column_spread", "l1_lambda", "loss"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw std::invalid_argument("unknown synthetic key '" + k + "'");
  SyntheticSpec s;
  s.n = j.value("n", s.n);
  s.d = j.value("d", s.d);
  s.density = j.value("density", s.density);
  s.target_kappa = j.value("kappa", s.target_kappa);
  s.seed = j.value("seed", s.seed);
  s.column_spread = j.value("column_spread", s.column_spread);
  if (j.contains("l1_lambda")) s.l1_lambda = j.at("l1_lambda").get<double>();
  if (j.contains("loss")) s.loss = loss_from_string(j.at("loss").get<std::string>());
  return s;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  static const std::set<std::string> known = {
      "label",   "data",      "min_features", "loss",      "reg",   "algorithm",
      "inner_m", "p_full",    "gamma",        "epochs",    "seed",  "trace_every",
      "trace_out", "mu_override", "f_star",   "stop_below", "lazy", "random_access_delay_ns",
      "sequential_access_delay_ns", "eta"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k) && !passive_keys().count(k))
      throw std::invalid_argument("unknown config key '" + k + "'");

  ExperimentConfig c;
  c.label = j.value("label", std::string());
  if (j.contains("data")) {
    const json& d = j.at("data");
    if (d.is_string()) {
      c.data_path = d.get<std::string>();
    } else if (d.is_object() && d.contains("synthetic")) {
      c.synthetic = synthetic_spec_from_json(d.at("synthetic"));
    } else {
      throw std::invalid_argument("data must be a path or {\"synthetic\": {...}}");
    }
  }
  c.min_features = j.value("min_features", std::size_t{0});
  if (j.contains("loss")) c.loss = loss_from_string(j.at("loss").get<std::string>());
  if (c.synthetic) c.synthetic->loss = c.loss;
  if (j.contains("reg")) c.reg = reg_from_json(j.at("reg"));
  if (j.contains("p_full") && !j.at("p_full").is_null()) c.p_full = j.at("p_full").get<double>();
  if (j.contains("algorithm"))
    c.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
  else if (c.p_full)
    c.algorithm = Algorithm::SAGAPlusPlus;
  if (j.contains("inner_m")) {
    const json& m = j.at("inner_m");
    if (m.is_string()) {
      if (m.get<std::string>() != "1.5n")
        throw std::invalid_argument("inner_m must be a count or \"1.5n\"");
    } else if (!m.is_null()) {
      c.inner_m = m.get<std::size_t>();
    }
  }
  std::optional<double> tau;
  if (j.contains("tau")) tau = j.at("tau").get<double>();
  if (j.contains("gamma")) c.gamma = gamma_from_json(j.at("gamma"), tau);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.trace_every = j.value("trace_every", c.trace_every);
  c.trace_out = j.value("trace_out", std::string());
  if (j.contains("mu_override")) c.mu_override = j.at("mu_override").get<double>();
  if (j.contains("f_star")) c.f_star = j.at("f_star").get<double>();
  if (j.contains("stop_below")) c.stop_below = j.at("stop_below").get<double>();
  if (j.contains("lazy")) c.lazy = j.at("lazy").get<bool>();
  c.random_access_delay_ns = j.value("random_access_delay_ns", 0.0);
  c.sequential_access_delay_ns = j.value("sequential_access_delay_ns", 0.0);
  if (j.contains("eta")) c.eta = j.at("eta").get<double>();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  if (!c.label.empty()) j["label"] = c.label;
  if (c.data_path) j["data"] = *c.data_path;
  if (c.synthetic) j["data"] = {{"synthetic", synthetic_spec_to_json(*c.synthetic)}};
  if (c.min_features) j["min_features"] = c.min_features;
  j["loss"] = to_string(c.loss);
  if (c.reg) j["reg"] = reg_to_json(*c.reg);
  j["algorithm"] = to_string(c.algorithm);
  if (c.inner_m)
    j["inner_m"] = *c.inner_m;
  else if (!c.p_full)
    j["inner_m"] = "1.5n";
  if (c.p_full) j["p_full"] = *c.p_full;
  j["gamma"] = gamma_to_json(c.gamma);
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["trace_every"] = c.trace_every;
  if (!c.trace_out.empty()) j["trace_out"] = c.trace_out;
  if (c.mu_override) j["mu_override"] = *c.mu_override;
  if (c.f_star) j["f_star"] = *c.f_star;
  if (c.stop_below) j["stop_below"] = *c.stop_below;
  if (c.lazy) j["lazy"] = *c.lazy;
  if (c.random_access_delay_ns != 0.0) j["random_access_delay_ns"] = c.random_access_delay_ns;
  if (c.sequential_access_delay_ns != 0.0)
    j["sequential_access_delay_ns"] = c.sequential_access_delay_ns;
  if (c.eta) j["eta"] = *c.eta;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return config_from_json(json::parse(in));
}

void validate_config(const ExperimentConfig& c) {
  if (!c.data_path && !c.synthetic) throw std::invalid_argument("config has no data");
  if (!(c.epochs > 0.0)) throw std::invalid_argument("epochs must be positive");
  if (!(c.trace_every > 0.0)) throw std::invalid_argument("trace_every must be positive");
  if (c.p_full && c.inner_m) throw std::invalid_argument("set either inner_m or p_full, not both");
  if (c.p_full && c.algorithm != Algorithm::SAGAPlusPlus)
    throw std::invalid_argument("p_full only applies to saga++");
  if (c.data_path && !c.reg) throw std::invalid_argument("file data needs an explicit reg");
  if (c.random_access_delay_ns < 0.0 || c.sequential_access_delay_ns < 0.0)
    throw std::invalid_argument("access delays must be >= 0");
  if (c.lazy && *c.lazy && c.reg && c.reg->kind == Regularizer::Kind::L2)
    throw std::invalid_argument("lazy updates need an l1 regulariser or none");
  if (c.gamma.kind == StepPolicy::Kind::Dependent) {
    const bool has_mu = c.mu_override || (c.reg && c.reg->kind == Regularizer::Kind::L2) ||
                        (!c.reg && c.synthetic && !c.synthetic->l1_lambda);
    if (!has_mu)
      throw MissingStrongConvexity(
          "gamma prop2 needs a strong convexity modulus: set mu_override or use l2");
  }
}

LoadedProblem load_problem(const ExperimentConfig& c) {
  if (c.data_path) {
    ParseOptions opts;
    opts.min_features = c.min_features;
    LoadedProblem p{load_libsvm(*c.data_path, opts), c.reg.value_or(Regularizer::none()),
                    c.f_star, std::nullopt};
    if (p.reg.kind == Regularizer::Kind::L2) p.mu = p.reg.lambda;
    return p;
  }
  if (!c.synthetic) throw std::invalid_argument("config has no data");
  SyntheticSpec spec = *c.synthetic;
  spec.loss = c.loss;
  spec.solve_reference = false;
  SyntheticProblem gen = generate_synthetic(spec);
  LoadedProblem p{std::move(gen.data), c.reg.value_or(gen.reg), c.f_star, std::nullopt};
  if (p.reg.kind == Regularizer::Kind::L2) p.mu = p.reg.lambda;
  if (!p.f_star) {
    const CompositeObjective obj(p.data, c.loss, p.reg);
    p.f_star = reference_optimum(obj).f;
  }
  return p;
}

RunConfig make_run_config(const ExperimentConfig& c, const LoadedProblem& problem) {
  RunConfig rc;
  rc.algorithm = c.algorithm;
  rc.step = c.gamma;
  rc.epochs = c.epochs;
  rc.seed = c.seed;
  rc.trace_every = c.trace_every;
  rc.inner_m = c.inner_m;
  rc.p_full = c.p_full;
  rc.lazy = c.lazy;
  rc.f_star = problem.f_star;
  rc.stop_below = c.stop_below;
  rc.random_access_delay_ns = c.random_access_delay_ns;
  rc.sequential_access_delay_ns = c.sequential_access_delay_ns;

  // Resolve the step now so policy errors surface before any compute.
  const CompositeObjective obj(problem.data, c.loss, problem.reg, c.mu_override);
  const SolverConfig sc = preset_config(c.algorithm, obj.n_samples(), c.inner_m, c.p_full);
  resolve_step(obj, rc.step, sc.dist.expected_batch(obj.n_samples()));
  return rc;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << "epoch_equiv,wall_seconds,objective,suboptimality,nnz_w\n";
  for (const TraceRecord& r : trace) {
    out << format_number(r.epoch_equiv) << ',' << format_number(r.wall_seconds) << ','
        << format_number(r.objective) << ',';
    if (r.suboptimality) out << format_number(*r.suboptimality);
    out << ',' << r.nnz_w << '\n';
  }
}

namespace {

RunResult run_on(const ExperimentConfig& c, const LoadedProblem& problem) {
  const RunConfig rc = make_run_config(c, problem);
  const CompositeObjective obj(problem.data, c.loss, problem.reg, c.mu_override);
  return run(obj, rc);
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& c) {
  validate_config(c);
  const LoadedProblem problem = load_problem(c);
  const RunConfig rc = make_run_config(c, problem);
  const CompositeObjective obj(problem.data, c.loss, problem.reg, c.mu_override);

  ExperimentOutcome out;
  out.result = run(obj, rc);
  out.exit_code = out.result.status == RunStatus::Diverged ? 2 : 0;

  if (!c.trace_out.empty()) {
    out.csv_path = c.trace_out;
    std::ofstream csv(out.csv_path);
    if (!csv) throw std::runtime_error("cannot write " + out.csv_path.string());
    write_trace_csv(csv, out.result.trace);

    json side = config_to_json(c);
    json resolved = {{"gamma", out.result.gamma},
                     {"expected_batch", out.result.expected_batch},
                     {"n_samples", problem.data.n_samples()},
                     {"n_features", problem.data.n_features()},
                     {"L", obj.smoothness()},
                     {"reg", reg_to_json(problem.reg)},
                     {"lazy", rc.lazy.value_or(problem.reg.kind != Regularizer::Kind::L2)},
                     {"status", to_string(out.result.status)},
                     {"data_accesses", out.result.data_accesses},
                     {"iterations", out.result.iterations}};
    if (problem.f_star) resolved["f_star"] = *problem.f_star;
    if (c.eta) resolved["eta"] = *c.eta;
    if (!out.result.diagnostic.empty()) resolved["diagnostic"] = out.result.diagnostic;
    side["resolved"] = resolved;
    out.sidecar_path = out.csv_path;
    out.sidecar_path += ".json";
    std::ofstream js(out.sidecar_path);
    if (!js) throw std::runtime_error("cannot write " + out.sidecar_path.string());
    js << side.dump(2) << '\n';
  }
  return out;
}

PlanResult make_plan(double n, double kappa, double tau, double eta, double mu) {
  PlanResult p;
  p.n = n;
  p.kappa = kappa;
  p.tau = tau;
  p.eta = eta;
  p.mu = mu;
  p.batch = rates::solve_optimal_batch(n, kappa, tau, eta);
  p.p_full = rates::two_point_params(p.batch.batch, n);
  p.rate = rates::plan_rates(n, kappa * mu, mu, tau, p.batch.batch, eta);
  return p;
}

json plan_to_json(const PlanResult& p) {
  json j = {{"n", p.n},
            {"kappa", p.kappa},
            {"tau", p.tau},
            {"eta", p.eta},
            {"mu", p.mu},
            {"B_star", p.batch.batch},
            {"p_full", p.p_full},
            {"gamma", p.rate.gamma},
            {"rho", p.rate.rho},
            {"gamma_valid", p.rate.gamma_valid},
            {"clamped", p.batch.clamped},
            {"residual", p.batch.residual}};
  if (!p.batch.diagnostic.empty()) j["diagnostic"] = p.batch.diagnostic;
  return j;
}

CompareTable compare(const std::vector<ExperimentConfig>& cfgs, bool serial,
                     std::vector<double> thresholds) {
  if (cfgs.size() < 2) throw std::invalid_argument("compare needs at least two configs");
  CompareTable table;
  table.thresholds = thresholds;
  table.rows.resize(cfgs.size());

  // One problem (and one ground truth) per distinct data description.
  std::map<std::string, std::shared_ptr<LoadedProblem>> problems;
  std::vector<std::shared_ptr<LoadedProblem>> assigned(cfgs.size());
  std::vector<std::string> load_errors(cfgs.size());
  for (std::size_t k = 0; k < cfgs.size(); ++k) {
    const ExperimentConfig& c = cfgs[k];
    CompareRow& row = table.rows[k];
    row.label = c.label.empty() ? to_string(c.algorithm) : c.label;
    row.algorithm = c.algorithm;
    row.epochs_to.assign(thresholds.size(), std::nullopt);
    row.wall_to.assign(thresholds.size(), std::nullopt);
    try {
      validate_config(c);
      json key = config_to_json(c);
      const json data_key = {key.value("data", json()), key.value("loss", json()),
                             key.value("reg", json()), key.value("f_star", json()),
                             c.min_features};
      const std::string dk = data_key.dump();
      auto it = problems.find(dk);
      if (it == problems.end())
        it = problems.emplace(dk, std::make_shared<LoadedProblem>(load_problem(c))).first;
      assigned[k] = it->second;
    } catch (const std::exception& e) {
      load_errors[k] = e.what();
    }
  }

  auto work = [&](std::size_t k) {
    CompareRow& row = table.rows[k];
    if (!assigned[k]) {
      row.failure = load_errors[k];
      return;
    }
    try {
      const RunResult r = run_on(cfgs[k], *assigned[k]);
      row.status = r.status;
      if (r.status == RunStatus::Diverged) row.failure = r.diagnostic;
      if (!assigned[k]->f_star) row.failure = "F* unknown: no suboptimality";
      for (std::size_t t = 0; t < thresholds.size(); ++t) {
        for (const TraceRecord& rec : r.trace) {
          if (rec.suboptimality && *rec.suboptimality <= thresholds[t]) {
            row.epochs_to[t] = rec.epoch_equiv;
            row.wall_to[t] = rec.wall_seconds;
            break;
          }
        }
      }
    } catch (const std::exception& e) {
      row.failure = e.what();
    }
  };

  if (serial) {
    for (std::size_t k = 0; k < cfgs.size(); ++k) work(k);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < cfgs.size(); ++k) pool.emplace_back(work, k);
    for (auto& t : pool) t.join();
  }
  return table;
}

json compare_to_json(const CompareTable& t) {
  json rows = json::array();
  for (const CompareRow& r : t.rows) {
    json per = json::array();
    for (std::size_t k = 0; k < t.thresholds.size(); ++k) {
      per.push_back({{"threshold", t.thresholds[k]},
                     {"epochs", r.epochs_to[k] ? json(*r.epochs_to[k]) : json()},
                     {"wall_seconds", r.wall_to[k] ? json(*r.wall_to[k]) : json()}});
    }
    json row = {{"label", r.label},
                {"algorithm", to_string(r.algorithm)},
                {"status", to_string(r.status)},
                {"reached", per}};
    if (!r.failure.empty()) row["failure"] = r.failure;
    rows.push_back(row);
  }
  return {{"thresholds", t.thresholds}, {"rows", rows}};
}

std::string format_compare(const CompareTable& t) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "run" << std::setw(18) << "status";
  for (double thr : t.thresholds) {
    std::ostringstream h;
    h << std::scientific << std::setprecision(0) << thr;
    out << std::setw(16) << ("epochs@" + h.str()) << std::setw(16) << ("wall@" + h.str());
  }
  out << "note\n";
  for (const CompareRow& r : t.rows) {
    out << std::setw(12) << r.label << std::setw(18) << to_string(r.status);
    for (std::size_t k = 0; k < t.thresholds.size(); ++k) {
      out << std::setw(16) << (r.epochs_to[k] ? format_number(*r.epochs_to[k]) : "-")
          << std::setw(16) << (r.wall_to[k] ? format_number(*r.wall_to[k]) : "-");
    }
    out << r.failure << '\n';
  }
  return out.str();
}

}  // namespace batchvr
