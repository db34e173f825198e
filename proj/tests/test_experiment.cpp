#include <doctest.h>

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "batchvr/experiment.hpp"
#include "helpers.hpp"

using namespace batchvr;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("batchvr_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json small_synth() {
  return {{"synthetic", {{"n", 200}, {"d", 20}, {"density", 0.3}, {"kappa", 30}, {"seed", 3}}}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  const json j = {{"data", small_synth()},
                  {"algorithm", "saga++"},
                  {"inner_m", "1.5n"},
                  {"gamma", "prop2(0.01)"},
                  {"epochs", 12},
                  {"seed", 4},
                  {"reg", {{"kind", "l1"}, {"lambda", 1e-3}}}};
  const ExperimentConfig c = config_from_json(j);
  CHECK(c.algorithm == Algorithm::SAGAPlusPlus);
  CHECK(!c.inner_m);
  CHECK(c.gamma.kind == StepPolicy::Kind::Dependent);
  CHECK(c.gamma.tau == 0.01);
  CHECK(c.epochs == 12.0);
  CHECK(c.synthetic->n == 200);
  CHECK(c.reg->kind == Regularizer::Kind::L1);

  const ExperimentConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));

  CHECK(config_from_json({{"data", "x.svm"}, {"gamma", 0.5}}).gamma.gamma == 0.5);
  CHECK(config_from_json({{"data", "x.svm"}, {"gamma", {{"prop2", 0.1}}}}).gamma.tau == 0.1);
  CHECK(config_from_json({{"data", "x.svm"}, {"inner_m", 40}}).inner_m == 40u);
  CHECK(config_from_json({{"data", "x.svm"}, {"p_full", 0.1}}).algorithm ==
        Algorithm::SAGAPlusPlus);
  CHECK_THROWS(config_from_json({{"data", "x.svm"}, {"gama", "prop1"}}));
  CHECK_THROWS(config_from_json({{"data", "x.svm"}, {"gamma", "prop3"}}));
  CHECK_THROWS(config_from_json(json::array()));
}

TEST_CASE("config conflicts are reported before compute") {
  ExperimentConfig c;
  CHECK_THROWS_AS(validate_config(c), std::invalid_argument);
  c.data_path = "missing.svm";
  CHECK_THROWS_AS(validate_config(c), std::invalid_argument);  // no reg
  c.reg = Regularizer::l1(0.1);
  c.gamma = StepPolicy::dependent(0.1);
  CHECK_THROWS_AS(validate_config(c), MissingStrongConvexity);
  c.mu_override = 0.01;
  CHECK_NOTHROW(validate_config(c));
  c.inner_m = 10;
  c.p_full = 0.2;
  c.algorithm = Algorithm::SAGAPlusPlus;
  CHECK_THROWS(validate_config(c));
  c.p_full.reset();
  c.epochs = 0;
  CHECK_THROWS(validate_config(c));
  c.epochs = 1;
  c.reg = Regularizer::l2(0.1);
  c.lazy = true;
  CHECK_THROWS(validate_config(c));
}

TEST_CASE("planner output") {
  const PlanResult p = make_plan(1e5, 2500, 0.25, 0.46);
  CHECK(p.batch.batch >= 1.0);
  CHECK(p.batch.residual < 1e-8);
  CHECK(p.p_full == doctest::Approx((p.batch.batch - 1) / (1e5 - 1)));
  const json j = plan_to_json(p);
  for (const char* k : {"n", "kappa", "tau", "eta", "B_star", "p_full", "gamma", "rho",
                        "gamma_valid"})
    CHECK(j.contains(k));
  // A plan is a valid config fragment.
  json cfg = j;
  cfg["data"] = "x.svm";
  const ExperimentConfig c = config_from_json(cfg);
  CHECK(c.algorithm == Algorithm::SAGAPlusPlus);
  CHECK(*c.p_full == p.p_full);
  CHECK(c.gamma.gamma == p.rate.gamma);
  CHECK(make_plan(100, 5, 0.25, 1.0).batch.batch == 1.0);
}

TEST_CASE("trace csv format") {
  std::ostringstream out;
  write_trace_csv(out, {{0.0, 0.0, 0.6931471805599453, 0.25, 0}, {1.5, 0.125, 0.5, {}, 3}});
  CHECK(out.str() ==
        "epoch_equiv,wall_seconds,objective,suboptimality,nnz_w\n"
        "0,0,0.6931471805599453,0.25,0\n"
        "1.5,0.125,0.5,,3\n");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1e-10) == "1e-10");
}

TEST_CASE("run writes trace and sidecar, and the sidecar reruns identically") {
  const fs::path dir = scratch_dir("run");
  ExperimentConfig c = config_from_json({{"data", small_synth()},
                                         {"algorithm", "svrg"},
                                         {"epochs", 6},
                                         {"seed", 8},
                                         {"trace_out", (dir / "a.csv").string()}});
  const ExperimentOutcome a = run_experiment(c);
  CHECK(a.exit_code == 0);
  REQUIRE(fs::exists(dir / "a.csv"));
  REQUIRE(fs::exists(dir / "a.csv.json"));
  const json side = json::parse(slurp(dir / "a.csv.json"));
  CHECK(side.contains("resolved"));
  CHECK(side["resolved"]["gamma"].get<double>() == a.result.gamma);

  ExperimentConfig again = config_from_json(side);
  again.trace_out = (dir / "b.csv").string();
  const ExperimentOutcome b = run_experiment(again);
  CHECK(b.result.w == a.result.w);
  REQUIRE(b.result.trace.size() == a.result.trace.size());
  for (std::size_t k = 0; k < a.result.trace.size(); ++k) {
    CHECK(b.result.trace[k].objective == a.result.trace[k].objective);
    CHECK(b.result.trace[k].epoch_equiv == a.result.trace[k].epoch_equiv);
  }
  CHECK(a.result.trace.back().suboptimality);
  CHECK(*a.result.trace.back().suboptimality >= -1e-12);
}

TEST_CASE("diverging run exits with code 2") {
  ExperimentConfig c = config_from_json(
      {{"data", small_synth()}, {"loss", "squared"}, {"reg", "none"}, {"algorithm", "gd"},
       {"gamma", 1e4}, {"epochs", 40}, {"f_star", 0.0}});
  const ExperimentOutcome o = run_experiment(c);
  CHECK(o.exit_code == 2);
  CHECK(o.result.status == RunStatus::Diverged);
}

TEST_CASE("compare table") {
  std::vector<ExperimentConfig> cfgs;
  for (const char* a : {"saga", "svrg", "saga++"})
    cfgs.push_back(config_from_json({{"data", small_synth()}, {"algorithm", a}, {"epochs", 60}}));
  cfgs.push_back(config_from_json(
      {{"data", small_synth()}, {"algorithm", "saga"}, {"gamma", "prop2(0.9)"}, {"label", "bad"}}));
  const CompareTable t = compare(cfgs, false);
  REQUIRE(t.rows.size() == 4);
  CHECK(t.thresholds == std::vector<double>{1e-4, 1e-8});
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(t.rows[k].failure.empty());
    CHECK(t.rows[k].epochs_to[0]);
    CHECK(t.rows[k].epochs_to[1]);
    CHECK(*t.rows[k].epochs_to[0] <= *t.rows[k].epochs_to[1]);
  }
  CHECK(t.rows[3].label == "bad");
  CHECK(!t.rows[3].failure.empty());
  const json j = compare_to_json(t);
  CHECK(j["rows"].size() == 4);
  CHECK(format_compare(t).find("saga++") != std::string::npos);
  CHECK_THROWS(compare({cfgs[0]}, true));
}

TEST_CASE("synthetic problems hit the requested conditioning") {
  SyntheticSpec s;
  s.n = 400;
  s.d = 30;
  s.density = 0.3;
  s.target_kappa = 100;
  s.seed = 12;
  const SyntheticProblem p = generate_synthetic(s);
  const CompositeObjective obj(p.data, LossKind::Logistic, p.reg);
  const ProblemConstants pc = obj.estimate_constants();
  CHECK(pc.kappa == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(pc.kappa >= 50.0);
  CHECK(pc.kappa <= 200.0);
  REQUIRE(p.w_star);
  REQUIRE(p.f_star);

  // Dense oracle: the Hessian at w* lies between mu I and L I, and the
  // gradient vanishes there.
  const Eigen::MatrixXd X = testutil::dense(p.data);
  Eigen::VectorXd w(30);
  for (int j = 0; j < 30; ++j) w(j) = (*p.w_star)[static_cast<std::size_t>(j)];
  const Eigen::VectorXd m = X * w;
  Eigen::VectorXd curv(m.size());
  Eigen::VectorXd deriv(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double y = p.data.label(static_cast<std::size_t>(i));
    const double sg = 1.0 / (1.0 + std::exp(-y * m(i)));
    curv(i) = sg * (1.0 - sg);
    deriv(i) = y * sg;
  }
  const Eigen::MatrixXd H = X.transpose() * curv.asDiagonal() * X / 400.0 +
                            pc.mu * Eigen::MatrixXd::Identity(30, 30);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues();
  CHECK(ev.minCoeff() >= pc.mu * (1 - 1e-12));
  CHECK(ev.maxCoeff() <= pc.L * (1 + 1e-12));
  const Eigen::VectorXd grad = X.transpose() * deriv / 400.0 + pc.mu * w;
  CHECK(grad.lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(*p.f_star == doctest::Approx(obj.objective_value(*p.w_star)).epsilon(1e-15));
}

TEST_CASE("synthetic generation is deterministic") {
  SyntheticSpec s;
  s.n = 100;
  s.d = 10;
  s.seed = 5;
  s.solve_reference = false;
  const SyntheticProblem a = generate_synthetic(s), b = generate_synthetic(s);
  CHECK(a.data.values().size() == b.data.values().size());
  CHECK(std::equal(a.data.values().begin(), a.data.values().end(), b.data.values().begin()));
  CHECK(std::equal(a.data.labels().begin(), a.data.labels().end(), b.data.labels().begin()));
  s.seed = 6;
  const SyntheticProblem c = generate_synthetic(s);
  CHECK(!std::equal(a.data.labels().begin(), a.data.labels().end(), c.data.labels().begin()));
}
