#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "batchvr/glm.hpp"
#include "batchvr/rates.hpp"
#include "batchvr/solver.hpp"
#include "batchvr/synthetic.hpp"

namespace batchvr {

/// One solver run described as data. Loaded from and saved to JSON:
///
///   {"data": "path.libsvm" | {"synthetic": {...}},
///    "loss": "logistic", "reg": {"kind": "l1", "lambda": 1e-4},
///    "algorithm": "saga++", "inner_m": "1.5n", "gamma": "prop1",
///    "epochs": 30, "seed": 1, "trace_out": "run.csv"}
///
/// gamma is "prop1", "prop2", "prop2(0.25)" or a number. Keys of a plan
/// object (p_full, gamma, tau, eta, ...) are accepted as well.
struct ExperimentConfig {
  std::string label;  ///< row name in comparisons; defaults to the algorithm
  std::optional<std::string> data_path;
  std::optional<SyntheticSpec> synthetic;
  std::size_t min_features = 0;
  LossKind loss = LossKind::Logistic;
  /// Missing for synthetic data means "use the generated regulariser".
  std::optional<Regularizer> reg;
  Algorithm algorithm = Algorithm::SAGA;
  std::optional<std::size_t> inner_m;  ///< empty means 1.5 n
  std::optional<double> p_full;
  StepPolicy gamma = StepPolicy::adaptive();
  double epochs = 10.0;
  std::uint64_t seed = 0;
  double trace_every = 1.0;
  std::string trace_out;
  std::optional<double> mu_override;
  std::optional<double> f_star;
  std::optional<double> stop_below;
  std::optional<bool> lazy;
  double random_access_delay_ns = 0.0;
  double sequential_access_delay_ns = 0.0;
  std::optional<double> eta;  ///< cache ratio, recorded when known
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Report conflicts that would only surface mid-run (missing data,
/// incompatible batch options, negative budgets). Throws std::invalid_argument.
void validate_config(const ExperimentConfig& cfg);

/// Dataset, regulariser and ground truth resolved from a config.
struct LoadedProblem {
  SparseDataset data;
  Regularizer reg;
  std::optional<double> f_star;
  std::optional<double> mu;
};

LoadedProblem load_problem(const ExperimentConfig& cfg);

/// Throws MissingStrongConvexity / rates::InfeasibleTau for step policies
/// that cannot be resolved, before any iteration runs.
RunConfig make_run_config(const ExperimentConfig& cfg, const LoadedProblem& problem);

/// CSV with header epoch_equiv,wall_seconds,objective,suboptimality,nnz_w.
void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);
std::string format_number(double v);

struct ExperimentOutcome {
  RunResult result;
  int exit_code = 0;  ///< 0 converged or budget spent, 2 diverged
  std::filesystem::path csv_path;
  std::filesystem::path sidecar_path;
};

/// Runs the config, writing trace_out (when set) and trace_out + ".json",
/// a sidecar holding the config plus the resolved quantities.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

/// Planner output. gamma and rho use L = kappa * mu.
struct PlanResult {
  double n = 0.0;
  double kappa = 0.0;
  double tau = 0.25;
  double eta = 1.0;
  double mu = 1.0;
  rates::OptimalBatch batch;
  double p_full = 0.0;
  rates::RatePlan rate;
};

PlanResult make_plan(double n, double kappa, double tau, double eta, double mu = 1.0);
nlohmann::json plan_to_json(const PlanResult& p);

struct CompareRow {
  std::string label;
  Algorithm algorithm = Algorithm::SAGA;
  RunStatus status = RunStatus::EpochsExhausted;
  /// Per threshold: first epoch_equiv / wall_seconds at or below it.
  std::vector<std::optional<double>> epochs_to;
  std::vector<std::optional<double>> wall_to;
  std::string failure;
};

struct CompareTable {
  std::vector<double> thresholds;
  std::vector<CompareRow> rows;
};

/// Runs every config (sequentially when `serial`, else on threads) against
/// a shared ground truth. Failed members keep their row with an annotation.
CompareTable compare(const std::vector<ExperimentConfig>& cfgs, bool serial,
                     std::vector<double> thresholds = {1e-4, 1e-8});

nlohmann::json compare_to_json(const CompareTable& t);
std::string format_compare(const CompareTable& t);

nlohmann::json synthetic_spec_to_json(const SyntheticSpec& s);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

}  // namespace batchvr
