// batchvr: command-line front end for the solver library.
//
//   batchvr parse-stats data.libsvm
//   batchvr profile data.libsvm --reps 5
//   batchvr plan --n 100000 --kappa 2500 --tau 0.25 --eta 0.46
//   batchvr run --config run.json
//   batchvr compare --config runs.json --serial
//   batchvr synth --n 1000 --d 50 --kappa 100 --out synth.libsvm

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "batchvr/dataio.hpp"
#include "batchvr/experiment.hpp"
#include "batchvr/glm.hpp"
#include "batchvr/profiler.hpp"
#include "batchvr/synthetic.hpp"

using nlohmann::json;
using namespace batchvr;

namespace {

json stats_json(const DatasetStats& s) {
  return {{"n_samples", s.n_samples},
          {"n_features", s.n_features},
          {"nnz", s.nnz},
          {"nnz_ratio", s.nnz_ratio},
          {"max_row_norm_sq", s.max_row_norm_sq}};
}

std::vector<ExperimentConfig> load_compare(const std::string& path, bool& serial) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const json j = json::parse(in);
  const json* runs = &j;
  if (j.is_object()) {
    if (j.contains("serial")) serial = serial || j.at("serial").get<bool>();
    runs = &j.at("runs");
  }
  std::vector<ExperimentConfig> out;
  for (const json& r : *runs) out.push_back(config_from_json(r));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variance-reduced solvers with stochastic batch sizes"};
  app.require_subcommand(1);

  std::string path;
  std::size_t min_features = 0;
  auto* stats = app.add_subcommand("parse-stats", "Parse a LIBSVM file and print its statistics");
  stats->add_option("file", path, "LIBSVM file, optionally gzip-compressed")->required();
  stats->add_option("--min-features", min_features, "Lower bound on the feature count");

  std::size_t reps = 5;
  std::uint64_t seed = 0;
  double delay_ns = 0.0;
  double seq_delay_ns = 0.0;
  std::string loss_name = "logistic";
  auto* profile = app.add_subcommand("profile", "Measure the cache effect ratio T_seq/T_rand");
  profile->add_option("file", path, "LIBSVM file")->required();
  profile->add_option("--reps", reps, "Timed repetitions (>= 3)");
  profile->add_option("--seed", seed, "Seed for the random access order");
  profile->add_option("--delay-ns", delay_ns, "Extra busy-wait per random access");
  profile->add_option("--seq-delay-ns", seq_delay_ns, "Extra busy-wait per sequential access");
  profile->add_option("--loss", loss_name, "logistic or squared");
  profile->add_option("--min-features", min_features, "Lower bound on the feature count");

  double n = 0.0, kappa = 0.0, tau = 0.25, eta = 1.0, mu = 1.0;
  auto* plan = app.add_subcommand("plan", "Optimal expected batch size and step size");
  plan->add_option("--n", n, "Number of samples")->required();
  plan->add_option("--kappa", kappa, "Condition number L/mu")->required();
  plan->add_option("--tau", tau, "Step-size parameter in (0, 1)");
  plan->add_option("--eta", eta, "Cache effect ratio in (0, 1]");
  plan->add_option("--mu", mu, "Strong convexity modulus (gamma scales with 1/mu)");

  std::string config;
  std::string trace_out;
  std::optional<double> epochs;
  std::optional<std::uint64_t> run_seed;
  auto* run_cmd = app.add_subcommand("run", "Run one experiment config");
  run_cmd->add_option("--config", config, "Experiment JSON")->required();
  run_cmd->add_option("--trace-out", trace_out, "CSV output (overrides the config)");
  run_cmd->add_option("--epochs", epochs, "Epoch budget (overrides the config)");
  run_cmd->add_option("--seed", run_seed, "Seed (overrides the config)");

  bool serial = false;
  bool as_json = false;
  auto* cmp = app.add_subcommand("compare", "Run several configs and tabulate time to tolerance");
  cmp->add_option("--config", config, "JSON list of configs or {\"runs\": [...]}")->required();
  cmp->add_flag("--serial", serial, "Run members one at a time (needed for wall-time fidelity)");
  cmp->add_flag("--json", as_json, "Print the table as JSON");

  SyntheticSpec spec;
  std::optional<double> l1;
  std::string out_path;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic problem in LIBSVM format");
  synth->add_option("--n", spec.n, "Samples");
  synth->add_option("--d", spec.d, "Features");
  synth->add_option("--density", spec.density, "Fraction of nonzeros per row");
  synth->add_option("--kappa", spec.target_kappa, "Target L/mu for the l2 problem");
  synth->add_option("--spread", spec.column_spread, "Ratio of largest to smallest column scale");
  synth->add_option("--seed", spec.seed, "Seed");
  synth->add_option("--loss", loss_name, "logistic or squared");
  synth->add_option("--l1", l1, "Use an l1 regulariser with this lambda");
  synth->add_option("--out", out_path, "Output LIBSVM file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*stats) {
      ParseOptions opts;
      opts.min_features = min_features;
      std::cout << stats_json(compute_stats(load_libsvm(path, opts))).dump(2) << '\n';
    } else if (*profile) {
      ParseOptions opts;
      opts.min_features = min_features;
      const SparseDataset ds = load_libsvm(path, opts);
      const CompositeObjective obj(ds, loss_from_string(loss_name), Regularizer::none());
      ProfileOptions po;
      po.reps = reps;
      po.seed = seed;
      po.random_access_delay_ns = delay_ns;
      po.sequential_access_delay_ns = seq_delay_ns;
      const CacheProfile p = measure_cache_ratio(obj, po);
      std::cout << json{{"t_seq_seconds", p.t_seq_seconds},
                        {"t_rand_seconds", p.t_rand_seconds},
                        {"eta", p.eta},
                        {"reps", p.reps},
                        {"dispersion", p.dispersion},
                        {"random_access_delay_ns", p.random_access_delay_ns},
                        {"sequential_access_delay_ns", p.sequential_access_delay_ns},
                        {"checksum", p.seq_checksums.front()},
                        {"checksums_consistent", p.checksums_consistent()}}
                       .dump(2)
                << '\n';
    } else if (*plan) {
      std::cout << plan_to_json(make_plan(n, kappa, tau, eta, mu)).dump(2) << '\n';
    } else if (*run_cmd) {
      ExperimentConfig cfg = load_config(config);
      if (!trace_out.empty()) cfg.trace_out = trace_out;
      if (epochs) cfg.epochs = *epochs;
      if (run_seed) cfg.seed = *run_seed;
      const ExperimentOutcome o = run_experiment(cfg);
      const RunResult& r = o.result;
      json summary = {{"status", to_string(r.status)},
                      {"gamma", r.gamma},
                      {"expected_batch", r.expected_batch},
                      {"data_accesses", r.data_accesses},
                      {"final_objective", r.trace.back().objective},
                      {"epochs", r.trace.back().epoch_equiv},
                      {"wall_seconds", r.trace.back().wall_seconds}};
      if (r.trace.back().suboptimality) summary["final_suboptimality"] = *r.trace.back().suboptimality;
      if (!o.csv_path.empty()) summary["trace"] = o.csv_path.string();
      if (!r.diagnostic.empty()) summary["diagnostic"] = r.diagnostic;
      std::cout << summary.dump(2) << '\n';
      if (o.exit_code != 0) std::cerr << "error: " << r.diagnostic << '\n';
      return o.exit_code;
    } else if (*cmp) {
      const std::vector<ExperimentConfig> cfgs = load_compare(config, serial);
      const CompareTable t = compare(cfgs, serial);
      if (as_json)
        std::cout << compare_to_json(t).dump(2) << '\n';
      else
        std::cout << format_compare(t);
      for (const CompareRow& r : t.rows)
        if (!r.failure.empty()) return 2;
    } else if (*synth) {
      spec.loss = loss_from_string(loss_name);
      spec.l1_lambda = l1;
      const SyntheticProblem p = generate_synthetic(spec);
      std::ofstream out(out_path);
      if (!out) throw std::runtime_error("cannot write " + out_path);
      write_libsvm(out, p.data);
      json meta = {{"file", out_path},
                   {"spec", synthetic_spec_to_json(spec)},
                   {"loss", to_string(spec.loss)},
                   {"stats", stats_json(compute_stats(p.data))}};
      if (p.reg.kind == Regularizer::Kind::L2)
        meta["reg"] = {{"kind", "l2"}, {"lambda", p.reg.lambda}};
      else
        meta["reg"] = {{"kind", "l1"}, {"lambda", p.reg.lambda}};
      if (p.f_star) meta["f_star"] = *p.f_star;
      std::cout << meta.dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
