// Command-line front end: data ingestion, fitting, prediction, simulation and
// evaluation with plot-ready CSV exports.
//
// Exit codes: 0 ok, 2 input validation, 3 numerical/convergence failure.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "groupenet/groupenet.hpp"

namespace fs = std::filesystem;
using namespace groupenet;

namespace {

double env_or(const char* name, double fallback) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return fallback;
  try {
    return std::stod(v);
  } catch (const std::exception&) {
    throw validation_error(std::string("environment variable ") + name +
                           " is not a number: '" + v + "'");
  }
}

VbOptions vb_options_from_env() {
  VbOptions opts;
  opts.tol = env_or("GROUPENET_VB_TOL", opts.tol);
  opts.max_iter = static_cast<int>(env_or("GROUPENET_VB_MAX_ITER", opts.max_iter));
  return opts;
}

EmOptions em_options_from_env() {
  EmOptions opts;
  opts.tol_outer = env_or("GROUPENET_EM_TOL", opts.tol_outer);
  opts.max_outer = static_cast<int>(env_or("GROUPENET_EM_MAX_OUTER", opts.max_outer));
  opts.vb = vb_options_from_env();
  return opts;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw validation_error(what + ": cannot parse integer '" + tok + "'");
    }
  }
  if (out.empty()) throw validation_error(what + ": empty list");
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw validation_error(what + ": cannot parse number '" + tok + "'");
    }
  }
  if (out.empty()) throw validation_error(what + ": empty list");
  return out;
}

struct LoadedData {
  Dataset dataset;
  std::vector<std::string> ids;
};

LoadedData load_dataset(const std::string& features_path, const std::string& response_path,
                        const std::string& unpenalized_path, bool intercept,
                        bool standardize_unpen) {
  CsvTable features = read_csv_table(features_path);
  ResponseTable response = read_response_csv(response_path);
  if (features.ids != response.ids) {
    throw validation_error("feature and response files disagree on row ids");
  }
  const Eigen::Index n = features.values.rows();
  Eigen::MatrixXd unpen(n, 0);
  if (!unpenalized_path.empty()) {
    CsvTable cov = read_csv_table(unpenalized_path);
    if (cov.ids != features.ids) {
      throw validation_error("unpenalized covariate file disagrees on row ids");
    }
    unpen = cov.values;
  }
  if (intercept) {
    Eigen::MatrixXd with_icept(n, unpen.cols() + 1);
    with_icept.col(0).setOnes();
    if (unpen.cols() > 0) with_icept.rightCols(unpen.cols()) = unpen;
    unpen = std::move(with_icept);
  }
  LoadedData out{Dataset::standardized(features.values, response.y, response.m,
                                       std::move(unpen), features.columns,
                                       standardize_unpen),
                 features.ids};
  return out;
}

ordered_json multipliers_to_json(const PartitionSet& partitions, const PenaltyConfig& config) {
  ordered_json arr = ordered_json::array();
  for (std::size_t k = 0; k < partitions.partitions.size(); ++k) {
    ordered_json entry;
    entry["name"] = partitions.partitions[k].name;
    entry["group_labels"] = partitions.partitions[k].group_labels;
    entry["multipliers"] = config.multipliers[k];
    arr.push_back(std::move(entry));
  }
  return arr;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
  std::string features, response, partitions, unpenalized, out, diagnostics;
  double alpha = 0.5;
  double lambda = 0.0;  // 0: cross-validate
  int folds = 10;
  int grid_size = 100;
  double grid_ratio = 1e-4;
  int select_k = -1;
  bool no_intercept = false;
  bool standardize_unpenalized = false;
  std::uint64_t seed = 1;
  int jobs = 1;
};

int cmd_fit(const FitArgs& args) {
  LoadedData loaded = load_dataset(args.features, args.response, args.unpenalized,
                                   !args.no_intercept, args.standardize_unpenalized);
  const Dataset& data = loaded.dataset;
  PartitionSet partitions = read_partition_json(args.partitions, data.feature_names);
  partitions.validate(data.p());

  EnetProblem plain = EnetProblem::plain(data, args.alpha);
  ordered_json diag;
  double lambda = args.lambda;
  if (!(lambda > 0.0)) {
    std::vector<double> grid =
        make_lambda_grid(lambda_max(plain), args.grid_size, args.grid_ratio);
    CvResult cv = cv_global_lambda(plain, args.folds, grid, args.seed, args.jobs);
    for (const auto& w : cv.warnings) std::cerr << "warning: " << w << "\n";
    lambda = cv.best_lambda;
    diag["cv"] = ordered_json::object();
    diag["cv"]["lambda"] = cv.best_lambda;
    diag["cv"]["lambdas"] = cv.lambdas;
    diag["cv"]["mean_deviance"] = cv.mean_deviance;
  }

  EmOptions opts = em_options_from_env();
  PenaltyConfig start = PenaltyConfig::make(args.alpha, lambda, partitions);
  FitResult fit = run_em(data, partitions, start, opts);
  if (fit.trace.clamped) {
    std::cerr << "warning: penalty multipliers hit the clamp bounds\n";
  }

  diag["converged"] = fit.converged;
  diag["outer_iterations"] = fit.trace.iterations.size();
  diag["inner_iterations_total"] = fit.trace.total_vb_iterations;
  {
    ordered_json trace = ordered_json::array();
    for (const auto& it : fit.trace.iterations) {
      ordered_json entry;
      entry["multipliers"] = it.multipliers;
      entry["mstep_objective"] = it.mstep_objective;
      entry["vb_iterations"] = it.vb_iterations;
      trace.push_back(std::move(entry));
    }
    diag["em_trace"] = std::move(trace);
  }

  ModelFile model;
  model.alpha = args.alpha;
  model.lambda_global = lambda;
  for (std::size_t k = 0; k < partitions.partitions.size(); ++k) {
    ModelFile::PartitionEntry entry;
    entry.name = partitions.partitions[k].name;
    entry.group_labels = partitions.partitions[k].group_labels;
    entry.multipliers = fit.config.multipliers[k];
    if (partitions.partitions[k].monotone_order) {
      std::vector<std::string> order;
      for (int g : *partitions.partitions[k].monotone_order) {
        order.push_back(partitions.partitions[k].group_labels[static_cast<std::size_t>(g)]);
      }
      entry.monotone = std::move(order);
    }
    model.partitions.push_back(std::move(entry));
  }
  model.feature_names = data.feature_names;
  model.coefficients = fit.coefficients;
  model.intercept = !args.no_intercept;
  model.seed = args.seed;
  model.config_echo["alpha"] = args.alpha;
  model.config_echo["lambda"] = lambda;
  model.config_echo["folds"] = args.folds;
  model.config_echo["intercept"] = !args.no_intercept;
  model.config_echo["standardize_unpenalized"] = args.standardize_unpenalized;

  if (args.select_k >= 0) {
    EnetProblem weighted{data, expand_multipliers(partitions, fit.config), args.alpha};
    SelectKResult sel = select_k_features(weighted, args.select_k);
    ModelFile::Selected selected;
    selected.k = sel.achieved_size;
    selected.lambda = sel.lambda;
    selected.unpenalized_part = sel.coef.unpenalized_part;
    selected.penalized_part = sel.coef.penalized_part;
    model.selected = std::move(selected);
    diag["select"] = ordered_json::object();
    diag["select"]["requested"] = args.select_k;
    diag["select"]["achieved"] = sel.achieved_size;
    diag["select"]["lambda"] = sel.lambda;
    if (!sel.exact) {
      std::cerr << "warning: requested model size " << args.select_k
                << " not attainable; nearest attainable size is " << sel.achieved_size
                << "\n";
    }
  }

  model.diagnostics = diag;
  model.save(args.out);
  std::string diag_path = args.diagnostics;
  if (diag_path.empty()) diag_path = args.out + ".diagnostics.json";
  {
    std::ofstream out(diag_path);
    out << diag.dump(2) << '\n';
  }
  if (!fit.converged) {
    throw numerical_error("empirical-Bayes loop did not converge within the iteration budget; diagnostics written to " +
                          diag_path);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model, features, unpenalized, out;
  bool use_selected = false;
};

int cmd_predict(const PredictArgs& args) {
  ModelFile model = ModelFile::load(args.model);
  CsvTable features = read_csv_table(args.features);

  // Match feature columns to the model by name, in model order.
  std::map<std::string, int> column_of;
  for (std::size_t c = 0; c < features.columns.size(); ++c) {
    column_of[features.columns[c]] = static_cast<int>(c);
  }
  Eigen::MatrixXd x(features.values.rows(),
                    static_cast<Eigen::Index>(model.feature_names.size()));
  for (std::size_t j = 0; j < model.feature_names.size(); ++j) {
    auto it = column_of.find(model.feature_names[j]);
    if (it == column_of.end()) {
      throw validation_error("feature file is missing model feature '" +
                             model.feature_names[j] + "'");
    }
    x.col(static_cast<Eigen::Index>(j)) = features.values.col(it->second);
  }

  Eigen::MatrixXd unpen(features.values.rows(), 0);
  if (!args.unpenalized.empty()) {
    CsvTable cov = read_csv_table(args.unpenalized);
    if (cov.ids != features.ids) {
      throw validation_error("unpenalized covariate file disagrees on row ids");
    }
    unpen = cov.values;
  }

  Coefficients coef = model.coefficients;
  if (args.use_selected) {
    if (!model.selected) {
      throw validation_error("model file carries no size-selected fit");
    }
    coef.unpenalized_part = model.selected->unpenalized_part;
    coef.penalized_part = model.selected->penalized_part;
  }
  Eigen::VectorXd prob = predict_probability(coef, x, unpen);
  write_csv_table(args.out, features.ids, {"probability"}, prob);
  return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario = "paper-sec5";
  int n = -1, n_test = -1, p = -1, block_size = -1;
  double rho = -1.0, sigma2 = -1.0;
  std::string groups, multipliers;
  double zero_fraction = -1.0;
  double prior_alpha = -1.0, prior_lambda = -1.0;
  int reps = 10;
  std::uint64_t seed = 1;
  std::string out;
  bool run_methods = false;
  double alpha = 0.5;
  int folds = 10;
  int jobs = 1;
  int path_size = 60;
  double loess_span = 0.75;
};

void write_sim_dataset(const fs::path& dir, const SimData& sim) {
  fs::create_directories(dir);
  std::vector<std::string> train_ids, test_ids;
  for (Eigen::Index i = 0; i < sim.train.n(); ++i) train_ids.push_back("r" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < sim.test.n(); ++i) test_ids.push_back("r" + std::to_string(i + 1));
  write_csv_table((dir / "train_features.csv").string(), train_ids,
                  sim.train.feature_names, sim.train.raw_features());
  write_response_csv((dir / "train_response.csv").string(), train_ids,
                     sim.train.successes, sim.train.trials);
  write_csv_table((dir / "test_features.csv").string(), test_ids,
                  sim.test.feature_names, sim.test.raw_features());
  write_response_csv((dir / "test_response.csv").string(), test_ids,
                     sim.test.successes, sim.test.trials);
  Eigen::MatrixXd beta(sim.beta_true.size(), 1);
  beta.col(0) = sim.beta_true;
  write_csv_table((dir / "truth_beta.csv").string(), sim.train.feature_names, {"beta"}, beta);
  write_partition_json((dir / "truth_groups.json").string(),
                       PartitionSet::of(sim.true_groups), sim.train.feature_names);
}

struct CurveRow {
  int repeat;
  std::string method;
  double alpha;
  int model_size;
  double kappa, mse, auc_value, bss;
};

// Metric curve over model sizes from a coefficient path: one row per distinct
// active-set size, taking the sparsest (largest lambda) representative.
std::vector<CurveRow> curve_from_path(const EnetPath& path, int repeat,
                                      const std::string& method, double alpha,
                                      const SimData& sim,
                                      const Eigen::MatrixXd& test_raw) {
  std::vector<int> truth(static_cast<std::size_t>(sim.beta_true.size()));
  for (Eigen::Index j = 0; j < sim.beta_true.size(); ++j) {
    truth[static_cast<std::size_t>(j)] = sim.beta_true[j] != 0.0 ? 1 : 0;
  }
  std::set<int> seen;
  std::vector<CurveRow> rows;
  for (const auto& pt : path.points) {
    if (seen.count(pt.active_size)) continue;
    seen.insert(pt.active_size);
    Coefficients coef;
    coef.unpenalized_part = pt.beta_u;
    coef.penalized_part = pt.beta;
    coef.scale = sim.train.scale;
    coef.unpenalized_scale = sim.train.unpenalized_scale;
    Eigen::VectorXd prob = predict_probability(coef, test_raw);
    CurveRow row;
    row.repeat = repeat;
    row.method = method;
    row.alpha = alpha;
    row.model_size = pt.active_size;
    std::vector<int> sel(truth.size());
    for (std::size_t j = 0; j < sel.size(); ++j) {
      sel[j] = pt.beta[static_cast<Eigen::Index>(j)] != 0.0 ? 1 : 0;
    }
    row.kappa = cohens_kappa(sel, truth);
    row.mse = mse_coefficients(coef.raw_penalized(), sim.beta_true);
    row.auc_value = auc(prob, sim.test.successes);
    row.bss = brier_skill(prob, sim.test.successes);
    rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end(),
            [](const CurveRow& a, const CurveRow& b) { return a.model_size < b.model_size; });
  return rows;
}

void write_curves_csv(const std::string& path, std::vector<CurveRow> rows,
                      double loess_span) {
  // LOESS companions pool the rows of each (method, alpha) over all repeats.
  std::map<std::pair<std::string, double>, std::vector<std::size_t>> by_method;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    by_method[{rows[i].method, rows[i].alpha}].push_back(i);
  }
  std::vector<double> s_kappa(rows.size()), s_mse(rows.size()), s_auc(rows.size()),
      s_bss(rows.size());
  for (const auto& [key, idx] : by_method) {
    std::vector<double> x, yk, ym, ya, yb;
    for (std::size_t i : idx) {
      x.push_back(rows[i].model_size);
      yk.push_back(rows[i].kappa);
      ym.push_back(rows[i].mse);
      ya.push_back(rows[i].auc_value);
      yb.push_back(rows[i].bss);
    }
    const auto fk = loess_smooth(x, yk, loess_span);
    const auto fm = loess_smooth(x, ym, loess_span);
    const auto fa = loess_smooth(x, ya, loess_span);
    const auto fb = loess_smooth(x, yb, loess_span);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      s_kappa[idx[k]] = fk[k];
      s_mse[idx[k]] = fm[k];
      s_auc[idx[k]] = fa[k];
      s_bss[idx[k]] = fb[k];
    }
  }
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write '" + path + "'");
  out << "repeat,method,alpha,model_size,kappa,mse,auc,bss,"
         "kappa_smooth,mse_smooth,auc_smooth,bss_smooth\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const CurveRow& r = rows[i];
    out << r.repeat << ',' << r.method << ',' << format_double(r.alpha) << ','
        << r.model_size << ',' << format_double(r.kappa) << ',' << format_double(r.mse)
        << ',' << format_double(r.auc_value) << ',' << format_double(r.bss) << ','
        << format_double(s_kappa[i]) << ',' << format_double(s_mse[i]) << ','
        << format_double(s_auc[i]) << ',' << format_double(s_bss[i]) << '\n';
  }
}

int cmd_simulate(const SimulateArgs& args) {
  if (args.reps < 1) throw validation_error("simulate: --reps must be positive");
  if (args.out.empty()) throw validation_error("simulate: --out directory is required");
  fs::create_directories(args.out);

  if (args.scenario == "paper-sec5") {
    SimScenario base;
    if (args.n > 0) base.n = args.n;
    if (args.n_test > 0) base.n_test = args.n_test;
    if (args.p > 0) base.p = args.p;
    if (args.block_size > 0) base.block_size = args.block_size;
    if (args.rho >= 0.0) base.rho = args.rho;
    if (args.sigma2 > 0.0) base.sigma2 = args.sigma2;
    if (!args.groups.empty()) base.group_sizes = parse_int_list(args.groups, "--groups");
    if (!args.multipliers.empty()) {
      base.true_multipliers = parse_double_list(args.multipliers, "--multipliers");
    }
    if (args.zero_fraction >= 0.0) {
      base.zero_fraction.assign(base.group_sizes.size(), args.zero_fraction);
    }
    if (base.zero_fraction.size() != base.group_sizes.size()) {
      base.zero_fraction.assign(base.group_sizes.size(),
                                base.zero_fraction.empty() ? 0.5 : base.zero_fraction[0]);
    }
    if (args.prior_alpha > 0.0) base.prior_alpha = args.prior_alpha;
    if (args.prior_lambda > 0.0) base.prior_lambda = args.prior_lambda;
    base.validate();

    ordered_json echo;
    echo["scenario"] = "paper-sec5";
    echo["n"] = base.n;
    echo["n_test"] = base.n_test;
    echo["p"] = base.p;
    echo["block_size"] = base.block_size;
    echo["rho"] = base.rho;
    echo["sigma2"] = base.sigma2;
    echo["group_sizes"] = base.group_sizes;
    echo["true_multipliers"] = base.true_multipliers;
    echo["zero_fraction"] = base.zero_fraction;
    echo["prior_alpha"] = base.prior_alpha;
    echo["prior_lambda"] = base.prior_lambda;
    echo["reps"] = args.reps;
    echo["seed"] = args.seed;
    {
      std::ofstream out(fs::path(args.out) / "scenario.json");
      out << echo.dump(2) << '\n';
    }

    std::vector<std::vector<CurveRow>> curves(static_cast<std::size_t>(args.reps));
    std::vector<std::vector<double>> mult_rows(static_cast<std::size_t>(args.reps));
    std::vector<double> lambdas(static_cast<std::size_t>(args.reps), 0.0);

    parallel_for(args.reps, args.jobs, [&](int rep) {
      SimScenario sc = base;
      sc.seed = args.seed + static_cast<std::uint64_t>(rep);
      SimData sim = simulate_scenario(sc);
      char repdir[32];
      std::snprintf(repdir, sizeof(repdir), "rep_%03d", rep);
      write_sim_dataset(fs::path(args.out) / repdir, sim);

      if (!args.run_methods) return;
      PartitionSet parts = PartitionSet::of(sim.true_groups);
      EnetProblem plain = EnetProblem::plain(sim.train, args.alpha);
      CvResult cv = cv_global_lambda(plain, args.folds, {}, sc.seed, 1);
      lambdas[static_cast<std::size_t>(rep)] = cv.best_lambda;
      EmOptions opts = em_options_from_env();
      FitResult fit = run_em(sim.train, parts,
                             PenaltyConfig::make(args.alpha, cv.best_lambda, parts), opts);
      mult_rows[static_cast<std::size_t>(rep)] = fit.config.multipliers[0];

      Eigen::MatrixXd test_raw = sim.test.raw_features();
      EnetPath plain_path =
          fit_path(plain, make_lambda_grid(lambda_max(plain), args.path_size));
      EnetProblem weighted{sim.train, expand_multipliers(parts, fit.config), args.alpha};
      EnetPath gren_path =
          fit_path(weighted, make_lambda_grid(lambda_max(weighted), args.path_size));
      auto rows = curve_from_path(plain_path, rep, "enet", args.alpha, sim, test_raw);
      auto rows2 = curve_from_path(gren_path, rep, "gren", args.alpha, sim, test_raw);
      rows.insert(rows.end(), rows2.begin(), rows2.end());
      curves[static_cast<std::size_t>(rep)] = std::move(rows);
    });

    if (args.run_methods) {
      std::ofstream mout(fs::path(args.out) / "multipliers.csv");
      mout << "repeat,group,true_multiplier,estimate,lambda\n";
      for (int rep = 0; rep < args.reps; ++rep) {
        for (std::size_t g = 0; g < base.true_multipliers.size(); ++g) {
          mout << rep << ",g" << (g + 1) << ',' << format_double(base.true_multipliers[g])
               << ',' << format_double(mult_rows[static_cast<std::size_t>(rep)][g]) << ','
               << format_double(lambdas[static_cast<std::size_t>(rep)]) << '\n';
        }
      }
      std::vector<CurveRow> all;
      for (auto& c : curves) all.insert(all.end(), c.begin(), c.end());
      write_curves_csv((fs::path(args.out) / "curves.csv").string(), std::move(all),
                       args.loess_span);
    }
    return 0;
  }

  if (args.scenario == "random-groups") {
    std::vector<int> sizes = args.groups.empty()
                                 ? std::vector<int>{127, 94, 1893}
                                 : parse_int_list(args.groups, "--groups");
    SimScenario sc;
    sc.n = args.n > 0 ? args.n : 88;
    sc.n_test = args.n_test > 0 ? args.n_test : 2;
    sc.p = std::accumulate(sizes.begin(), sizes.end(), 0);
    sc.block_size = args.block_size > 0 ? args.block_size : 1;
    sc.rho = args.rho >= 0.0 ? args.rho : 0.0;
    sc.sigma2 = args.sigma2 > 0.0 ? args.sigma2 : 1.0;
    sc.group_sizes = {sc.p};
    sc.true_multipliers = {1.0};
    sc.zero_fraction = {args.zero_fraction >= 0.0 ? args.zero_fraction : 0.5};
    if (args.prior_alpha > 0.0) sc.prior_alpha = args.prior_alpha;
    if (args.prior_lambda > 0.0) sc.prior_lambda = args.prior_lambda;
    sc.seed = args.seed;
    sc.validate();
    SimData sim = simulate_scenario(sc);
    write_sim_dataset(args.out, sim);

    RandomGroupResult res =
        random_group_experiment(sim.train, sizes, args.reps, args.seed, args.alpha, 0.0,
                                em_options_from_env(), args.folds, args.jobs);
    std::ofstream mout(fs::path(args.out) / "multipliers.csv");
    mout << "repeat,group,size,estimate\n";
    for (int rep = 0; rep < args.reps; ++rep) {
      for (std::size_t g = 0; g < sizes.size(); ++g) {
        mout << rep << ",g" << (g + 1) << ',' << sizes[g] << ','
             << format_double(res.multipliers(rep, static_cast<Eigen::Index>(g))) << '\n';
      }
    }
    ordered_json summary;
    summary["lambda"] = res.lambda;
    summary["group_sizes"] = sizes;
    ordered_json medians = ordered_json::array();
    for (std::size_t g = 0; g < sizes.size(); ++g) {
      std::vector<double> v;
      for (int rep = 0; rep < args.reps; ++rep) {
        const double m = res.multipliers(rep, static_cast<Eigen::Index>(g));
        if (std::isfinite(m)) v.push_back(m);
      }
      std::sort(v.begin(), v.end());
      medians.push_back(v.empty() ? 0.0
                                  : (v.size() % 2 ? v[v.size() / 2]
                                                  : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2])));
    }
    summary["median_multipliers"] = std::move(medians);
    int failures = 0;
    for (const auto& e : res.errors) {
      if (!e.empty()) {
        ++failures;
        std::cerr << "warning: repeat failed: " << e << "\n";
      }
    }
    summary["failed_repeats"] = failures;
    {
      std::ofstream out(fs::path(args.out) / "summary.json");
      out << summary.dump(2) << '\n';
    }
    return 0;
  }

  throw validation_error("unknown scenario '" + args.scenario +
                         "' (expected paper-sec5 or random-groups)");
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string predictions, response, model, truth_beta, out;
  bool use_selected = false;
};

int cmd_evaluate(const EvaluateArgs& args) {
  CsvTable pred = read_csv_table(args.predictions);
  ResponseTable resp = read_response_csv(args.response);
  if (pred.ids != resp.ids) {
    throw validation_error("prediction and response files disagree on row ids");
  }
  int prob_col = -1;
  for (std::size_t c = 0; c < pred.columns.size(); ++c) {
    if (pred.columns[c] == "probability") prob_col = static_cast<int>(c);
  }
  if (prob_col < 0) {
    throw validation_error("prediction file is missing a 'probability' column");
  }
  const Eigen::VectorXd prob = pred.values.col(prob_col);
  for (Eigen::Index i = 0; i < resp.m.size(); ++i) {
    if (resp.m[i] != 1.0) {
      throw validation_error("evaluate expects binary outcomes (m = 1)");
    }
  }

  ordered_json metrics;
  metrics["auc"] = auc(prob, resp.y);
  metrics["bss"] = brier_skill(prob, resp.y);

  if (!args.model.empty() && !args.truth_beta.empty()) {
    ModelFile model = ModelFile::load(args.model);
    CsvTable truth = read_csv_table(args.truth_beta);
    if (truth.ids != model.feature_names) {
      throw validation_error("truth coefficients do not align with model features");
    }
    Eigen::VectorXd beta_true = truth.values.col(0);
    Coefficients coef = model.coefficients;
    if (args.use_selected) {
      if (!model.selected) throw validation_error("model file carries no size-selected fit");
      coef.unpenalized_part = model.selected->unpenalized_part;
      coef.penalized_part = model.selected->penalized_part;
    }
    std::vector<int> sel(static_cast<std::size_t>(coef.penalized_part.size()));
    std::vector<int> tru(sel.size());
    for (std::size_t j = 0; j < sel.size(); ++j) {
      sel[j] = coef.penalized_part[static_cast<Eigen::Index>(j)] != 0.0 ? 1 : 0;
      tru[j] = beta_true[static_cast<Eigen::Index>(j)] != 0.0 ? 1 : 0;
    }
    metrics["kappa"] = cohens_kappa(sel, tru);
    metrics["mse"] = mse_coefficients(coef.raw_penalized(), beta_true);
  }

  std::ofstream out(args.out);
  if (!out) throw validation_error("cannot write '" + args.out + "'");
  out << metrics.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"group-regularized logistic elastic net"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "cross-validate lambda, estimate group multipliers, fit");
  fit->add_option("--features", fit_args.features, "feature CSV (id + named columns)")->required();
  fit->add_option("--response", fit_args.response, "response CSV (id,y[,m])")->required();
  fit->add_option("--partitions", fit_args.partitions, "partition JSON")->required();
  fit->add_option("--unpenalized", fit_args.unpenalized, "unpenalized covariate CSV");
  fit->add_option("--alpha", fit_args.alpha, "L1 proportion in (0,1)");
  fit->add_option("--lambda", fit_args.lambda, "fixed global penalty (skips cross-validation)");
  fit->add_option("--folds", fit_args.folds, "cross-validation folds");
  fit->add_option("--grid-size", fit_args.grid_size, "lambda grid size");
  fit->add_option("--grid-ratio", fit_args.grid_ratio, "smallest grid lambda as a fraction of lambda_max");
  fit->add_option("--select", fit_args.select_k, "additionally record a fit with this many features");
  fit->add_flag("--no-intercept", fit_args.no_intercept, "do not add an intercept column");
  fit->add_flag("--standardize-unpenalized", fit_args.standardize_unpenalized,
                "standardize non-constant unpenalized covariates");
  fit->add_option("--seed", fit_args.seed, "fold-assignment seed");
  fit->add_option("--jobs", fit_args.jobs, "parallel workers for CV folds");
  fit->add_option("--out", fit_args.out, "output model JSON")->required();
  fit->add_option("--diagnostics", fit_args.diagnostics, "diagnostics JSON path");

  PredictArgs predict_args;
  CLI::App* predict = app.add_subcommand("predict", "per-row probabilities from a fitted model");
  predict->add_option("--model", predict_args.model, "model JSON")->required();
  predict->add_option("--features", predict_args.features, "feature CSV")->required();
  predict->add_option("--unpenalized", predict_args.unpenalized, "unpenalized covariate CSV");
  predict->add_flag("--selected", predict_args.use_selected, "use the size-selected fit");
  predict->add_option("--out", predict_args.out, "output CSV (id,probability)")->required();

  SimulateArgs sim_args;
  CLI::App* simulate = app.add_subcommand("simulate", "generate synthetic benchmark data");
  simulate->add_option("--scenario", sim_args.scenario, "paper-sec5 | random-groups");
  simulate->add_option("--n", sim_args.n, "training samples");
  simulate->add_option("--n-test", sim_args.n_test, "test samples");
  simulate->add_option("--p", sim_args.p, "features");
  simulate->add_option("--block-size", sim_args.block_size, "correlated block size");
  simulate->add_option("--rho", sim_args.rho, "within-block correlation");
  simulate->add_option("--sigma2", sim_args.sigma2, "feature variance");
  simulate->add_option("--groups", sim_args.groups, "comma-separated group sizes");
  simulate->add_option("--multipliers", sim_args.multipliers, "comma-separated true multipliers");
  simulate->add_option("--zero-fraction", sim_args.zero_fraction, "zeroed fraction per group");
  simulate->add_option("--prior-alpha", sim_args.prior_alpha, "coefficient prior alpha");
  simulate->add_option("--prior-lambda", sim_args.prior_lambda, "coefficient prior lambda");
  simulate->add_option("--reps", sim_args.reps, "number of repeats");
  simulate->add_option("--seed", sim_args.seed, "base seed");
  simulate->add_option("--out", sim_args.out, "output directory")->required();
  simulate->add_flag("--run-methods", sim_args.run_methods,
                     "fit methods per repeat and export multiplier/metric tables");
  simulate->add_option("--alpha", sim_args.alpha, "fit alpha for --run-methods");
  simulate->add_option("--folds", sim_args.folds, "CV folds for --run-methods");
  simulate->add_option("--jobs", sim_args.jobs, "parallel workers over repeats");
  simulate->add_option("--path-size", sim_args.path_size, "lambda path length for metric curves");
  simulate->add_option("--loess-span", sim_args.loess_span, "LOESS span for smoothed curves");

  EvaluateArgs eval_args;
  CLI::App* evaluate = app.add_subcommand("evaluate", "metrics for predictions against outcomes");
  evaluate->add_option("--predictions", eval_args.predictions, "prediction CSV")->required();
  evaluate->add_option("--response", eval_args.response, "response CSV")->required();
  evaluate->add_option("--model", eval_args.model, "model JSON (enables kappa/mse)");
  evaluate->add_option("--truth-beta", eval_args.truth_beta, "true coefficient CSV (enables kappa/mse)");
  evaluate->add_flag("--selected", eval_args.use_selected, "evaluate the size-selected fit");
  evaluate->add_option("--out", eval_args.out, "output metrics JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (*fit) return cmd_fit(fit_args);
    if (*predict) return cmd_predict(predict_args);
    if (*simulate) return cmd_simulate(sim_args);
    if (*evaluate) return cmd_evaluate(eval_args);
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const numerical_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
