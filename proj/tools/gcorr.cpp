// gcorr: batch front end for log-linear / logistic g-prior analyses.
//
//   gcorr fit        posterior summary for one model
//   gcorr select     posterior model probabilities over graphical models
//   gcorr correspond log-linear <-> logistic mapping and implied prior
//   gcorr verify     exhaustive covariance-identity sweep
//   gcorr simulate   multinomial table from a log-linear model
//
// Exit codes: 0 ok, 1 verification failure, 2 configuration error,
// 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gcorr/gcorr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitVerifyFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct RunConfig {
  std::string data;
  std::string model;
  std::string outcome;
  std::string g = "N";
  bool flat_intercept = false;
  double level = 0.95;
  std::int64_t burn_in = 100000;
  std::int64_t iterations = 200000;
  std::uint64_t seed = 1;
  std::string out;
  bool json = false;

  // select
  bool enumerate = false;
  std::size_t top = 10;
  // correspond / simulate
  std::string factors;
  bool logistic_input = false;
  std::string lambda;
  std::string preset;
  std::int64_t subjects = 1000;
  // verify
  std::size_t max_factors = 4;
  int max_levels = 3;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v, int digits = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void emit_json(const json& j) { std::cout << j.dump(2) << '\n'; }

void ensure_out_dir(const RunConfig& c) {
  if (c.out.empty()) return;
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw ConfigError("--out: cannot create directory '" + c.out + "': " + ec.message());
}

std::ofstream open_out(const RunConfig& c, const std::string& name) {
  std::ofstream f(fs::path(c.out) / name);
  if (!f) throw ConfigError("--out: cannot write " + (fs::path(c.out) / name).string());
  return f;
}

gcorr::ContingencyTable load_data(const RunConfig& c) {
  if (c.data.empty()) throw ConfigError("--data is required");
  if (!fs::exists(c.data)) throw ConfigError("--data: no such file '" + c.data + "'");
  return gcorr::load_table(c.data);
}

/// "Y:2,A:2,B:3" -> factor list.
std::vector<gcorr::FactorSpec> parse_factors(const std::string& text) {
  std::vector<gcorr::FactorSpec> out;
  for (const auto& item : gcorr::detail::split(text, ',')) {
    const auto parts = gcorr::detail::split(item, ':');
    if (parts.size() != 2) throw ConfigError("--factors: expected NAME:LEVELS, got '" + item + "'");
    int levels = 0;
    try {
      levels = std::stoi(parts[1]);
    } catch (...) {
      throw ConfigError("--factors: bad level count in '" + item + "'");
    }
    out.push_back({gcorr::detail::trim(parts[0]), levels});
  }
  gcorr::detail::validate_factors(out);
  return out;
}

/// --model is a JSON file if such a path exists, otherwise an inline formula.
gcorr::ModelFormula load_model(const RunConfig& c, const std::vector<std::string>& names, gcorr::Role role,
                               const std::string& outcome) {
  if (c.model.empty()) throw ConfigError("--model is required");
  if (fs::is_regular_file(c.model)) {
    std::ifstream in(c.model);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("--model: " + std::string(e.what()));
    }
    auto m = gcorr::model_from_json(j);
    if (m.role != role) throw ConfigError("--model: file declares a " + std::string(gcorr::to_string(m.role)) + " model");
    return m;
  }
  return gcorr::parse_formula(c.model, names, role, outcome);
}

gcorr::PriorChoice prior_choice(const RunConfig& c) {
  auto p = gcorr::PriorChoice::parse(c.g);
  p.flat_intercept = c.flat_intercept;
  return p;
}

std::vector<std::string> covariates_of(const gcorr::ModelFormula& logistic, const gcorr::ContingencyTable& t) {
  std::vector<std::string> out;
  const auto used = logistic.factors();
  for (const auto& f : t.factors())
    if (used.count(f.name)) out.push_back(f.name);
  return out;
}

// ---------------------------------------------------------------------------

void print_ci_table(const gcorr::PosteriorSummary& s) {
  std::cout << std::left << std::setw(16) << "parameter" << std::setw(10) << "mean" << std::setw(10) << "sd"
            << std::setw(10) << "mcse" << fmt(100 * s.level, 0) << "% CI\n";
  for (const auto& p : s.parameters)
    std::cout << std::left << std::setw(16) << p.label << std::setw(10) << fmt(p.mean, 3) << std::setw(10)
              << fmt(p.sd, 3) << std::setw(10) << fmt(p.mcse, 4) << '(' << fmt(p.lower) << ',' << fmt(p.upper)
              << ")\n";
  if (s.g)
    std::cout << std::left << std::setw(16) << "g" << std::setw(10) << fmt(s.g->mean, 1) << std::setw(10)
              << fmt(s.g->sd, 1) << std::setw(10) << fmt(s.g->mcse, 2) << '(' << fmt(s.g->lower, 1) << ','
              << fmt(s.g->upper, 1) << ")\n";
}

int cmd_fit(const RunConfig& c) {
  const auto table = load_data(c);
  const auto names = gcorr::detail::names_of(table.factors());
  const bool logistic = !c.outcome.empty();
  const auto model = load_model(c, names, logistic ? gcorr::Role::Logistic : gcorr::Role::LogLinear, c.outcome);
  const auto prior = prior_choice(c);

  std::optional<gcorr::ModelProblem> problem;
  double mle_deviance = 0;
  if (logistic) {
    const auto data = gcorr::collapse_to_binomial(table, c.outcome, covariates_of(model, table));
    problem.emplace(data, model, prior);
    const auto mle = gcorr::fit_mle(data, problem->design());
    mle_deviance = gcorr::deviance(data, problem->design(), mle.theta);
  } else {
    problem.emplace(table, model, prior);
    const auto mle = gcorr::fit_mle(table, problem->design());
    mle_deviance = gcorr::deviance(table, problem->design(), mle.theta);
  }

  gcorr::McmcSettings s;
  s.burn_in = c.burn_in;
  s.iterations = c.iterations;
  s.seed = c.seed;
  s.level = c.level;
  const auto res = gcorr::fit_mcmc(problem->posterior(), problem->prior(), s, problem->labels());

  const auto order = logistic ? covariates_of(model, table) : names;
  const std::string formula = gcorr::formula_string(model, order);
  json j;
  j["model"] = formula;
  j["role"] = gcorr::to_string(model.role);
  if (logistic) j["outcome"] = c.outcome;
  j["g"] = c.g;
  j["flat_intercept"] = c.flat_intercept;
  j["seed"] = c.seed;
  j["burn_in"] = c.burn_in;
  j["deviance_at_mle"] = mle_deviance;
  j["summary"] = gcorr::to_json(res.summary);

  ensure_out_dir(c);
  if (!c.out.empty()) {
    auto f = open_out(c, "summary.json");
    f << j.dump(2) << '\n';
    auto chain = open_out(c, "chain.csv");
    gcorr::write_chain_csv(chain, res.chain);
  }
  if (c.json) {
    emit_json(j);
  } else {
    std::cout << (logistic ? "logit(p) = " : "log(mu) = ") << formula << "   (g=" << c.g
              << (c.flat_intercept ? ", flat intercept" : "") << ")\n";
    print_ci_table(res.summary);
    std::cout << "acceptance " << fmt(res.chain.acceptance_rate, 3) << ", deviance at MLE " << fmt(mle_deviance, 3)
              << ", at posterior mean " << fmt(res.summary.deviance_at_posterior_mean, 3) << '\n';
  }
  return 0;
}

int cmd_select(const RunConfig& c) {
  const auto table = load_data(c);
  const auto names = gcorr::detail::names_of(table.factors());
  gcorr::GraphicalSpace space = c.outcome.empty() ? gcorr::GraphicalSpace(names)
                                                  : gcorr::GraphicalSpace(names, gcorr::Role::Logistic, c.outcome);
  gcorr::SelectionProblem problem(table, space, prior_choice(c));
  gcorr::SelectionSettings s;
  s.burn_in = c.burn_in;
  s.iterations = c.iterations;
  s.seed = c.seed;
  const auto mp = c.enumerate ? gcorr::enumerate_models(problem, s) : gcorr::select_models(problem, s);

  json j = gcorr::to_json(mp, c.top);
  j["role"] = gcorr::to_string(space.role());
  if (!c.outcome.empty()) j["outcome"] = c.outcome;
  j["method"] = c.enumerate ? "enumeration" : "reversible-jump";
  j["num_models"] = space.num_models();
  j["g"] = c.g;
  j["seed"] = c.seed;
  ensure_out_dir(c);
  if (!c.out.empty()) open_out(c, "models.json") << j.dump(2) << '\n';
  if (c.json) {
    emit_json(j);
    return 0;
  }
  std::cout << (c.enumerate ? "enumeration" : "reversible jump") << " over " << space.num_models() << ' '
            << gcorr::to_string(space.role()) << " graphical models";
  if (!c.outcome.empty()) std::cout << " (outcome " << c.outcome << ')';
  std::cout << '\n';
  for (const auto& m : mp.top(c.top)) std::cout << std::left << std::setw(10) << fmt(m.probability, 4) << m.formula << '\n';
  if (!c.enumerate) std::cout << "jump acceptance " << fmt(mp.jump_acceptance, 3) << '\n';
  return 0;
}

int cmd_correspond(const RunConfig& c) {
  std::optional<gcorr::ContingencyTable> table;
  std::vector<gcorr::FactorSpec> factors;
  if (!c.data.empty()) {
    table = load_data(c);
    factors = table->factors();
  } else if (!c.factors.empty()) {
    factors = parse_factors(c.factors);
  } else {
    throw ConfigError("correspond needs --data or --factors");
  }
  if (c.outcome.empty()) throw ConfigError("--outcome is required");
  const auto names = gcorr::detail::names_of(factors);
  json j;
  j["outcome"] = c.outcome;

  if (c.logistic_input) {
    const auto logistic = load_model(c, names, gcorr::Role::Logistic, c.outcome);
    std::vector<std::string> cov;
    for (const auto& n : names)
      if (n != c.outcome) cov.push_back(n);
    const auto eq = gcorr::logistic_to_loglinear_equivalent(logistic, c.outcome, factors);
    j["logistic"] = gcorr::formula_string(logistic, cov);
    j["deviance_equivalent_loglinear"] = gcorr::formula_string(eq, names);
    if (auto w = gcorr::preimage_witness(logistic, c.outcome, factors)) {
      const auto back1 = gcorr::loglinear_to_logistic(w->first, c.outcome, factors).logistic;
      const auto back2 = gcorr::loglinear_to_logistic(w->second, c.outcome, factors).logistic;
      j["preimages"] = json::array({gcorr::formula_string(w->first, names), gcorr::formula_string(w->second, names)});
      j["preimages_map_to_same_logistic"] = back1 == logistic && back2 == logistic && !(w->first == w->second);
    } else {
      j["preimages"] = json::array();
    }
    if (c.json) {
      emit_json(j);
    } else {
      std::cout << "logit(p) = " << j["logistic"].get<std::string>() << '\n';
      std::cout << "deviance-equivalent log-linear model: " << j["deviance_equivalent_loglinear"].get<std::string>()
                << '\n';
      if (!j["preimages"].empty())
        std::cout << "distinct log-linear models with this logistic image: " << j["preimages"][0].get<std::string>()
                  << " and " << j["preimages"][1].get<std::string>() << '\n';
      else
        std::cout << "the logistic model is saturated in its covariates; its log-linear preimage is unique\n";
    }
    return 0;
  }

  const auto loglinear = load_model(c, names, gcorr::Role::LogLinear, "");
  const auto map = gcorr::build_map(loglinear, c.outcome, factors);
  std::vector<std::string> cov;
  for (const auto& f : map.covariates) cov.push_back(f.name);
  j["loglinear"] = gcorr::formula_string(loglinear, names);
  j["logistic"] = gcorr::formula_string(map.logistic, cov);
  j["identities"] = map.identities();
  j["q"] = map.q;

  std::optional<gcorr::ImpliedPriorReport> report;
  {
    const std::int64_t n = table ? table->total() : c.subjects;
    const auto choice = gcorr::PriorChoice::parse(c.g);
    if (choice.kind == gcorr::PriorChoice::Kind::Mixture) throw ConfigError("--g: the prior check needs a fixed g");
    const double g = choice.kind == gcorr::PriorChoice::Kind::Fixed ? choice.g : static_cast<double>(n);
    report = gcorr::verify_implied_prior(loglinear, factors, c.outcome, n, g);
    j["implied_prior_check"] = gcorr::to_json(*report);
  }
  ensure_out_dir(c);
  if (!c.out.empty()) open_out(c, "correspondence.json") << j.dump(2) << '\n';
  if (c.json) {
    emit_json(j);
  } else {
    std::cout << "log(mu) = " << j["loglinear"].get<std::string>() << '\n';
    std::cout << "logit(p) = " << j["logistic"].get<std::string>() << '\n';
    for (const auto& s : map.identities()) std::cout << "  " << s << '\n';
    if (report)
      std::cout << "implied beta prior vs logistic g-prior: max rel diff " << std::scientific << std::setprecision(2)
                << report->max_rel_diff << (report->pass ? " (ok)" : " (FAILED)") << '\n';
  }
  return report && !report->pass ? kExitVerifyFailed : 0;
}

int cmd_verify(const RunConfig& c) {
  const auto sweep = gcorr::implied_prior_sweep(c.max_factors, c.max_levels);
  std::size_t failed = 0;
  double worst = 0;
  json failures = json::array();
  for (const auto& inst : sweep) {
    const auto r = gcorr::verify_implied_prior(inst.model, inst.factors, inst.outcome, 1000, 1000.0);
    worst = std::max(worst, r.max_rel_diff);
    if (!r.pass) {
      ++failed;
      if (failures.size() < 20) failures.push_back(gcorr::to_json(r));
    }
  }
  double proj_worst = 0;
  gcorr::Rng rng(c.seed);
  std::uniform_int_distribution<int> rows(4, 12);
  for (double cc : {2.0, 5.0, 10.0})
    for (int k = 0; k < 100; ++k) {
      const int n = rows(rng);
      const int p = 1 + k % (n - 1);
      Eigen::MatrixXd x(n, p);
      std::normal_distribution<double> z;
      for (int i = 0; i < n; ++i)
        for (int jj = 0; jj < p; ++jj) x(i, jj) = z(rng);
      proj_worst = std::max(proj_worst, gcorr::projection_identity_check(x, cc));
    }
  const bool proj_ok = proj_worst < 1e-12;

  json j{{"instances", sweep.size()},  {"failed", failed},          {"max_rel_diff", worst},
         {"failures", failures},       {"projection_max_residual", proj_worst}, {"projection_pass", proj_ok}};
  ensure_out_dir(c);
  if (!c.out.empty()) open_out(c, "verify.json") << j.dump(2) << '\n';
  if (c.json) {
    emit_json(j);
  } else {
    std::cout << sweep.size() << " instances, " << failed << " failed, max rel diff " << std::scientific
              << std::setprecision(2) << worst << '\n';
    std::cout << "projection identity: max residual " << proj_worst << (proj_ok ? " (ok)" : " (FAILED)") << '\n';
  }
  return failed == 0 && proj_ok ? 0 : kExitVerifyFailed;
}

int cmd_simulate(const RunConfig& c) {
  std::vector<gcorr::FactorSpec> factors;
  gcorr::ModelFormula model;
  Eigen::VectorXd lambda;
  if (c.preset == "six-factor") {
    auto ex = gcorr::six_factor_example();
    factors = ex.factors;
    model = ex.model;
    lambda = ex.lambda;
  } else if (!c.preset.empty()) {
    throw ConfigError("--preset: unknown preset '" + c.preset + "'");
  } else {
    if (c.factors.empty()) throw ConfigError("simulate needs --factors or --preset");
    factors = parse_factors(c.factors);
    model = load_model(c, gcorr::detail::names_of(factors), gcorr::Role::LogLinear, "");
    std::vector<double> v;
    if (!c.lambda.empty())
      for (const auto& s : gcorr::detail::split(c.lambda, ',')) {
        try {
          v.push_back(std::stod(s));
        } catch (...) {
          throw ConfigError("--lambda: bad number '" + s + "'");
        }
      }
    lambda = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  const auto table = gcorr::simulate_table(factors, model, lambda, c.subjects, c.seed);
  ensure_out_dir(c);
  if (!c.out.empty()) {
    auto f = open_out(c, "table.csv");
    gcorr::write_csv(f, table);
  }
  if (c.json)
    emit_json(gcorr::to_json(table));
  else if (c.out.empty())
    gcorr::write_csv(std::cout, table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian log-linear and logistic analyses under g-priors"};
  app.require_subcommand(1);
  RunConfig c;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", c.out, "Output directory");
    sub->add_flag("--json", c.json, "Print JSON to stdout");
  };
  auto prior_opts = [&](CLI::App* sub) {
    sub->add_option("--g", c.g, "Prior on g: N, fixed:<v> or ig:<var>")->capture_default_str();
    sub->add_flag("--flat-intercept", c.flat_intercept, "Locally flat prior on the intercept");
  };
  auto mcmc_opts = [&](CLI::App* sub) {
    sub->add_option("--burnin", c.burn_in, "Burn-in iterations")->capture_default_str()->check(CLI::NonNegativeNumber);
    sub->add_option("--iters", c.iterations, "Kept iterations")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  };

  auto* fit = app.add_subcommand("fit", "Posterior summary for one model");
  fit->add_option("--data", c.data, "Table (.csv or .json)")->required();
  fit->add_option("--model", c.model, "Formula or model JSON file")->required();
  fit->add_option("--outcome", c.outcome, "Binary outcome; fits the logistic model");
  fit->add_option("--level", c.level, "Credible level")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  prior_opts(fit);
  mcmc_opts(fit);
  common(fit);

  auto* select = app.add_subcommand("select", "Posterior probabilities of graphical models");
  select->add_option("--data", c.data, "Table (.csv or .json)")->required();
  select->add_option("--outcome", c.outcome, "Binary outcome; searches logistic models");
  select->add_flag("--enumerate", c.enumerate, "Exact enumeration with Laplace marginals");
  select->add_option("--top", c.top, "Models to report")->capture_default_str();
  prior_opts(select);
  mcmc_opts(select);
  common(select);

  auto* correspond = app.add_subcommand("correspond", "Map between log-linear and logistic models");
  correspond->add_option("--data", c.data, "Table, for factor levels and the prior check");
  correspond->add_option("--factors", c.factors, "Factors as NAME:LEVELS,... when no table is given");
  correspond->add_option("--model", c.model, "Formula or model JSON file")->required();
  correspond->add_option("--outcome", c.outcome, "Binary outcome")->required();
  correspond->add_flag("--logistic", c.logistic_input, "Treat --model as a logistic formula");
  correspond->add_option("--n", c.subjects, "Sample size for the prior check without --data")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  correspond->add_option("--g", c.g, "g for the prior check: N or fixed:<v>")->capture_default_str();
  common(correspond);

  auto* verify = app.add_subcommand("verify", "Sweep of the implied-prior identity over small tables");
  verify->add_option("--max-factors", c.max_factors, "Largest table dimension")->capture_default_str()->check(
      CLI::Range(1, 4));
  verify->add_option("--max-levels", c.max_levels, "Largest level count")->capture_default_str()->check(
      CLI::Range(2, 3));
  verify->add_option("--seed", c.seed, "Seed for the random projection checks")->capture_default_str();
  common(verify);

  auto* simulate = app.add_subcommand("simulate", "Draw a table from a log-linear model");
  simulate->add_option("--factors", c.factors, "Factors as NAME:LEVELS,...");
  simulate->add_option("--model", c.model, "Formula or model JSON file");
  simulate->add_option("--lambda", c.lambda, "Comma-separated parameters in design order");
  simulate->add_option("--preset", c.preset, "Built-in example: six-factor");
  simulate->add_option("--n", c.subjects, "Number of subjects")->capture_default_str()->check(CLI::PositiveNumber);
  simulate->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  common(simulate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*fit) return cmd_fit(c);
    if (*select) return cmd_select(c);
    if (*correspond) return cmd_correspond(c);
    if (*verify) return cmd_verify(c);
    if (*simulate) return cmd_simulate(c);
  } catch (const ConfigError& e) {
    std::cerr << "gcorr: " << e.what() << '\n';
    return kExitConfig;
  } catch (const gcorr::Error& e) {
    std::cerr << "gcorr: " << e.what() << '\n';
    return gcorr::is_numerical(e.code()) ? kExitNumerical : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "gcorr: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
