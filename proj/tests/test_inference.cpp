#include <gtest/gtest.h>

#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/binomial.hpp>
#include <cmath>
#include <random>

#include "gcorr/gcorr.hpp"
#include "oracles.hpp"

using namespace gcorr;

namespace {

ContingencyTable table_of(std::vector<FactorSpec> f, std::vector<std::int64_t> counts) {
  return ContingencyTable(std::move(f), std::move(counts));
}

// log of the Poisson pmf as a plain product, computed cell by cell
double naive_poisson(const std::vector<std::int64_t>& n, const Eigen::VectorXd& mu) {
  double ll = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double m = mu(static_cast<Eigen::Index>(i));
    ll += std::log(std::pow(m, static_cast<double>(n[i])) * std::exp(-m) / std::tgamma(static_cast<double>(n[i]) + 1));
  }
  return ll;
}

double naive_binomial(const BinomialData& d, const Eigen::VectorXd& p) {
  double ll = 0;
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    const auto t = static_cast<unsigned>(d.rows[i].trials), s = static_cast<unsigned>(d.rows[i].successes);
    const double pi = p(static_cast<Eigen::Index>(i));
    ll += std::log(boost::math::binomial_coefficient<double>(t, s) * std::pow(pi, s) * std::pow(1 - pi, t - s));
  }
  return ll;
}

ContingencyTable random_table(Rng& rng, std::size_t p, std::int64_t n) {
  std::uniform_int_distribution<int> lv(2, 3);
  std::normal_distribution<double> z(0.0, 0.4);
  std::vector<FactorSpec> f;
  for (std::size_t i = 0; i < p; ++i) f.push_back({std::string(1, static_cast<char>('A' + i)), i < 2 ? 2 : lv(rng)});
  if (detail::level_product(f) > 72) f.back().levels = 2;
  std::vector<Term> gens;
  for (std::size_t i = 0; i + 1 < p; ++i) gens.push_back(Term({f[i].name, f[i + 1].name}));
  const auto model = close_hierarchical(gens);
  const auto x = design_matrix(f, model);
  Eigen::VectorXd lambda(x.cols());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) lambda(k) = z(rng);
  return simulate_table(f, model, lambda, n, rng());
}

}  // namespace

TEST(Loglik, PoissonExamples) {
  const auto t = table_of({{"X", 2}, {"Y", 2}}, {1, 1, 1, 1});
  const auto x = design_matrix(t, parse_formula("XY", {"X", "Y"}));
  EXPECT_DOUBLE_EQ(loglik_poisson(t, x.matrix, Eigen::VectorXd::Zero(4)), -4.0);

  const auto s = table_of({{"X", 2}, {"Y", 2}}, {7, 3, 12, 5});
  const auto fit = fit_mle(s, x);
  ASSERT_TRUE(fit.converged);
  double closed = 0;
  for (auto n : s.counts()) closed += n * std::log(n) - n - std::lgamma(n + 1.0);
  EXPECT_NEAR(loglik_poisson(s, x.matrix, fit.theta), closed, 1e-9);

  Rng rng(4);
  std::normal_distribution<double> z(0.0, 0.7);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd lambda(4);
    for (int k = 0; k < 4; ++k) lambda(k) = z(rng);
    const Eigen::VectorXd mu = (x.matrix * lambda).array().exp();
    EXPECT_NEAR(loglik_poisson(s, x.matrix, lambda), naive_poisson(s.counts(), mu), 1e-12);
  }
}

TEST(Loglik, BinomialExamples) {
  BinomialData d{"Y", {{"X", 3}}, {{5, 2}, {1, 1}, {4, 0}}};
  const auto x = design_matrix(d.covariates, parse_formula("X", {"X"}));
  double want = 0;
  for (const auto& r : d.rows) want += std::log(boost::math::binomial_coefficient<double>(r.trials, r.successes)) + r.trials * std::log(0.5);
  EXPECT_NEAR(loglik_binomial(d, x.matrix, Eigen::VectorXd::Zero(3)), want, 1e-13);

  BinomialData bern{"Y", {}, {{1, 1}}};
  Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  EXPECT_NEAR(loglik_binomial(bern, one, Eigen::VectorXd::Constant(1, 0.3)), std::log(1 / (1 + std::exp(-0.3))), 1e-14);
  bern.rows[0].successes = 0;
  EXPECT_NEAR(loglik_binomial(bern, one, Eigen::VectorXd::Constant(1, 0.3)), std::log(1 / (1 + std::exp(0.3))), 1e-14);

  Rng rng(9);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd beta(3);
    for (int k = 0; k < 3; ++k) beta(k) = z(rng);
    const Eigen::VectorXd p = (1.0 / (1.0 + (-(x.matrix * beta).array()).exp())).matrix();
    EXPECT_NEAR(loglik_binomial(d, x.matrix, beta), naive_binomial(d, p), 1e-12);
  }
}

TEST(Deviance, Examples) {
  const auto s = table_of({{"X", 2}, {"Y", 3}}, {7, 3, 12, 5, 9, 1});
  const auto x = design_matrix(s, parse_formula("XY", {"X", "Y"}));
  EXPECT_NEAR(deviance(s, x, fit_mle(s, x).theta), 0.0, 1e-9);

  BinomialData d{"Y", {}, {{2, 1}}};
  const auto x0 = design_matrix(d.covariates, ModelFormula{});
  const auto fit = fit_mle(d, x0);
  EXPECT_NEAR(fit.theta(0), 0.0, 1e-12);
  EXPECT_NEAR(deviance(d, x0, fit.theta), 0.0, 1e-12);

  // direct formula with 0·log 0 = 0
  const auto z = table_of({{"X", 2}}, {0, 4});
  const auto xi = design_matrix(z, ModelFormula{});
  EXPECT_NEAR(deviance(z, xi, Eigen::VectorXd::Constant(1, std::log(2.0))), 2 * (4 * std::log(2.0)), 1e-12);
}

TEST(Deviance, LogisticEqualsEquivalentLogLinear) {
  Rng rng(2024);
  std::uniform_int_distribution<std::size_t> nf(2, 5);
  int tested = 0;
  while (tested < 50) {
    const auto table = random_table(rng, nf(rng), 4000);
    if (*std::min_element(table.counts().begin(), table.counts().end()) == 0) continue;
    const auto names = detail::names_of(table.factors());
    std::vector<std::string> binary;
    for (const auto& f : table.factors())
      if (f.levels == 2) binary.push_back(f.name);
    const std::string y = binary[rng() % binary.size()];
    std::vector<std::string> cov;
    for (const auto& n : names)
      if (n != y) cov.push_back(n);
    std::vector<Term> gens;
    for (const auto& c : cov)
      if (rng() % 2) gens.push_back(Term{c});
    if (cov.size() >= 2 && rng() % 2) gens.push_back(Term({cov[0], cov[1]}));
    const auto logistic = close_hierarchical(gens, Role::Logistic, y);

    const auto data = collapse_to_binomial(table, y, cov);
    const auto xl = design_matrix(data, logistic);
    const auto fl = fit_mle(data, xl);
    const auto equiv = logistic_to_loglinear_equivalent(logistic, y, table.factors());
    const auto xe = design_matrix(table, equiv);
    const auto fe = fit_mle(table, xe);
    ASSERT_TRUE(fl.converged && fe.converged);
    EXPECT_NEAR(deviance(data, xl, fl.theta), deviance(table, xe, fe.theta), 1e-6)
        << formula_string(logistic, cov) << " on " << table.factors().size() << " factors";
    ++tested;
  }
}

TEST(Summarize, KnownDistributions) {
  Rng rng(17);
  std::normal_distribution<double> z;
  Chain c;
  c.draws.resize(100000, 2);
  for (Eigen::Index i = 0; i < c.draws.rows(); ++i) {
    c.draws(i, 0) = z(rng);
    c.draws(i, 1) = 3.5;
  }
  c.labels = {"a", "b"};
  const auto s = summarize(c);
  const auto& a = s.at("a");
  // standard error of the 2.5% quantile of 1e5 normals is about 0.011
  EXPECT_NEAR(a.lower, -1.959964, 0.04);
  EXPECT_NEAR(a.upper, 1.959964, 0.04);
  EXPECT_NEAR(a.mean, 0.0, 3 * a.mcse);
  EXPECT_NEAR(a.mcse, 1 / std::sqrt(1e5), 0.3 / std::sqrt(1e5));
  const auto& b = s.at("b");
  EXPECT_EQ(b.lower, 3.5);
  EXPECT_EQ(b.upper, 3.5);
  EXPECT_EQ(b.mcse, 0.0);
  EXPECT_EQ(b.sd, 0.0);
}

TEST(Summarize, SortOracleAndErrors) {
  Rng rng(5);
  std::exponential_distribution<double> e;
  Chain c;
  c.draws.resize(1001, 1);
  for (Eigen::Index i = 0; i < c.draws.rows(); ++i) c.draws(i, 0) = e(rng);
  c.labels = {"x"};
  for (double level : {0.5, 0.9, 0.95}) {
    std::vector<double> v(c.draws.data(), c.draws.data() + c.draws.size());
    std::sort(v.begin(), v.end());
    auto q = [&](double p) {
      const double h = 1000 * p;
      const auto lo = static_cast<std::size_t>(h);
      return lo + 1 < v.size() ? v[lo] + (h - lo) * (v[lo + 1] - v[lo]) : v[lo];
    };
    const auto s = summarize(c, level).at("x");
    EXPECT_NEAR(s.lower, q((1 - level) / 2), 1e-14);
    EXPECT_NEAR(s.upper, q((1 + level) / 2), 1e-14);
    EXPECT_LT(s.lower, s.upper);
  }
  c.draws.conservativeResize(999, 1);
  try {
    summarize(c);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::TooFewDraws);
  }
}

TEST(GibbsG, ConditionalMatchesQuadrature) {
  const auto ig = mixture_ig_params(10, 100);  // IG(3, 20)
  for (double q : {0.0, 0.7, 5.0, 40.0})
    for (Eigen::Index p : {1, 3, 8}) {
      auto log_product = [&](double g) {
        return ig_log_density(ig, g) - 0.5 * static_cast<double>(p) * std::log(g) - 0.5 * q / g;
      };
      const double ref = log_product(10.0);
      boost::math::quadrature::exp_sinh<double> integrator;
      const double z = integrator.integrate([&](double g) { return std::exp(log_product(g) - ref); }, 1e-14);
      const auto cond = g_conditional(ig, q, p);
      double sup = 0;
      for (double g = 0.05; g < 200; g *= 1.01)
        sup = std::max(sup, std::abs(std::exp(ig_log_density(cond, g)) - std::exp(log_product(g) - ref) / z));
      EXPECT_LT(sup, 1e-6) << "Q=" << q << " p=" << p;
    }
  const auto at_mean = g_conditional(ig, 0.0, 4);
  EXPECT_EQ(at_mean.a, ig.a + 2);
  EXPECT_EQ(at_mean.b, ig.b);
  EXPECT_NEAR(ig_mean(at_mean), 20.0 / 4.0, 1e-14);

  Rng rng(1);
  const int n = 200000;
  double sum = 0;
  for (int i = 0; i < n; ++i) sum += gibbs_update_g(ig, 6.0, 3, rng);
  const auto c = g_conditional(ig, 6.0, 3);
  EXPECT_NEAR(sum / n, ig_mean(c), 4 * std::sqrt(ig_variance(c) / n));
}

namespace {

struct PriorOnlyCase {
  ContingencyTable table = table_of({{"X", 2}, {"Y", 3}}, {4, 3, 5, 2, 3, 3});
  DesignMatrix x = design_matrix(table, parse_formula("X+Y", {"X", "Y"}));
  GPriorSpec prior = gprior_loglinear(x, table);
  GlmPosterior post{table, x.matrix};
};

}  // namespace

TEST(Mcmc, PriorOnlyRunReproducesPrior) {
  PriorOnlyCase pc;
  pc.prior.g_law = FixedG{2.0};
  pc.prior.mean = Eigen::VectorXd::LinSpaced(4, -0.5, 1.0);
  McmcSettings s;
  s.burn_in = 20000;
  s.iterations = 200000;
  s.seed = 3;
  s.use_likelihood = false;
  const auto fit = fit_mcmc(pc.post, pc.prior, s);
  const Eigen::MatrixXd cov = 2.0 * pc.prior.sigma;
  for (Eigen::Index j = 0; j < 4; ++j) {
    const auto& p = fit.summary.parameters[static_cast<std::size_t>(j)];
    EXPECT_NEAR(p.mean, pc.prior.mean(j), 3 * p.mcse) << p.label;
    const double ratio = p.sd * p.sd / cov(j, j);
    EXPECT_GT(ratio, 0.9);
    EXPECT_LT(ratio, 1.1);
  }
  EXPECT_GT(fit.chain.acceptance_rate, 0.1);
  EXPECT_LT(fit.chain.acceptance_rate, 0.5);
}

TEST(Mcmc, PriorOnlyGMarginalIsInverseGamma) {
  PriorOnlyCase pc;
  const auto ig = mixture_ig_params(20, 100);  // IG(6, 100)
  pc.prior.g_law = ig;
  McmcSettings s;
  s.burn_in = 10000;
  s.iterations = 300000;
  s.seed = 11;
  s.use_likelihood = false;
  const auto fit = fit_mcmc(pc.post, pc.prior, s);
  ASSERT_EQ(fit.chain.g_draws.size(), 300000u);
  ASSERT_TRUE(fit.summary.g.has_value());
  std::vector<double> thin;
  for (std::size_t i = 0; i < fit.chain.g_draws.size(); i += 150) thin.push_back(fit.chain.g_draws[i]);
  std::sort(thin.begin(), thin.end());
  const boost::math::inverse_gamma_distribution<double> law(ig.a, ig.b);
  double d = 0;
  const double n = static_cast<double>(thin.size());
  for (std::size_t i = 0; i < thin.size(); ++i) {
    const double f = boost::math::cdf(law, thin[i]);
    d = std::max({d, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
  }
  // asymptotic Kolmogorov critical value at alpha = 1e-3
  EXPECT_LT(d * std::sqrt(n), std::sqrt(-0.5 * std::log(1e-3 / 2)));
}

TEST(Mcmc, SaturatedPosteriorNearMle) {
  const auto t = table_of({{"X", 2}, {"Y", 2}}, {40000, 10000, 30000, 20000});
  const auto x = design_matrix(t, parse_formula("XY", {"X", "Y"}));
  // closed form saturated MLE in corner-point coding
  const std::vector<double> mle = {std::log(40000.0), std::log(30000.0 / 40000), std::log(10000.0 / 40000),
                                   std::log(20000.0 * 40000 / (30000.0 * 10000))};
  ASSERT_EQ(x.names(), (std::vector<std::string>{"Intercept", "X", "Y", "XY"}));
  McmcSettings s;
  s.seed = 5;
  const auto fit = fit_mcmc(GlmPosterior(t, x.matrix), gprior_loglinear(x, t), s);
  for (std::size_t j = 0; j < 4; ++j) {
    const auto& p = fit.summary.parameters[j];
    EXPECT_NEAR(p.mean, mle[j], 2 * p.mcse) << p.label;
  }
  EXPECT_NEAR(fit.summary.deviance_at_posterior_mean, 0.0, 1e-2);
}

TEST(Mcmc, Errors) {
  PriorOnlyCase pc;
  McmcSettings s;
  s.iterations = 0;
  EXPECT_THROW(fit_mcmc(pc.post, pc.prior, s), Error);
  s.iterations = 2000;
  s.use_likelihood = false;
  const auto flat = apply_flat_intercept(pc.prior, pc.x);
  EXPECT_THROW(fit_mcmc(GlmPosterior(pc.table, flat.centered), flat.prior, s), Error);
}

TEST(Selection, StrongAssociationPicksSaturated) {
  const std::vector<FactorSpec> f = {{"X", 2}, {"Y", 2}};
  Eigen::VectorXd lambda(4);
  lambda << 0, 0.2, -0.1, 1.0;
  const auto table = simulate_table(f, parse_formula("XY", {"X", "Y"}), lambda, 500, 8);
  SelectionProblem problem(table, GraphicalSpace({"X", "Y"}), PriorChoice{});
  const auto exact = enumerate_models(problem);
  EXPECT_EQ(exact.modal().formula, "XY");
  EXPECT_GT(exact.modal().probability, 0.95);
  SelectionSettings s;
  s.iterations = 50000;
  const auto rj = select_models(problem, s);
  EXPECT_EQ(rj.modal().formula, "XY");
  EXPECT_LT(total_variation(rj, exact), 0.05);
}

TEST(Selection, IndependenceFavoredAtLargeN) {
  const std::vector<FactorSpec> f = {{"X", 2}, {"Y", 3}};
  Eigen::VectorXd lambda(4);
  lambda << 0, 0.3, -0.2, 0.4;
  const auto table = simulate_table(f, parse_formula("X+Y", {"X", "Y"}), lambda, 20000, 21);
  for (const char* g : {"N", "ig:100"}) {
    SelectionProblem problem(table, GraphicalSpace({"X", "Y"}), PriorChoice::parse(g));
    const auto exact = enumerate_models(problem);
    EXPECT_EQ(exact.modal().formula, "X+Y") << g;
    EXPECT_GT(exact.modal().probability, 0.9) << g;
  }
}

TEST(Selection, ReversibleJumpMatchesEnumerationOnThreeFactors) {
  const std::vector<FactorSpec> f = {{"X", 2}, {"Y", 2}, {"Z", 3}};
  const auto model = parse_formula("XY+YZ", {"X", "Y", "Z"});
  const auto x = design_matrix(f, model);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(x.cols());
  for (Eigen::Index k = 1; k < lambda.size(); ++k) lambda(k) = x.names()[static_cast<std::size_t>(k)].size() > 4 ? 0.35 : 0.1;
  const auto table = simulate_table(f, model, lambda, 300, 5);
  for (Role role : {Role::LogLinear, Role::Logistic})
    for (const char* g : {"N", "ig:100"}) {
      GraphicalSpace space({"X", "Y", "Z"}, role, role == Role::Logistic ? "Y" : "");
      SelectionProblem problem(table, space, PriorChoice::parse(g));
      const auto exact = enumerate_models(problem);
      SelectionSettings s;
      s.iterations = 200000;
      s.seed = 2;
      const auto rj = select_models(problem, s);
      double sum = 0;
      for (const auto& m : rj.models) sum += m.probability;
      EXPECT_NEAR(sum, 1.0, 1e-12);
      EXPECT_LT(total_variation(rj, exact), 0.05) << to_string(role) << ' ' << g << " modal "
                                                  << exact.modal().formula << ' ' << exact.modal().probability;
    }
}

TEST(Selection, SixFactorModalModelStableAcrossGLaws) {
  const auto ex = six_factor_example();
  const auto table = simulate_table(ex.factors, ex.model, ex.lambda, 1000, 3);
  SelectionSettings s;
  s.burn_in = 2000;
  s.iterations = 20000;
  std::vector<std::string> modal;
  for (const char* g : {"fixed:1000", "ig:1", "ig:100"}) {
    SelectionProblem problem(table, GraphicalSpace(detail::names_of(ex.factors)), PriorChoice::parse(g));
    modal.push_back(select_models(problem, s).modal().formula);
  }
  EXPECT_EQ(modal[0], "YE+YAB+YCD");
  EXPECT_EQ(modal[1], modal[0]);
  EXPECT_EQ(modal[2], modal[0]);
}

TEST(Selection, Errors) {
  const auto table = table_of({{"X", 2}, {"Y", 2}}, {1, 2, 3, 4});
  EXPECT_THROW(SelectionProblem(table, GraphicalSpace({"X", "W"}), PriorChoice{}), Error);
  EXPECT_THROW(PriorChoice::parse("ig:-1"), Error);
  EXPECT_THROW(PriorChoice::parse("banana"), Error);
}
