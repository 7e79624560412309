#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "ldmm/em.hpp"
#include "ldmm/errors.hpp"
#include "test_util.hpp"

using namespace ldmm;

namespace {

EmConfig config_for(std::vector<LossFamily> families, int restarts = 1) {
  EmConfig c;
  c.families = std::move(families);
  c.restarts = restarts;
  return c;
}

void expect_monotone(const EmTrace& t, double slack = 1e-8) {
  for (std::size_t i = 1; i < t.log_posterior.size(); ++i) {
    EXPECT_GE(t.log_posterior[i], t.log_posterior[i - 1] - slack) << "step " << i;
  }
}

MixtureParams ln_pareto() {
  MixtureParams p;
  p.theta = Vector(2);
  p.theta << 0.5, 0.5;
  p.components = {LogNormalParams{6.0, 0.8}, ParetoParams{1.5, 2000.0}};
  p.psi = planted_topics(2, 50, 8, 0.8);
  return p;
}

}  // namespace

TEST(EStep, SingleComponentAndSymmetry) {
  MixtureParams p;
  p.theta = Vector::Ones(1);
  p.components = {LogNormalParams{2.0, 1.0}};
  p.psi = RowMatrix::Constant(1, 3, 1.0 / 3.0);
  const auto c = test::make_corpus(3, {{0}, {1, 2}, {2}}, {1.0, 5.0, 9.0});
  const auto w = e_step(c, p);
  EXPECT_TRUE(w == RowMatrix::Ones(3, 1));

  MixtureParams s;
  s.theta = Vector::Constant(2, 0.5);
  s.components = {LogNormalParams{2.0, 1.0}, LogNormalParams{2.0, 1.0}};
  s.psi = RowMatrix::Constant(2, 3, 1.0 / 3.0);
  const auto ws = e_step(c, s);
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(ws(i, 0), 0.5);
    EXPECT_DOUBLE_EQ(ws(i, 1), 0.5);
  }
}

TEST(EStep, ThreeObservationsByHand) {
  MixtureParams p;
  p.theta = Vector(2);
  p.theta << 0.25, 0.75;
  p.components = {LogNormalParams{1.0, 1.0}, LogNormalParams{3.0, 0.5}};
  p.psi = RowMatrix(2, 2);
  p.psi << 0.8, 0.2, 0.3, 0.7;
  const auto c = test::make_corpus(2, {{0, 0}, {1}, {0, 1}}, {2.0, 20.0, 7.0});
  const auto w = e_step(c, p);
  auto lnpdf = [](double y, double mu, double s) {
    const double z = (std::log(y) - mu) / s;
    return std::exp(-0.5 * z * z) / (y * s * std::sqrt(2.0 * M_PI));
  };
  const double word[3][2] = {{0.8 * 0.8, 0.3 * 0.3}, {0.2, 0.7}, {0.8 * 0.2, 0.3 * 0.7}};
  for (int i = 0; i < 3; ++i) {
    const double a = 0.25 * lnpdf(c.losses[i], 1.0, 1.0) * word[i][0];
    const double b = 0.75 * lnpdf(c.losses[i], 3.0, 0.5) * word[i][1];
    EXPECT_NEAR(w(i, 0), a / (a + b), 1e-12) << i;
    EXPECT_NEAR(w(i, 1), b / (a + b), 1e-12) << i;
  }
}

TEST(MStep, ThetaIsColumnMeanUnderUnitAlpha) {
  const auto sim = test::simulate(test::two_lognormal(30), 400, 2);
  const auto fam = std::vector<LossFamily>{LossFamily::LogNormal, LossFamily::LogNormal};
  const auto h = HyperParams::defaults(fam, 30);
  const auto w = e_step(sim.corpus, test::two_lognormal(30));
  const auto p = m_step(sim.corpus, w, h, fam);
  const Vector means = w.colwise().mean().transpose();
  EXPECT_NEAR(p.theta[0], means[0], 1e-12);
  EXPECT_NEAR(p.theta[1], means[1], 1e-12);
}

TEST(MStep, ThetaMapWithAlpha) {
  const auto sim = test::simulate(test::two_lognormal(30), 100, 2);
  const auto fam = std::vector<LossFamily>{LossFamily::LogNormal, LossFamily::LogNormal};
  auto h = HyperParams::defaults(fam, 30);
  h.alpha << 3.0, 2.0;
  RowMatrix w = RowMatrix::Zero(100, 2);
  for (int i = 0; i < 100; ++i) w(i, i < 30 ? 0 : 1) = 1.0;
  const auto p = m_step(sim.corpus, w, h, fam);
  EXPECT_NEAR(p.theta[0], (30.0 + 2.0) / (100.0 + 3.0), 1e-14);
  EXPECT_NEAR(p.theta[1], (70.0 + 1.0) / (100.0 + 3.0), 1e-14);
  h.alpha << 0.5, 1.0;
  EXPECT_THROW(m_step(sim.corpus, w, h, fam), ConfigError);
}

TEST(MStep, LaplaceSmoothing) {
  // Topic 1 receives no documents: every word gets 1/|V|.
  const auto c = test::make_corpus(4, {{0, 1}, {1, 1}, {0}}, {10.0, 20.0, 30.0});
  const auto fam = std::vector<LossFamily>{LossFamily::LogNormal, LossFamily::LogNormal};
  const auto h = HyperParams::defaults(fam, 4);
  RowMatrix w = RowMatrix::Zero(3, 2);
  w.col(0).setOnes();
  const auto r = m_step(c, w, h, fam, MStepOptions{});
  for (int v = 0; v < 4; ++v) EXPECT_DOUBLE_EQ(r.params.psi(1, v), 0.25);
  EXPECT_EQ(r.empty_components, (std::vector<int>{1}));
  // Topic 0 has 5 tokens; unseen words 2 and 3 get 1 / (|V| + 5).
  EXPECT_DOUBLE_EQ(r.params.psi(0, 2), 1.0 / 9.0);
  EXPECT_DOUBLE_EQ(r.params.psi(0, 0), 3.0 / 9.0);
  EXPECT_DOUBLE_EQ(r.params.psi(0, 1), 4.0 / 9.0);
  // The empty component is reset to its prior mode.
  const auto mode = std::get<LogNormalParams>(prior_mode(h.loss_priors[1], LossFamily::LogNormal, LogNormalParams{}));
  EXPECT_EQ(std::get<LogNormalParams>(r.params.components[1]).mu, mode.mu);
}

TEST(MStep, HardAssignmentsGivePerGroupMles) {
  const std::vector<double> y{std::exp(1.0), std::exp(3.0), std::exp(5.0), std::exp(6.0), std::exp(10.0)};
  const auto c = test::make_corpus(2, {{0}, {0}, {1}, {1}, {1}}, y);
  const auto fam = std::vector<LossFamily>{LossFamily::LogNormal, LossFamily::LogNormal};
  RowMatrix w = RowMatrix::Zero(5, 2);
  w(0, 0) = w(1, 0) = 1.0;
  w(2, 1) = w(3, 1) = w(4, 1) = 1.0;
  const auto p = m_step(c, w, HyperParams::defaults(fam, 2), fam);
  const auto a = std::get<LogNormalParams>(p.components[0]);
  const auto b = std::get<LogNormalParams>(p.components[1]);
  EXPECT_NEAR(a.mu, 2.0, 1e-14);
  EXPECT_NEAR(a.sigma, 1.0, 1e-14);
  EXPECT_NEAR(b.mu, 7.0, 1e-14);
  EXPECT_NEAR(b.sigma, std::sqrt((4.0 + 1.0 + 9.0) / 3.0), 1e-14);
}

TEST(RunEm, SingleComponentConvergesImmediately) {
  const auto sim = test::simulate(test::two_lognormal(20), 300, 5);
  auto cfg = config_for({LossFamily::LogNormal});
  const auto h = HyperParams::defaults(cfg.families, 20);
  const auto t = run_em(sim.corpus, h, cfg);
  EXPECT_LE(t.iterations, 2);
  EXPECT_TRUE(t.converged);
  std::vector<double> w(sim.corpus.size(), 1.0);
  const auto mle = weighted_map_fit_lognormal(sim.corpus.losses, w);
  EXPECT_NEAR(std::get<LogNormalParams>(t.params.components[0]).mu, mle.mu, 1e-12);
  EXPECT_NEAR(std::get<LogNormalParams>(t.params.components[0]).sigma, mle.sigma, 1e-12);
}

TEST(RunEm, InfiniteToleranceRunsOneIteration) {
  const auto sim = test::simulate(test::two_lognormal(20), 300, 6);
  auto cfg = config_for({LossFamily::LogNormal, LossFamily::LogNormal});
  cfg.tol = std::numeric_limits<double>::infinity();
  const auto t = run_em(sim.corpus, HyperParams::defaults(cfg.families, 20), cfg);
  EXPECT_EQ(t.iterations, 1);
  EXPECT_EQ(t.log_posterior.size(), 2u);
}

TEST(RunEm, RecoversSeparatedLogNormals) {
  const auto truth = test::two_lognormal(100);
  const auto sim = test::simulate(truth, 5000, 7);
  auto cfg = config_for({LossFamily::LogNormal, LossFamily::LogNormal}, 5);
  const auto t = run_em(sim.corpus, HyperParams::defaults(cfg.families, 100), cfg);
  const auto fitted = t.params.permuted(order_by_mean(t.params));
  EXPECT_NEAR(fitted.theta[0], 0.4, 0.05);
  EXPECT_NEAR(std::get<LogNormalParams>(fitted.components[0]).mu, 7.0, 0.1);
  EXPECT_NEAR(std::get<LogNormalParams>(fitted.components[1]).mu, 9.0, 0.1);
  expect_monotone(t);
  EXPECT_TRUE(t.converged);
}

TEST(RunEm, MonotoneOnLogNormalParetoData) {
  const auto sim = test::simulate(ln_pareto(), 2000, 8);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto cfg = config_for({LossFamily::LogNormal, LossFamily::Pareto});
    cfg.seed = seed;
    const auto t = run_em(sim.corpus, HyperParams::defaults(cfg.families, 50), cfg);
    expect_monotone(t);
    EXPECT_TRUE(t.converged);
    const auto& pr = std::get<GammaShapePrior>(t.hyper.loss_priors[1]);
    EXPECT_GT(pr.scale_min, 0.0);
  }
}

TEST(RunEm, MonotoneWithGb2Component) {
  MixtureParams p = ln_pareto();
  p.components[1] = Gb2Params{1.5, 5000.0, 2.0, 1.5};
  const auto sim = test::simulate(p, 600, 9);
  auto cfg = config_for({LossFamily::LogNormal, LossFamily::GB2});
  cfg.max_iters = 40;
  const auto t = run_em(sim.corpus, HyperParams::defaults(cfg.families, 50), cfg);
  expect_monotone(t);
}

TEST(RunEm, PermutationCovariance) {
  const auto sim = test::simulate(test::two_lognormal(40), 800, 10);
  auto cfg = config_for({LossFamily::LogNormal, LossFamily::LogNormal});
  const auto h = HyperParams::defaults(cfg.families, 40);
  auto init = test::two_lognormal(40);
  init.components = {LogNormalParams{6.5, 2.0}, LogNormalParams{8.0, 1.0}};
  init.theta << 0.3, 0.7;
  const auto a = run_em_from(sim.corpus, h, cfg, init);
  const auto b = run_em_from(sim.corpus, h, cfg, init.permuted({1, 0}));
  ASSERT_EQ(a.log_posterior.size(), b.log_posterior.size());
  for (std::size_t i = 0; i < a.log_posterior.size(); ++i) {
    EXPECT_NEAR(a.log_posterior[i], b.log_posterior[i], 1e-10 * std::abs(a.log_posterior[i]));
  }
  EXPECT_NEAR(a.params.theta[0], b.params.theta[1], 1e-10);
  EXPECT_NEAR(std::get<LogNormalParams>(a.params.components[0]).mu,
              std::get<LogNormalParams>(b.params.components[1]).mu, 1e-10);
}

TEST(RunEm, FixedPoint) {
  const auto sim = test::simulate(test::two_lognormal(40), 800, 11);
  auto cfg = config_for({LossFamily::LogNormal, LossFamily::LogNormal});
  const auto h = HyperParams::defaults(cfg.families, 40);
  const auto t = run_em(sim.corpus, h, cfg);
  const auto again = run_em_from(sim.corpus, h, cfg, t.params);
  const double rel = std::abs(again.log_posterior.back() - t.log_posterior.back()) / std::abs(t.log_posterior.back());
  EXPECT_LT(rel, cfg.tol);
}

TEST(RunEm, ObservedLogPosteriorMatchesTrace) {
  const auto sim = test::simulate(test::two_lognormal(40), 500, 12);
  auto cfg = config_for({LossFamily::LogNormal, LossFamily::LogNormal});
  auto h = HyperParams::defaults(cfg.families, 40);
  h.alpha << 2.0, 2.0;
  const auto t = run_em(sim.corpus, h, cfg);
  EXPECT_NEAR(observed_log_posterior(sim.corpus, t.params, h), t.log_posterior.back(), 1e-9);
  const RowMatrix w = e_step(sim.corpus, t.params);
  EXPECT_LT((w - t.responsibilities).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(RunEm, SeedDeterminism) {
  const auto sim = test::simulate(ln_pareto(), 500, 13);
  auto cfg = config_for({LossFamily::LogNormal, LossFamily::Pareto}, 3);
  const auto h = HyperParams::defaults(cfg.families, 50);
  const auto a = run_em(sim.corpus, h, cfg);
  const auto b = run_em(sim.corpus, h, cfg);
  EXPECT_EQ(a.log_posterior, b.log_posterior);
  EXPECT_EQ(a.seed, b.seed);
}

TEST(RunEm, RejectsBadConfig) {
  const auto sim = test::simulate(test::two_lognormal(20), 100, 1);
  auto cfg = config_for({LossFamily::LogNormal, LossFamily::LogNormal});
  auto h = HyperParams::defaults(cfg.families, 20);
  cfg.tol = 0.0;
  EXPECT_THROW(run_em(sim.corpus, h, cfg), ConfigError);
  cfg.tol = 1e-6;
  h.gamma[0] = 0.5;
  EXPECT_THROW(run_em(sim.corpus, h, cfg), ConfigError);
  h = HyperParams::defaults(cfg.families, 20);
  cfg.families = {LossFamily::Pareto, LossFamily::LogNormal};
  h.loss_priors[0] = FlatPrior{};
  EXPECT_THROW(run_em(sim.corpus, h, cfg), ConfigError);
}
