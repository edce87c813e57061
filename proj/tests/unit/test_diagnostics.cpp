#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "etas/diagnostics.hpp"
#include "etas/error.hpp"
#include "etas/simulate.hpp"
#include "support.hpp"

using namespace etas;

namespace {

Catalog poisson_catalog(std::vector<double> times, double T) {
  Catalog c;
  c.region = {0.0, 1.0, 0.0, 1.0};
  c.T = T;
  c.m0 = 5.0;
  for (double t : times) c.events.push_back({t, 0.5, 0.5, 10.0, 5.5, true});
  return c;
}

double frac(double x) { return x - std::floor(x); }

std::vector<double> reference_sequence(int s) {
  const int n = 10 + 7 * s;
  std::vector<double> u(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double v = frac(std::sin((i + 1) * (s + 1.37)) * 43758.5453);
    if (s % 2 == 1) v = std::pow(v, 1.3);
    u[static_cast<std::size_t>(i)] = v;
  }
  return u;
}

}  // namespace

TEST(TransformedTimes, LinearForPoisson) {
  const Catalog c = poisson_catalog({1.0, 2.0, 3.0}, 4.0);
  EtasParams p;
  p.mu = 0.7;
  p.A = 0.0;
  const EtasLikelihood lik(c, Variant::GroundTemporal);
  const auto tau = transformed_times(lik, p);
  ASSERT_EQ(tau.size(), 3u);
  EXPECT_NEAR(tau[0], 0.7, 1e-15);
  EXPECT_NEAR(tau[1], 1.4, 1e-15);
  EXPECT_NEAR(tau[2], 2.1, 1e-15);
}

TEST(TransformedTimes, LastEqualsWindowCompensatorWhenEventAtEnd) {
  auto cfg = etas::testing::reference_config(4, 400.0);
  Catalog c = simulate(cfg).catalog;
  c.events.push_back({c.t_end(), 2.5, 2.5, 10.0, 5.0, true});
  const EtasLikelihood lik(c, Variant::GroundTemporal);
  const auto tau = transformed_times(lik, cfg.params);
  EXPECT_NEAR(tau.back(), lik.compensator(cfg.params), 1e-9 * tau.back());
  for (std::size_t i = 1; i < tau.size(); ++i) EXPECT_GE(tau[i], tau[i - 1]);
}

TEST(UniformResiduals, Examples) {
  const double l2 = std::log(2.0);
  const std::vector<double> tau{l2, 2 * l2, 3 * l2};
  for (double u : uniform_residuals(tau)) EXPECT_NEAR(u, 0.5, 1e-15);
  const std::vector<double> tie{1.0, 1.0, 800.0};
  const auto u = uniform_residuals(tie);
  EXPECT_DOUBLE_EQ(u[1], 0.0);
  EXPECT_DOUBLE_EQ(u[2], 1.0);
  const std::vector<double> bad{2.0, 1.0};
  EXPECT_THROW((void)uniform_residuals(bad), DomainError);
}

TEST(KsUniform, ConstructedSequences) {
  const std::size_t n = 40;
  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  EXPECT_NEAR(ks_uniform_test(q).stat, 0.5 / static_cast<double>(n), 1e-15);
  const std::vector<double> zeros(12, 0.0);
  EXPECT_DOUBLE_EQ(ks_uniform_test(zeros).stat, 1.0);
  const std::vector<double> few{0.1, 0.5};
  EXPECT_FALSE(ks_uniform_test(few).p.has_value());
  EXPECT_THROW((void)ks_uniform_test(std::vector<double>{}), DomainError);
}

TEST(KsUniform, KolmogorovSurvivalMatchesReference) {
  // Reference: scipy.stats.kstwobign.sf.
  const std::pair<double, double> ref[] = {{0.2, 0.999999999999495},       {0.5, 0.9639452436648751},
                                           {0.8, 0.5441424115741981},      {1.0, 0.26999967167735456},
                                           {1.2, 0.11224966667072497},     {1.5, 0.022217962616525127},
                                           {2.0, 0.0006709252557796953},   {3.0, 3.045995948942526e-08}};
  for (const auto& [x, p] : ref) EXPECT_NEAR(kolmogorov_survival(x), p, 1e-12 + 1e-9 * p) << x;
  EXPECT_DOUBLE_EQ(kolmogorov_survival(0.0), 1.0);
}

TEST(KsUniform, MatchesReferenceImplementation) {
  // Reference: D from scipy.stats.kstest(u, "uniform"), p = kstwobign.sf(sqrt(n) D).
  struct Ref {
    int s;
    double d, p;
  };
  const Ref ref[] = {{0, 0.16927440032595764, 0.93681292212281009},  {1, 0.17438331050277622, 0.67941611605446373},
                     {2, 0.19970724460411776, 0.29392060164349038},  {3, 0.12746712643037078, 0.6950211788327223},
                     {4, 0.14510735460441393, 0.40036679354873356},  {5, 0.20415470429795313, 0.046982096334063389},
                     {6, 0.082553587094970182, 0.87044115447545378}, {7, 0.18328166049973516, 0.037978488111702381},
                     {8, 0.18160079013371919, 0.025730898063611327}, {9, 0.19064559167581996, 0.0099187217808080659},
                     {10, 0.13324707074862091, 0.11673872985581779}, {11, 0.13407347868566266, 0.087623299844670197},
                     {12, 0.06755980916202553, 0.78420187654810114}, {13, 0.081263483077583243, 0.51724535454802845},
                     {14, 0.039787784881978205, 0.99554516328052067}, {15, 0.1445093260597945, 0.016408910067144185},
                     {16, 0.049117265117677222, 0.93013176222820149}, {17, 0.11153441799506239, 0.080748196001413072},
                     {18, 0.07780703690792401, 0.38262439632036471}, {19, 0.11144519639461509, 0.057325744424016861}};
  for (const Ref& r : ref) {
    const auto ks = ks_uniform_test(reference_sequence(r.s));
    EXPECT_NEAR(ks.stat, r.d, 1e-12) << "sequence " << r.s;
    ASSERT_TRUE(ks.p.has_value());
    EXPECT_NEAR(*ks.p, r.p, 1e-6) << "sequence " << r.s;
  }
}

TEST(TemporalResiduals, SumTelescopesAndEmptyBins) {
  auto cfg = etas::testing::reference_config(9, 500.0);
  const Catalog c = simulate(cfg).catalog;
  const EtasLikelihood lik(c, Variant::GroundTemporal);
  const auto bins = temporal_residuals(lik, cfg.params, 37);
  double sum = 0.0;
  for (const auto& b : bins) sum += b.residual();
  const double n = static_cast<double>(c.target_count());
  EXPECT_NEAR(sum, n - lik.compensator(cfg.params), 1e-9);

  Catalog empty = poisson_catalog({}, 10.0);
  EtasParams p;
  p.mu = 2.0;
  const EtasLikelihood lik0(empty, Variant::GroundTemporal);
  for (const auto& b : temporal_residuals(lik0, p, 4)) EXPECT_NEAR(b.residual(), -5.0, 1e-12);
}

TEST(TemporalResiduals, PoissonMeanResidualNearZero) {
  auto cfg = etas::testing::reference_config(0, 100.0);
  cfg.params.A = 0.0;
  const std::size_t bins = 5;
  std::vector<double> sum(bins, 0.0), sum2(bins, 0.0);
  const int runs = 200;
  for (int r = 0; r < runs; ++r) {
    cfg.seed = 500 + static_cast<std::uint64_t>(r);
    const Catalog c = simulate(cfg).catalog;
    const EtasLikelihood lik(c, Variant::GroundTemporal);
    const auto res = temporal_residuals(lik, cfg.params, bins);
    for (std::size_t k = 0; k < bins; ++k) {
      sum[k] += res[k].residual();
      sum2[k] += res[k].residual() * res[k].residual();
    }
  }
  for (std::size_t k = 0; k < bins; ++k) {
    const double mean = sum[k] / runs;
    const double se = std::sqrt((sum2[k] / runs - mean * mean) / runs);
    EXPECT_LT(std::abs(mean), 3.5 * se) << "bin " << k;
  }
}

TEST(SpatialResiduals, NoEventsIsMinusModelSurface) {
  Catalog c = poisson_catalog({}, 10.0);
  EtasParams p;
  p.mu = 0.4;
  const auto bg = BackgroundField::uniform(c.region);
  const EtasLikelihood lik(c, Variant::SpatioTemporal, &bg);
  const auto g = spatial_residuals(lik, p, bg, Grid::over(c.region, 0.25));
  for (double v : g.values) EXPECT_DOUBLE_EQ(v, -0.4 * 10.0);
}

TEST(SpatialResiduals, GridSumMatchesCountMinusCompensator) {
  // Events away from the edges so the smoothing kernels stay inside the region.
  Catalog c;
  c.region = {0.0, 10.0, 0.0, 10.0};
  c.T = 50.0;
  c.m0 = 5.0;
  c.events = {{1.0, 4.0, 4.0, 10.0, 5.8, true},  {1.5, 4.1, 4.05, 10.0, 5.1, true},
              {9.0, 6.0, 5.5, 10.0, 5.3, true},  {20.0, 5.0, 6.0, 10.0, 5.0, true},
              {33.0, 5.5, 4.5, 10.0, 5.6, true}, {40.0, 4.5, 5.2, 10.0, 5.2, true}};
  const EtasParams p{0.05, 0.3, 1.0, 0.01, 1.3, 0.005, 1.0, 1.8};
  const auto bg = BackgroundField::uniform(c.region);
  const EtasLikelihood lik(c, Variant::SpatioTemporal, &bg, SpatialBoundary::Exact);
  const auto g = spatial_residuals(lik, p, bg, Grid::over(c.region, 0.005));
  const double expected = static_cast<double>(c.size()) - lik.compensator(p);
  EXPECT_NEAR(g.integral(), expected, 1e-3 * static_cast<double>(c.size()));
}

TEST(Diagnose, TimeRescalingSlopeNearOne) {
  auto cfg = etas::testing::reference_config(13, 1500.0);
  const Catalog c = simulate(cfg).catalog;
  const auto bg = BackgroundField::uniform(c.region);
  const auto d = diagnose(c, cfg.params, bg, Variant::SpatioTemporal, SpatialBoundary::Exact,
                          Grid::over(c.region, 0.25), 20);
  EXPECT_GE(d.tau_slope, 0.9);
  EXPECT_LE(d.tau_slope, 1.1);
  ASSERT_TRUE(d.ks.p.has_value());
  for (double u : d.u_seq) {
    EXPECT_GE(u, 0.0);
    EXPECT_LE(u, 1.0);
  }

  const auto dir = std::filesystem::temp_directory_path() / "etas-test-diag";
  std::filesystem::remove_all(dir);
  write_diagnostics(dir, d);
  for (const char* f : {"diagnostics.json", "tau.csv", "u.csv", "temporal_residuals.csv", "spatial_residuals.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  std::ifstream in(dir / "diagnostics.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("schema"), "etas-diagnostics/1");
  EXPECT_EQ(j.at("n").get<std::size_t>(), d.tau.size());
}

TEST(Diagnose, CalibrationScaleLeavesResidualsUnchanged) {
  // Under t -> t / w with mu -> w mu, c -> c / w the compensator is unchanged.
  auto cfg = etas::testing::reference_config(17, 400.0);
  const Catalog c = simulate(cfg).catalog;
  const double w = 5.0;
  Catalog s = c;
  for (auto& e : s.events) e.t /= w;
  s.t_start /= w;
  s.T /= w;
  EtasParams ps = cfg.params;
  ps.mu *= w;
  ps.c /= w;
  const auto u1 = uniform_residuals(transformed_times(EtasLikelihood(c, Variant::GroundTemporal), cfg.params));
  const auto u2 = uniform_residuals(transformed_times(EtasLikelihood(s, Variant::GroundTemporal), ps));
  ASSERT_EQ(u1.size(), u2.size());
  for (std::size_t i = 0; i < u1.size(); ++i) EXPECT_NEAR(u1[i], u2[i], 1e-9);
}
