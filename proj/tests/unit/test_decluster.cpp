#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "etas/decluster.hpp"
#include "etas/error.hpp"
#include "etas/simulate.hpp"
#include "support.hpp"

using namespace etas;

namespace {

const SimCatalog& sim500() {
  static const SimCatalog s = simulate(etas::testing::reference_config(21, 1150.0));
  return s;
}

const Catalog& sim_fit_catalog() {
  static const Catalog c = simulate(etas::testing::reference_config(8, 1000.0)).catalog;
  return c;
}

IsdmOptions quick_options() {
  IsdmOptions o;
  o.compute_stderr = false;
  return o;
}

TriggerProbs hand_probs(std::vector<double> bg, std::vector<double> p) {
  TriggerProbs t;
  t.bg = std::move(bg);
  t.p = std::move(p);
  t.rows.resize(t.bg.size());
  t.truncated.assign(t.bg.size(), 0.0);
  return t;
}

}  // namespace

TEST(TriggerProbs, FirstEventIsBackground) {
  const Catalog& c = sim500().catalog;
  const auto bg = BackgroundField::uniform(c.region);
  const auto t = trigger_probs(c, etas::testing::reference_config(0).params, &bg);
  EXPECT_DOUBLE_EQ(t.bg[0], 1.0);
  EXPECT_TRUE(t.rows[0].empty());
}

TEST(TriggerProbs, NoTriggeringMeansAllBackground) {
  const Catalog& c = sim500().catalog;
  EtasParams p = etas::testing::reference_config(0).params;
  p.A = 0.0;
  const auto bg = BackgroundField::uniform(c.region);
  const auto t = trigger_probs(c, p, &bg);
  for (std::size_t j = 0; j < t.size(); ++j) {
    EXPECT_DOUBLE_EQ(t.bg[j], 1.0);
    EXPECT_DOUBLE_EQ(t.p[j], 0.0);
  }
}

TEST(TriggerProbs, RowSumsMatchDenseRecomputation) {
  const Catalog& c = sim500().catalog;
  ASSERT_GE(c.size(), 400u);
  const EtasParams p = etas::testing::reference_config(0).params;
  const auto bg = BackgroundField::uniform(c.region);
  const auto t = trigger_probs(c, p, &bg);
  double worst = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    const auto& e = c.events[j];
    // Dense recomputation straight from the model functions.
    const double lambda = conditional_intensity(c, p, bg, e.t, e.lon, e.lat);
    double dense = p.mu * bg.value(e.lon, e.lat) / lambda;
    for (std::size_t i = 0; i < j; ++i) {
      const auto& s = c.events[i];
      if (s.t >= e.t) continue;
      dense += kappa(p, s.mag, c.m0) * temporal_kernel(p, e.t - s.t) *
               spatial_kernel(p, e.lon - s.lon, e.lat - s.lat, s.mag, c.m0) / lambda;
    }
    EXPECT_NEAR(dense, 1.0, 1e-10);
    double row = t.bg[j] + t.truncated[j];
    for (const auto& entry : t.rows[j]) {
      EXPECT_LT(c.events[entry.i].t, e.t);
      EXPECT_GE(entry.p, 0.0);
      EXPECT_LE(entry.p, 1.0);
      row += entry.p;
    }
    worst = std::max(worst, std::abs(row - 1.0));
    EXPECT_NEAR(t.bg[j] + t.p[j], 1.0, 1e-10) << "event " << j;
  }
  EXPECT_LT(worst, 1e-10);
  EXPECT_LT(t.max_truncated(), 1e-6);
}

TEST(TriggerProbs, GroundVariantAndErrors) {
  Catalog c = sim500().catalog;
  const EtasParams p = etas::testing::reference_config(0).params;
  const auto t = trigger_probs(c, p, nullptr, Variant::GroundTemporal);
  for (std::size_t j = 0; j < t.size(); ++j) EXPECT_NEAR(t.bg[j] + t.p[j] + t.truncated[j], 1.0, 1e-10);
  EXPECT_THROW((void)trigger_probs(c, p, nullptr, Variant::SpatioTemporal), DomainError);
  EtasParams zero = p;
  zero.A = 0.0;
  const auto far = BackgroundField::from_kernels(c.region, c.T, {{4.999, 0.001, 1.0, 1e-4}});
  try {
    (void)trigger_probs(c, zero, &far, Variant::SpatioTemporal);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("event 0"), std::string::npos);
  }
}

TEST(TriggerProbs, CsvCarriesBackgroundRow) {
  TriggerProbs t = hand_probs({1.0, 0.25}, {0.0, 0.75});
  t.rows[1].push_back({0, 0.75});
  std::ostringstream out;
  write_probs_csv(out, t);
  EXPECT_NE(out.str().find("j,i,p\n0,-1,1\n1,-1,0.25\n1,0,0.75\n"), std::string::npos);
}

TEST(Classify, Thresholds) {
  const auto t = hand_probs({0.96, 0.5, 0.02, 1.0, 0.0}, {0.04, 0.5, 0.98, 0.0, 1.0});
  const auto l = classify(t, 0.95);
  EXPECT_EQ(l[0], Label::Background);
  EXPECT_EQ(l[1], Label::Uncertain);
  EXPECT_EQ(l[2], Label::Triggered);
  const auto strict = classify(t, 1.0);
  EXPECT_EQ(strict[0], Label::Uncertain);
  EXPECT_EQ(strict[2], Label::Uncertain);
  EXPECT_EQ(strict[3], Label::Background);
  EXPECT_EQ(strict[4], Label::Triggered);
  EXPECT_THROW((void)classify(t, 0.5), DomainError);
  EXPECT_THROW((void)classify(t, 1.01), DomainError);
  EXPECT_EQ(label_name(Label::Triggered), "triggered");
}

TEST(Classify, TriggeredFractionApproachesTruth) {
  const SimCatalog& s = sim500();
  const auto bg = BackgroundField::uniform(s.catalog.region);
  const auto t = trigger_probs(s.catalog, etas::testing::reference_config(0).params, &bg);
  double truth = 0.0;
  for (long parent : s.parent) truth += parent != -1 ? 1.0 : 0.0;
  truth /= static_cast<double>(s.parent.size());
  double prev_gap = 1.0;
  for (double threshold : {0.95, 0.8, 0.5 + 1e-9}) {
    const auto l = classify(t, threshold);
    double triggered = 0.0;
    for (auto x : l) triggered += x == Label::Triggered ? 1.0 : 0.0;
    const double gap = std::abs(triggered / static_cast<double>(l.size()) - truth);
    EXPECT_LE(gap, prev_gap + 1e-12) << threshold;
    prev_gap = gap;
  }
  EXPECT_LT(prev_gap, 0.05);
}

TEST(Realize, DeterministicAndCausal) {
  const Catalog& c = sim500().catalog;
  const auto bg = BackgroundField::uniform(c.region);
  const auto t = trigger_probs(c, etas::testing::reference_config(0).params, &bg);
  const auto a = realize(t, 5);
  EXPECT_EQ(a, realize(t, 5));
  EXPECT_NE(a, realize(t, 6));
  double bg_count = 0.0, expected = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    EXPECT_LT(a[j], static_cast<long>(j));
    bg_count += a[j] == -1 ? 1.0 : 0.0;
    expected += t.bg[j] + t.truncated[j];
  }
  EXPECT_NEAR(bg_count, expected, 4.0 * std::sqrt(expected));
}

TEST(StdErrors, PoissonRate) {
  const double n = 400.0, T = 1000.0;
  // -log L of a homogeneous Poisson rate mu = exp(z).
  const Objective f = [&](const Vector& z) { return -(n * z[0] - std::exp(z[0]) * T); };
  const double z_hat = std::log(n / T);
  const auto se = stderr_from_hessian(f, {z_hat}, {n / T});
  ASSERT_TRUE(se.ok) << se.reason;
  EXPECT_NEAR(se.se[0], (n / T) / std::sqrt(n), 1e-6);
  const ValueAndGradient fg = [&](const Vector& z, Vector& g) {
    g[0] = -(n - std::exp(z[0]) * T);
    return f(z);
  };
  const auto se2 = stderr_from_gradient(fg, {z_hat}, {n / T});
  ASSERT_TRUE(se2.ok);
  EXPECT_NEAR(se2.se[0], (n / T) / std::sqrt(n), 1e-8);
}

TEST(StdErrors, QuadraticAndIndefinite) {
  const double s = 0.37;
  const auto se = stderr_from_hessian([&](const Vector& x) { return 0.5 * (x[0] / s) * (x[0] / s); }, {0.0}, {1.0});
  ASSERT_TRUE(se.ok);
  EXPECT_NEAR(se.se[0], s, 1e-6);
  const auto bad = stderr_from_hessian([](const Vector& x) { return x[0] * x[0] - x[1] * x[1]; }, {0.0, 0.0}, {1.0, 1.0});
  EXPECT_FALSE(bad.ok);
  EXPECT_FALSE(bad.reason.empty());
}

TEST(Isdm, FixedZeroProductivityGivesSmoothedPoisson) {
  const Catalog& c = sim_fit_catalog();
  EtasParams init = default_initial_params(c);
  init.A = 0.0;
  IsdmOptions o = quick_options();
  o.fixed[static_cast<std::size_t>(Param::A)] = true;
  o.fixed[static_cast<std::size_t>(Param::alpha)] = true;
  o.fixed[static_cast<std::size_t>(Param::c)] = true;
  o.fixed[static_cast<std::size_t>(Param::p)] = true;
  o.fixed[static_cast<std::size_t>(Param::D)] = true;
  o.fixed[static_cast<std::size_t>(Param::gamma)] = true;
  o.fixed[static_cast<std::size_t>(Param::q)] = true;
  const FitResult fit = isdm_fit(c, init, o);
  EXPECT_TRUE(fit.converged);
  EXPECT_LE(fit.iterations, 2);
  EXPECT_DOUBLE_EQ(fit.params.A, 0.0);
  // Poisson fit: expected count equals the observed target count.
  EXPECT_NEAR(fit.background_rate() * c.T, static_cast<double>(c.target_count()), 1e-3);
  EXPECT_EQ(fit.k, 2);
}

TEST(Isdm, RecoversSimulatedParametersAndIsDeterministic) {
  const Catalog& c = sim_fit_catalog();
  IsdmOptions o;
  const FitResult a = isdm_fit(c, default_initial_params(c), o);
  const FitResult b = isdm_fit(c, default_initial_params(c), o);
  EXPECT_EQ(nlohmann::json(a).dump(), nlohmann::json(b).dump());
  EXPECT_TRUE(a.converged);
  EXPECT_TRUE(is_subcritical(a.branching_ratio));
  ASSERT_TRUE(a.stderr_params.has_value()) << a.stderr_reason;
  for (std::size_t k = 0; k < kParamCount; ++k) EXPECT_GT((*a.stderr_params)[k], 0.0) << kParamNames[k];
  const EtasParams truth = etas::testing::reference_config(0).params;
  for (std::size_t k = 1; k < kParamCount; ++k)
    EXPECT_LT(std::abs(a.params.values()[k] - truth.values()[k]), 4.0 * (*a.stderr_params)[k]) << kParamNames[k];
  EXPECT_NEAR(a.background_rate(), truth.mu, 0.15 * truth.mu);

  // Background probabilities and the background compensator agree at the fixed point.
  double expected_bg = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j)
    if (c.events[j].is_target) expected_bg += a.probs.bg[j];
  EXPECT_NEAR(expected_bg, a.background_rate() * c.T, 0.05 * expected_bg);

  // The fit JSON restores the model.
  const FitResult back = fit_from_json(nlohmann::json(a));
  EXPECT_EQ(back.params, a.params);
  EXPECT_DOUBLE_EQ(back.bg.region_mass(), a.bg.region_mass());
  EXPECT_EQ(back.k, a.k);
}

TEST(Isdm, LoglikTraceNondecreasing) {
  const Catalog& c = sim_fit_catalog();
  const FitResult fit = isdm_fit(c, default_initial_params(c), quick_options());
  ASSERT_GE(fit.loglik_trace.size(), 2u);
  for (std::size_t k = 1; k < fit.loglik_trace.size(); ++k)
    EXPECT_GE(fit.loglik_trace[k], fit.loglik_trace[k - 1] - 1e-8) << "outer iteration " << k;
}

TEST(Isdm, GroundVariantFixesSpatialParameters) {
  const Catalog& c = sim_fit_catalog();
  IsdmOptions o = quick_options();
  o.variant = Variant::GroundTemporal;
  const FitResult fit = isdm_fit(c, default_initial_params(c), o);
  EXPECT_TRUE(fit.converged);
  EXPECT_EQ(fit.iterations, 1);
  EXPECT_DOUBLE_EQ(fit.params.gamma, 0.0);
  EXPECT_DOUBLE_EQ(fit.params.q, 1.5);
  EXPECT_TRUE(fit.fixed[static_cast<std::size_t>(Param::D)]);
  EXPECT_EQ(fit.k, 6);
  const auto j = nlohmann::json(fit);
  EXPECT_EQ(j.at("variant"), "ground");
  EXPECT_EQ(j.at("fixed").size(), 3u);
}

TEST(Isdm, RejectsTinyCatalogs) {
  Catalog c = sim_fit_catalog();
  c.events.resize(5);
  EXPECT_THROW((void)isdm_fit(c, default_initial_params(c)), DomainError);
  EXPECT_THROW((void)fit_from_json(nlohmann::json{{"schema", "etas-fit/1"}}), FormatError);
}
