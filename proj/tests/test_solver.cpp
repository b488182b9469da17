#include "vrpower/solver.hpp"

#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vrpower/synth.hpp"

using namespace vrpower;
using testutil::category_of;
using testutil::make_measurement;

namespace {

ModelSpec first_variables(std::size_t count) {
  return ModelSpec(std::vector<Variable>(kAllVariables.begin(), kAllVariables.begin() + count));
}

DesignMatrix design_from(const oracle::Instance& inst) {
  const auto n = Eigen::Index(inst.a.size());
  const auto k = Eigen::Index(inst.a.front().size());
  DesignMatrix d;
  d.spec = first_variables(std::size_t(k - 1));
  d.A.resize(n, k);
  d.P.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index c = 0; c < k; ++c) d.A(j, c) = inst.a[j][c];
    d.P(j) = inst.y[j];
    d.row_keys.push_back("r" + std::to_string(j));
  }
  d.scaling.assign(std::size_t(k), 1.0);
  return d;
}

/// Box-constrained least squares by enumerating every free/lower/upper
/// pattern and keeping the best feasible KKT point. Exponential, test-only.
std::vector<double> brute_force_box(const oracle::Instance& inst, const std::vector<double>& lo,
                                    const std::vector<double>& hi) {
  const std::size_t k = inst.a.front().size();
  double best_rss = std::numeric_limits<double>::infinity();
  std::vector<double> best;
  std::size_t patterns = 1;
  for (std::size_t i = 0; i < k; ++i) patterns *= 3;
  for (std::size_t code = 0; code < patterns; ++code) {
    std::vector<int> state(k);
    std::size_t c = code;
    bool usable = true;
    for (std::size_t i = 0; i < k; ++i) {
      state[i] = int(c % 3);
      c /= 3;
      if (state[i] == 1 && std::isinf(lo[i])) usable = false;
      if (state[i] == 2 && std::isinf(hi[i])) usable = false;
    }
    if (!usable) continue;
    std::vector<double> x(k, 0.0);
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < k; ++i) {
      if (state[i] == 0) free.push_back(i);
      if (state[i] == 1) x[i] = lo[i];
      if (state[i] == 2) x[i] = hi[i];
    }
    if (!free.empty()) {
      oracle::Matrix af;
      std::vector<double> rhs;
      for (std::size_t j = 0; j < inst.a.size(); ++j) {
        std::vector<double> row;
        double r = inst.y[j];
        for (std::size_t i = 0; i < k; ++i) {
          if (state[i] == 0) row.push_back(inst.a[j][i]);
          else r -= inst.a[j][i] * x[i];
        }
        af.push_back(row);
        rhs.push_back(r);
      }
      const auto z = oracle::normal_equation_solve(af, rhs);
      for (std::size_t f = 0; f < free.size(); ++f) x[free[f]] = z[f];
    }
    bool feasible = true;
    for (std::size_t i = 0; i < k; ++i) feasible &= x[i] >= lo[i] - 1e-12 && x[i] <= hi[i] + 1e-12;
    if (!feasible) continue;
    double rss = 0.0;
    for (std::size_t j = 0; j < inst.a.size(); ++j) {
      double e = -inst.y[j];
      for (std::size_t i = 0; i < k; ++i) e += inst.a[j][i] * x[i];
      rss += e * e;
    }
    if (rss < best_rss) {
      best_rss = rss;
      best = x;
    }
  }
  return best;
}

}  // namespace

TEST(Fit, RecoversNoiselessGroundTruth) {
  auto cfg = default_synth_config();
  const auto truth = cfg.ground_truth.to_model();
  const auto model = fit(build_design(generate(cfg), ModelSpec::advanced()));
  const auto got = model.params_raw();
  const auto want = truth.params_raw();
  for (std::size_t k = 0; k < got.size(); ++k) {
    EXPECT_NEAR(got[k], want[k], 1e-8 * std::fabs(want[k])) << model.spec.column_name(k);
  }
  EXPECT_EQ(model.diagnostics.n_train, 768u);
  EXPECT_LT(model.diagnostics.rss_w2, 1e-20);
}

TEST(Fit, SquareSystemInterpolatesExactly) {
  std::mt19937_64 rng(21);
  auto inst = oracle::random_instance(rng, 5, 5);
  const auto model = fit(design_from(inst));
  EXPECT_NEAR(model.diagnostics.rss_w2, 0.0, 1e-9);
}

TEST(Fit, ToyResolutionOnlyMatchesHandSolvedNormalEquations) {
  // Frozen from an exact rational solve of the 2x2 normal equations.
  std::vector<Measurement> ms{make_measurement("A", 416, 240, 60, 1e6, 1.0),
                              make_measurement("B", 1280, 720, 30, 2e6, 1.1),
                              make_measurement("C", 3840, 1920, 30, 8e6, 1.4)};
  const auto model = fit(build_design(ms, ModelSpec::parse("S")));
  EXPECT_NEAR(model.params_scaled[0], 1.0218460979838375, 1e-12);
  EXPECT_NEAR(model.params_scaled[1], 0.051757122270567384, 1e-13);
  EXPECT_NEAR(model.params_raw()[1], 0.051757122270567384e-6, 1e-19);
  EXPECT_NEAR(model.diagnostics.rss_w2, 0.0016690501890500899, 1e-14);
}

TEST(Fit, MatchesNormalEquationOracleOnRandomInstances) {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 30; ++t) {
    const std::size_t k = 1 + t % 6;
    const std::size_t n = k + 3 + t % 11;
    auto inst = oracle::random_instance(rng, n, k);
    const auto model = fit(design_from(inst));
    const auto ref = oracle::normal_equation_solve(inst.a, inst.y);
    EXPECT_LT(oracle::max_rel_diff(model.params_scaled, ref), 1e-8) << "instance " << t;
  }
}

TEST(Fit, ResidualIsOrthogonalToColumns) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 20; ++t) {
    auto inst = oracle::random_instance(rng, 40, 1 + t % 8);
    const auto d = design_from(inst);
    const auto model = fit(d);
    Eigen::Map<const Eigen::VectorXd> p(model.params_scaled.data(), Eigen::Index(model.params_scaled.size()));
    const double lhs = (d.A.transpose() * (d.A * p - d.P)).cwiseAbs().maxCoeff();
    const double rhs = (d.A.transpose() * d.P).cwiseAbs().maxCoeff();
    EXPECT_LE(lhs, 1e-7 * rhs);
  }
  // Also on realistic data.
  const auto ms = generate(default_synth_config(0.03, 4));
  const auto d = build_design(ms, ModelSpec::advanced());
  const auto model = fit(d);
  Eigen::Map<const Eigen::VectorXd> p(model.params_scaled.data(), 11);
  EXPECT_LE((d.A.transpose() * (d.A * p - d.P)).cwiseAbs().maxCoeff(),
            1e-7 * (d.A.transpose() * d.P).cwiseAbs().maxCoeff());
}

TEST(Fit, DuplicateRowMonotonicity) {
  // Least squares optimality: the refit with a duplicated row cannot beat the
  // original fit on the original rows, and the original fit cannot beat the
  // refit on the augmented rows.
  const auto ms = generate(default_synth_config(0.02, 8));
  const auto spec = ModelSpec::simplified();
  const auto d = build_design(ms, spec);
  const auto base = fit(d);
  auto rss_on = [&](const PowerModel& m, const std::vector<Measurement>& set) {
    double r = 0.0;
    for (const auto& x : set) r += std::pow(predict(m, x) - x.power_w, 2);
    return r;
  };
  for (std::size_t dup : {0u, 100u, 500u}) {
    auto aug = ms;
    aug.push_back(ms[dup]);
    const auto refit = fit(build_design(aug, spec));
    EXPECT_GE(rss_on(refit, ms), base.diagnostics.rss_w2 * (1 - 1e-12));
    EXPECT_LE(refit.diagnostics.rss_w2, rss_on(base, aug) * (1 + 1e-12));
  }
}

TEST(Fit, RankDeficientNamesDependentColumns) {
  // Every row has the same resolution, so S is a multiple of the intercept.
  std::vector<Measurement> ms;
  for (int i = 0; i < 6; ++i) ms.push_back(make_measurement("A" + std::to_string(i), 1280, 720, 30 + i, 1e6 * (i + 1), 1.0 + 0.1 * i));
  const auto msg = testutil::message_of([&] { fit(build_design(ms, ModelSpec::parse("S,f"))); });
  EXPECT_NE(msg.find("rank deficient"), std::string::npos);
  EXPECT_TRUE(msg.find("S") != std::string::npos || msg.find("p_0") != std::string::npos) << msg;
  EXPECT_EQ(category_of([&] { fit(build_design(ms, ModelSpec::parse("S,f"))); }),
            ErrorCategory::singular_design);
}

TEST(Fit, IdenticalFlagColumnsAreSingular) {
  std::vector<Measurement> ms;
  for (int i = 0; i < 6; ++i) {
    auto m = make_measurement("A", 416 * (i + 1), 240, 30, 1e6, 1.0 + 0.1 * i);
    m.config.stereo = m.config.dynamic = (i % 2 == 0);
    ms.push_back(m);
  }
  const auto msg = testutil::message_of([&] { fit(build_design(ms, ModelSpec::parse("S,F_st,F_dyn"))); });
  EXPECT_TRUE(msg.find("F_st") != std::string::npos || msg.find("F_dyn") != std::string::npos) << msg;
}

TEST(Fit, UnderdeterminedWhenFewerRowsThanParams) {
  std::vector<Measurement> ms{make_measurement("A", 416, 240, 60, 1e6, 1.0),
                              make_measurement("B", 832, 480, 50, 2e6, 1.1)};
  EXPECT_EQ(category_of([&] { fit(build_design(ms, ModelSpec::simplified())); }),
            ErrorCategory::underdetermined);
}

TEST(Fit, InvertedBoundsRejected) {
  const auto d = build_design(generate(default_synth_config()), ModelSpec::simplified());
  Bounds b = Bounds::nonneg(4);
  b.lower[2] = 1.0;
  b.upper[2] = 0.5;
  EXPECT_EQ(category_of([&] { fit(d, b); }), ErrorCategory::validation);
  EXPECT_EQ(category_of([&] { fit(d, Bounds::nonneg(3)); }), ErrorCategory::validation);
}

TEST(BoundedFit, NonnegMatchesUnboundedForNonnegTruth) {
  const auto d = build_design(generate(default_synth_config()), ModelSpec::advanced());
  const auto free = fit(d);
  const auto bounded = fit(d, Bounds::nonneg(11));
  EXPECT_EQ(bounded.bounds_mode, BoundsMode::nonneg);
  for (std::size_t k = 0; k < 11; ++k) {
    EXPECT_NEAR(bounded.params_scaled[k], free.params_scaled[k],
                1e-8 * std::max(std::fabs(free.params_scaled[k]), 1e-12));
  }
}

TEST(BoundedFit, ClampsNegativeParameterAndSatisfiesKkt) {
  auto cfg = default_synth_config();
  cfg.ground_truth[Variable::frame_rate] = -1e-3;
  cfg.ground_truth[Variable::gyro] = -0.004;
  const auto d = build_design(generate(cfg), ModelSpec::advanced());
  const auto model = fit(d, Bounds::nonneg(11));
  for (double p : model.params_scaled) EXPECT_GE(p, 0.0);
  EXPECT_EQ(model.params_scaled[*model.spec.column_of(Variable::frame_rate)], 0.0);

  Eigen::Map<const Eigen::VectorXd> p(model.params_scaled.data(), 11);
  const Eigen::VectorXd g = d.A.transpose() * (d.A * p - d.P);
  const double tol = 1e-10 * (d.A.transpose() * d.P).cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < 11; ++k) {
    if (p(k) > 0.0) EXPECT_LE(std::fabs(g(k)), tol) << k;
    else EXPECT_GE(g(k), -tol) << k;
  }
}

TEST(BoundedFit, MatchesEnumerationOracle) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 25; ++t) {
    const std::size_t k = 2 + t % 4;
    auto inst = oracle::random_instance(rng, 12 + t % 5, k);
    std::vector<double> lo(k), hi(k);
    for (std::size_t i = 0; i < k; ++i) {
      const double a = u(rng), b = u(rng);
      lo[i] = std::min(a, b);
      hi[i] = (t % 3 == 0) ? std::numeric_limits<double>::infinity() : std::max(a, b);
    }
    lo[0] = -std::numeric_limits<double>::infinity();
    const auto model = fit(design_from(inst), Bounds{lo, hi});
    const auto ref = brute_force_box(inst, lo, hi);
    ASSERT_EQ(ref.size(), k);
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_NEAR(model.params_scaled[i], ref[i], 1e-8 * std::max(1.0, std::fabs(ref[i])))
          << "instance " << t << " param " << i;
    }
  }
}

TEST(Predict, InterceptOnly) {
  PowerModel m{ModelSpec{}, {1.23}, {1.0}, {}, BoundsMode::none};
  EXPECT_EQ(predict(m, make_measurement("A", 3840, 1920, 30, 8e6, 2.0, true)), 1.23);
}

TEST(Predict, SimplifiedModelDotProduct) {
  // 0.97 + 0.004 * 8 + 0.05019 * 7.3728 + 0.1
  PowerModel m{ModelSpec::simplified(), {0.97, 0.004, 0.05019, 0.1}, column_scaling(ModelSpec::simplified()), {}, BoundsMode::none};
  const double p = predict(m, make_measurement("AerialCity", 3840, 1920, 30, 8e6, 1.5, true));
  EXPECT_NEAR(p, 1.472040832, 1e-12);
  EXPECT_NEAR(p, 1.47205, 1e-4);
}

TEST(Predict, ZeroParamsGiveZero) {
  PowerModel m{ModelSpec::simplified(), {0.0, 0.0, 0.0, 0.0}, column_scaling(ModelSpec::simplified()), {}, BoundsMode::none};
  EXPECT_EQ(predict(m, make_measurement("A", 416, 240, 30, 1e6, 1.0)), 0.0);
}

TEST(Predict, IsLinearInFeatures) {
  const auto model = fit(build_design(generate(default_synth_config(0.02, 3)), ModelSpec::advanced()));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a(10), b(10), sum(10);
    for (int i = 0; i < 10; ++i) {
      // raw units: bitrate ~1e7, resolution ~1e6, fps ~1e1, flags ~1
      const double mag = i == 0 ? 1e7 : i == 2 ? 1e6 : i == 1 ? 30.0 : 1.0;
      a[i] = u(rng) * mag;
      b[i] = u(rng) * mag;
      sum[i] = a[i] + b[i];
    }
    const double lhs = predict_raw(model, a) + predict_raw(model, b) - model.intercept();
    const double rhs = predict_raw(model, sum);
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::fabs(rhs)));
  }
}
