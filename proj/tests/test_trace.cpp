#include "vrpower/trace.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace vrpower;
using testutil::category_of;

namespace {

PowerTrace ramp_trace(double dt) {
  // 0 -> 10 W over 10 s
  std::vector<Sample> s;
  const int n = static_cast<int>(std::round(10.0 / dt));
  for (int i = 0; i <= n; ++i) s.push_back({i * dt, i * dt});
  return PowerTrace(std::move(s));
}

}  // namespace

TEST(ParseTrace, PowerFormatEchoesSamples) {
  auto t = parse_trace("time_s,power_w\n0.0,2.0\n0.5,6.0\n");
  ASSERT_EQ(t.samples().size(), 2u);
  EXPECT_EQ(t.samples()[0].power_w, 2.0);
  EXPECT_EQ(t.samples()[1].power_w, 6.0);
  EXPECT_EQ(t.samples()[1].time_s, 0.5);
}

TEST(ParseTrace, CurrentVoltageFormatMultiplies) {
  auto t = parse_trace("time_s,current_a,voltage_v\n0.0,0.1,12.0\n1.0,0.2,12.0\n");
  EXPECT_DOUBLE_EQ(t.samples()[0].power_w, 1.2);
  EXPECT_DOUBLE_EQ(t.samples()[1].power_w, 2.4);
}

TEST(ParseTrace, NonMonotonicTimeIsValidationError) {
  EXPECT_EQ(category_of([] { parse_trace("time_s,power_w\n0.0,1\n0.5,1\n0.4,1\n"); }),
            ErrorCategory::validation);
}

TEST(ParseTrace, EmptyFileIsValidationError) {
  EXPECT_EQ(category_of([] { parse_trace(""); }), ErrorCategory::validation);
  EXPECT_EQ(category_of([] { parse_trace("time_s,power_w\n"); }), ErrorCategory::validation);
}

TEST(ParseTrace, UnknownHeaderIsParseError) {
  EXPECT_EQ(category_of([] { parse_trace("t,p\n0,1\n1,1\n"); }), ErrorCategory::parse);
}

TEST(ParseTrace, MalformedRowReportsLineNumber) {
  try {
    parse_trace("time_s,power_w\n0.0,1.0\n0.5,abc\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::parse);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_EQ(category_of([] { parse_trace("time_s,power_w\n0.0,1.0,3\n"); }), ErrorCategory::parse);
}

TEST(ParseTrace, NegativePowerRejected) {
  EXPECT_EQ(category_of([] { parse_trace("time_s,power_w\n0,1\n1,-0.5\n"); }),
            ErrorCategory::validation);
}

TEST(ParseTrace, AcceptsCrLf) {
  auto t = parse_trace("time_s,power_w\r\n0,1\r\n1,2\r\n");
  EXPECT_EQ(t.samples().size(), 2u);
}

TEST(ParseTrace, SingleSampleRejected) {
  EXPECT_EQ(category_of([] { parse_trace("time_s,power_w\n0,1\n"); }), ErrorCategory::validation);
}

TEST(MeanPower, ConstantTrace) {
  PowerTrace t({{0.0, 3.0}, {4.0, 3.0}, {12.0, 3.0}});
  EXPECT_DOUBLE_EQ(mean_power(t, {}), 3.0);
  EXPECT_DOUBLE_EQ(mean_power(t, {0.5, 1.0}), 3.0);
}

TEST(MeanPower, AlternatingTraceWholeSpan) {
  std::vector<Sample> s;
  for (int i = 0; i <= 10; ++i) s.push_back({double(i), i % 2 ? 6.0 : 2.0});
  PowerTrace t(std::move(s));
  EXPECT_DOUBLE_EQ(mean_power(t, {0.0, 10.0}), 4.0);
}

TEST(MeanPower, RampWindowMeanIsMidpoint) {
  // Closed form: mean of a linear signal over [2, 9] is its value at 5.5 s.
  auto t = ramp_trace(0.1);
  EXPECT_NEAR(mean_power(t, {2.0, 7.0}), 5.5, 5.5e-9);
}

TEST(MeanPower, InterpolatesAtWindowEdges) {
  // Window edges fall between samples.
  PowerTrace t({{0.0, 0.0}, {10.0, 10.0}});
  EXPECT_NEAR(mean_power(t, {2.0, 7.0}), 5.5, 1e-12);
  EXPECT_NEAR(mean_power(t, {0.25, 0.5}), 0.5, 1e-12);
}

TEST(MeanPower, WindowRelativeToTraceStart) {
  PowerTrace t({{100.0, 0.0}, {110.0, 10.0}});
  EXPECT_NEAR(mean_power(t, {2.0, 7.0}), 5.5, 1e-12);
}

TEST(MeanPower, WindowBeyondTraceIsOutOfRange) {
  auto t = ramp_trace(1.0);
  EXPECT_EQ(category_of([&] { mean_power(t, {4.0, 7.0}); }), ErrorCategory::out_of_range);
  EXPECT_NO_THROW(mean_power(t, {3.0, 7.0}));
}

TEST(MeanPower, InvalidWindowRejected) {
  auto t = ramp_trace(1.0);
  EXPECT_EQ(category_of([&] { mean_power(t, {-1.0, 2.0}); }), ErrorCategory::validation);
  EXPECT_EQ(category_of([&] { mean_power(t, {1.0, 0.0}); }), ErrorCategory::validation);
}

TEST(MeanPower, NonUniformSamplingIsTimeWeighted) {
  // 1 W for 9 s then 10 W for 1 s, with many more samples in the short part.
  std::vector<Sample> s{{0.0, 1.0}, {9.0, 1.0}};
  for (int i = 1; i <= 100; ++i) s.push_back({9.0 + i * 0.01, 10.0});
  PowerTrace t(std::move(s));
  const double expected = (9.0 * 1.0 + 0.5 * (1.0 + 10.0) * 0.01 + 0.99 * 10.0) / 10.0;
  EXPECT_NEAR(mean_power(t, {0.0, 10.0}), expected, 1e-12);
}

TEST(MeanPowerProperty, InvariantUnderUniformResampling) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.5, 6.0);
  for (int trial = 0; trial < 25; ++trial) {
    // Piecewise-linear signal with knots every second.
    std::vector<double> knots;
    for (int i = 0; i <= 12; ++i) knots.push_back(u(rng));
    auto signal = [&](double t) {
      const int i = std::min(static_cast<int>(t), 11);
      return knots[i] + (t - i) * (knots[i + 1] - knots[i]);
    };
    std::vector<Sample> coarse;
    for (int i = 0; i <= 12; ++i) coarse.push_back({double(i), knots[i]});
    const int per_second = 1 + trial * 7;
    std::vector<Sample> fine;
    for (int i = 0; i <= 12 * per_second; ++i) {
      const double t = double(i) / per_second;
      fine.push_back({t, signal(t)});
    }
    const WindowSpec w{1.3 + 0.1 * (trial % 5), 7.0 + 0.05 * trial};
    const double a = mean_power(PowerTrace(coarse), w);
    const double b = mean_power(PowerTrace(fine), w);
    EXPECT_NEAR(a, b, 1e-9 * std::fabs(a)) << "trial " << trial;
  }
}

TEST(MeanPowerProperty, BoundedByWindowSamples) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 8.0);
  std::uniform_real_distribution<double> gap(0.001, 0.05);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Sample> s;
    double t = 0.0;
    while (t < 12.0) {
      s.push_back({t, u(rng)});
      t += gap(rng);
    }
    PowerTrace trace(s);
    const WindowSpec w{2.0, 7.0};
    double lo = 1e300, hi = -1e300;
    // Include the samples bracketing the window edges.
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool inside = s[i].time_s >= 2.0 && s[i].time_s <= 9.0;
      const bool brackets = (i + 1 < s.size() && s[i + 1].time_s > 2.0 && s[i].time_s < 2.0) ||
                            (i > 0 && s[i - 1].time_s < 9.0 && s[i].time_s > 9.0);
      if (inside || brackets) {
        lo = std::min(lo, s[i].power_w);
        hi = std::max(hi, s[i].power_w);
      }
    }
    const double m = mean_power(trace, w);
    EXPECT_GE(m, lo);
    EXPECT_LE(m, hi);
  }
}

TEST(TraceRoundTrip, CanonicalCsvIsBitExact) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 7.0);
  std::vector<Sample> s;
  double t = 0.0;
  for (int i = 0; i < 500; ++i) {
    t += 1.0 / 5000.0 + u(rng) * 1e-7;
    s.push_back({t, u(rng)});
  }
  PowerTrace original(s);
  std::ostringstream out;
  write_trace(out, original);
  auto parsed = parse_trace(out.str());
  EXPECT_EQ(parsed.samples(), original.samples());

  std::ostringstream again;
  write_trace(again, parsed);
  EXPECT_EQ(again.str(), out.str());
}

TEST(NetPower, Subtracts) {
  EXPECT_DOUBLE_EQ(net_power(4.0, 1.5), 2.5);
  EXPECT_DOUBLE_EQ(net_power(1.5, 1.5), 0.0);
}

TEST(NetPower, NegativeNetIsError) {
  EXPECT_EQ(category_of([] { net_power(1.0, 1.5); }), ErrorCategory::negative_net);
}
