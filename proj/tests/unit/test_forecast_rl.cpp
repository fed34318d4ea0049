#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "orchestra/forecast.hpp"
#include "orchestra/rl.hpp"
#include "testkit.hpp"

using namespace orchestra;

namespace {

std::vector<double> ramp(int n) {
    std::vector<double> v;
    for (int i = 1; i <= n; ++i) v.push_back(i);
    return v;
}

}  // namespace

TEST(Forecast, ConstantSeriesAnyKind) {
    const std::vector<double> c(8, 42.0);
    for (auto k : {ForecastKind::LastValue, ForecastKind::Ewma, ForecastKind::LinearTrend}) {
        EXPECT_NEAR(predict_load(fit_forecast(c, k, 5), 1), 42.0, 1e-12);
    }
}

TEST(Forecast, LinearTrendOnRamp) {
    const auto m = fit_forecast(ramp(10), ForecastKind::LinearTrend, 10);
    EXPECT_NEAR(m.slope, 1.0, 1e-12);
    EXPECT_NEAR(predict_load(m, 1), 11.0, 1e-9);
    EXPECT_NEAR(predict_load(m, 3), 13.0, 1e-9);
}

TEST(Forecast, LinearTrendLeastSquaresHandExample) {
    // y = (1, 2, 2, 5) at x = 0..3: x mean 1.5, y mean 2.5,
    // Sxy = (-1.5)(-1.5) + (-0.5)(-0.5) + (0.5)(-0.5) + (1.5)(2.5) = 6, Sxx = 5,
    // slope 1.2, value at x = 3 is 2.5 + 1.2 * 1.5 = 4.3, next step 5.5.
    const auto m = fit_forecast(std::vector<double>{1, 2, 2, 5}, ForecastKind::LinearTrend, 4);
    EXPECT_NEAR(m.slope, 1.2, 1e-12);
    EXPECT_NEAR(predict_load(m, 1), 5.5, 1e-12);
}

TEST(Forecast, EwmaAlphaOneEqualsLastValue) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> h;
        for (int i = 0; i < 12; ++i) h.push_back(std::uniform_real_distribution<double>(0, 100)(rng));
        for (int w = 1; w <= 12; ++w) {
            const double a = predict_load(fit_forecast(h, ForecastKind::Ewma, w, 1.0), 2);
            const double b = predict_load(fit_forecast(h, ForecastKind::LastValue, w), 2);
            ASSERT_EQ(a, b);
        }
    }
}

TEST(Forecast, EwmaHandExample) {
    // alpha 0.5 over (2, 4, 8): 2 -> 3 -> 5.5.
    EXPECT_DOUBLE_EQ(fit_forecast(std::vector<double>{2, 4, 8}, ForecastKind::Ewma, 3, 0.5).level, 5.5);
}

TEST(Forecast, LastValueRepeatsAtAnyHorizon) {
    const auto m = fit_forecast(std::vector<double>{3, 9, 4}, ForecastKind::LastValue, 2);
    EXPECT_EQ(predict_load(m, 5), 4.0);
}

TEST(Forecast, Errors) {
    EXPECT_THROW((void)fit_forecast(std::vector<double>{1, 2}, ForecastKind::LinearTrend, 3), InsufficientHistory);
    EXPECT_THROW((void)fit_forecast(std::vector<double>{1, 2}, ForecastKind::LastValue, 0), ConfigError);
    EXPECT_THROW((void)fit_forecast(std::vector<double>{1, 2}, ForecastKind::Ewma, 2, 0.0), ConfigError);
    const auto m = fit_forecast(std::vector<double>{1}, ForecastKind::LastValue, 1);
    EXPECT_THROW((void)predict_load(m, 0), std::invalid_argument);
    EXPECT_EQ(forecast_kind_from_string("ewma"), ForecastKind::Ewma);
    EXPECT_THROW((void)forecast_kind_from_string("arima"), ConfigError);
}

TEST(Forecast, LinearTrendBeatsLastValueOnRamp) {
    // Rolling one-step forecasts over 3..40 with slope 3: LinearTrend is exact, LastValue is off by 3.
    std::vector<double> series;
    for (int i = 0; i < 40; ++i) series.push_back(10.0 + 3.0 * i);
    double mae_trend = 0.0;
    double mae_last = 0.0;
    int n = 0;
    for (std::size_t t = 5; t < series.size(); ++t) {
        const std::span<const double> h(series.data(), t);
        mae_trend += std::abs(predict_load(fit_forecast(h, ForecastKind::LinearTrend, 5), 1) - series[t]);
        mae_last += std::abs(predict_load(fit_forecast(h, ForecastKind::LastValue, 5), 1) - series[t]);
        ++n;
    }
    EXPECT_NEAR(mae_trend / n, 0.0, 1e-9);
    EXPECT_NEAR(mae_last / n, 3.0, 1e-9);
}

TEST(Features, Buckets) {
    EXPECT_EQ(utilization_bucket(0.0), 0);
    EXPECT_EQ(utilization_bucket(0.95), 9);
    EXPECT_EQ(utilization_bucket(1.0), 9);
    EXPECT_EQ(utilization_bucket(0.31), 3);
    EXPECT_EQ(pending_bucket(0), 0);
    EXPECT_EQ(pending_bucket(5), 1);
    EXPECT_EQ(pending_bucket(6), 2);
    EXPECT_EQ(pending_bucket(20), 2);
    EXPECT_EQ(pending_bucket(21), 3);
    EXPECT_EQ(classify_trend(120, 100), Trend::Up);
    EXPECT_EQ(classify_trend(110, 100), Trend::Flat);
    EXPECT_EQ(classify_trend(80, 100), Trend::Down);
}

TEST(Features, EmptyClusterIsZeroState) {
    ClusterState s;
    PendingQueues q;
    EXPECT_EQ(featurize_state(s, q, 10, 10), (DiscreteState{0, 0, Trend::Flat}));
}

TEST(Features, StateIndexIsABijection) {
    std::set<int> seen;
    for (int u = 0; u < 10; ++u) {
        for (int p = 0; p < 4; ++p) {
            for (Trend t : {Trend::Down, Trend::Flat, Trend::Up}) {
                const DiscreteState s{u, p, t};
                seen.insert(s.index());
                EXPECT_EQ(DiscreteState::from_index(s.index()), s);
            }
        }
    }
    EXPECT_EQ(seen.size(), 120u);
    EXPECT_EQ(*seen.rbegin(), DiscreteState::kCount - 1);
}

TEST(Features, DeterministicOnRandomClusters) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        auto a = testkit::random_instance(seed);
        auto b = testkit::random_instance(seed);
        PendingQueues qa;
        PendingQueues qb;
        qa.add_queue({"default", {}, 1.0});
        qb.add_queue({"default", {}, 1.0});
        for (const auto& p : a.probes) qa.push("default", p.id);
        for (const auto& p : b.probes) qb.push("default", p.id);
        ASSERT_EQ(featurize_state(a.state, qa, 7.0, 5.0), featurize_state(b.state, qb, 7.0, 5.0));
    }
}

TEST(Policy, GreedyChoices) {
    PolicyState p({"a", "b", "c"}, 0.0, 0.5, 0.9);
    const DiscreteState s{};
    std::mt19937_64 rng(1);
    EXPECT_EQ(select_action(p, s, rng), 0u);
    p.set_q(s, 0, 0.0);
    p.set_q(s, 1, 2.0);
    p.set_q(s, 2, 1.0);
    EXPECT_EQ(select_action(p, s, rng), 1u);
}

TEST(Policy, FullExplorationIsUniformWithinThreeSigma) {
    PolicyState p({"a", "b", "c"}, 1.0, 0.5, 0.9);
    p.set_q(DiscreteState{}, 2, 5.0);
    std::mt19937_64 rng(2024);
    std::array<int, 3> counts{};
    const int n = 10000;
    for (int i = 0; i < n; ++i) ++counts[select_action(p, DiscreteState{}, rng)];
    const double expect = n / 3.0;
    const double sigma = std::sqrt(n * (1.0 / 3.0) * (2.0 / 3.0));
    for (int c : counts) EXPECT_LE(std::abs(c - expect), 3.0 * sigma);
}

TEST(Policy, Validation) {
    EXPECT_THROW(PolicyState({}, 0.1, 0.5, 0.9), ConfigError);
    EXPECT_THROW(PolicyState({"a"}, 1.5, 0.5, 0.9), ConfigError);
    EXPECT_THROW(PolicyState({"a"}, 0.1, 0.0, 0.9), ConfigError);
    EXPECT_THROW(PolicyState({"a"}, 0.1, 0.5, 1.0), ConfigError);
}

TEST(QUpdate, HandBellmanExample) {
    PolicyState p({"a", "b"}, 0.0, 0.5, 0.9);
    const DiscreteState s{1, 1, Trend::Up};
    const DiscreteState next{2, 0, Trend::Flat};
    q_update(p, s, 0, 1.0, next);
    EXPECT_DOUBLE_EQ(p.q(s, 0), 0.5);
    // Now bootstrapping from s: 0 + 0.5 * (0 + 0.9 * 0.5 - 0) = 0.225.
    q_update(p, next, 1, 0.0, s);
    EXPECT_DOUBLE_EQ(p.q(next, 1), 0.225);
}

TEST(QUpdate, ZeroTermLeavesValueUnchanged) {
    PolicyState p({"a"}, 0.0, 0.3, 0.9);
    q_update(p, DiscreteState{}, 0, 0.0, DiscreteState{});
    EXPECT_EQ(p.q(DiscreteState{}, 0), 0.0);
    EXPECT_THROW(q_update(p, DiscreteState{}, 0, std::nan(""), std::nullopt), std::invalid_argument);
    EXPECT_THROW(q_update(p, DiscreteState{}, 0, INFINITY, std::nullopt), std::invalid_argument);
}

TEST(QUpdate, GeometricConvergenceToConstantReward) {
    for (double alpha : {0.1, 0.3, 0.7, 1.0}) {
        PolicyState p({"a"}, 0.0, alpha, 0.0);
        const double r = 2.5;
        for (int n = 1; n <= 60; ++n) {
            q_update(p, DiscreteState{}, 0, r, std::nullopt);
            ASSERT_LE(std::abs(p.q(DiscreteState{}, 0) - r), std::pow(1.0 - alpha, n) * std::abs(r) + 1e-12);
        }
    }
}

TEST(Reward, Formula) {
    const TickSample full{1.0, 0.0};
    EXPECT_DOUBLE_EQ(compute_reward(std::span(&full, 1)), 1.0);
    const TickSample idle{0.0, 0.0};
    EXPECT_DOUBLE_EQ(compute_reward(std::span(&idle, 1)), 0.0);
    // utilization 0.8, delay 24 s over norm 60 = 0.4, lambda 0.5: 0.8 - 0.2 = 0.6.
    const std::vector<TickSample> w{{0.7, 20.0}, {0.9, 28.0}};
    EXPECT_NEAR(compute_reward(w, {0.5, 60.0}), 0.6, 1e-12);
    EXPECT_THROW((void)compute_reward(std::span<const TickSample>{}), std::invalid_argument);
}

TEST(PolicyFile, RoundTrip) {
    PolicyState p({"spread", "binpack"}, 0.25, 0.4, 0.8);
    p.set_q(DiscreteState{3, 2, Trend::Down}, 1, -0.125);
    p.set_q(DiscreteState{9, 3, Trend::Up}, 0, 1.0 / 3.0);
    const PolicyState back = parse_policy(serialize_policy(p));
    EXPECT_EQ(back, p);
    const auto path = std::filesystem::temp_directory_path() / "orchestra_policy_roundtrip.json";
    save_policy(p, path);
    EXPECT_EQ(load_policy(path), p);
    std::filesystem::remove(path);
    EXPECT_THROW((void)parse_policy("{\"version\": 99}"), ConfigError);
    EXPECT_THROW((void)parse_policy("not json"), ConfigError);
    EXPECT_THROW((void)load_policy("/nonexistent/policy.json"), IoError);
}
