#include <doctest.h>

#include <cmath>

#include "daa/detector.hpp"
#include "daa/errors.hpp"
#include "daa/rng.hpp"

using namespace daa;

namespace {

std::vector<MetricRecord> stream(const std::vector<double>& entropy, const std::vector<double>& mass) {
    std::vector<MetricRecord> out;
    for (std::size_t i = 0; i < entropy.size(); ++i) {
        MetricRecord r;
        r.step = static_cast<std::int64_t>(50 * i);
        r.topk_entropy = entropy[i];
        r.topk_mass = mass[i];
        out.push_back(r);
    }
    return out;
}

std::vector<double> ramp(double a, double b, int n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(a + (b - a) * i / (n - 1));
    return v;
}

}  // namespace

TEST_CASE("constant and rising streams never fire") {
    const DetectorConfig cfg;
    CHECK(replay(stream(std::vector<double>(60, 0.6), std::vector<double>(60, 0.8)), cfg).empty());
    CHECK(replay(stream(std::vector<double>(60, 0.2), std::vector<double>(60, 0.3)), cfg).empty());
    CHECK(replay(stream(ramp(0.3, 0.95, 60), ramp(0.6, 0.9, 60)), cfg).empty());
}

TEST_CASE("constructed rise-then-fall stream fires ENTROPY_REVERSAL soon after the peak") {
    DetectorConfig cfg;
    cfg.window = 5;
    auto e = ramp(0.5, 0.8, 21);
    const auto fall = ramp(0.8, 0.4, 21);
    e.insert(e.end(), fall.begin() + 1, fall.end());
    const auto sig = replay(stream(e, std::vector<double>(e.size(), 0.9)), cfg);
    REQUIRE_FALSE(sig.empty());
    CHECK(sig.front().reason == SignalReason::kEntropyReversal);
    const std::int64_t peak_step = 20 * 50;
    CHECK(sig.front().step > peak_step);
    CHECK(sig.front().step <= peak_step + 50 * cfg.window);
}

TEST_CASE("mass stream fires MASS_DIMINISHING at the first armed evaluation under the floor") {
    DetectorConfig cfg;
    const auto mass = ramp(0.9, 0.3, 30);
    const auto recs = stream(std::vector<double>(30, 0.6), mass);
    const auto sig = replay(recs, cfg);
    REQUIRE(sig.size() == 1);
    CHECK(sig[0].reason == SignalReason::kMassDiminishing);

    // independent EMA
    const double a = 1.0 - std::pow(2.0, -1.0 / cfg.half_life);
    double s = mass[0];
    std::int64_t expected = -1;
    for (std::size_t i = 0; i < mass.size(); ++i) {
        if (i > 0) s += a * (mass[i] - s);
        if (i + 1 >= static_cast<std::size_t>(cfg.arm_after) && s < cfg.mass_floor) {
            expected = recs[i].step;
            break;
        }
    }
    CHECK(sig[0].step == expected);
    CHECK(sig[0].evidence.smoothed_mass < cfg.mass_floor);
    CHECK(sig[0].evidence.mass_slope < 0.0);
}

TEST_CASE("entropy floor fires once the smoothed entropy is below it") {
    DetectorConfig cfg;
    const auto sig = replay(stream(ramp(0.3, 0.0, 30), std::vector<double>(30, 0.9)), cfg);
    REQUIRE(sig.size() == 1);
    CHECK(sig[0].reason == SignalReason::kEntropyFloor);
    CHECK(sig[0].evidence.smoothed_entropy < cfg.entropy_floor);
}

TEST_CASE("observe contracts") {
    DetectorConfig cfg;
    SUBCASE("out-of-order steps are rejected") {
        DetectorState st;
        MetricRecord r;
        r.step = 100;
        st = observe(std::move(st), r, cfg).state;
        r.step = 100;
        CHECK_THROWS_AS(observe(st, r, cfg), SequencingError);
        r.step = 50;
        CHECK_THROWS_AS(observe(st, r, cfg), SequencingError);
    }
    SUBCASE("nothing fires before arming, phases only move forward, signals persist") {
        Rng rng(3);
        for (int t = 0; t < 20; ++t) {
            DetectorState st;
            EntropyPhase last = EntropyPhase::kWarmup;
            std::size_t fired = 0;
            for (int i = 0; i < 60; ++i) {
                MetricRecord r;
                r.step = i;
                r.topk_entropy = rng.uniform();
                r.topk_mass = rng.uniform();
                auto obs = observe(std::move(st), r, cfg);
                st = std::move(obs.state);
                if (i + 1 < cfg.arm_after) CHECK_FALSE(obs.signal);
                CHECK(static_cast<int>(st.phase) >= static_cast<int>(last));
                last = st.phase;
                CHECK(st.fired.size() >= fired);
                fired = st.fired.size();
                if (obs.signal) CHECK(obs.signal->evidence == st.evidence());
            }
        }
    }
    SUBCASE("invalid configuration") {
        DetectorConfig bad;
        bad.window = 1;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
        bad = {};
        bad.kappa = 1.0;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
        bad = {};
        bad.mass_floor = 1.0;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }
}

TEST_CASE("recommend_lambda and should_stop") {
    DetectorConfig cfg;
    DetectorState quiet;
    quiet.smoothed_entropy = {0.5};
    CHECK(recommend_lambda(quiet, 0.3, cfg) == 0.3);
    CHECK_FALSE(should_stop(quiet, StopPolicy::kStopOnFirst, cfg));
    CHECK_FALSE(should_stop(quiet, StopPolicy::kAdaptThenStop, cfg));

    DetectorState fired = quiet;
    fired.fired.push_back({SignalReason::kEntropyFloor, 100, {}});
    CHECK(recommend_lambda(fired, 0.1, cfg) == doctest::Approx(0.15).epsilon(1e-15));
    CHECK(recommend_lambda(fired, 0.0, cfg) == doctest::Approx(0.15).epsilon(1e-15));
    double lam = 0.0;
    for (int i = 0; i < 100; ++i) lam = recommend_lambda(fired, lam, cfg);
    CHECK(lam == cfg.lambda_ceiling);
    CHECK(recommend_lambda(fired, lam, cfg) == lam);

    CHECK(should_stop(fired, StopPolicy::kStopOnFirst, cfg));
    CHECK_FALSE(should_stop(fired, StopPolicy::kNone, cfg));
    fired.recommended_lambda = 1.0;
    CHECK_FALSE(should_stop(fired, StopPolicy::kAdaptThenStop, cfg));
    fired.recommended_lambda = cfg.lambda_ceiling;
    CHECK(should_stop(fired, StopPolicy::kAdaptThenStop, cfg));

    DetectorState rising = quiet;
    rising.phase = EntropyPhase::kRising;
    rising.smoothed_entropy = {0.95};
    CHECK(recommend_lambda(rising, 1.5, cfg) == doctest::Approx(1.0));
}

TEST_CASE("signal log lines round-trip") {
    EarlyStopSignal s{SignalReason::kMassDiminishing, 450, {0.1 + 0.2, 1.0 / 3.0, -1e-5, -0.25}};
    CHECK(parse_signal_line(to_log_line(s)) == s);
    CHECK_THROWS_AS(parse_signal_line("{\"reason\":\"NOPE\",\"step\":1}", 3), ParseError);
    CHECK(parse_stop_policy("adapt_then_stop") == StopPolicy::kAdaptThenStop);
    CHECK_THROWS_AS(parse_stop_policy("later"), ConfigError);
    CHECK(to_string(SignalReason::kEntropyReversal) == "ENTROPY_REVERSAL");
}
