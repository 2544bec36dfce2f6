#include "daa/detector.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "daa/errors.hpp"

namespace daa {

using json = nlohmann::json;

void DetectorConfig::validate() const {
    if (!(half_life > 0.0)) throw ConfigError("detector half_life must be positive");
    if (window < 2) throw ConfigError("detector window must be >= 2");
    if (!(kappa > 1.0)) throw ConfigError("detector kappa must exceed 1");
    if (!(entropy_floor > 0.0 && entropy_floor < 1.0)) throw ConfigError("entropy floor must lie in (0, 1)");
    if (!(mass_floor > 0.0 && mass_floor < 1.0)) throw ConfigError("mass floor must lie in (0, 1)");
    if (arm_after < 0) throw ConfigError("arm_after must be non-negative");
    if (!(lambda_seed > 0.0)) throw ConfigError("lambda_seed must be positive");
    if (!(lambda_ceiling >= lambda_seed)) throw ConfigError("lambda_ceiling must be >= lambda_seed");
}

std::string_view to_string(EntropyPhase p) {
    switch (p) {
        case EntropyPhase::kWarmup: return "WARMUP";
        case EntropyPhase::kRising: return "RISING";
        case EntropyPhase::kReversed: return "REVERSED";
    }
    return "?";
}

std::string_view to_string(SignalReason r) {
    switch (r) {
        case SignalReason::kEntropyReversal: return "ENTROPY_REVERSAL";
        case SignalReason::kMassDiminishing: return "MASS_DIMINISHING";
        case SignalReason::kEntropyFloor: return "ENTROPY_FLOOR";
    }
    return "?";
}

std::string_view to_string(StopPolicy p) {
    switch (p) {
        case StopPolicy::kNone: return "none";
        case StopPolicy::kStopOnFirst: return "stop_on_first";
        case StopPolicy::kAdaptThenStop: return "adapt_then_stop";
    }
    return "?";
}

SignalReason parse_signal_reason(std::string_view s) {
    for (auto r : {SignalReason::kEntropyReversal, SignalReason::kMassDiminishing, SignalReason::kEntropyFloor})
        if (to_string(r) == s) return r;
    throw ConfigError("unknown signal reason '" + std::string(s) + "'");
}

StopPolicy parse_stop_policy(std::string_view s) {
    for (auto p : {StopPolicy::kNone, StopPolicy::kStopOnFirst, StopPolicy::kAdaptThenStop})
        if (to_string(p) == s) return p;
    throw ConfigError("unknown stop policy '" + std::string(s) + "'");
}

std::string to_log_line(const EarlyStopSignal& s) {
    json j;
    j["reason"] = std::string(to_string(s.reason));
    j["step"] = s.step;
    j["evidence"] = {{"smoothed_entropy", s.evidence.smoothed_entropy},
                     {"smoothed_mass", s.evidence.smoothed_mass},
                     {"entropy_slope", s.evidence.entropy_slope},
                     {"mass_slope", s.evidence.mass_slope}};
    return j.dump();
}

EarlyStopSignal parse_signal_line(std::string_view text, std::size_t line) {
    try {
        const json j = json::parse(text);
        EarlyStopSignal s;
        s.reason = parse_signal_reason(j.at("reason").get<std::string>());
        s.step = j.at("step").get<std::int64_t>();
        const auto& e = j.at("evidence");
        s.evidence.smoothed_entropy = e.at("smoothed_entropy").get<double>();
        s.evidence.smoothed_mass = e.at("smoothed_mass").get<double>();
        s.evidence.entropy_slope = e.at("entropy_slope").get<double>();
        s.evidence.mass_slope = e.at("mass_slope").get<double>();
        return s;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed signal record: ") + e.what(), line);
    } catch (const ConfigError& e) {
        throw ParseError(e.what(), line);
    }
}

std::vector<EarlyStopSignal> read_signal_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open signal log " + path.string(), 0);
    std::vector<EarlyStopSignal> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_signal_line(line, n));
    }
    return out;
}

bool DetectorState::has_fired(SignalReason r) const {
    for (const auto& s : fired)
        if (s.reason == r) return true;
    return false;
}

SignalEvidence DetectorState::evidence() const {
    SignalEvidence e;
    if (!smoothed_entropy.empty()) e.smoothed_entropy = smoothed_entropy.back();
    if (!smoothed_mass.empty()) e.smoothed_mass = smoothed_mass.back();
    e.entropy_slope = entropy_slope.value_or(0.0);
    e.mass_slope = mass_slope.value_or(0.0);
    return e;
}

double window_slope(std::span<const double> values) {
    const auto n = static_cast<double>(values.size());
    const double t_mean = (n - 1.0) / 2.0;
    double y_mean = 0.0;
    for (double v : values) y_mean += v;
    y_mean /= n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double dt = static_cast<double>(i) - t_mean;
        num += dt * (values[i] - y_mean);
        den += dt * dt;
    }
    return num / den;
}

Observation observe(DetectorState state, const MetricRecord& record, const DetectorConfig& cfg) {
    if (state.last_step && record.step <= *state.last_step)
        throw SequencingError("metric step " + std::to_string(record.step) + " does not follow step " +
                              std::to_string(*state.last_step));
    state.last_step = record.step;

    // EMA with the configured half-life, seeded by the first value.
    const double alpha = 1.0 - std::exp2(-1.0 / cfg.half_life);
    auto smooth = [alpha](std::vector<double>& series, double x) {
        series.push_back(series.empty() ? x : series.back() + alpha * (x - series.back()));
    };
    smooth(state.smoothed_entropy, record.topk_entropy);
    smooth(state.smoothed_mass, record.topk_mass);

    const auto w = static_cast<std::size_t>(cfg.window);
    if (state.observed() >= w) {
        state.entropy_slope = window_slope(std::span<const double>(state.smoothed_entropy).last(w));
        state.mass_slope = window_slope(std::span<const double>(state.smoothed_mass).last(w));
        if (*state.entropy_slope > 0.0) ++state.positive_entropy_run;
        else if (state.phase == EntropyPhase::kWarmup) state.positive_entropy_run = 0;
        if (state.phase == EntropyPhase::kWarmup && state.positive_entropy_run >= cfg.window)
            state.phase = EntropyPhase::kRising;
    }

    Observation out;
    const bool armed = state.observed() >= static_cast<std::size_t>(cfg.arm_after) && state.entropy_slope;
    if (!armed) {
        out.state = std::move(state);
        return out;
    }

    const double ent = state.smoothed_entropy.back();
    const double mass = state.smoothed_mass.back();
    std::optional<SignalReason> reason;
    if (state.phase == EntropyPhase::kRising && *state.entropy_slope < 0.0 &&
        !state.has_fired(SignalReason::kEntropyReversal)) {
        reason = SignalReason::kEntropyReversal;
    } else if (*state.mass_slope < 0.0 && mass < cfg.mass_floor &&
               !state.has_fired(SignalReason::kMassDiminishing)) {
        reason = SignalReason::kMassDiminishing;
    } else if (ent < cfg.entropy_floor && !state.has_fired(SignalReason::kEntropyFloor)) {
        reason = SignalReason::kEntropyFloor;
    }
    // The phase follows the slope even if the reversal signal already fired.
    if (state.phase == EntropyPhase::kRising && *state.entropy_slope < 0.0) state.phase = EntropyPhase::kReversed;

    if (reason) {
        EarlyStopSignal sig{*reason, record.step, state.evidence()};
        state.fired.push_back(sig);
        out.signal = sig;
    }
    out.state = std::move(state);
    return out;
}

double recommend_lambda(const DetectorState& state, double current_lambda, const DetectorConfig& cfg) {
    if (state.any_fired()) return std::min(cfg.kappa * std::max(current_lambda, cfg.lambda_seed), cfg.lambda_ceiling);
    if (state.phase == EntropyPhase::kRising && !state.smoothed_entropy.empty() &&
        state.smoothed_entropy.back() > cfg.entropy_upper_band)
        return std::max(current_lambda / cfg.kappa, 0.0);
    return current_lambda;
}

bool should_stop(const DetectorState& state, StopPolicy policy, const DetectorConfig& cfg) {
    switch (policy) {
        case StopPolicy::kNone: return false;
        case StopPolicy::kStopOnFirst: return state.any_fired();
        case StopPolicy::kAdaptThenStop: return state.any_fired() && state.recommended_lambda >= cfg.lambda_ceiling;
    }
    return false;
}

std::vector<EarlyStopSignal> replay(const std::vector<MetricRecord>& records, const DetectorConfig& cfg) {
    DetectorState state;
    std::vector<EarlyStopSignal> signals;
    for (const auto& r : records) {
        auto obs = observe(std::move(state), r, cfg);
        state = std::move(obs.state);
        if (obs.signal) signals.push_back(*obs.signal);
    }
    return signals;
}

}  // namespace daa
