#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "daa/diagnostics.hpp"

namespace daa {

struct DetectorConfig {
    double half_life = 3.0;       // evaluations
    int window = 5;               // W, evaluations in each slope fit
    double entropy_floor = 0.05;  // absolute, on the normalised scale
    double mass_floor = 0.5;
    int arm_after = 10;           // evaluations observed before any signal may fire (2W)
    double kappa = 1.5;           // lambda multiplier
    double lambda_seed = 0.1;     // base lambda when escalating from 0
    double lambda_ceiling = 10.0;
    double entropy_upper_band = 0.9;

    void validate() const;
};

enum class EntropyPhase { kWarmup, kRising, kReversed };
enum class SignalReason { kEntropyReversal, kMassDiminishing, kEntropyFloor };
enum class StopPolicy { kNone, kStopOnFirst, kAdaptThenStop };

std::string_view to_string(EntropyPhase p);
std::string_view to_string(SignalReason r);
std::string_view to_string(StopPolicy p);
SignalReason parse_signal_reason(std::string_view s);
StopPolicy parse_stop_policy(std::string_view s);

struct SignalEvidence {
    double smoothed_entropy = 0.0;
    double smoothed_mass = 0.0;
    double entropy_slope = 0.0;
    double mass_slope = 0.0;

    friend bool operator==(const SignalEvidence&, const SignalEvidence&) = default;
};

struct EarlyStopSignal {
    SignalReason reason = SignalReason::kEntropyReversal;
    std::int64_t step = 0;
    SignalEvidence evidence;

    friend bool operator==(const EarlyStopSignal&, const EarlyStopSignal&) = default;
};

std::string to_log_line(const EarlyStopSignal& s);
EarlyStopSignal parse_signal_line(std::string_view text, std::size_t line = 0);
std::vector<EarlyStopSignal> read_signal_log(const std::filesystem::path& path);

/// Sequential state of the over-optimisation detector.
struct DetectorState {
    std::vector<double> smoothed_entropy;
    std::vector<double> smoothed_mass;
    std::optional<double> entropy_slope;  // over the last W smoothed values
    std::optional<double> mass_slope;
    int positive_entropy_run = 0;  // consecutive evaluations with a rising slope
    EntropyPhase phase = EntropyPhase::kWarmup;
    std::optional<std::int64_t> last_step;
    std::vector<EarlyStopSignal> fired;
    double recommended_lambda = 0.0;

    std::size_t observed() const noexcept { return smoothed_entropy.size(); }
    bool has_fired(SignalReason r) const;
    bool any_fired() const noexcept { return !fired.empty(); }
    SignalEvidence evidence() const;
};

struct Observation {
    DetectorState state;
    std::optional<EarlyStopSignal> signal;
};

/// Folds one record into the state; at most one new signal per call.
/// Throws SequencingError when steps do not strictly increase.
Observation observe(DetectorState state, const MetricRecord& record, const DetectorConfig& cfg);

/// Least-squares slope of equally spaced values.
double window_slope(std::span<const double> values);

/// Escalate lambda once a signal has fired; relax it while entropy is still
/// rising above the upper band; otherwise leave it alone.
double recommend_lambda(const DetectorState& state, double current_lambda, const DetectorConfig& cfg);

bool should_stop(const DetectorState& state, StopPolicy policy, const DetectorConfig& cfg);

/// Replays a metric log through a fresh detector.
std::vector<EarlyStopSignal> replay(const std::vector<MetricRecord>& records, const DetectorConfig& cfg);

}  // namespace daa
