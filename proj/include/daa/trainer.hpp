#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "daa/corpus.hpp"
#include "daa/detector.hpp"
#include "daa/diagnostics.hpp"
#include "daa/harness.hpp"
#include "daa/kernels.hpp"
#include "daa/losses.hpp"
#include "daa/policy.hpp"

namespace daa {

enum class DecayShape { kLinear, kCosine };
enum class EntropyMode { kTeacherForced, kGenerated };

struct TrainConfig {
    double peak_lr = 5e-3;
    double end_lr_ratio = 0.1;
    int warmup_steps = 128;
    DecayShape decay = DecayShape::kLinear;
    int batch_size = 1;
    int eval_interval = 50;
    /// 0 trains the full (single) epoch.
    int max_steps = 0;
    std::uint64_t seed = 0;

    double adam_beta1 = 0.9;
    double adam_beta2 = 0.95;
    double adam_eps = 1e-8;
    double weight_decay = 0.1;
    double clip_norm = 1.0;

    StopPolicy stop_policy = StopPolicy::kNone;
    /// Apply the detector's lambda recommendations (always on under adapt_then_stop).
    bool adaptive_lambda = false;

    PolicyShape shape;
    double init_scale = 0.1;

    int eval_prompts = 64;
    GenerationConfig generation;
    EntropyConfig entropy;
    EntropyMode entropy_mode = EntropyMode::kTeacherForced;

    void validate() const;
};

struct OptimizerState {
    PolicyParams first_moment;
    PolicyParams second_moment;
    std::int64_t step = 0;

    explicit OptimizerState(const PolicyShape& shape) : first_moment(shape), second_moment(shape) {}
};

/// Linear warmup from 0 to the peak, then decay to end_lr_ratio * peak at
/// `total_steps`.
double lr_at(std::int64_t step, std::int64_t total_steps, const TrainConfig& cfg);

/// Rescales `grad` in place to at most `max_norm`; returns the pre-clip norm.
double clip_grad_norm(PolicyParams& grad, double max_norm);

/// Adam step with decoupled weight decay.
void adam_update(PolicyParams& params, OptimizerState& opt, const PolicyParams& grad, double lr,
                 const TrainConfig& cfg);

struct StepResult {
    double loss = 0.0;
    double grad_norm = 0.0;  // before clipping
    double lr = 0.0;
};

/// One optimiser update on `batch`. `refs` are the frozen reference scores
/// of the same pairs. Throws TrainingError on non-finite values.
StepResult train_step(PolicyParams& params, OptimizerState& opt, std::span<const PreferencePair> batch,
                      std::span<const ReferenceScores> refs, const TrainConfig& cfg, const LossConfig& loss_cfg,
                      std::int64_t total_steps, std::span<const std::size_t> pair_ids = {});

struct RunCallbacks {
    std::function<void(const MetricRecord&)> on_metric;
    std::function<void(const EarlyStopSignal&)> on_signal;
    std::function<void(std::int64_t step, const PolicyParams&)> on_checkpoint;
};

struct RunResult {
    PolicyParams params;
    std::vector<MetricRecord> metrics;
    std::vector<EarlyStopSignal> signals;
    std::vector<double> lambda_trace;  // lambda in force after each evaluation
    std::int64_t steps = 0;
    std::int64_t total_steps = 0;
    bool stopped_early = false;
};

/// Single-epoch training with periodic evaluation at step 0 and every
/// eval_interval steps. `reward` may be null, in which case win_prob is 0.5.
RunResult run(const PolicyParams& init, const PreferenceDataset& train, const PreferenceDataset& validation,
              const TrainConfig& cfg, const LossConfig& loss_cfg, const DetectorConfig& detector_cfg,
              const RewardOracle* reward = nullptr, const RunCallbacks& callbacks = {});

/// Same, initialising the policy from cfg.seed.
RunResult run(const PreferenceDataset& train, const PreferenceDataset& validation, const TrainConfig& cfg,
              const LossConfig& loss_cfg, const DetectorConfig& detector_cfg, const RewardOracle* reward = nullptr,
              const RunCallbacks& callbacks = {});

/// cfg.seed-initialised weights (uniform in +-init_scale).
PolicyParams initial_params(const TrainConfig& cfg);

}  // namespace daa
