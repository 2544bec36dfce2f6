#include "daa/trainer.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "daa/errors.hpp"
#include "daa/rng.hpp"

namespace daa {

void TrainConfig::validate() const {
    if (!(peak_lr > 0.0)) throw ConfigError("peak_lr must be positive");
    if (!(end_lr_ratio >= 0.0 && end_lr_ratio <= 1.0)) throw ConfigError("end_lr_ratio must lie in [0, 1]");
    if (warmup_steps < 0) throw ConfigError("warmup_steps must be non-negative");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (eval_interval < 1) throw ConfigError("eval_interval must be >= 1");
    if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
    if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
    if (eval_prompts < 1) throw ConfigError("eval_prompts must be >= 1");
    generation.validate();
    if (entropy.k < 2 || entropy.k > shape.vocab_size) throw ConfigError("top_k must lie in [2, V]");
}

double lr_at(std::int64_t step, std::int64_t total_steps, const TrainConfig& cfg) {
    const double peak = cfg.peak_lr;
    if (step <= 0) return 0.0;
    if (step <= cfg.warmup_steps) return peak * static_cast<double>(step) / cfg.warmup_steps;
    const double end = peak * cfg.end_lr_ratio;
    const double span = static_cast<double>(total_steps - cfg.warmup_steps);
    const double progress = std::min(1.0, static_cast<double>(step - cfg.warmup_steps) / span);
    if (cfg.decay == DecayShape::kCosine)
        return end + (peak - end) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    return peak + (end - peak) * progress;
}

double clip_grad_norm(PolicyParams& grad, double max_norm) {
    double sq = 0.0;
    for (double g : grad.values()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (double& g : grad.values()) g *= s;
    }
    return norm;
}

void adam_update(PolicyParams& params, OptimizerState& opt, const PolicyParams& grad, double lr,
                 const TrainConfig& cfg) {
    ++opt.step;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(opt.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(opt.step));
    auto p = params.values();
    auto m = opt.first_moment.values();
    auto v = opt.second_moment.values();
    const auto g = grad.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_eps);
        p[i] -= lr * (update + cfg.weight_decay * p[i]);
    }
}

StepResult train_step(PolicyParams& params, OptimizerState& opt, std::span<const PreferencePair> batch,
                      std::span<const ReferenceScores> refs, const TrainConfig& cfg, const LossConfig& loss_cfg,
                      std::int64_t total_steps, std::span<const std::size_t> pair_ids) {
    BatchObjective obj = batch_objective(params, batch, refs, loss_cfg, pair_ids);
    StepResult r;
    r.loss = obj.loss;
    r.grad_norm = clip_grad_norm(obj.grad, cfg.clip_norm);
    r.lr = lr_at(opt.step + 1, total_steps, cfg);
    adam_update(params, opt, obj.grad, r.lr, cfg);
    return r;
}

PolicyParams initial_params(const TrainConfig& cfg) {
    return PolicyParams::random(cfg.shape, mix_seed(cfg.seed, 0x1417), cfg.init_scale);
}

namespace {

class ConstantReward final : public RewardOracle {
public:
    double score(const TokenSeq&, const TokenSeq&) const override { return 0.0; }
};

std::vector<TokenSeq> pick_eval_prompts(const PreferenceDataset& validation, int count, std::uint64_t seed) {
    std::vector<std::size_t> idx(validation.pairs.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(mix_seed(seed, 0xe7a1));
    shuffle_in_place(idx, rng);
    idx.resize(std::min(idx.size(), static_cast<std::size_t>(count)));
    std::vector<TokenSeq> prompts;
    for (auto i : idx) prompts.push_back(validation.pairs[i].prompt);
    return prompts;
}

}  // namespace

RunResult run(const PolicyParams& init, const PreferenceDataset& train, const PreferenceDataset& validation,
              const TrainConfig& cfg, const LossConfig& loss_cfg_in, const DetectorConfig& detector_cfg,
              const RewardOracle* reward, const RunCallbacks& callbacks) {
    cfg.validate();
    loss_cfg_in.validate();
    detector_cfg.validate();
    if (!(init.shape() == cfg.shape)) throw ConfigError("initial parameters do not match the configured shape");
    if (train.pairs.empty()) throw ConfigError("training split is empty");
    if (validation.pairs.empty()) throw ConfigError("validation split is empty");

    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    std::int64_t total = static_cast<std::int64_t>(train.pairs.size() / bs);
    if (cfg.max_steps > 0) total = std::min<std::int64_t>(total, cfg.max_steps);
    if (total < 1) throw ConfigError("fewer training pairs than one batch");
    if (cfg.warmup_steps >= total)
        throw ConfigError("warmup_steps (" + std::to_string(cfg.warmup_steps) + ") must be below the " +
                          std::to_string(total) + " training steps");

    const ReferenceSnapshot reference(init);
    PolicyParams params = init;
    OptimizerState opt(cfg.shape);
    LossConfig loss_cfg = loss_cfg_in;
    const bool adaptive = cfg.adaptive_lambda || cfg.stop_policy == StopPolicy::kAdaptThenStop;

    // Seeded single-epoch order; the trailing partial batch is dropped.
    std::vector<std::size_t> order(train.pairs.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(cfg.seed, 0x5417));
    shuffle_in_place(order, rng);
    std::vector<PreferencePair> ordered;
    ordered.reserve(static_cast<std::size_t>(total) * bs);
    for (std::size_t i = 0; i < static_cast<std::size_t>(total) * bs; ++i) ordered.push_back(train.pairs[order[i]]);
    const auto train_refs = reference_scores(reference.params(), ordered);

    const auto prompts = pick_eval_prompts(validation, cfg.eval_prompts, cfg.seed);
    const std::uint64_t gen_seed = mix_seed(cfg.seed, 0x6e17);
    const ConstantReward flat;
    const RewardOracle& oracle = reward ? *reward : flat;

    RunResult result;
    result.total_steps = total;
    DetectorState detector;
    detector.recommended_lambda = loss_cfg.lambda_nll;

    auto batch_at = [&](std::int64_t step) {
        const std::size_t off = static_cast<std::size_t>(step - 1) * bs;
        return std::pair{std::span<const PreferencePair>(ordered).subspan(off, bs),
                         std::span<const ReferenceScores>(train_refs).subspan(off, bs)};
    };
    std::vector<std::size_t> ids(bs);
    auto ids_at = [&](std::int64_t step) {
        const std::size_t off = static_cast<std::size_t>(step - 1) * bs;
        for (std::size_t k = 0; k < bs; ++k) ids[k] = order[off + k];
        return std::span<const std::size_t>(ids);
    };

    auto evaluate = [&](std::int64_t step, double train_loss) {
        MetricRecord rec;
        rec.step = step;
        const ValidationSummary v = validation_summary(params, validation.pairs, cfg.entropy);
        rec.better_mean_llh = v.better_mean_llh;
        rec.worse_mean_llh = v.worse_mean_llh;
        rec.margin = v.better_mean_llh - v.worse_mean_llh;
        rec.topk_entropy = v.topk_entropy;
        rec.topk_mass = v.topk_mass;

        const EvalReport h2h =
            evaluate_head_to_head(params, reference.params(), prompts, oracle, cfg.generation, gen_seed);
        rec.win_prob = h2h.mean_win_prob;
        rec.ead = h2h.ead;
        rec.mean_output_tokens = h2h.mean_output_tokens;
        rec.train_loss = train_loss;

        if (cfg.entropy_mode == EntropyMode::kGenerated) {
            double e = 0.0, m = 0.0;
            for (std::size_t i = 0; i < prompts.size(); ++i) {
                TokenSeq completion = h2h.policy_outputs[i];
                completion.push_back(cfg.shape.eos_id);
                const auto prof = sequence_entropy_profile(params, prompts[i], completion, cfg.entropy);
                e += prof.entropy;
                m += prof.mass;
            }
            rec.topk_entropy = e / static_cast<double>(prompts.size());
            rec.topk_mass = m / static_cast<double>(prompts.size());
        }
        return rec;
    };

    // Returns true when training should stop.
    auto record = [&](const MetricRecord& rec) {
        result.metrics.push_back(rec);
        if (callbacks.on_metric) callbacks.on_metric(rec);
        auto obs = observe(std::move(detector), rec, detector_cfg);
        detector = std::move(obs.state);
        if (obs.signal) {
            result.signals.push_back(*obs.signal);
            if (callbacks.on_signal) callbacks.on_signal(*obs.signal);
        }
        const double lam = recommend_lambda(detector, loss_cfg.lambda_nll, detector_cfg);
        if (adaptive) {
            loss_cfg.lambda_nll = lam;
            detector.recommended_lambda = lam;
        }
        result.lambda_trace.push_back(loss_cfg.lambda_nll);
        if (callbacks.on_checkpoint) callbacks.on_checkpoint(rec.step, params);
        return should_stop(detector, cfg.stop_policy, detector_cfg);
    };

    {
        auto [batch, refs] = batch_at(1);
        const double init_loss = batch_objective(params, batch, refs, loss_cfg, ids_at(1)).loss;
        if (record(evaluate(0, init_loss))) {
            result.stopped_early = true;
            result.params = std::move(params);
            return result;
        }
    }

    double loss_sum = 0.0;
    int loss_count = 0;
    for (std::int64_t step = 1; step <= total; ++step) {
        auto [batch, refs] = batch_at(step);
        const StepResult r = train_step(params, opt, batch, refs, cfg, loss_cfg, total, ids_at(step));
        loss_sum += r.loss;
        ++loss_count;
        result.steps = step;
        if (step % cfg.eval_interval == 0) {
            const bool stop = record(evaluate(step, loss_sum / loss_count));
            loss_sum = 0.0;
            loss_count = 0;
            if (stop) {
                result.stopped_early = step < total;
                break;
            }
        }
    }
    result.params = std::move(params);
    return result;
}

RunResult run(const PreferenceDataset& train, const PreferenceDataset& validation, const TrainConfig& cfg,
              const LossConfig& loss_cfg, const DetectorConfig& detector_cfg, const RewardOracle* reward,
              const RunCallbacks& callbacks) {
    return run(initial_params(cfg), train, validation, cfg, loss_cfg, detector_cfg, reward, callbacks);
}

}  // namespace daa
