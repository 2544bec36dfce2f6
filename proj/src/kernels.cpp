#include "daa/kernels.hpp"

#include <cmath>

#include "daa/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace daa {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

std::vector<ReferenceScores> reference_scores(const PolicyParams& reference,
                                              std::span<const PreferencePair> pairs, Exec exec) {
    std::vector<ReferenceScores> out(pairs.size());
    parallel_for(pairs.size(), exec, [&](std::size_t i) {
        out[i].better = score_sequence(reference, pairs[i].prompt, pairs[i].better);
        out[i].worse = score_sequence(reference, pairs[i].prompt, pairs[i].worse);
    });
    return out;
}

namespace {

std::size_t label(std::span<const std::size_t> ids, std::size_t i) { return ids.empty() ? i : ids[i]; }

void check_inputs(std::span<const PreferencePair> pairs, std::span<const ReferenceScores> refs) {
    if (pairs.empty()) throw ConfigError("batch is empty");
    if (refs.size() != pairs.size()) throw ConfigError("reference scores do not match the batch");
}

LossOutput pair_loss(const PolicyParams& params, const PreferencePair& pair, const ReferenceScores& ref,
                     const LossConfig& cfg, std::size_t id) {
    const SequenceScore bw = score_sequence(params, pair.prompt, pair.better);
    const SequenceScore wl = score_sequence(params, pair.prompt, pair.worse);
    // a diverged policy shows up here first, before delta() would reject it
    if (!std::isfinite(bw.sum) || !std::isfinite(wl.sum) || !std::isfinite(ref.better.sum) ||
        !std::isfinite(ref.worse.sum))
        throw TrainingError("non-finite log-likelihood at pair " + std::to_string(id), id);
    return total_loss({bw, wl, ref.better, ref.worse}, cfg);
}

}  // namespace

BatchObjective batch_objective(const PolicyParams& params, std::span<const PreferencePair> pairs,
                               std::span<const ReferenceScores> refs, const LossConfig& cfg,
                               std::span<const std::size_t> pair_ids, Exec exec) {
    check_inputs(pairs, refs);
    const std::size_t n = pairs.size();
    std::vector<LossOutput> losses(n);
    std::vector<PolicyParams> grads(n);

    parallel_for(n, exec, [&](std::size_t i) {
        const std::size_t id = label(pair_ids, i);
        losses[i] = pair_loss(params, pairs[i], refs[i], cfg, id);
        if (!std::isfinite(losses[i].total))
            throw TrainingError("non-finite loss at pair " + std::to_string(id), id);
        grads[i] = PolicyParams(params.shape());
        accumulate_grad_logprob(params, pairs[i].prompt, pairs[i].better, losses[i].coeff_better, grads[i]);
        accumulate_grad_logprob(params, pairs[i].prompt, pairs[i].worse, losses[i].coeff_worse, grads[i]);
        if (!grads[i].all_finite())
            throw TrainingError("non-finite gradient at pair " + std::to_string(id), id);
    });

    BatchObjective out;
    out.grad = PolicyParams(params.shape());
    auto g = out.grad.values();
    for (std::size_t i = 0; i < n; ++i) {
        out.loss += losses[i].total;
        const auto gi = grads[i].values();
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += gi[k];
    }
    const double inv = 1.0 / static_cast<double>(n);
    out.loss *= inv;
    for (double& v : g) v *= inv;
    out.per_pair = std::move(losses);
    return out;
}

BatchObjective batch_objective_reference(const PolicyParams& params, std::span<const PreferencePair> pairs,
                                         std::span<const ReferenceScores> refs, const LossConfig& cfg) {
    check_inputs(pairs, refs);
    const double inv = 1.0 / static_cast<double>(pairs.size());
    BatchObjective out;
    out.grad = PolicyParams(params.shape());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const LossOutput l = pair_loss(params, pairs[i], refs[i], cfg, i);
        out.loss += l.total * inv;
        accumulate_grad_logprob(params, pairs[i].prompt, pairs[i].better, l.coeff_better * inv, out.grad);
        accumulate_grad_logprob(params, pairs[i].prompt, pairs[i].worse, l.coeff_worse * inv, out.grad);
        out.per_pair.push_back(l);
    }
    if (!std::isfinite(out.loss) || !out.grad.all_finite())
        throw TrainingError("non-finite objective in batch", 0);
    return out;
}

ValidationSummary validation_summary(const PolicyParams& params, std::span<const PreferencePair> pairs,
                                     const EntropyConfig& cfg, Exec exec) {
    if (pairs.empty()) throw ConfigError("validation split is empty");
    struct Row {
        double better = 0.0, worse = 0.0;
        EntropyProfile profile;
    };
    std::vector<Row> rows(pairs.size());
    parallel_for(pairs.size(), exec, [&](std::size_t i) {
        rows[i].better = score_sequence(params, pairs[i].prompt, pairs[i].better).mean;
        rows[i].worse = score_sequence(params, pairs[i].prompt, pairs[i].worse).mean;
        rows[i].profile = sequence_entropy_profile(params, pairs[i].prompt, pairs[i].better, cfg);
    });
    ValidationSummary s;
    for (const auto& r : rows) {
        s.better_mean_llh += r.better;
        s.worse_mean_llh += r.worse;
        s.topk_entropy += r.profile.entropy;
        s.topk_mass += r.profile.mass;
    }
    const auto n = static_cast<double>(pairs.size());
    s.better_mean_llh /= n;
    s.worse_mean_llh /= n;
    s.topk_entropy /= n;
    s.topk_mass /= n;
    return s;
}

}  // namespace daa
