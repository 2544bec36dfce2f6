#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "daa/corpus.hpp"
#include "daa/diagnostics.hpp"
#include "daa/losses.hpp"
#include "daa/parallel.hpp"
#include "daa/policy.hpp"

namespace daa {

/// Frozen reference log-likelihoods of one pair.
struct ReferenceScores {
    SequenceScore better;
    SequenceScore worse;
};

std::vector<ReferenceScores> reference_scores(const PolicyParams& reference,
                                              std::span<const PreferencePair> pairs, Exec exec = Exec::kParallel);

/// Mean objective over a batch and its exact parameter gradient.
struct BatchObjective {
    double loss = 0.0;
    PolicyParams grad;
    std::vector<LossOutput> per_pair;
};

/// Per-pair terms are computed independently (in parallel under
/// Exec::kParallel) and reduced in index order, so the result is identical
/// for any thread count. `pair_ids` label pairs in error messages.
///
/// Throws TrainingError naming the first pair with a non-finite loss or gradient.
BatchObjective batch_objective(const PolicyParams& params, std::span<const PreferencePair> pairs,
                               std::span<const ReferenceScores> refs, const LossConfig& cfg,
                               std::span<const std::size_t> pair_ids = {}, Exec exec = Exec::kParallel);

/// Straight-line serial version that accumulates into one gradient buffer.
/// Kept as the reference the parallel kernel is tested against.
BatchObjective batch_objective_reference(const PolicyParams& params, std::span<const PreferencePair> pairs,
                                         std::span<const ReferenceScores> refs, const LossConfig& cfg);

/// Validation-split likelihood and entropy aggregates (unweighted means over pairs).
struct ValidationSummary {
    double better_mean_llh = 0.0;
    double worse_mean_llh = 0.0;
    double topk_entropy = 0.0;
    double topk_mass = 0.0;
};

ValidationSummary validation_summary(const PolicyParams& params, std::span<const PreferencePair> pairs,
                                     const EntropyConfig& cfg, Exec exec = Exec::kParallel);

}  // namespace daa
