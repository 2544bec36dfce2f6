#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "daa/policy.hpp"

namespace daa {

enum class Method { kDpo, kIpo, kHinge };
enum class Aggregation { kSum, kMean };

std::string_view to_string(Method m);
std::string_view to_string(Aggregation a);
Method parse_method(std::string_view s);
Aggregation parse_aggregation(std::string_view s);

struct LossConfig {
    Method method = Method::kDpo;
    double beta = 0.1;
    double tau = 0.1;
    double gamma = 1.0;
    double alpha = 0.0;
    double lambda_nll = 0.0;
    bool smaug_enabled = false;
    /// Unset: SUM for DPO/IPO, MEAN for hinge.
    std::optional<Aggregation> aggregation;
    /// Unset: follows the method's aggregation.
    std::optional<Aggregation> nll_aggregation;

    Aggregation effective_aggregation() const;
    Aggregation effective_nll_aggregation() const;
    void validate() const;
};

/// Scalar loss together with its derivative.
struct ScalarLoss {
    double loss = 0.0;
    double derivative = 0.0;
};

/// Hinge loss with partials wrt the policy better/worse log-likelihoods.
struct HingeLoss {
    double loss = 0.0;
    double d_better = 0.0;
    double d_worse = 0.0;
};

/// Per-pair objective. Partials are wrt the four aggregated log-likelihoods;
/// `coeff_better`/`coeff_worse` are the same derivatives re-expressed wrt the
/// *summed* policy log-likelihoods, ready to scale grad_logprob.
struct LossOutput {
    double total = 0.0;
    double d_better_policy = 0.0;
    double d_worse_policy = 0.0;
    double d_better_reference = 0.0;  // always 0: the reference is frozen
    double d_worse_reference = 0.0;   // always 0
    double delta = 0.0;               // unmodified by the Smaug term
    bool margin_correct = false;      // delta > 0
    double coeff_better = 0.0;
    double coeff_worse = 0.0;
};

/// log sigma(x), overflow-safe.
double log_sigmoid(double x);
/// sigma(x), overflow-safe.
double sigmoid(double x);
/// log(1 + exp(x)), overflow-safe.
double softplus(double x);

/// (lw_pol - lw_ref) - (ll_pol - ll_ref). Throws ConfigError on non-finite input.
double delta(double lw_pol, double ll_pol, double lw_ref, double ll_ref);

/// -log sigma(beta * delta) and its derivative wrt delta.
ScalarLoss dpo_loss(double delta, double beta);

/// (tau * delta - 1/2)^2 and its derivative wrt delta.
ScalarLoss ipo_loss(double delta, double tau);

/// max(0, gamma - (lw - ll)) + alpha * log(1 + exp(1 - (lw - lw_ref))).
/// The subgradient at the kink is 0.
HingeLoss hinge_loss(double lw_pol, double ll_pol, double lw_ref, double gamma, double alpha);

/// -log-likelihood of the better completion. `lw_pol_sum` is the summed
/// log-likelihood; MEAN divides by `length`. The derivative is wrt the
/// aggregated log-likelihood, hence always -1.
ScalarLoss nll_loss(double lw_pol_sum, int length, Aggregation aggregation);

/// -max(0, lw_pol - ll_pol).
double smaug_term(double lw_pol, double ll_pol);

struct PairScores {
    const SequenceScore& better_policy;
    const SequenceScore& worse_policy;
    const SequenceScore& better_reference;
    const SequenceScore& worse_reference;
};

/// Method loss + lambda * NLL for one pair (the batch objective is the mean).
LossOutput total_loss(const PairScores& scores, const LossConfig& cfg);

}  // namespace daa
