#include "daa/losses.hpp"

#include <cmath>
#include <string>

#include "daa/errors.hpp"

namespace daa {

std::string_view to_string(Method m) {
    switch (m) {
        case Method::kDpo: return "dpo";
        case Method::kIpo: return "ipo";
        case Method::kHinge: return "hinge";
    }
    return "?";
}

std::string_view to_string(Aggregation a) { return a == Aggregation::kSum ? "sum" : "mean"; }

Method parse_method(std::string_view s) {
    if (s == "dpo") return Method::kDpo;
    if (s == "ipo") return Method::kIpo;
    if (s == "hinge") return Method::kHinge;
    throw ConfigError("unknown method '" + std::string(s) + "'");
}

Aggregation parse_aggregation(std::string_view s) {
    if (s == "sum") return Aggregation::kSum;
    if (s == "mean") return Aggregation::kMean;
    throw ConfigError("unknown aggregation '" + std::string(s) + "'");
}

Aggregation LossConfig::effective_aggregation() const {
    if (aggregation) return *aggregation;
    return method == Method::kHinge ? Aggregation::kMean : Aggregation::kSum;
}

Aggregation LossConfig::effective_nll_aggregation() const {
    return nll_aggregation ? *nll_aggregation : effective_aggregation();
}

void LossConfig::validate() const {
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
    if (!(lambda_nll >= 0.0)) throw ConfigError("lambda_nll must be non-negative");
}

double log_sigmoid(double x) {
    // log sigma(x) = -log(1 + e^-x)
    return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double delta(double lw_pol, double ll_pol, double lw_ref, double ll_ref) {
    if (!std::isfinite(lw_pol) || !std::isfinite(ll_pol) || !std::isfinite(lw_ref) || !std::isfinite(ll_ref))
        throw ConfigError("delta: non-finite log-likelihood");
    return (lw_pol - lw_ref) - (ll_pol - ll_ref);
}

ScalarLoss dpo_loss(double delta, double beta) {
    const double z = beta * delta;
    return {-log_sigmoid(z), -beta * sigmoid(-z)};
}

ScalarLoss ipo_loss(double delta, double tau) {
    const double r = tau * delta - 0.5;
    return {r * r, 2.0 * tau * r};
}

HingeLoss hinge_loss(double lw_pol, double ll_pol, double lw_ref, double gamma, double alpha) {
    HingeLoss out;
    const double slack = gamma - (lw_pol - ll_pol);
    if (slack > 0.0) {
        out.loss = slack;
        out.d_better = -1.0;
        out.d_worse = 1.0;
    }
    if (alpha > 0.0) {
        const double z = 1.0 - (lw_pol - lw_ref);
        out.loss += alpha * softplus(z);
        out.d_better -= alpha * sigmoid(z);
    }
    return out;
}

ScalarLoss nll_loss(double lw_pol_sum, int length, Aggregation aggregation) {
    if (length < 1) throw ConfigError("nll_loss: length must be >= 1");
    const double agg = aggregation == Aggregation::kSum ? lw_pol_sum : lw_pol_sum / length;
    return {-agg, -1.0};
}

double smaug_term(double lw_pol, double ll_pol) { return -std::max(0.0, lw_pol - ll_pol); }

namespace {

double aggregate(const SequenceScore& s, Aggregation a) { return a == Aggregation::kSum ? s.sum : s.mean; }

// d(aggregated under `to`) / d(aggregated under `from`) for one sequence.
double rescale(Aggregation from, Aggregation to, int length) {
    if (from == to) return 1.0;
    return to == Aggregation::kMean ? 1.0 / length : static_cast<double>(length);
}

}  // namespace

LossOutput total_loss(const PairScores& scores, const LossConfig& cfg) {
    if (scores.better_policy.count != scores.better_reference.count ||
        scores.worse_policy.count != scores.worse_reference.count)
        throw ConfigError("policy and reference scores cover different sequences");
    if (scores.better_policy.count < 1 || scores.worse_policy.count < 1)
        throw ConfigError("empty sequence score");

    const Aggregation agg = cfg.effective_aggregation();
    const double lw = aggregate(scores.better_policy, agg);
    const double ll = aggregate(scores.worse_policy, agg);
    const double lw_ref = aggregate(scores.better_reference, agg);
    const double ll_ref = aggregate(scores.worse_reference, agg);

    LossOutput out;
    out.delta = delta(lw, ll, lw_ref, ll_ref);
    out.margin_correct = out.delta > 0.0;

    switch (cfg.method) {
        case Method::kDpo:
        case Method::kIpo: {
            double eff = out.delta;
            double d_eff_w = 1.0, d_eff_l = -1.0;
            if (cfg.smaug_enabled) {
                eff += smaug_term(lw, ll);
                if (lw - ll > 0.0) {
                    d_eff_w -= 1.0;
                    d_eff_l += 1.0;
                }
            }
            const ScalarLoss m = cfg.method == Method::kDpo ? dpo_loss(eff, cfg.beta) : ipo_loss(eff, cfg.tau);
            out.total = m.loss;
            out.d_better_policy = m.derivative * d_eff_w;
            out.d_worse_policy = m.derivative * d_eff_l;
            break;
        }
        case Method::kHinge: {
            const HingeLoss h = hinge_loss(lw, ll, lw_ref, cfg.gamma, cfg.alpha);
            out.total = h.loss;
            out.d_better_policy = h.d_better;
            out.d_worse_policy = h.d_worse;
            break;
        }
    }

    const Aggregation nll_agg = cfg.effective_nll_aggregation();
    const int len_w = scores.better_policy.count;
    const ScalarLoss nll = nll_loss(scores.better_policy.sum, len_w, nll_agg);
    out.total += cfg.lambda_nll * nll.loss;
    out.d_better_policy += cfg.lambda_nll * nll.derivative * rescale(agg, nll_agg, len_w);

    out.coeff_better = out.d_better_policy * rescale(Aggregation::kSum, agg, len_w);
    out.coeff_worse = out.d_worse_policy * rescale(Aggregation::kSum, agg, scores.worse_policy.count);
    return out;
}

}  // namespace daa
