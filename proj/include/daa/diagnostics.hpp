#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "daa/policy.hpp"

namespace daa {

/// One evaluation snapshot. Likelihood fields are per-token means in nats.
struct MetricRecord {
    std::int64_t step = 0;
    double better_mean_llh = 0.0;
    double worse_mean_llh = 0.0;
    double margin = 0.0;
    double topk_entropy = 0.0;
    double topk_mass = 0.0;
    double ead = 0.0;
    double win_prob = 0.5;
    double train_loss = 0.0;
    double mean_output_tokens = 0.0;

    friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

/// One JSON object per line; doubles are written with round-trip precision.
std::string to_log_line(const MetricRecord& r);
/// Throws ParseError; `line` is used only for the message.
MetricRecord parse_log_line(std::string_view text, std::size_t line = 0);
std::vector<MetricRecord> read_metric_log(const std::filesystem::path& path);

struct EntropyConfig {
    int k = 10;
    double base = 2.0;
    bool normalise = true;
};

/// Entropy of the renormalised k most probable tokens (ties by ascending
/// id), divided by log_b(k) when normalising.
double topk_entropy(std::span<const double> dist, const EntropyConfig& cfg);

/// Sum of the k largest probabilities.
double topk_mass(std::span<const double> dist, int k);

struct EntropyProfile {
    double entropy = 0.0;
    double mass = 0.0;
};

/// Mean top-k entropy/mass over the teacher-forced next-token
/// distributions of `completion`.
EntropyProfile sequence_entropy_profile(const PolicyParams& params, std::span<const TokenId> prompt,
                                        std::span<const TokenId> completion, const EntropyConfig& cfg);

/// Expected number of distinct values among `draws` uniform draws from
/// `universe` values: U * (1 - ((U-1)/U)^C).
double expected_distinct(double universe, double draws);

/// Expectation-adjusted distinct n-grams, averaged over n = 1..5 (orders
/// with no n-gram in any output are left out of the average).
double ead_diversity(const std::vector<TokenSeq>& outputs, int vocab_size);

/// EAD for a single n.
double ead_n(const std::vector<TokenSeq>& outputs, int vocab_size, int n);

/// sigma(r_v - r_c).
double win_probability(double r_v, double r_c);

/// Lowercase, strip punctuation, drop articles (a/an/the), split on whitespace.
std::vector<std::string> normalise_answer(std::string_view text);

/// Max over references of the multiset word-overlap F1.
double word_f1(std::string_view prediction, std::span<const std::string> references);

struct Correlation {
    double r = 0.0;
    double p_value = 1.0;
};

/// Pearson r with a two-sided t-test on n-2 degrees of freedom.
/// Throws DegenerateInputError on constant series or fewer than 3 points.
Correlation pearson_r(std::span<const double> xs, std::span<const double> ys);

struct ScalingFit {
    double linear_rmse = 0.0;
    double quadratic_rmse = 0.0;
    std::vector<double> linear_coeffs;     // c0, c1
    std::vector<double> quadratic_coeffs;  // c0, c1, c2
    double y_rms = 0.0;                    // sets the scale of "exact" below

    /// Relative RMSE reduction of the quadratic fit; 0 when the linear fit is
    /// exact to rounding (RMSE <= 1e-12 * y_rms), where the ratio is noise.
    double relative_improvement() const;
};

/// Least-squares polynomial fits of degree 1 and 2 via the normal equations.
/// Throws DegenerateInputError for fewer than 4 points or a rank-deficient design.
ScalingFit fit_scaling(std::span<const double> xs, std::span<const double> ys);

}  // namespace daa
