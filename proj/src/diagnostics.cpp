#include "daa/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "daa/errors.hpp"
#include "daa/losses.hpp"

namespace daa {

using json = nlohmann::json;

namespace {

constexpr std::array<const char*, 10> kMetricFields = {
    "step", "better_mean_llh", "worse_mean_llh", "margin", "topk_entropy",
    "topk_mass", "ead", "win_prob", "train_loss", "mean_output_tokens"};

}  // namespace

std::string to_log_line(const MetricRecord& r) {
    json j;
    j["step"] = r.step;
    j["better_mean_llh"] = r.better_mean_llh;
    j["worse_mean_llh"] = r.worse_mean_llh;
    j["margin"] = r.margin;
    j["topk_entropy"] = r.topk_entropy;
    j["topk_mass"] = r.topk_mass;
    j["ead"] = r.ead;
    j["win_prob"] = r.win_prob;
    j["train_loss"] = r.train_loss;
    j["mean_output_tokens"] = r.mean_output_tokens;
    return j.dump();
}

MetricRecord parse_log_line(std::string_view text, std::size_t line) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed metric record: ") + e.what(), line);
    }
    if (!j.is_object()) throw ParseError("metric record is not an object", line);
    for (const char* f : kMetricFields) {
        auto it = j.find(f);
        if (it == j.end()) throw ParseError(std::string("metric record lacks '") + f + "'", line);
        if (!it->is_number()) throw ParseError(std::string("metric field '") + f + "' is not a number", line);
    }
    MetricRecord r;
    r.step = j["step"].get<std::int64_t>();
    r.better_mean_llh = j["better_mean_llh"].get<double>();
    r.worse_mean_llh = j["worse_mean_llh"].get<double>();
    r.margin = j["margin"].get<double>();
    r.topk_entropy = j["topk_entropy"].get<double>();
    r.topk_mass = j["topk_mass"].get<double>();
    r.ead = j["ead"].get<double>();
    r.win_prob = j["win_prob"].get<double>();
    r.train_loss = j["train_loss"].get<double>();
    r.mean_output_tokens = j["mean_output_tokens"].get<double>();
    return r;
}

std::vector<MetricRecord> read_metric_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open metric log " + path.string(), 0);
    std::vector<MetricRecord> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_log_line(line, n));
    }
    return out;
}

namespace {

void check_k(std::size_t vocab, int k) {
    if (k < 1 || static_cast<std::size_t>(k) > vocab)
        throw ConfigError("top-k size " + std::to_string(k) + " outside [1, " + std::to_string(vocab) + "]");
}

void check_distribution(std::span<const double> dist) {
    double total = 0.0;
    for (double p : dist) {
        if (!(p >= 0.0)) throw ConfigError("distribution has a negative or NaN entry");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("distribution does not sum to 1");
}

/// The k largest probabilities, descending; ties resolved by ascending id.
std::vector<double> top_k(std::span<const double> dist, int k) {
    std::vector<std::size_t> idx(dist.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](std::size_t a, std::size_t b) {
        return dist[a] != dist[b] ? dist[a] > dist[b] : a < b;
    });
    std::vector<double> out(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = dist[idx[static_cast<std::size_t>(i)]];
    return out;
}

}  // namespace

double topk_entropy(std::span<const double> dist, const EntropyConfig& cfg) {
    if (cfg.k < 2) throw ConfigError("entropy top-k must be >= 2");
    check_k(dist.size(), cfg.k);
    if (!(cfg.base > 0.0 && cfg.base != 1.0)) throw ConfigError("entropy log base must be positive and != 1");
    check_distribution(dist);

    const auto top = top_k(dist, cfg.k);
    const double mass = std::accumulate(top.begin(), top.end(), 0.0);
    const double log_k = std::log(static_cast<double>(cfg.k)) / std::log(cfg.base);

    // The extremes are returned exactly: all top-k equal, or a single carrier.
    if (top.front() == top.back()) return cfg.normalise ? 1.0 : log_k;
    if (top[1] == 0.0) return 0.0;

    double h = 0.0;
    for (double p : top) {
        const double q = p / mass;
        if (q > 0.0) h -= q * std::log(q);
    }
    h /= std::log(cfg.base);
    if (!cfg.normalise) return std::max(h, 0.0);
    return std::clamp(h / log_k, 0.0, 1.0);
}

double topk_mass(std::span<const double> dist, int k) {
    check_k(dist.size(), k);
    check_distribution(dist);
    const auto top = top_k(dist, k);
    return std::accumulate(top.begin(), top.end(), 0.0);
}

EntropyProfile sequence_entropy_profile(const PolicyParams& params, std::span<const TokenId> prompt,
                                        std::span<const TokenId> completion, const EntropyConfig& cfg) {
    if (completion.empty()) throw ConfigError("entropy profile needs a non-empty completion");
    const auto dists = teacher_forced_dists(params, prompt, completion);
    EntropyProfile out;
    for (const auto& d : dists) {
        out.entropy += topk_entropy(d, cfg);
        out.mass += topk_mass(d, cfg.k);
    }
    out.entropy /= static_cast<double>(dists.size());
    out.mass /= static_cast<double>(dists.size());
    return out;
}

double expected_distinct(double universe, double draws) {
    if (draws <= 0.0) return 0.0;
    return universe * -std::expm1(draws * std::log1p(-1.0 / universe));
}

double ead_n(const std::vector<TokenSeq>& outputs, int vocab_size, int n) {
    std::unordered_set<std::string> distinct;
    std::size_t total = 0;
    for (const auto& out : outputs) {
        if (out.size() < static_cast<std::size_t>(n)) continue;
        for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= out.size(); ++i) {
            distinct.emplace(reinterpret_cast<const char*>(out.data() + i), sizeof(TokenId) * static_cast<std::size_t>(n));
            ++total;
        }
    }
    if (total == 0) return 0.0;
    const double c = static_cast<double>(total);
    const double universe = std::min(std::pow(static_cast<double>(vocab_size), n), c * 1e6);
    return static_cast<double>(distinct.size()) / expected_distinct(universe, c);
}

double ead_diversity(const std::vector<TokenSeq>& outputs, int vocab_size) {
    if (vocab_size < 1) throw ConfigError("vocab_size must be positive");
    const bool any = std::any_of(outputs.begin(), outputs.end(), [](const TokenSeq& s) { return !s.empty(); });
    if (!any) throw ConfigError("EAD needs at least one non-empty output");
    double sum = 0.0;
    int orders = 0;
    for (int n = 1; n <= 5; ++n) {
        const bool has = std::any_of(outputs.begin(), outputs.end(),
                                     [n](const TokenSeq& s) { return s.size() >= static_cast<std::size_t>(n); });
        if (!has) continue;
        sum += ead_n(outputs, vocab_size, n);
        ++orders;
    }
    return sum / orders;
}

double win_probability(double r_v, double r_c) { return sigmoid(r_v - r_c); }

std::vector<std::string> normalise_answer(std::string_view text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::ispunct(c)) continue;
        cleaned += static_cast<char>(std::tolower(c));
    }
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < cleaned.size()) {
        while (i < cleaned.size() && std::isspace(static_cast<unsigned char>(cleaned[i]))) ++i;
        std::size_t j = i;
        while (j < cleaned.size() && !std::isspace(static_cast<unsigned char>(cleaned[j]))) ++j;
        if (j > i) {
            std::string w = cleaned.substr(i, j - i);
            if (w != "a" && w != "an" && w != "the") words.push_back(std::move(w));
        }
        i = j;
    }
    return words;
}

namespace {

double f1_single(const std::vector<std::string>& pred, const std::vector<std::string>& ref) {
    if (pred.empty() || ref.empty()) return pred.empty() && ref.empty() ? 1.0 : 0.0;
    std::unordered_map<std::string, int> counts;
    for (const auto& w : ref) ++counts[w];
    int common = 0;
    for (const auto& w : pred) {
        auto it = counts.find(w);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(pred.size());
    const double recall = static_cast<double>(common) / static_cast<double>(ref.size());
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

double word_f1(std::string_view prediction, std::span<const std::string> references) {
    if (references.empty()) throw ConfigError("word_f1 needs at least one reference");
    const auto pred = normalise_answer(prediction);
    double best = 0.0;
    for (const auto& r : references) best = std::max(best, f1_single(pred, normalise_answer(r)));
    return best;
}

Correlation pearson_r(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ConfigError("pearson_r: series differ in length");
    const std::size_t n = xs.size();
    if (n < 3) throw DegenerateInputError("pearson_r needs at least 3 points");
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DegenerateInputError("pearson_r: constant series");

    Correlation c;
    c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double dof = static_cast<double>(n - 2);
    const double one_minus_r2 = (1.0 - c.r) * (1.0 + c.r);
    if (one_minus_r2 <= 0.0) {
        c.p_value = 0.0;
        return c;
    }
    const double t = c.r * std::sqrt(dof / one_minus_r2);
    const boost::math::students_t dist(dof);
    c.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
    return c;
}

double ScalingFit::relative_improvement() const {
    if (linear_rmse <= 1e-12 * y_rms) return 0.0;
    return (linear_rmse - quadratic_rmse) / linear_rmse;
}

namespace {

/// Solves the normal equations of a polynomial fit in standardised x.
/// Returns coefficients in the standardised variable.
std::vector<double> normal_equations(std::span<const double> u, std::span<const double> ys, int degree) {
    const auto p = static_cast<std::size_t>(degree + 1);
    std::vector<double> a(p * p, 0.0), b(p, 0.0);
    for (std::size_t i = 0; i < u.size(); ++i) {
        std::vector<double> row(p, 1.0);
        for (std::size_t j = 1; j < p; ++j) row[j] = row[j - 1] * u[i];
        for (std::size_t r = 0; r < p; ++r) {
            b[r] += row[r] * ys[i];
            for (std::size_t c = 0; c < p; ++c) a[r * p + c] += row[r] * row[c];
        }
    }
    double scale = 0.0;
    for (std::size_t r = 0; r < p; ++r) scale = std::max(scale, std::abs(a[r * p + r]));

    // Gaussian elimination with partial pivoting.
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < p; ++r)
            if (std::abs(a[r * p + col]) > std::abs(a[piv * p + col])) piv = r;
        if (std::abs(a[piv * p + col]) <= 1e-10 * scale)
            throw DegenerateInputError("fit_scaling: rank-deficient design");
        if (piv != col) {
            for (std::size_t c = 0; c < p; ++c) std::swap(a[col * p + c], a[piv * p + c]);
            std::swap(b[col], b[piv]);
        }
        for (std::size_t r = col + 1; r < p; ++r) {
            const double f = a[r * p + col] / a[col * p + col];
            for (std::size_t c = col; c < p; ++c) a[r * p + c] -= f * a[col * p + c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> coef(p);
    for (std::size_t r = p; r-- > 0;) {
        double acc = b[r];
        for (std::size_t c = r + 1; c < p; ++c) acc -= a[r * p + c] * coef[c];
        coef[r] = acc / a[r * p + r];
    }
    return coef;
}

double rmse(std::span<const double> u, std::span<const double> ys, const std::vector<double>& coef) {
    double ss = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double pred = 0.0;
        for (std::size_t j = coef.size(); j-- > 0;) pred = pred * u[i] + coef[j];
        const double r = ys[i] - pred;
        ss += r * r;
    }
    return std::sqrt(ss / static_cast<double>(u.size()));
}

}  // namespace

ScalingFit fit_scaling(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ConfigError("fit_scaling: series differ in length");
    const std::size_t n = xs.size();
    if (n < 4) throw DegenerateInputError("fit_scaling needs at least 4 points");

    // Standardise x so the normal equations stay well conditioned.
    const double mu = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double x : xs) var += (x - mu) * (x - mu);
    const double sd = std::sqrt(var / static_cast<double>(n));
    if (sd == 0.0) throw DegenerateInputError("fit_scaling: constant x");
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = (xs[i] - mu) / sd;

    const auto lin = normal_equations(u, ys, 1);
    const auto quad = normal_equations(u, ys, 2);

    ScalingFit fit;
    fit.linear_rmse = rmse(u, ys, lin);
    fit.quadratic_rmse = rmse(u, ys, quad);
    double ss = 0.0;
    for (double y : ys) ss += y * y;
    fit.y_rms = std::sqrt(ss / static_cast<double>(n));
    // Back to the original variable: u = (x - mu) / sd.
    fit.linear_coeffs = {lin[0] - lin[1] * mu / sd, lin[1] / sd};
    fit.quadratic_coeffs = {quad[0] - quad[1] * mu / sd + quad[2] * mu * mu / (sd * sd),
                            quad[1] / sd - 2.0 * quad[2] * mu / (sd * sd), quad[2] / (sd * sd)};
    return fit;
}

}  // namespace daa
