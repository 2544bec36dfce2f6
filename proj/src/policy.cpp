#include "daa/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "daa/errors.hpp"
#include "daa/rng.hpp"

namespace daa {

std::size_t PolicyShape::parameter_count() const {
    const auto V = static_cast<std::size_t>(vocab_size), d = static_cast<std::size_t>(embed_dim),
               h = static_cast<std::size_t>(hidden_dim), m = static_cast<std::size_t>(context_order);
    return V * d + m * d * h + h + h * V + V;
}

PolicyParams::PolicyParams(PolicyShape shape) : shape_(shape) {
    if (shape.vocab_size < 4 || shape.embed_dim < 1 || shape.hidden_dim < 1 || shape.context_order < 1)
        throw ConfigError("invalid policy shape");
    for (TokenId id : {shape.pad_id, shape.bos_id, shape.eos_id})
        if (id < 0 || id >= shape.vocab_size) throw ConfigError("special token id outside vocabulary");
    const auto V = static_cast<std::size_t>(shape.vocab_size), d = static_cast<std::size_t>(shape.embed_dim),
               h = static_cast<std::size_t>(shape.hidden_dim),
               m = static_cast<std::size_t>(shape.context_order);
    const std::array<std::size_t, 5> sizes{V * d, m * d * h, h, h * V, V};
    offsets_[0] = 0;
    for (int i = 0; i < 5; ++i) offsets_[i + 1] = offsets_[i] + sizes[i];
    data_.assign(offsets_[5], 0.0);
}

PolicyParams PolicyParams::random(PolicyShape shape, std::uint64_t seed, double scale) {
    PolicyParams p(shape);
    Rng rng(seed);
    for (double& w : p.data_) w = rng.uniform(-scale, scale);
    return p;
}

std::span<double> PolicyParams::block(int i) noexcept {
    return std::span<double>(data_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

std::span<const double> PolicyParams::block(int i) const noexcept {
    return std::span<const double>(data_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

void PolicyParams::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

bool PolicyParams::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

// Activations of one forward pass; reused across positions.
struct Activations {
    std::vector<TokenId> context;  // m ids
    std::vector<double> x;         // m*d
    std::vector<double> z;         // h
    std::vector<double> logits;    // V
    std::vector<double> prob;      // V
    double log_norm = 0.0;         // max + log(sum exp(logits - max))

    explicit Activations(const PolicyShape& s)
        : context(static_cast<std::size_t>(s.context_order)),
          x(static_cast<std::size_t>(s.context_order * s.embed_dim)),
          z(static_cast<std::size_t>(s.hidden_dim)),
          logits(static_cast<std::size_t>(s.vocab_size)),
          prob(static_cast<std::size_t>(s.vocab_size)) {}
};

void check_ids(const PolicyShape& s, std::span<const TokenId> ids) {
    for (TokenId id : ids)
        if (id < 0 || id >= s.vocab_size)
            throw RangeError("token id " + std::to_string(id) + " outside [0, " +
                             std::to_string(s.vocab_size) + ")");
}

/// Prompt with PAD removed, followed by the completion.
std::vector<TokenId> stream(const PolicyShape& s, std::span<const TokenId> prompt,
                            std::span<const TokenId> completion) {
    check_ids(s, prompt);
    check_ids(s, completion);
    std::vector<TokenId> out;
    out.reserve(prompt.size() + completion.size());
    for (TokenId t : prompt)
        if (t != s.pad_id) out.push_back(t);
    out.insert(out.end(), completion.begin(), completion.end());
    return out;
}

/// Context ending just before stream[pos]; left-filled with BOS.
void gather(const PolicyShape& s, const std::vector<TokenId>& tokens, std::size_t pos, Activations& a) {
    const auto m = static_cast<std::size_t>(s.context_order);
    for (std::size_t k = 0; k < m; ++k) {
        // slot k holds token pos - m + k
        const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(pos) - static_cast<std::ptrdiff_t>(m) +
                                   static_cast<std::ptrdiff_t>(k);
        a.context[k] = idx < 0 ? s.bos_id : tokens[static_cast<std::size_t>(idx)];
    }
}

void forward(const PolicyParams& p, Activations& a, double temperature = 1.0) {
    const auto& s = p.shape();
    const auto V = static_cast<std::size_t>(s.vocab_size), d = static_cast<std::size_t>(s.embed_dim),
               h = static_cast<std::size_t>(s.hidden_dim), m = static_cast<std::size_t>(s.context_order);
    const auto emb = p.embedding();
    const auto w1 = p.hidden_weights();
    const auto b1 = p.hidden_bias();
    const auto w2 = p.output_weights();
    const auto b2 = p.output_bias();

    for (std::size_t k = 0; k < m; ++k) {
        const auto row = static_cast<std::size_t>(a.context[k]) * d;
        std::copy_n(emb.begin() + static_cast<std::ptrdiff_t>(row), d,
                    a.x.begin() + static_cast<std::ptrdiff_t>(k * d));
    }
    std::copy(b1.begin(), b1.end(), a.z.begin());
    for (std::size_t i = 0; i < m * d; ++i) {
        const double xi = a.x[i];
        const double* wr = w1.data() + i * h;
        for (std::size_t j = 0; j < h; ++j) a.z[j] += xi * wr[j];
    }
    for (auto& zj : a.z) zj = std::tanh(zj);

    std::copy(b2.begin(), b2.end(), a.logits.begin());
    for (std::size_t j = 0; j < h; ++j) {
        const double zj = a.z[j];
        const double* wr = w2.data() + j * V;
        for (std::size_t v = 0; v < V; ++v) a.logits[v] += zj * wr[v];
    }
    if (temperature != 1.0)
        for (auto& l : a.logits) l /= temperature;

    const double mx = *std::max_element(a.logits.begin(), a.logits.end());
    double total = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
        a.prob[v] = std::exp(a.logits[v] - mx);
        total += a.prob[v];
    }
    for (auto& pv : a.prob) pv /= total;
    a.log_norm = mx + std::log(total);
}

void backward(const PolicyParams& p, const Activations& a, TokenId target, double scale,
              PolicyParams& g, std::vector<double>& dlogits, std::vector<double>& dz,
              std::vector<double>& dx) {
    const auto& s = p.shape();
    const auto V = static_cast<std::size_t>(s.vocab_size), d = static_cast<std::size_t>(s.embed_dim),
               h = static_cast<std::size_t>(s.hidden_dim), m = static_cast<std::size_t>(s.context_order);
    const auto w1 = p.hidden_weights();
    const auto w2 = p.output_weights();
    auto gemb = g.embedding();
    auto gw1 = g.hidden_weights();
    auto gb1 = g.hidden_bias();
    auto gw2 = g.output_weights();
    auto gb2 = g.output_bias();

    // d log p(target) / d logits = onehot(target) - softmax
    for (std::size_t v = 0; v < V; ++v) dlogits[v] = -scale * a.prob[v];
    dlogits[static_cast<std::size_t>(target)] += scale;

    for (std::size_t v = 0; v < V; ++v) gb2[v] += dlogits[v];
    for (std::size_t j = 0; j < h; ++j) {
        const double zj = a.z[j];
        const double* wr = w2.data() + j * V;
        double* gr = gw2.data() + j * V;
        double acc = 0.0;
        for (std::size_t v = 0; v < V; ++v) {
            gr[v] += zj * dlogits[v];
            acc += wr[v] * dlogits[v];
        }
        dz[j] = acc * (1.0 - zj * zj);  // through tanh
    }
    for (std::size_t j = 0; j < h; ++j) gb1[j] += dz[j];
    for (std::size_t i = 0; i < m * d; ++i) {
        const double xi = a.x[i];
        const double* wr = w1.data() + i * h;
        double* gr = gw1.data() + i * h;
        double acc = 0.0;
        for (std::size_t j = 0; j < h; ++j) {
            gr[j] += xi * dz[j];
            acc += wr[j] * dz[j];
        }
        dx[i] = acc;
    }
    for (std::size_t k = 0; k < m; ++k) {
        double* row = gemb.data() + static_cast<std::size_t>(a.context[k]) * d;
        for (std::size_t e = 0; e < d; ++e) row[e] += dx[k * d + e];
    }
}

}  // namespace

std::vector<double> next_token_dist(const PolicyParams& params, std::span<const TokenId> context) {
    const auto tokens = stream(params.shape(), context, {});
    Activations a(params.shape());
    gather(params.shape(), tokens, tokens.size(), a);
    forward(params, a);
    return a.prob;
}

SequenceScore score_sequence(const PolicyParams& params, std::span<const TokenId> prompt,
                             std::span<const TokenId> completion) {
    if (completion.empty()) throw ConfigError("cannot score an empty completion");
    const auto tokens = stream(params.shape(), prompt, completion);
    const std::size_t start = tokens.size() - completion.size();
    Activations a(params.shape());
    SequenceScore score;
    score.token_logprobs.reserve(completion.size());
    for (std::size_t pos = start; pos < tokens.size(); ++pos) {
        gather(params.shape(), tokens, pos, a);
        forward(params, a);
        const double lp = a.logits[static_cast<std::size_t>(tokens[pos])] - a.log_norm;
        score.token_logprobs.push_back(lp);
    }
    for (double lp : score.token_logprobs) score.sum += lp;
    score.count = static_cast<int>(score.token_logprobs.size());
    score.mean = score.sum / score.count;
    return score;
}

std::vector<std::vector<double>> teacher_forced_dists(const PolicyParams& params,
                                                      std::span<const TokenId> prompt,
                                                      std::span<const TokenId> completion) {
    const auto tokens = stream(params.shape(), prompt, completion);
    const std::size_t start = tokens.size() - completion.size();
    Activations a(params.shape());
    std::vector<std::vector<double>> out;
    out.reserve(completion.size());
    for (std::size_t pos = start; pos < tokens.size(); ++pos) {
        gather(params.shape(), tokens, pos, a);
        forward(params, a);
        out.push_back(a.prob);
    }
    return out;
}

void accumulate_grad_logprob(const PolicyParams& params, std::span<const TokenId> prompt,
                             std::span<const TokenId> completion, double scale, PolicyParams& grad) {
    if (completion.empty()) throw ConfigError("cannot differentiate an empty completion");
    if (!(grad.shape() == params.shape())) throw ConfigError("gradient shape mismatch");
    const auto& s = params.shape();
    const auto tokens = stream(s, prompt, completion);
    const std::size_t start = tokens.size() - completion.size();
    Activations a(s);
    std::vector<double> dlogits(static_cast<std::size_t>(s.vocab_size)),
        dz(static_cast<std::size_t>(s.hidden_dim)),
        dx(static_cast<std::size_t>(s.context_order * s.embed_dim));
    for (std::size_t pos = start; pos < tokens.size(); ++pos) {
        gather(s, tokens, pos, a);
        forward(params, a);
        backward(params, a, tokens[pos], scale, grad, dlogits, dz, dx);
    }
}

PolicyParams grad_logprob(const PolicyParams& params, std::span<const TokenId> prompt,
                          std::span<const TokenId> completion) {
    PolicyParams grad(params.shape());
    accumulate_grad_logprob(params, prompt, completion, 1.0, grad);
    return grad;
}

void GenerationConfig::validate() const {
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must lie in (0, 1]");
    if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
    if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
}

std::vector<TokenId> nucleus(std::span<const double> dist, double top_p) {
    std::vector<TokenId> order(dist.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
        return dist[static_cast<std::size_t>(a)] > dist[static_cast<std::size_t>(b)];
    });
    double mass = 0.0;
    std::size_t keep = 0;
    while (keep < order.size()) {
        mass += dist[static_cast<std::size_t>(order[keep])];
        ++keep;
        if (mass >= top_p) break;
    }
    order.resize(keep);
    return order;
}

TokenSeq sample(const PolicyParams& params, std::span<const TokenId> prompt,
                const GenerationConfig& cfg, std::uint64_t rng_seed) {
    cfg.validate();
    const auto& s = params.shape();
    auto tokens = stream(s, prompt, {});
    const std::size_t start = tokens.size();
    Activations a(s);
    Rng rng(rng_seed);

    for (int step = 0; step < cfg.max_tokens; ++step) {
        gather(s, tokens, tokens.size(), a);
        TokenId next;
        if (cfg.mode == DecodeMode::kGreedy) {
            forward(params, a);
            next = static_cast<TokenId>(std::max_element(a.prob.begin(), a.prob.end()) - a.prob.begin());
        } else {
            forward(params, a, cfg.temperature);
            const auto support = nucleus(a.prob, cfg.top_p);
            double mass = 0.0;
            for (TokenId t : support) mass += a.prob[static_cast<std::size_t>(t)];
            double u = rng.uniform() * mass;
            next = support.back();
            for (TokenId t : support) {
                u -= a.prob[static_cast<std::size_t>(t)];
                if (u < 0.0) {
                    next = t;
                    break;
                }
            }
        }
        tokens.push_back(next);
        if (next == s.eos_id) break;
    }
    return TokenSeq(tokens.begin() + static_cast<std::ptrdiff_t>(start), tokens.end());
}

namespace {

void write_le(std::ostream& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(bytes, 8);
}

double read_le(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write checkpoint " + path.string(), 0);
    const auto& s = params.shape();
    out << "V=" << s.vocab_size << " d=" << s.embed_dim << " h=" << s.hidden_dim
        << " m=" << s.context_order << " version=1 pad=" << s.pad_id << " bos=" << s.bos_id
        << " eos=" << s.eos_id << '\n';
    for (double v : params.values()) write_le(out, v);
    if (!out) throw ParseError("failed writing checkpoint " + path.string(), 0);
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open checkpoint " + path.string(), 0);
    std::string header;
    std::getline(in, header);
    PolicyShape s;
    int version = 0;
    std::istringstream fields(header);
    std::string kv;
    while (fields >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ParseError("bad checkpoint header field '" + kv + "'", 1);
        const auto key = kv.substr(0, eq);
        int value = 0;
        try {
            value = std::stoi(kv.substr(eq + 1));
        } catch (const std::exception&) {
            throw ParseError("bad checkpoint header value '" + kv + "'", 1);
        }
        if (key == "V") s.vocab_size = value;
        else if (key == "d") s.embed_dim = value;
        else if (key == "h") s.hidden_dim = value;
        else if (key == "m") s.context_order = value;
        else if (key == "version") version = value;
        else if (key == "pad") s.pad_id = value;
        else if (key == "bos") s.bos_id = value;
        else if (key == "eos") s.eos_id = value;
        else throw ParseError("unknown checkpoint header key '" + key + "'", 1);
    }
    if (version != 1) throw ParseError("unsupported checkpoint version " + std::to_string(version), 1);
    PolicyParams params(s);
    for (double& v : params.values()) v = read_le(in);
    if (!in) throw ParseError("truncated checkpoint " + path.string(), 0);
    return params;
}

}  // namespace daa
