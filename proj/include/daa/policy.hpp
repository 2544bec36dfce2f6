#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "daa/corpus.hpp"

namespace daa {

struct PolicyShape {
    int vocab_size = 64;    // V
    int embed_dim = 16;     // d
    int hidden_dim = 32;    // h
    int context_order = 3;  // m
    TokenId pad_id = 0;
    TokenId bos_id = 1;
    TokenId eos_id = 2;

    std::size_t parameter_count() const;
    friend bool operator==(const PolicyShape&, const PolicyShape&) = default;
};

/// Fixed-order next-token model: the embeddings of the last m tokens are
/// concatenated, passed through one tanh layer, then a softmax over V.
///
/// All weights live in one flat buffer in the order embedding (V x d),
/// hidden weights (m*d x h), hidden bias (h), output weights (h x V),
/// output bias (V). The same type doubles as the gradient container.
class PolicyParams {
public:
    PolicyParams() = default;
    /// Zero-initialised.
    explicit PolicyParams(PolicyShape shape);

    /// Each weight drawn from uniform(-scale, scale).
    static PolicyParams random(PolicyShape shape, std::uint64_t seed, double scale = 0.1);

    const PolicyShape& shape() const noexcept { return shape_; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    std::span<double> embedding() noexcept { return block(0); }
    std::span<double> hidden_weights() noexcept { return block(1); }
    std::span<double> hidden_bias() noexcept { return block(2); }
    std::span<double> output_weights() noexcept { return block(3); }
    std::span<double> output_bias() noexcept { return block(4); }
    std::span<const double> embedding() const noexcept { return block(0); }
    std::span<const double> hidden_weights() const noexcept { return block(1); }
    std::span<const double> hidden_bias() const noexcept { return block(2); }
    std::span<const double> output_weights() const noexcept { return block(3); }
    std::span<const double> output_bias() const noexcept { return block(4); }

    void set_zero();
    bool all_finite() const;

    friend bool operator==(const PolicyParams&, const PolicyParams&) = default;

private:
    std::span<double> block(int i) noexcept;
    std::span<const double> block(int i) const noexcept;

    PolicyShape shape_;
    std::vector<double> data_;
    std::array<std::size_t, 6> offsets_{};
};

/// Immutable deep copy of the initial parameters.
class ReferenceSnapshot {
public:
    explicit ReferenceSnapshot(const PolicyParams& params) : params_(params) {}
    const PolicyParams& params() const noexcept { return params_; }

private:
    PolicyParams params_;
};

struct SequenceScore {
    std::vector<double> token_logprobs;  // natural log, one per completion token
    double sum = 0.0;
    double mean = 0.0;
    int count = 0;
};

/// Softmax over V given the context; missing history is filled with BOS and
/// PAD tokens are ignored. Throws RangeError for ids outside [0, V).
std::vector<double> next_token_dist(const PolicyParams& params, std::span<const TokenId> context);

/// Teacher-forced log-probabilities of `completion` after `prompt`.
SequenceScore score_sequence(const PolicyParams& params, std::span<const TokenId> prompt,
                             std::span<const TokenId> completion);

/// Exact gradient of the summed completion log-likelihood.
PolicyParams grad_logprob(const PolicyParams& params, std::span<const TokenId> prompt,
                          std::span<const TokenId> completion);

/// grad += scale * d(sum log p(completion | prompt))/d(params).
void accumulate_grad_logprob(const PolicyParams& params, std::span<const TokenId> prompt,
                             std::span<const TokenId> completion, double scale, PolicyParams& grad);

/// The next-token distribution ahead of each completion token.
std::vector<std::vector<double>> teacher_forced_dists(const PolicyParams& params,
                                                      std::span<const TokenId> prompt,
                                                      std::span<const TokenId> completion);

enum class DecodeMode { kSample, kGreedy };

struct GenerationConfig {
    double top_p = 0.75;
    double temperature = 0.5;
    int max_tokens = 64;
    DecodeMode mode = DecodeMode::kSample;

    void validate() const;
};

/// Indices of the nucleus: the shortest prefix of tokens sorted by
/// descending probability (ties by ascending id) whose mass reaches top_p.
std::vector<TokenId> nucleus(std::span<const double> dist, double top_p);

/// Temperature + nucleus sampling (or argmax in greedy mode). The returned
/// sequence includes the terminating EOS when one was produced.
TokenSeq sample(const PolicyParams& params, std::span<const TokenId> prompt,
                const GenerationConfig& cfg, std::uint64_t rng_seed);

/// Header line "V=<V> d=<d> h=<h> m=<m> version=1 pad=<id> bos=<id> eos=<id>", then the flat buffer as
/// little-endian IEEE-754 doubles.
void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params);
PolicyParams load_checkpoint(const std::filesystem::path& path);

}  // namespace daa
