#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "daa/corpus.hpp"
#include "daa/policy.hpp"

namespace daa {

/// Scores a completion for a prompt. Implementations must be deterministic
/// and return finite values; they may be called concurrently.
class RewardOracle {
public:
    virtual ~RewardOracle() = default;
    virtual double score(const TokenSeq& prompt, const TokenSeq& completion) const = 0;
};

/// Wraps a callable; handy for tests and external scorers.
class FunctionReward final : public RewardOracle {
public:
    using Fn = std::function<double(const TokenSeq&, const TokenSeq&)>;
    explicit FunctionReward(Fn fn) : fn_(std::move(fn)) {}
    double score(const TokenSeq& prompt, const TokenSeq& completion) const override { return fn_(prompt, completion); }

private:
    Fn fn_;
};

/// Pattern adherence minus a length penalty.
///
/// score = #{i < L : completion[i] == target[i]} - penalty * max(0, len - L)
/// where `len` counts tokens before the first EOS and L is the task's target
/// length. An exact match of length L scores L, the maximum.
class SyntheticReward final : public RewardOracle {
public:
    explicit SyntheticReward(SyntheticTask task, double length_penalty = 0.5)
        : task_(std::move(task)), length_penalty_(length_penalty) {}
    double score(const TokenSeq& prompt, const TokenSeq& completion) const override;
    const SyntheticTask& task() const noexcept { return task_; }

private:
    SyntheticTask task_;
    double length_penalty_;
};

std::unique_ptr<RewardOracle> synthetic_reward(const SyntheticTask& task);

struct EvalReport {
    double mean_win_prob = 0.5;
    std::vector<double> win_probs;
    double ead = 0.0;
    double mean_output_tokens = 0.0;
    std::optional<double> mean_word_f1;
    std::vector<TokenSeq> policy_outputs;      // EOS stripped
    std::vector<TokenSeq> competitor_outputs;  // EOS stripped
};

/// One paired-seed sample per prompt from each model, scored by `reward`.
/// Throws HarnessError naming the prompt whose score failed.
EvalReport evaluate_head_to_head(const PolicyParams& policy, const PolicyParams& competitor,
                                 const std::vector<TokenSeq>& prompts, const RewardOracle& reward,
                                 const GenerationConfig& gen, std::uint64_t seed);

struct QaItem {
    std::string question;
    std::vector<std::string> answers;
};

/// Greedy-decodes each question and returns the mean word-level F1.
double evaluate_factuality(const PolicyParams& policy, const std::vector<QaItem>& items, const Vocab& vocab,
                           int max_tokens = 64);

/// One prompt per line.
std::vector<TokenSeq> load_prompts(const std::filesystem::path& path, const Vocab& vocab);
/// `question` / `answers` JSON records, one per line.
std::vector<QaItem> load_qa(const std::filesystem::path& path);

/// Drops everything from the first EOS on.
TokenSeq strip_eos(const TokenSeq& seq, TokenId eos);

}  // namespace daa
