#include "daa/harness.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "daa/diagnostics.hpp"
#include "daa/errors.hpp"
#include "daa/parallel.hpp"
#include "daa/rng.hpp"

namespace daa {

using json = nlohmann::json;

TokenSeq strip_eos(const TokenSeq& seq, TokenId eos) {
    TokenSeq out;
    for (TokenId t : seq) {
        if (t == eos) break;
        out.push_back(t);
    }
    return out;
}

double SyntheticReward::score(const TokenSeq& prompt, const TokenSeq& completion) const {
    const TokenSeq target = task_.target_for(prompt);
    const TokenSeq body = strip_eos(completion, SyntheticTask::kEos);
    double matches = 0.0;
    for (std::size_t i = 0; i < body.size() && i < target.size(); ++i)
        if (body[i] == target[i]) matches += 1.0;
    const auto excess = static_cast<double>(body.size()) - static_cast<double>(task_.target_length);
    return matches - length_penalty_ * std::max(0.0, excess);
}

std::unique_ptr<RewardOracle> synthetic_reward(const SyntheticTask& task) {
    return std::make_unique<SyntheticReward>(task);
}

EvalReport evaluate_head_to_head(const PolicyParams& policy, const PolicyParams& competitor,
                                 const std::vector<TokenSeq>& prompts, const RewardOracle& reward,
                                 const GenerationConfig& gen, std::uint64_t seed) {
    if (prompts.empty()) throw ConfigError("head-to-head evaluation needs at least one prompt");
    gen.validate();
    const auto n = prompts.size();
    EvalReport report;
    report.win_probs.resize(n);
    report.policy_outputs.resize(n);
    report.competitor_outputs.resize(n);

    std::vector<double> rv(n), rc(n);
    std::vector<int> failed(n, 0);
    parallel_for(n, Exec::kParallel, [&](std::size_t i) {
        const std::uint64_t s = mix_seed(seed, i);
        const TokenSeq out_v = sample(policy, prompts[i], gen, s);
        const TokenSeq out_c = sample(competitor, prompts[i], gen, s);
        try {
            rv[i] = reward.score(prompts[i], out_v);
            rc[i] = reward.score(prompts[i], out_c);
            if (!std::isfinite(rv[i]) || !std::isfinite(rc[i])) failed[i] = 1;
        } catch (...) {
            failed[i] = 1;
        }
        report.policy_outputs[i] = strip_eos(out_v, policy.shape().eos_id);
        report.competitor_outputs[i] = strip_eos(out_c, competitor.shape().eos_id);
    });

    double total = 0.0, tokens = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (failed[i]) throw HarnessError("reward oracle failed on prompt " + std::to_string(i), i);
        report.win_probs[i] = win_probability(rv[i], rc[i]);
        total += report.win_probs[i];
        tokens += static_cast<double>(report.policy_outputs[i].size());
    }
    report.mean_win_prob = total / static_cast<double>(n);
    report.mean_output_tokens = tokens / static_cast<double>(n);
    const bool any = std::any_of(report.policy_outputs.begin(), report.policy_outputs.end(),
                                 [](const TokenSeq& s) { return !s.empty(); });
    report.ead = any ? ead_diversity(report.policy_outputs, policy.shape().vocab_size) : 0.0;
    return report;
}

double evaluate_factuality(const PolicyParams& policy, const std::vector<QaItem>& items, const Vocab& vocab,
                           int max_tokens) {
    if (items.empty()) throw ConfigError("factuality evaluation needs at least one item");
    GenerationConfig gen;
    gen.mode = DecodeMode::kGreedy;
    gen.max_tokens = max_tokens;
    std::vector<double> f1(items.size());
    parallel_for(items.size(), Exec::kParallel, [&](std::size_t i) {
        const TokenSeq prompt = tokenize(items[i].question, vocab);
        const TokenSeq out = sample(policy, prompt, gen, 0);
        f1[i] = word_f1(detokenize(strip_eos(out, vocab.eos()), vocab), items[i].answers);
    });
    double total = 0.0;
    for (double v : f1) total += v;
    return total / static_cast<double>(items.size());
}

std::vector<TokenSeq> load_prompts(const std::filesystem::path& path, const Vocab& vocab) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open prompt file " + path.string(), 0);
    std::vector<TokenSeq> prompts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        prompts.push_back(tokenize(line, vocab));
    }
    return prompts;
}

std::vector<QaItem> load_qa(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open QA file " + path.string(), 0);
    std::vector<QaItem> items;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            QaItem item;
            item.question = j.at("question").get<std::string>();
            item.answers = j.at("answers").get<std::vector<std::string>>();
            if (item.answers.empty()) throw ParseError("record has no answers", n);
            items.push_back(std::move(item));
        } catch (const json::exception& e) {
            throw ParseError(std::string("malformed QA record: ") + e.what(), n);
        }
    }
    return items;
}

}  // namespace daa
