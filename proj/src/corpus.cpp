#include "daa/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "daa/errors.hpp"
#include "daa/rng.hpp"

namespace daa {

using json = nlohmann::json;

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i].empty() || tokens_[i].find_first_of(" \t\r\n") != std::string::npos)
            throw ConfigError("vocab token " + std::to_string(i) + " is empty or contains whitespace");
        if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
            throw ConfigError("duplicate vocab token '" + tokens_[i] + "'");
    }
    auto special = [&](std::string_view name) {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) throw ConfigError("vocab lacks special token " + std::string(name));
        return it->second;
    };
    pad_ = special(kPad);
    bos_ = special(kBos);
    eos_ = special(kEos);
    unk_ = special(kUnk);
}

Vocab Vocab::synthetic(int vocab_size) {
    if (vocab_size < 4) throw ConfigError("vocab size must be at least 4");
    std::vector<std::string> tokens{std::string(kPad), std::string(kBos), std::string(kEos),
                                    std::string(kUnk)};
    for (int i = 4; i < vocab_size; ++i) tokens.push_back("t" + std::to_string(i));
    return Vocab(std::move(tokens));
}

Vocab Vocab::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open vocabulary file " + path.string(), 0);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(line);
    }
    return Vocab(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write vocabulary file " + path.string(), 0);
    for (const auto& t : tokens_) out << t << '\n';
}

TokenId Vocab::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? unk_ : it->second;
}

const std::string& Vocab::token(TokenId id) const {
    if (id < 0 || id >= size()) throw RangeError("token id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<std::size_t>(id)];
}

TokenSeq tokenize(std::string_view text, const Vocab& vocab) {
    TokenSeq ids;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) ids.push_back(vocab.id(text.substr(i, j - i)));
        i = j;
    }
    return ids;
}

std::string detokenize(const TokenSeq& ids, const Vocab& vocab) {
    std::string out;
    for (TokenId id : ids) {
        if (id == vocab.eos() || id == vocab.pad()) continue;
        if (!out.empty()) out += ' ';
        out += vocab.token(id);
    }
    return out;
}

namespace {

std::string field(const json& record, const char* name, std::size_t line) {
    auto it = record.find(name);
    if (it == record.end()) throw ParseError(std::string("missing field '") + name + "'", line);
    if (!it->is_string()) throw ParseError(std::string("field '") + name + "' is not a string", line);
    return it->get<std::string>();
}

TokenSeq completion(std::string_view text, const Vocab& vocab, std::size_t budget, bool& truncated) {
    TokenSeq ids = tokenize(text, vocab);
    // Completions are EOS-terminated even when the source text already ends in "<eos>".
    if (ids.empty() || ids.back() != vocab.eos()) ids.push_back(vocab.eos());
    if (ids.size() > budget) {
        ids.resize(std::max<std::size_t>(budget, 1));
        ids.back() = vocab.eos();
        truncated = true;
    }
    return ids;
}

}  // namespace

PreferenceDataset load_jsonl(const std::filesystem::path& path, const Vocab& vocab,
                             const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset file " + path.string(), 0);

    PreferenceDataset dataset;
    dataset.split = options.split;
    dataset.source = path.string();

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed record: ") + e.what(), line_no);
        }
        if (!record.is_object()) throw ParseError("record is not an object", line_no);

        PreferencePair pair;
        pair.prompt = tokenize(field(record, "prompt", line_no), vocab);
        std::erase(pair.prompt, vocab.pad());
        const std::size_t budget = options.max_sequence_length > pair.prompt.size()
                                       ? options.max_sequence_length - pair.prompt.size()
                                       : 1;
        pair.better = completion(field(record, "chosen", line_no), vocab, budget, pair.truncated);
        pair.worse = completion(field(record, "rejected", line_no), vocab, budget, pair.truncated);
        std::erase(pair.better, vocab.pad());
        std::erase(pair.worse, vocab.pad());
        dataset.pairs.push_back(std::move(pair));
    }
    return dataset;
}

void save_jsonl(const std::filesystem::path& path, const PreferenceDataset& dataset,
                const Vocab& vocab) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write dataset file " + path.string(), 0);
    for (const auto& p : dataset.pairs) {
        json record = {{"prompt", detokenize(p.prompt, vocab)},
                       {"chosen", detokenize(p.better, vocab)},
                       {"rejected", detokenize(p.worse, vocab)}};
        out << record.dump() << '\n';
    }
}

DatasetSplits split_dataset(const PreferenceDataset& dataset, double validation_fraction,
                            std::uint64_t seed) {
    if (!(validation_fraction >= 0.0 && validation_fraction <= 1.0))
        throw ConfigError("validation fraction must lie in [0, 1]");

    // Group duplicates so a pair identity never straddles the two splits.
    std::vector<std::vector<std::size_t>> groups;
    std::map<const PreferencePair*, std::size_t, bool (*)(const PreferencePair*, const PreferencePair*)>
        group_of([](const PreferencePair* a, const PreferencePair* b) {
            return std::tie(a->prompt, a->better, a->worse) < std::tie(b->prompt, b->better, b->worse);
        });
    for (std::size_t i = 0; i < dataset.pairs.size(); ++i) {
        auto [it, inserted] = group_of.emplace(&dataset.pairs[i], groups.size());
        if (inserted) groups.emplace_back();
        groups[it->second].push_back(i);
    }

    std::vector<std::size_t> order(groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    shuffle_in_place(order, rng);

    const auto n_val = static_cast<std::size_t>(
        std::llround(validation_fraction * static_cast<double>(groups.size())));
    std::vector<bool> is_val(groups.size(), false);
    for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;

    DatasetSplits out;
    out.train.split = Split::kTrain;
    out.validation.split = Split::kValidation;
    out.train.source = out.validation.source = dataset.source;
    // Original order is kept inside each split.
    std::vector<int> side(dataset.pairs.size());
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (auto i : groups[g]) side[i] = is_val[g] ? 1 : 0;
    for (std::size_t i = 0; i < dataset.pairs.size(); ++i)
        (side[i] ? out.validation : out.train).pairs.push_back(dataset.pairs[i]);
    return out;
}

TokenSeq SyntheticTask::target_for(const TokenSeq& prompt) const {
    TokenSeq out;
    if (prompt.empty()) return out;
    TokenId cur = prompt.back();
    if (cur < kFirstContentToken || cur >= vocab_size) return out;
    for (int i = 0; i < target_length; ++i) {
        cur = successor[static_cast<std::size_t>(cur)];
        out.push_back(cur);
    }
    return out;
}

int SyntheticTask::corruption_count() const {
    const auto n = static_cast<int>(std::llround(corruption_rate * target_length));
    return std::clamp(n, 1, target_length);
}

SyntheticTask make_synthetic_task(std::uint64_t task_seed, int vocab_size,
                                  const SyntheticOptions& options) {
    if (vocab_size < 8) throw ConfigError("synthetic task needs vocab_size >= 8");
    if (options.target_length < 1) throw ConfigError("target_length must be >= 1");
    if (!(options.corruption_rate > 0.0 && options.corruption_rate <= 1.0))
        throw ConfigError("corruption_rate must lie in (0, 1]");
    if (options.prompt_min_length < 1 || options.prompt_max_length < options.prompt_min_length)
        throw ConfigError("invalid prompt length range");

    SyntheticTask task;
    task.seed = task_seed;
    task.vocab_size = vocab_size;
    task.target_length = options.target_length;
    task.corruption_rate = options.corruption_rate;
    task.prompt_min_length = options.prompt_min_length;
    task.prompt_max_length = options.prompt_max_length;

    std::vector<TokenId> content;
    for (TokenId t = SyntheticTask::kFirstContentToken; t < vocab_size; ++t) content.push_back(t);
    Rng rng(mix_seed(task_seed, 0));
    shuffle_in_place(content, rng);

    const int n_content = static_cast<int>(content.size());
    const int per_layer = std::max(1, n_content / (task.target_length + 1));
    const int n_layers = std::min(task.target_length, (n_content - 1) / per_layer);
    auto layer = [&](int j) {
        const auto first = content.begin() + static_cast<std::ptrdiff_t>(j) * per_layer;
        return std::vector<TokenId>(first, first + per_layer);
    };
    task.prompt_tokens.assign(content.begin() + static_cast<std::ptrdiff_t>(n_layers) * per_layer, content.end());

    task.successor.resize(static_cast<std::size_t>(vocab_size));
    for (TokenId t = 0; t < SyntheticTask::kFirstContentToken; ++t)
        task.successor[static_cast<std::size_t>(t)] = t;
    const auto first_layer = layer(0);
    for (TokenId t : task.prompt_tokens)
        task.successor[static_cast<std::size_t>(t)] = first_layer[rng.below(static_cast<std::uint64_t>(per_layer))];
    for (int j = 0; j < n_layers; ++j) {
        const auto from = layer(j);
        auto to = layer((j + 1) % n_layers);
        shuffle_in_place(to, rng);
        for (int k = 0; k < per_layer; ++k)
            task.successor[static_cast<std::size_t>(from[static_cast<std::size_t>(k)])] = to[static_cast<std::size_t>(k)];
    }
    return task;
}

PreferenceDataset gen_synthetic(const SyntheticTask& task, int n_pairs) {
    if (n_pairs < 1) throw ConfigError("n_pairs must be >= 1");
    const int n_content = task.vocab_size - SyntheticTask::kFirstContentToken;
    const TokenId eos = SyntheticTask::kEos;

    PreferenceDataset dataset;
    dataset.source = "synthetic:" + std::to_string(task.seed);
    Rng rng(mix_seed(task.seed, 1));

    for (int p = 0; p < n_pairs; ++p) {
        PreferencePair pair;
        const auto len = task.prompt_min_length +
                         static_cast<int>(rng.below(task.prompt_max_length - task.prompt_min_length + 1));
        for (int i = 0; i < len; ++i)
            pair.prompt.push_back(task.prompt_tokens[rng.below(task.prompt_tokens.size())]);

        pair.better = task.target_for(pair.prompt);
        pair.worse = pair.better;
        std::vector<int> positions(static_cast<std::size_t>(task.target_length));
        for (int i = 0; i < task.target_length; ++i) positions[static_cast<std::size_t>(i)] = i;
        shuffle_in_place(positions, rng);
        for (int c = 0; c < task.corruption_count(); ++c) {
            auto& tok = pair.worse[static_cast<std::size_t>(positions[static_cast<std::size_t>(c)])];
            const TokenId original = tok;
            // Draw from the other n_content - 1 tokens.
            auto r = static_cast<TokenId>(SyntheticTask::kFirstContentToken + rng.below(n_content - 1));
            tok = r >= original ? r + 1 : r;
        }
        pair.better.push_back(eos);
        pair.worse.push_back(eos);
        dataset.pairs.push_back(std::move(pair));
    }
    return dataset;
}

PreferenceDataset gen_synthetic(std::uint64_t task_seed, int n_pairs, int vocab_size,
                                const SyntheticOptions& options) {
    return gen_synthetic(make_synthetic_task(task_seed, vocab_size, options), n_pairs);
}

void save_task(const std::filesystem::path& path, const SyntheticTask& task) {
    json j = {{"seed", task.seed},
              {"vocab_size", task.vocab_size},
              {"target_length", task.target_length},
              {"corruption_rate", task.corruption_rate},
              {"prompt_min_length", task.prompt_min_length},
              {"prompt_max_length", task.prompt_max_length}};
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write task file " + path.string(), 0);
    out << j.dump(2) << '\n';
}

SyntheticTask load_task(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open task file " + path.string(), 0);
    json j;
    try {
        j = json::parse(in);
        SyntheticOptions opt;
        opt.target_length = j.at("target_length").get<int>();
        opt.corruption_rate = j.at("corruption_rate").get<double>();
        opt.prompt_min_length = j.at("prompt_min_length").get<int>();
        opt.prompt_max_length = j.at("prompt_max_length").get<int>();
        return make_synthetic_task(j.at("seed").get<std::uint64_t>(), j.at("vocab_size").get<int>(), opt);
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad task file: ") + e.what(), 0);
    }
}

}  // namespace daa
