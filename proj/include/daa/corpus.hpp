#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace daa {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

/// Dense token <-> id mapping with reserved PAD/BOS/EOS/UNK entries.
///
/// The special entries are found by name ("<pad>", "<bos>", "<eos>",
/// "<unk>") and may sit at any id, which is why a vocabulary file is just
/// one token per line.
class Vocab {
public:
    static constexpr std::string_view kPad = "<pad>";
    static constexpr std::string_view kBos = "<bos>";
    static constexpr std::string_view kEos = "<eos>";
    static constexpr std::string_view kUnk = "<unk>";

    explicit Vocab(std::vector<std::string> tokens);

    /// Specials at ids 0..3 followed by "t4" ... "t<V-1>".
    static Vocab synthetic(int vocab_size);
    static Vocab load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    int size() const noexcept { return static_cast<int>(tokens_.size()); }
    TokenId pad() const noexcept { return pad_; }
    TokenId bos() const noexcept { return bos_; }
    TokenId eos() const noexcept { return eos_; }
    TokenId unk() const noexcept { return unk_; }

    /// UNK for unknown tokens.
    TokenId id(std::string_view token) const;
    const std::string& token(TokenId id) const;
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    TokenId pad_ = -1, bos_ = -1, eos_ = -1, unk_ = -1;
};

/// Whitespace tokenisation; unknown words map to vocab.unk().
TokenSeq tokenize(std::string_view text, const Vocab& vocab);

/// Space-joined tokens. EOS and PAD are dropped.
std::string detokenize(const TokenSeq& ids, const Vocab& vocab);

struct PreferencePair {
    TokenSeq prompt;
    TokenSeq better;  // EOS-terminated
    TokenSeq worse;   // EOS-terminated
    bool truncated = false;

    friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

enum class Split { kTrain, kValidation };

struct PreferenceDataset {
    std::vector<PreferencePair> pairs;
    Split split = Split::kTrain;
    std::string source;
};

struct LoadOptions {
    Split split = Split::kTrain;
    /// Prompt + completion budget; longer completions are cut from the right
    /// (keeping the final EOS) and flagged.
    std::size_t max_sequence_length = 8192;
};

/// Reads `prompt`/`chosen`/`rejected` JSON records, one per line.
/// Throws ParseError naming the line (and field, when one is missing).
PreferenceDataset load_jsonl(const std::filesystem::path& path, const Vocab& vocab,
                             const LoadOptions& options = {});

void save_jsonl(const std::filesystem::path& path, const PreferenceDataset& dataset,
                const Vocab& vocab);

struct DatasetSplits {
    PreferenceDataset train;
    PreferenceDataset validation;
};

/// Seeded split; identical pairs always land on the same side.
DatasetSplits split_dataset(const PreferenceDataset& dataset, double validation_fraction,
                            std::uint64_t seed);

/// Parameters of the synthetic preference task. The same object drives the
/// data generator and the harness reward oracle.
///
/// Content tokens are split into a prompt alphabet and `target_length`
/// position layers (fewer when the vocabulary is small, in which case the
/// layers wrap). Prompts are drawn from the prompt alphabet; the target
/// completion is succ(s), succ(succ(s)), ... for `target_length` tokens
/// after the last prompt token s, then EOS. succ sends prompt tokens into
/// layer 0 and layer j into layer j+1, so with full layers every token of
/// the target, and the stopping point, is fixed by the previous token.
struct SyntheticTask {
    std::uint64_t seed = 0;
    int vocab_size = 16;
    int target_length = 6;
    double corruption_rate = 0.25;
    int prompt_min_length = 2;
    int prompt_max_length = 4;
    std::vector<TokenId> successor;      // size vocab_size; specials map to themselves
    std::vector<TokenId> prompt_tokens;  // prompt alphabet

    // Ids laid out as in Vocab::synthetic.
    static constexpr TokenId kEos = 2;
    static constexpr TokenId kFirstContentToken = 4;

    /// Target completion for `prompt` (without EOS).
    TokenSeq target_for(const TokenSeq& prompt) const;
    /// Number of tokens the corruption step rewrites.
    int corruption_count() const;
};

struct SyntheticOptions {
    int target_length = 6;
    double corruption_rate = 0.25;
    int prompt_min_length = 2;
    int prompt_max_length = 4;
};

SyntheticTask make_synthetic_task(std::uint64_t task_seed, int vocab_size,
                                  const SyntheticOptions& options = {});

/// Deterministic in task_seed. Worse completions are the better ones with
/// `corruption_count()` content positions rewritten; EOS is never touched.
PreferenceDataset gen_synthetic(std::uint64_t task_seed, int n_pairs, int vocab_size,
                                const SyntheticOptions& options = {});

/// Same, for an already constructed task.
PreferenceDataset gen_synthetic(const SyntheticTask& task, int n_pairs);

void save_task(const std::filesystem::path& path, const SyntheticTask& task);
SyntheticTask load_task(const std::filesystem::path& path);

}  // namespace daa
