#include <doctest.h>

#include <algorithm>
#include <set>

#include "daa/corpus.hpp"
#include "daa/errors.hpp"
#include "daa/harness.hpp"
#include "test_util.hpp"

using namespace daa;
using daa::test::write_file;

namespace {

Vocab abc_vocab() { return Vocab({"a", "b", "c", "<unk>", "<pad>", "<bos>", "<eos>"}); }

}  // namespace

TEST_CASE("tokenize maps words and falls back to UNK") {
    const Vocab v = abc_vocab();
    CHECK(tokenize("", v).empty());
    CHECK(tokenize("a b a", v) == TokenSeq{0, 1, 0});
    CHECK(tokenize("a z", v) == TokenSeq{0, 3});
    CHECK(tokenize("  a\tb\n c ", v) == TokenSeq{0, 1, 2});
}

TEST_CASE("vocab round-trips and validates") {
    const Vocab v = Vocab::synthetic(12);
    CHECK(v.size() == 12);
    for (TokenId id = 0; id < v.size(); ++id) CHECK(v.id(v.token(id)) == id);
    CHECK(v.pad() == 0);
    CHECK(v.bos() == 1);
    CHECK(v.eos() == 2);
    CHECK(v.unk() == 3);
    CHECK_THROWS_AS(v.token(12), RangeError);
    CHECK_THROWS_AS(Vocab({"a", "a", "<unk>", "<pad>", "<bos>", "<eos>"}), ConfigError);
    CHECK_THROWS_AS(Vocab({"a", "<pad>", "<bos>", "<eos>"}), ConfigError);

    const auto path = daa::test::tmp_path("vocab_rt.txt");
    abc_vocab().save(path);
    const Vocab back = Vocab::load(path);
    CHECK(back.tokens() == abc_vocab().tokens());
    CHECK(back.unk() == 3);
}

TEST_CASE("detokenize inverts tokenize up to whitespace") {
    const Vocab v = abc_vocab();
    CHECK(detokenize(tokenize(" a  b\tc ", v), v) == "a b c");
    CHECK(detokenize(TokenSeq{0, 1, v.eos()}, v) == "a b");
}

TEST_CASE("load_jsonl") {
    const Vocab v = abc_vocab();

    SUBCASE("empty file") {
        const auto ds = load_jsonl(write_file("empty.jsonl", ""), v);
        CHECK(ds.pairs.empty());
    }
    SUBCASE("one valid line gets EOS-terminated completions") {
        const auto ds = load_jsonl(write_file("one.jsonl", R"({"prompt":"a b","chosen":"c","rejected":"a"})" "\n"), v);
        REQUIRE(ds.pairs.size() == 1);
        CHECK(ds.pairs[0].prompt == TokenSeq{0, 1});
        CHECK(ds.pairs[0].better == TokenSeq{2, v.eos()});
        CHECK(ds.pairs[0].worse == TokenSeq{0, v.eos()});
        CHECK_FALSE(ds.pairs[0].truncated);
    }
    SUBCASE("missing field names the line and the field") {
        const auto p = write_file("missing.jsonl", R"({"prompt":"a","chosen":"b","rejected":"c"})" "\n"
                                                   R"({"prompt":"a","chosen":"b"})" "\n");
        try {
            load_jsonl(p, v);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
            CHECK(std::string(e.what()).find("rejected") != std::string::npos);
        }
    }
    SUBCASE("malformed JSON names the line") {
        const auto p = write_file("bad.jsonl", "\n{\"prompt\":\"a\",\"chosen\":\"b\",\"rejected\":\"c\"}\n{oops\n");
        try {
            load_jsonl(p, v);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
        }
    }
    SUBCASE("over-long completions are truncated from the right keeping EOS") {
        LoadOptions opt;
        opt.max_sequence_length = 4;
        const auto ds = load_jsonl(write_file("long.jsonl", R"({"prompt":"a b","chosen":"a b c a b","rejected":"c"})" "\n"), v, opt);
        REQUIRE(ds.pairs.size() == 1);
        CHECK(ds.pairs[0].better == TokenSeq{0, v.eos()});
        CHECK(ds.pairs[0].truncated);
    }
    SUBCASE("loading is deterministic and save/load round-trips") {
        const auto ds = gen_synthetic(3, 25, 16);
        const Vocab sv = Vocab::synthetic(16);
        const auto p = daa::test::tmp_path("rt.jsonl");
        save_jsonl(p, ds, sv);
        const auto a = load_jsonl(p, sv);
        const auto b = load_jsonl(p, sv);
        CHECK(a.pairs == b.pairs);
        CHECK(a.pairs == ds.pairs);
    }
}

TEST_CASE("split_dataset is seeded, disjoint, and keeps duplicates together") {
    auto ds = gen_synthetic(5, 200, 16);
    ds.pairs.push_back(ds.pairs[0]);
    ds.pairs.push_back(ds.pairs[7]);
    const auto s1 = split_dataset(ds, 0.25, 9);
    const auto s2 = split_dataset(ds, 0.25, 9);
    CHECK(s1.train.pairs == s2.train.pairs);
    CHECK(s1.validation.pairs == s2.validation.pairs);
    CHECK(s1.train.pairs.size() + s1.validation.pairs.size() == ds.pairs.size());
    CHECK(s1.validation.split == Split::kValidation);
    for (const auto& p : s1.validation.pairs)
        CHECK(std::find(s1.train.pairs.begin(), s1.train.pairs.end(), p) == s1.train.pairs.end());
}

TEST_CASE("gen_synthetic") {
    SUBCASE("deterministic in the seed") {
        CHECK(gen_synthetic(1, 10, 16).pairs == gen_synthetic(1, 10, 16).pairs);
        CHECK_FALSE(gen_synthetic(1, 10, 16).pairs == gen_synthetic(2, 10, 16).pairs);
    }
    SUBCASE("better differs from worse, EOS untouched, corruption count fixed") {
        const auto task = make_synthetic_task(1, 16);
        for (const auto& p : gen_synthetic(task, 300).pairs) {
            CHECK(p.better != p.worse);
            REQUIRE(p.better.size() == p.worse.size());
            CHECK(p.better.back() == SyntheticTask::kEos);
            CHECK(p.worse.back() == SyntheticTask::kEos);
            int diff = 0;
            for (std::size_t i = 0; i < p.better.size(); ++i) diff += p.better[i] != p.worse[i];
            CHECK(diff == task.corruption_count());
            for (std::size_t i = 0; i + 1 < p.worse.size(); ++i) CHECK(p.worse[i] >= SyntheticTask::kFirstContentToken);
        }
    }
    SUBCASE("oracle prefers better over worse on >= 99% of pairs") {
        const auto task = make_synthetic_task(1, 16);
        const SyntheticReward reward(task);
        const auto ds = gen_synthetic(task, 1000);
        int wins = 0;
        for (const auto& p : ds.pairs) wins += reward.score(p.prompt, p.better) > reward.score(p.prompt, p.worse);
        CHECK(wins >= 990);
    }
    SUBCASE("each target token is fixed by its predecessor and its position") {
        const auto task = make_synthetic_task(4, 64);
        std::vector<std::set<int>> positions(64);
        for (const auto& p : gen_synthetic(task, 500).pairs) {
            TokenId prev = p.prompt.back();
            for (int i = 0; i < task.target_length; ++i) {
                const TokenId t = p.better[static_cast<std::size_t>(i)];
                CHECK(t == task.successor[static_cast<std::size_t>(prev)]);
                positions[static_cast<std::size_t>(t)].insert(i);
                prev = t;
            }
            for (TokenId t : p.prompt)
                CHECK(std::find(task.prompt_tokens.begin(), task.prompt_tokens.end(), t) != task.prompt_tokens.end());
        }
        for (const auto& s : positions) CHECK(s.size() <= 1);
    }
    SUBCASE("small vocabularies still work") {
        const auto ds = gen_synthetic(1, 50, 8);
        CHECK(ds.pairs.size() == 50);
        CHECK_THROWS_AS(gen_synthetic(1, 10, 7), ConfigError);
        CHECK_THROWS_AS(gen_synthetic(1, 0, 16), ConfigError);
    }
    SUBCASE("task file round-trip") {
        const auto task = make_synthetic_task(11, 32);
        const auto p = daa::test::tmp_path("task.json");
        save_task(p, task);
        const auto back = load_task(p);
        CHECK(back.successor == task.successor);
        CHECK(back.prompt_tokens == task.prompt_tokens);
        CHECK(back.target_length == task.target_length);
    }
}
