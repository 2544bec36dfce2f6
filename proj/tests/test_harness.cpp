#include <doctest.h>

#include <cmath>
#include <limits>

#include "daa/errors.hpp"
#include "daa/harness.hpp"
#include "daa/rng.hpp"
#include "test_util.hpp"

using namespace daa;

namespace {

std::vector<TokenSeq> some_prompts(const SyntheticTask& task, int n) {
    std::vector<TokenSeq> out;
    for (const auto& p : gen_synthetic(task, n).pairs) out.push_back(p.prompt);
    return out;
}

}  // namespace

TEST_CASE("identical policies tie on every prompt") {
    const auto task = make_synthetic_task(4, 16);
    const auto policy = PolicyParams::random(test::small_shape(), 1, 0.5);
    const auto prompts = some_prompts(task, 20);
    SyntheticReward reward(task);
    const auto rep = evaluate_head_to_head(policy, policy, prompts, reward, GenerationConfig{}, 9);
    REQUIRE(rep.win_probs.size() == 20);
    for (double w : rep.win_probs) CHECK(w == 0.5);
    CHECK(rep.mean_win_prob == 0.5);
    CHECK(rep.policy_outputs == rep.competitor_outputs);
}

TEST_CASE("a constant reward gives 0.5 whatever the policies") {
    const auto task = make_synthetic_task(4, 16);
    const auto a = PolicyParams::random(test::small_shape(), 1, 0.5);
    const auto b = PolicyParams::random(test::small_shape(), 2, 0.5);
    FunctionReward flat([](const TokenSeq&, const TokenSeq&) { return 3.0; });
    const auto rep = evaluate_head_to_head(a, b, some_prompts(task, 10), flat, GenerationConfig{}, 1);
    CHECK(rep.mean_win_prob == 0.5);
}

TEST_CASE("swapping the models mirrors the win probabilities") {
    const auto task = make_synthetic_task(4, 16);
    const auto a = PolicyParams::random(test::small_shape(), 1, 0.8);
    const auto b = PolicyParams::random(test::small_shape(), 2, 0.8);
    const auto prompts = some_prompts(task, 30);
    SyntheticReward reward(task);
    const auto ab = evaluate_head_to_head(a, b, prompts, reward, GenerationConfig{}, 5);
    const auto ba = evaluate_head_to_head(b, a, prompts, reward, GenerationConfig{}, 5);
    for (std::size_t i = 0; i < prompts.size(); ++i) CHECK(ab.win_probs[i] + ba.win_probs[i] == doctest::Approx(1.0));
    CHECK(ab.mean_win_prob + ba.mean_win_prob == doctest::Approx(1.0));
    CHECK(ab.policy_outputs == ba.competitor_outputs);
}

TEST_CASE("evaluation is reproducible and reports output lengths") {
    const auto task = make_synthetic_task(4, 16);
    const auto a = PolicyParams::random(test::small_shape(), 1, 0.8);
    const auto b = PolicyParams::random(test::small_shape(), 2, 0.8);
    const auto prompts = some_prompts(task, 12);
    SyntheticReward reward(task);
    GenerationConfig gen;
    gen.max_tokens = 10;
    const auto r1 = evaluate_head_to_head(a, b, prompts, reward, gen, 5);
    const auto r2 = evaluate_head_to_head(a, b, prompts, reward, gen, 5);
    CHECK(r1.win_probs == r2.win_probs);
    double len = 0.0;
    for (const auto& o : r1.policy_outputs) {
        CHECK(o.size() <= 10);
        for (TokenId t : o) CHECK(t != SyntheticTask::kEos);
        len += static_cast<double>(o.size());
    }
    CHECK(r1.mean_output_tokens == doctest::Approx(len / 12));
    CHECK(r1.ead >= 0.0);
    CHECK_THROWS_AS(evaluate_head_to_head(a, b, {}, reward, gen, 5), ConfigError);
}

TEST_CASE("synthetic reward: exact target scores highest") {
    const auto task = make_synthetic_task(1, 64);
    SyntheticReward reward(task);
    const auto data = gen_synthetic(task, 200);
    Rng rng(3);
    for (const auto& p : data.pairs) {
        const TokenSeq target = task.target_for(p.prompt);
        TokenSeq exact = target;
        exact.push_back(SyntheticTask::kEos);
        CHECK(reward.score(p.prompt, exact) == task.target_length);
        CHECK(reward.score(p.prompt, target) == task.target_length);  // missing EOS is not penalised
        CHECK(reward.score(p.prompt, p.better) == task.target_length);
        CHECK(reward.score(p.prompt, p.worse) < reward.score(p.prompt, p.better));

        TokenSeq wrong = target;
        for (auto& t : wrong) t = t == 4 ? 5 : 4;
        CHECK(reward.score(p.prompt, wrong) <= 1.0);

        TokenSeq longer = exact;
        longer.insert(longer.end() - 1, 3, target[0]);
        CHECK(reward.score(p.prompt, longer) == doctest::Approx(task.target_length - 1.5));

        TokenSeq random;
        for (int i = 0; i < 1 + static_cast<int>(rng.below(10)); ++i)
            random.push_back(static_cast<TokenId>(4 + rng.below(60)));
        CHECK(reward.score(p.prompt, random) <= reward.score(p.prompt, exact));
    }
    CHECK(reward.score(data.pairs[0].prompt, {SyntheticTask::kEos}) == 0.0);
}

TEST_CASE("synthetic reward decreases as corruption grows") {
    const auto task = make_synthetic_task(1, 64);
    SyntheticReward reward(task);
    Rng rng(11);
    const auto data = gen_synthetic(task, 1000);
    for (const auto& p : data.pairs) {
        TokenSeq c = task.target_for(p.prompt);
        double prev = reward.score(p.prompt, c);
        std::vector<std::size_t> pos(c.size());
        for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
        shuffle_in_place(pos, rng);
        for (auto i : pos) {
            c[i] = c[i] == 4 ? 5 : 4;
            if (c[i] == task.target_for(p.prompt)[i]) c[i] = 6;
            const double s = reward.score(p.prompt, c);
            CHECK(s < prev);
            prev = s;
        }
    }
}

TEST_CASE("reward failures name the prompt") {
    const auto task = make_synthetic_task(4, 16);
    const auto a = PolicyParams::random(test::small_shape(), 1, 0.5);
    const auto prompts = some_prompts(task, 6);
    const TokenSeq bad = prompts[3];
    FunctionReward throwing([&](const TokenSeq& p, const TokenSeq&) {
        if (p == bad) throw std::runtime_error("scorer down");
        return 1.0;
    });
    FunctionReward nan([&](const TokenSeq& p, const TokenSeq&) {
        return p == bad ? std::numeric_limits<double>::quiet_NaN() : 1.0;
    });
    for (const RewardOracle* r : {static_cast<const RewardOracle*>(&throwing), static_cast<const RewardOracle*>(&nan)}) {
        try {
            evaluate_head_to_head(a, a, prompts, *r, GenerationConfig{}, 0);
            FAIL("expected HarnessError");
        } catch (const HarnessError& e) {
            std::size_t first = 0;
            while (prompts[first] != bad) ++first;
            CHECK(e.prompt_index() == first);
            CHECK(std::string(e.what()).find(std::to_string(first)) != std::string::npos);
        }
    }
}

TEST_CASE("factuality") {
    const Vocab vocab({"<pad>", "<bos>", "<eos>", "<unk>", "paris", "dakar", "the", "capital", "is"});
    PolicyShape shape = test::small_shape(vocab.size());
    shape.pad_id = vocab.pad();
    shape.bos_id = vocab.bos();
    shape.eos_id = vocab.eos();

    SUBCASE("a policy that always says paris") {
        PolicyParams p(shape);
        p.output_bias()[vocab.id("paris")] = 20.0;
        // greedy without an EOS runs to max_tokens, so cap at one token
        std::vector<QaItem> items{{"capital", {"Paris"}}, {"the capital", {"paris", "Dakar"}}};
        CHECK(evaluate_factuality(p, items, vocab, 1) == 1.0);
        items.push_back({"is", {"Dakar"}});
        CHECK(evaluate_factuality(p, items, vocab, 1) == doctest::Approx(2.0 / 3.0));
        // "paris paris" against "the capital is paris": P = 1/2, R = 1/3 once the article is dropped
        std::vector<QaItem> longer{{"x", {"the capital is paris"}}};
        const double f1 = evaluate_factuality(p, longer, vocab, 2);
        const double prec = 0.5, rec = 1.0 / 3.0;
        CHECK(f1 == doctest::Approx(2 * prec * rec / (prec + rec)));
    }
    SUBCASE("an immediately stopping policy scores zero") {
        PolicyParams p(shape);
        p.output_bias()[vocab.eos()] = 20.0;
        std::vector<QaItem> items{{"capital", {"Paris"}}};
        CHECK(evaluate_factuality(p, items, vocab) == 0.0);
    }
    CHECK_THROWS_AS(evaluate_factuality(PolicyParams(shape), {}, vocab), ConfigError);
}

TEST_CASE("prompt and QA files") {
    const auto vocab = Vocab::synthetic(16);
    const auto pf = test::write_file("harness_prompts.txt", vocab.token(4) + " " + vocab.token(5) + "\n\n" +
                                                                 vocab.token(6) + "\n");
    const auto prompts = load_prompts(pf, vocab);
    REQUIRE(prompts.size() == 2);
    CHECK(prompts[0] == TokenSeq{4, 5});
    CHECK(prompts[1] == TokenSeq{6});
    CHECK_THROWS_AS(load_prompts(test::tmp_path("harness_missing.txt"), vocab), ParseError);

    const auto qf = test::write_file("harness_qa.jsonl",
                                     "{\"question\": \"q1\", \"answers\": [\"a\", \"b\"]}\n"
                                     "{\"question\": \"q2\", \"answers\": [\"c\"]}\n");
    const auto qa = load_qa(qf);
    REQUIRE(qa.size() == 2);
    CHECK(qa[0].answers == std::vector<std::string>{"a", "b"});
    const auto bad = test::write_file("harness_bad.jsonl", "{\"question\": \"q1\", \"answers\": [\"a\"]}\n{\"question\": 1}\n");
    try {
        load_qa(bad);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    const auto none = test::write_file("harness_none.jsonl", "{\"question\": \"q\", \"answers\": []}\n");
    CHECK_THROWS_AS(load_qa(none), ParseError);
}

TEST_CASE("strip_eos") {
    CHECK(strip_eos({4, 5, 2, 6}, 2) == TokenSeq{4, 5});
    CHECK(strip_eos({2}, 2).empty());
    CHECK(strip_eos({4, 5}, 2) == TokenSeq{4, 5});
}
