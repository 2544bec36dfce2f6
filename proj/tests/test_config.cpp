#include <doctest.h>

#include <string>

#include "daa/config.hpp"
#include "daa/errors.hpp"
#include "test_util.hpp"

using namespace daa;

TEST_CASE("key = value text") {
    ExperimentConfig cfg;
    apply_config_text(cfg,
                      "# a comment\n"
                      "\n"
                      "method = ipo\n"
                      "  tau=0.25  \n"
                      "lambda_nll = 1.5\n"
                      "aggregation = mean\n"
                      "stop_policy = adapt_then_stop\n"
                      "top_k = 20\n"
                      "entropy_base = 2.718281828459045\n"
                      "decay = cosine\n"
                      "smaug = true\n"
                      "seed = 42\n"
                      "data = /tmp/d\n");
    CHECK(cfg.loss.method == Method::kIpo);
    CHECK(cfg.loss.tau == 0.25);
    CHECK(cfg.loss.lambda_nll == 1.5);
    CHECK(cfg.loss.aggregation == Aggregation::kMean);
    CHECK(cfg.train.stop_policy == StopPolicy::kAdaptThenStop);
    CHECK(cfg.train.entropy.k == 20);
    CHECK(cfg.train.entropy.base == 2.718281828459045);
    CHECK(cfg.train.decay == DecayShape::kCosine);
    CHECK(cfg.loss.smaug_enabled);
    CHECK(cfg.train.seed == 42);
    CHECK(cfg.data_dir == "/tmp/d");
    CHECK_NOTHROW(cfg.validate());

    apply_config_text(cfg, "aggregation = default\n");
    CHECK_FALSE(cfg.loss.aggregation.has_value());
}

TEST_CASE("errors name the line") {
    ExperimentConfig cfg;
    auto message = [&](const std::string& text) {
        try {
            apply_config_text(cfg, text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("beta = 0.1\nbogus = 3\n").find("config line 2") != std::string::npos);
    CHECK(message("beta = 0.1\nbogus = 3\n").find("bogus") != std::string::npos);
    CHECK(message("\n\nbeta = fast\n").find("config line 3") != std::string::npos);
    CHECK(message("beta 0.1\n").find("config line 1") != std::string::npos);
    CHECK(message("method = ppo\n").find("ppo") != std::string::npos);
    CHECK(message("eval_interval = 2.5\n").find("eval_interval") != std::string::npos);
    CHECK(message("smaug = maybe\n") != "");
    CHECK(message("beta = 0.2\n").empty());
}

TEST_CASE("apply_setting rejects unknown keys and bad values") {
    ExperimentConfig cfg;
    CHECK_THROWS_AS(apply_setting(cfg, "betta", "0.1"), ConfigError);
    CHECK_THROWS_AS(apply_setting(cfg, "beta", ""), ConfigError);
    CHECK_THROWS_AS(apply_setting(cfg, "batch_size", "-"), ConfigError);
    CHECK_THROWS_AS(apply_setting(cfg, "stop_policy", "later"), ConfigError);
    apply_setting(cfg, "beta", "0.05");
    CHECK(cfg.loss.beta == 0.05);
}

TEST_CASE("to_config_text round-trips every key") {
    ExperimentConfig cfg;
    cfg.loss.method = Method::kHinge;
    cfg.loss.gamma = 0.3;
    cfg.loss.alpha = 0.1 + 0.2;  // not exactly representable in short decimal
    cfg.loss.nll_aggregation = Aggregation::kSum;
    cfg.train.peak_lr = 1.0 / 3.0;
    cfg.train.entropy_mode = EntropyMode::kGenerated;
    cfg.train.entropy.normalise = false;
    cfg.detector.half_life = 4.5;
    cfg.out_dir = "runs/a";
    cfg.pairs = 123;
    const std::string text = to_config_text(cfg);
    for (const auto& k : config_keys()) CHECK(text.find(k + " = ") != std::string::npos);

    ExperimentConfig back;
    apply_config_text(back, text);
    CHECK(to_config_text(back) == text);
    CHECK(back.loss.alpha == cfg.loss.alpha);
    CHECK(back.train.peak_lr == cfg.train.peak_lr);
    CHECK(back.loss.nll_aggregation == Aggregation::kSum);
    CHECK_FALSE(back.loss.aggregation.has_value());
    CHECK(back.train.entropy_mode == EntropyMode::kGenerated);
    CHECK_FALSE(back.train.entropy.normalise);
    CHECK(back.out_dir == "runs/a");
    CHECK(back.pairs == 123);
}

TEST_CASE("config files") {
    ExperimentConfig cfg;
    const auto p = test::write_file("config_ok.txt", "beta = 0.2\nwindow = 7\n");
    apply_config_file(cfg, p);
    CHECK(cfg.loss.beta == 0.2);
    CHECK(cfg.detector.window == 7);
    CHECK_THROWS_AS(apply_config_file(cfg, test::tmp_path("config_missing.txt")), ConfigError);
}

TEST_CASE("validate catches inconsistent settings") {
    ExperimentConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.loss.beta = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.detector.window = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.vocab_size = 7;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.train.entropy.k = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
