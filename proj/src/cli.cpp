#include "daa/cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "daa/config.hpp"
#include "daa/errors.hpp"
#include "daa/report.hpp"
#include "daa/rng.hpp"

namespace fs = std::filesystem;

namespace daa {

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

struct CommonOptions {
    std::string config_path;
    Overrides overrides;
    std::vector<std::string> sets;
};

void add_override(CLI::App* app, CommonOptions& opts, const std::string& flag, const std::string& key,
                  const std::string& help, std::vector<std::string> choices = {}) {
    auto* opt = app->add_option_function<std::string>(
        flag, [&opts, key](const std::string& v) { opts.overrides.emplace_back(key, v); }, help);
    if (!choices.empty()) opt->check(CLI::IsMember(choices));
}

void add_common(CLI::App* app, CommonOptions& opts) {
    app->add_option("--config", opts.config_path, "key = value config file");
    add_override(app, opts, "--out", "out", "output directory");
    add_override(app, opts, "--seed", "seed", "run seed");
    add_override(app, opts, "--method", "method", "preference loss", {"dpo", "ipo", "hinge"});
    add_override(app, opts, "--beta", "beta", "DPO temperature");
    add_override(app, opts, "--tau", "tau", "IPO regulariser");
    add_override(app, opts, "--alpha", "alpha", "hinge anchor weight");
    add_override(app, opts, "--lambda-nll", "lambda_nll", "NLL weight on better completions");
    add_override(app, opts, "--aggregation", "aggregation", "log-likelihood aggregation", {"sum", "mean"});
    add_override(app, opts, "--eval-interval", "eval_interval", "steps between evaluations");
    add_override(app, opts, "--stop-policy", "stop_policy", "early stopping policy",
                 {"none", "stop_on_first", "adapt_then_stop"});
    add_override(app, opts, "--top-k", "top_k", "k of the top-k entropy and mass");
    add_override(app, opts, "--entropy-base", "entropy_base", "logarithm base of the entropy");
    app->add_option("--set", opts.sets, "extra key=value setting (repeatable)");
}

// Config file first, then flags in command-line order. Returns an exit code
// or -1 to continue.
int resolve(const CommonOptions& opts, ExperimentConfig& cfg, std::ostream& err) {
    if (!opts.config_path.empty()) apply_config_file(cfg, opts.config_path);
    try {
        for (const auto& [k, v] : opts.overrides) apply_setting(cfg, k, v);
        for (const auto& s : opts.sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
            apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return -1;
}

fs::path require_file(const fs::path& p, const std::string& what) {
    if (!fs::is_regular_file(p)) throw ConfigError(what + " not found: " + p.string());
    return p;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << text;
}

struct DataDir {
    Vocab vocab;
    PreferenceDataset train;
    PreferenceDataset validation;
    std::optional<SyntheticTask> task;
};

Vocab load_vocab(const fs::path& dir) { return Vocab::load(require_file(dir / "vocab.txt", "vocab file")); }

DataDir load_data_dir(const std::string& dir_str, bool need_train) {
    if (dir_str.empty()) throw ConfigError("no data directory given (--data or data = ...)");
    const fs::path dir(dir_str);
    if (!fs::is_directory(dir)) throw ConfigError("data directory not found: " + dir.string());
    DataDir d{load_vocab(dir), {}, {}, std::nullopt};
    if (need_train) d.train = load_jsonl(require_file(dir / "train.jsonl", "dataset"), d.vocab, {Split::kTrain});
    d.validation = load_jsonl(require_file(dir / "validation.jsonl", "dataset"), d.vocab, {Split::kValidation});
    if (fs::is_regular_file(dir / "task.json")) d.task = load_task(dir / "task.json");
    return d;
}

void shape_from_vocab(PolicyShape& shape, const Vocab& vocab) {
    shape.vocab_size = vocab.size();
    shape.pad_id = vocab.pad();
    shape.bos_id = vocab.bos();
    shape.eos_id = vocab.eos();
}

int cmd_gen_data(const ExperimentConfig& cfg, std::ostream& out) {
    if (cfg.out_dir.empty()) throw ConfigError("gen-data needs --out");
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);

    SyntheticOptions opt;
    opt.target_length = cfg.target_length;
    opt.corruption_rate = cfg.corruption_rate;
    const SyntheticTask task = make_synthetic_task(cfg.train.seed, cfg.vocab_size, opt);
    const Vocab vocab = Vocab::synthetic(cfg.vocab_size);
    const auto all = gen_synthetic(task, cfg.pairs + cfg.validation_pairs);
    const double frac = static_cast<double>(cfg.validation_pairs) / (cfg.pairs + cfg.validation_pairs);
    const auto splits = split_dataset(all, frac, mix_seed(cfg.train.seed, 0x5b1));

    vocab.save(dir / "vocab.txt");
    save_task(dir / "task.json", task);
    save_jsonl(dir / "train.jsonl", splits.train, vocab);
    save_jsonl(dir / "validation.jsonl", splits.validation, vocab);
    std::string prompts;
    for (const auto& p : splits.validation.pairs) prompts += detokenize(p.prompt, vocab) + '\n';
    write_text(dir / "prompts.txt", prompts);

    out << "wrote " << splits.train.pairs.size() << " train / " << splits.validation.pairs.size()
        << " validation pairs to " << dir.string() << '\n';
    return kExitOk;
}

int cmd_train(ExperimentConfig cfg, std::ostream& out, std::ostream& err) {
    if (cfg.out_dir.empty()) throw ConfigError("train needs --out");
    const DataDir data = load_data_dir(cfg.data_dir, true);
    shape_from_vocab(cfg.train.shape, data.vocab);
    cfg.validate();

    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_text(dir / "config.txt", to_config_text(cfg));
    std::ofstream metrics(dir / "metrics.log", std::ios::binary | std::ios::trunc);
    std::ofstream signals(dir / "signals.log", std::ios::binary | std::ios::trunc);
    if (!metrics || !signals) throw ConfigError("cannot write logs in " + dir.string());

    std::optional<SyntheticReward> reward;
    if (data.task) reward.emplace(*data.task, cfg.length_penalty);
    else err << "note: no task.json in " << cfg.data_dir << "; win probability is reported as 0.5\n";

    RunCallbacks cb;
    cb.on_metric = [&](const MetricRecord& r) { metrics << to_log_line(r) << '\n' << std::flush; };
    cb.on_signal = [&](const EarlyStopSignal& s) { signals << to_log_line(s) << '\n' << std::flush; };
    cb.on_checkpoint = [&](std::int64_t step, const PolicyParams& p) {
        save_checkpoint(dir / ("ckpt_" + std::to_string(step)), p);
    };
    const RunResult res = run(data.train, data.validation, cfg.train, cfg.loss, cfg.detector,
                              reward ? &*reward : nullptr, cb);

    out << "steps " << res.steps << " of " << res.total_steps << (res.stopped_early ? " (stopped early)" : "")
        << '\n';
    if (!res.metrics.empty()) {
        const auto& m = res.metrics.back();
        out << "final step " << m.step << ": better_llh " << m.better_mean_llh << ", margin " << m.margin
            << ", entropy " << m.topk_entropy << ", win " << m.win_prob << '\n';
    }
    for (const auto& s : res.signals) out << "signal " << to_string(s.reason) << " at step " << s.step << '\n';
    return kExitOk;
}

int cmd_eval(ExperimentConfig cfg, const std::string& checkpoint, std::string competitor, const std::string& prompts_path,
             const std::string& qa_path, std::ostream& out) {
    const DataDir data = load_data_dir(cfg.data_dir, false);
    const PolicyParams policy = load_checkpoint(require_file(checkpoint, "checkpoint"));
    if (competitor.empty()) competitor = (fs::path(checkpoint).parent_path() / "ckpt_0").string();
    const PolicyParams rival = load_checkpoint(require_file(competitor, "competitor checkpoint"));
    if (policy.shape().vocab_size != data.vocab.size())
        throw ConfigError("checkpoint vocabulary size does not match " + cfg.data_dir + "/vocab.txt");

    std::vector<TokenSeq> prompts;
    if (!prompts_path.empty()) {
        prompts = load_prompts(require_file(prompts_path, "prompt file"), data.vocab);
    } else {
        for (const auto& p : data.validation.pairs) {
            if (static_cast<int>(prompts.size()) >= cfg.train.eval_prompts) break;
            prompts.push_back(p.prompt);
        }
    }

    std::unique_ptr<RewardOracle> reward;
    if (data.task) reward = std::make_unique<SyntheticReward>(*data.task, cfg.length_penalty);
    else reward = std::make_unique<FunctionReward>([](const TokenSeq&, const TokenSeq&) { return 0.0; });

    EvalReport rep = evaluate_head_to_head(policy, rival, prompts, *reward, cfg.train.generation, cfg.train.seed);
    if (!qa_path.empty())
        rep.mean_word_f1 = evaluate_factuality(policy, load_qa(require_file(qa_path, "QA file")), data.vocab,
                                               cfg.train.generation.max_tokens);

    std::string text = "quantity\tvalue\n";
    text += "prompts\t" + std::to_string(prompts.size()) + '\n';
    text += "mean_win_prob\t" + std::to_string(rep.mean_win_prob) + '\n';
    text += "ead\t" + std::to_string(rep.ead) + '\n';
    text += "mean_output_tokens\t" + std::to_string(rep.mean_output_tokens) + '\n';
    if (rep.mean_word_f1) text += "mean_word_f1\t" + std::to_string(*rep.mean_word_f1) + '\n';
    out << text;
    if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        write_text(fs::path(cfg.out_dir) / "eval.tsv", text);
    }
    return kExitOk;
}

int cmd_monitor(ExperimentConfig cfg, const std::string& log_path, std::ostream& out) {
    cfg.detector.validate();
    const auto records = read_metric_log(require_file(log_path, "metric log"));
    const auto fired = replay(records, cfg.detector);
    for (const auto& s : fired) out << to_log_line(s) << '\n';
    return fired.empty() ? kExitOk : kExitSignal;
}

int cmd_report(const ExperimentConfig& cfg, const std::string& run_dir, std::ostream& out) {
    const auto records = read_metric_log(require_file(fs::path(run_dir) / "metrics.log", "metric log"));
    const RunReport rep = build_report(records);
    const fs::path dest = cfg.out_dir.empty() ? fs::path(run_dir) / "report" : fs::path(cfg.out_dir);
    write_report(rep, dest);
    out << "wrote report for " << records.size() << " records to " << dest.string() << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Preference-optimisation lab: synthetic data, training, evaluation and over-optimisation monitoring",
                 "daalab"};
    app.require_subcommand(1);

    CommonOptions gen_opts, train_opts, eval_opts, mon_opts, rep_opts;
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic preference dataset");
    add_common(gen, gen_opts);
    add_override(gen, gen_opts, "--pairs", "pairs", "training pairs");
    add_override(gen, gen_opts, "--validation-pairs", "validation_pairs", "validation pairs");
    add_override(gen, gen_opts, "--vocab-size", "vocab_size", "vocabulary size (>= 8)");

    auto* train = app.add_subcommand("train", "run one training epoch with periodic evaluation");
    add_common(train, train_opts);
    add_override(train, train_opts, "--data", "data", "dataset directory from gen-data");

    std::string checkpoint, competitor, prompts, qa;
    auto* eval = app.add_subcommand("eval", "head-to-head and factuality evaluation of a checkpoint");
    add_common(eval, eval_opts);
    add_override(eval, eval_opts, "--data", "data", "dataset directory (vocab, validation prompts, task)");
    eval->add_option("--checkpoint", checkpoint, "policy checkpoint")->required();
    eval->add_option("--competitor", competitor, "competitor checkpoint (default: ckpt_0 next to --checkpoint)");
    eval->add_option("--prompts", prompts, "prompt file, one prompt per line");
    eval->add_option("--qa", qa, "QA file with question/answers records");

    std::string log_path;
    auto* monitor = app.add_subcommand("monitor", "replay a metric log through the detector (exit 3 on a signal)");
    add_common(monitor, mon_opts);
    monitor->add_option("log", log_path, "metrics.log to replay")->required();

    std::string run_dir;
    auto* report = app.add_subcommand("report", "write report tables for a run directory");
    add_common(report, rep_opts);
    report->add_option("run", run_dir, "run directory containing metrics.log")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << "error: " << e.what() << '\n';
        if (auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front())
            err << "run '" << sub->get_name() << " --help' for usage\n";
        return kExitUsage;
    }

    try {
        ExperimentConfig cfg;
        if (gen->parsed()) {
            if (int rc = resolve(gen_opts, cfg, err); rc >= 0) return rc;
            cfg.validate();
            return cmd_gen_data(cfg, out);
        }
        if (train->parsed()) {
            if (int rc = resolve(train_opts, cfg, err); rc >= 0) return rc;
            return cmd_train(cfg, out, err);
        }
        if (eval->parsed()) {
            if (int rc = resolve(eval_opts, cfg, err); rc >= 0) return rc;
            cfg.validate();
            return cmd_eval(cfg, checkpoint, competitor, prompts, qa, out);
        }
        if (monitor->parsed()) {
            if (int rc = resolve(mon_opts, cfg, err); rc >= 0) return rc;
            return cmd_monitor(cfg, log_path, out);
        }
        if (int rc = resolve(rep_opts, cfg, err); rc >= 0) return rc;
        return cmd_report(cfg, run_dir, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
}

}  // namespace daa
