#include "daa/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "daa/errors.hpp"

namespace daa {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
    T out{};
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || v.empty())
        throw ConfigError("bad value '" + std::string(v) + "' for " + std::string(key));
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad value '" + std::string(v) + "' for " + std::string(key) + " (expected true|false)");
}

std::string fmt(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

std::string fmt_agg(const std::optional<Aggregation>& a) { return a ? std::string(to_string(*a)) : "default"; }

std::optional<Aggregation> parse_opt_agg(std::string_view v) {
    if (v == "default") return std::nullopt;
    return parse_aggregation(v);
}

struct Entry {
    std::string key;
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

#define DAA_NUM(name, T, field)                                                                \
    Entry { name, [](ExperimentConfig& c, std::string_view v) { c.field = parse_number<T>(name, v); }, \
            [](const ExperimentConfig& c) {                                                    \
                if constexpr (std::is_floating_point_v<T>) return fmt(c.field);                \
                else return std::to_string(c.field);                                           \
            } }

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = {
        DAA_NUM("seed", std::uint64_t, train.seed),
        DAA_NUM("peak_lr", double, train.peak_lr),
        DAA_NUM("end_lr_ratio", double, train.end_lr_ratio),
        DAA_NUM("warmup_steps", int, train.warmup_steps),
        {"decay",
         [](ExperimentConfig& c, std::string_view v) {
             if (v == "linear") c.train.decay = DecayShape::kLinear;
             else if (v == "cosine") c.train.decay = DecayShape::kCosine;
             else throw ConfigError("bad value '" + std::string(v) + "' for decay (expected linear|cosine)");
         },
         [](const ExperimentConfig& c) {
             return std::string(c.train.decay == DecayShape::kLinear ? "linear" : "cosine");
         }},
        DAA_NUM("batch_size", int, train.batch_size),
        DAA_NUM("eval_interval", int, train.eval_interval),
        DAA_NUM("max_steps", int, train.max_steps),
        DAA_NUM("adam_beta1", double, train.adam_beta1),
        DAA_NUM("adam_beta2", double, train.adam_beta2),
        DAA_NUM("adam_eps", double, train.adam_eps),
        DAA_NUM("weight_decay", double, train.weight_decay),
        DAA_NUM("clip_norm", double, train.clip_norm),
        {"stop_policy", [](ExperimentConfig& c, std::string_view v) { c.train.stop_policy = parse_stop_policy(v); },
         [](const ExperimentConfig& c) { return std::string(to_string(c.train.stop_policy)); }},
        {"adaptive_lambda",
         [](ExperimentConfig& c, std::string_view v) { c.train.adaptive_lambda = parse_bool("adaptive_lambda", v); },
         [](const ExperimentConfig& c) { return std::string(c.train.adaptive_lambda ? "true" : "false"); }},
        DAA_NUM("embed_dim", int, train.shape.embed_dim),
        DAA_NUM("hidden_dim", int, train.shape.hidden_dim),
        DAA_NUM("context_order", int, train.shape.context_order),
        DAA_NUM("init_scale", double, train.init_scale),
        DAA_NUM("eval_prompts", int, train.eval_prompts),
        DAA_NUM("top_p", double, train.generation.top_p),
        DAA_NUM("temperature", double, train.generation.temperature),
        DAA_NUM("max_tokens", int, train.generation.max_tokens),
        DAA_NUM("top_k", int, train.entropy.k),
        DAA_NUM("entropy_base", double, train.entropy.base),
        {"entropy_normalise",
         [](ExperimentConfig& c, std::string_view v) { c.train.entropy.normalise = parse_bool("entropy_normalise", v); },
         [](const ExperimentConfig& c) { return std::string(c.train.entropy.normalise ? "true" : "false"); }},
        {"entropy_mode",
         [](ExperimentConfig& c, std::string_view v) {
             if (v == "teacher_forced") c.train.entropy_mode = EntropyMode::kTeacherForced;
             else if (v == "generated") c.train.entropy_mode = EntropyMode::kGenerated;
             else throw ConfigError("bad value '" + std::string(v) + "' for entropy_mode (expected teacher_forced|generated)");
         },
         [](const ExperimentConfig& c) {
             return std::string(c.train.entropy_mode == EntropyMode::kTeacherForced ? "teacher_forced" : "generated");
         }},

        {"method", [](ExperimentConfig& c, std::string_view v) { c.loss.method = parse_method(v); },
         [](const ExperimentConfig& c) { return std::string(to_string(c.loss.method)); }},
        DAA_NUM("beta", double, loss.beta),
        DAA_NUM("tau", double, loss.tau),
        DAA_NUM("gamma", double, loss.gamma),
        DAA_NUM("alpha", double, loss.alpha),
        DAA_NUM("lambda_nll", double, loss.lambda_nll),
        {"smaug", [](ExperimentConfig& c, std::string_view v) { c.loss.smaug_enabled = parse_bool("smaug", v); },
         [](const ExperimentConfig& c) { return std::string(c.loss.smaug_enabled ? "true" : "false"); }},
        {"aggregation", [](ExperimentConfig& c, std::string_view v) { c.loss.aggregation = parse_opt_agg(v); },
         [](const ExperimentConfig& c) { return fmt_agg(c.loss.aggregation); }},
        {"nll_aggregation", [](ExperimentConfig& c, std::string_view v) { c.loss.nll_aggregation = parse_opt_agg(v); },
         [](const ExperimentConfig& c) { return fmt_agg(c.loss.nll_aggregation); }},

        DAA_NUM("half_life", double, detector.half_life),
        DAA_NUM("window", int, detector.window),
        DAA_NUM("entropy_floor", double, detector.entropy_floor),
        DAA_NUM("mass_floor", double, detector.mass_floor),
        DAA_NUM("arm_after", int, detector.arm_after),
        DAA_NUM("kappa", double, detector.kappa),
        DAA_NUM("lambda_seed", double, detector.lambda_seed),
        DAA_NUM("lambda_ceiling", double, detector.lambda_ceiling),
        DAA_NUM("entropy_upper_band", double, detector.entropy_upper_band),

        {"data", [](ExperimentConfig& c, std::string_view v) { c.data_dir = std::string(v); },
         [](const ExperimentConfig& c) { return c.data_dir; }},
        {"out", [](ExperimentConfig& c, std::string_view v) { c.out_dir = std::string(v); },
         [](const ExperimentConfig& c) { return c.out_dir; }},
        DAA_NUM("pairs", int, pairs),
        DAA_NUM("validation_pairs", int, validation_pairs),
        DAA_NUM("vocab_size", int, vocab_size),
        DAA_NUM("target_length", int, target_length),
        DAA_NUM("corruption_rate", double, corruption_rate),
        DAA_NUM("length_penalty", double, length_penalty),
    };
    return table;
}

#undef DAA_NUM

}  // namespace

void ExperimentConfig::validate() const {
    train.validate();
    loss.validate();
    detector.validate();
    if (pairs < 1) throw ConfigError("pairs must be >= 1");
    if (validation_pairs < 1) throw ConfigError("validation_pairs must be >= 1");
    if (vocab_size < 8) throw ConfigError("vocab_size must be >= 8");
    if (target_length < 1) throw ConfigError("target_length must be >= 1");
    if (!(corruption_rate >= 0.0 && corruption_rate <= 1.0)) throw ConfigError("corruption_rate must lie in [0, 1]");
    if (!(length_penalty >= 0.0)) throw ConfigError("length_penalty must be non-negative");
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& e : entries()) k.push_back(e.key);
        return k;
    }();
    return keys;
}

void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    for (const auto& e : entries()) {
        if (e.key == key) {
            e.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void apply_config_text(ExperimentConfig& cfg, std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string s = trim(raw);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line) + ": expected key = value");
        const std::string key = trim(std::string_view(s).substr(0, eq));
        const std::string value = trim(std::string_view(s).substr(eq + 1));
        try {
            apply_setting(cfg, key, value);
        } catch (const Error& e) {
            throw ConfigError("config line " + std::to_string(line) + ": " + e.what());
        }
    }
}

void apply_config_file(ExperimentConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        apply_config_text(cfg, ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string to_config_text(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& e : entries()) out += e.key + " = " + e.get(cfg) + "\n";
    return out;
}

}  // namespace daa
