#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "daa/detector.hpp"
#include "daa/losses.hpp"
#include "daa/trainer.hpp"

namespace daa {

/// Everything a command needs, keyed by flat names in config files.
struct ExperimentConfig {
    TrainConfig train;
    LossConfig loss;
    DetectorConfig detector;

    std::string data_dir;
    std::string out_dir;

    // gen-data
    int pairs = 2000;
    int validation_pairs = 200;
    int vocab_size = 64;
    int target_length = 6;
    double corruption_rate = 0.25;

    double length_penalty = 0.5;

    void validate() const;
};

/// All keys accepted by apply_setting, in file order of to_config_text.
const std::vector<std::string>& config_keys();

/// Throws ConfigError on an unknown key or a value that does not parse.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// `key = value` lines; blank lines and `#` comments are skipped. Errors
/// name the line.
void apply_config_text(ExperimentConfig& cfg, std::string_view text);
void apply_config_file(ExperimentConfig& cfg, const std::filesystem::path& path);

/// Inverse of apply_config_text for every key.
std::string to_config_text(const ExperimentConfig& cfg);

}  // namespace daa
