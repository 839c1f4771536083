#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcvae/data/augment.hpp"
#include "mcvae/strategy/assembly.hpp"

namespace mcvae::train {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// How an epoch walks the training poses: every (pose, cover) sample, or
/// each pose once under one cover drawn uniformly per epoch.
enum class CoverSampling { all, random };

/// One training run. Every field has a default; the INI form uses the
/// sections [experiment], [data], [train], [model] and [augment].
struct ExperimentConfig {
    static constexpr int kVersion = 1;

    // [experiment]
    strategy::Kind strategy = strategy::Kind::mcvae;
    std::uint64_t seed = 1;
    std::string out_dir = "runs/default";

    // [data]
    std::uint64_t data_seed = 1;
    int subjects = 20;
    int poses_per_subject = 45;
    std::string data_root;  // empty: generate synthetically
    CoverSampling cover_sampling = CoverSampling::all;

    // [train]
    int epochs = 100;
    double lr = 1e-3;
    double lr_decay = 0.1;
    std::vector<int> milestones{70, 90};
    std::size_t batch_size = 16;
    double beta = 1.0;
    int beta_warmup = 10;             // epochs of linear KL warm-up, 0 disables
    int finetune_phase_epochs = -1;   // -1: half of epochs
    int val_every = 1;
    int stop_after = 0;               // stop (resumably) after this epoch, 0: never
    bool augment = true;

    // [model]
    strategy::ModelConfig model;

    // [augment]
    data::AugmentConfig augmentation;

    /// Throws ConfigError naming the offending field.
    void validate() const;
    int phase_one_epochs() const { return finetune_phase_epochs < 0 ? epochs / 2 : finetune_phase_epochs; }
    bool operator==(const ExperimentConfig &) const;
};

/// Step schedule: lr * lr_decay^(number of milestones <= epoch).
double lr_at(const ExperimentConfig &cfg, int epoch);

/// KL weight for an epoch under the linear warm-up.
double beta_at(const ExperimentConfig &cfg, int epoch);

/// Parses INI text. Unknown sections or keys, malformed values and
/// `version` mismatches are errors.
ExperimentConfig parse_config(const std::string &text);
ExperimentConfig load_config(const std::filesystem::path &path);

/// Canonical INI text; parse_config(serialize(c)) == c.
std::string serialize(const ExperimentConfig &cfg);

std::string_view to_string(CoverSampling s);

} // namespace mcvae::train
