#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mcvae/data/synth.hpp"
#include "mcvae/pose/pose.hpp"
#include "mcvae/strategy/assembly.hpp"
#include "mcvae/train/checkpoint.hpp"
#include "mcvae/train/config.hpp"

namespace mcvae::train {

/// Immutable samples plus the subject-wise split; shared between runs.
struct Dataset {
    std::vector<data::Sample> samples;
    data::DatasetSplit split;  // subject ids
    std::vector<const data::Sample *> train;
    std::vector<const data::Sample *> val;
    std::vector<const data::Sample *> test;

    const std::vector<const data::Sample *> &subset(const std::string &name) const;
};

/// Generates the synthetic set (or reads data.root) and splits it by subject.
std::shared_ptr<const Dataset> load_dataset(const ExperimentConfig &cfg);

/// Model, optimizer and bookkeeping of a run in progress.
struct RunState {
    ExperimentConfig config;
    strategy::Assembly model;
    nn::Optimizer optimizer;
    int epoch = 0;  // completed epochs
    CounterRng::State rng{};
    double best_metric = -1.0;
    std::int64_t best_epoch = -1;
};

RunState fresh_state(const ExperimentConfig &cfg);
Checkpoint snapshot(const RunState &state);
/// Rebuilds a run from a checkpoint; names and shapes must match exactly.
RunState restore(const Checkpoint &ckpt);

struct LogRow {
    int epoch = 0;
    std::string split;  // "train" or "val"
    double lr = 0.0;
    double pose = 0.0;
    std::optional<double> reg;
    std::optional<double> recon;
    double total = 0.0;
    std::optional<double> pckh;
    std::optional<double> utilization;
};

std::string log_header();
std::string to_csv(const LogRow &row);

struct EvalOptions {
    pose::CoverFilter filter = pose::CoverFilter::acc;
    bool single_modality = true;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
};

struct EvalResult {
    pose::PckhReport report;
    std::vector<pose::SampleResult> samples;
    double pose_loss = 0.0;
    std::optional<double> reg;    // MC-VAE held-out terms against the
    std::optional<double> recon;  // uncovered m2 of each pose
};

/// Inference over `samples` after cover filtering. Throws
/// strategy::ModalityError for feature fusion with single_modality set, and
/// std::invalid_argument when the filter leaves nothing.
EvalResult evaluate(const strategy::Assembly &model, const std::vector<const data::Sample *> &samples,
                    const EvalOptions &opt);

struct TrainOptions {
    /// Directory for log.csv, best.ckpt and last.ckpt; empty keeps
    /// everything in memory.
    std::filesystem::path out_dir;
    /// Called after each logged row.
    std::function<void(const LogRow &)> on_row;
};

struct TrainResult {
    RunState state;
    std::optional<Checkpoint> best;
    std::vector<LogRow> log;
    bool finished = false;  // false when stopped by train.stop_after
};

/// Trains from `start` (a fresh or restored state) until train.epochs or
/// train.stop_after.
TrainResult run_training(RunState start, const Dataset &data, const TrainOptions &opt = {});

/// Loads a checkpoint and evaluates a split under a cover filter.
EvalResult run_eval(const Checkpoint &ckpt, const Dataset &data, const std::string &split, pose::CoverFilter filter,
                    bool single_modality = true);

struct BenchRun {
    ExperimentConfig config;
    EvalResult covered;     // OCI, the headline subset
    EvalResult uncovered;   // OUI
    EvalResult all;         // ACC
    std::vector<LogRow> log;
    std::int64_t best_epoch = -1;
};

struct BenchResult {
    std::vector<BenchRun> runs;
    /// Rows of the comparison table: method, 14 joints, Total, utilization,
    /// averaged over the runs of each strategy (covered test subset).
    std::vector<std::vector<std::string>> table;
};

/// Thread cap from MCVAE_THREADS (default: hardware concurrency, min 1).
std::size_t thread_cap();

/// Trains and evaluates every config (at least two strategies, one shared
/// data seed). Runs are independent and may execute concurrently. When
/// out_dir is set, writes table2.csv, covers.csv, runs.csv and
/// loss_curves.csv plus a directory per run. A failing run aborts the table
/// after the completed runs' files have been written.
BenchResult run_benchmark(const std::vector<ExperimentConfig> &configs, const std::filesystem::path &out_dir,
                          std::size_t threads = thread_cap());

std::vector<std::string> table_header();

} // namespace mcvae::train
