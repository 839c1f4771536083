#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcvae/autodiff/adam.hpp"
#include "mcvae/rng.hpp"
#include "mcvae/train/config.hpp"

namespace mcvae::train {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TensorRecord {
    ad::Shape shape;
    std::vector<double> values;
    ad::AdamSlot slot;
    bool operator==(const TensorRecord &o) const
    {
        return shape == o.shape && values == o.values && slot.m == o.slot.m && slot.v == o.slot.v &&
               slot.steps == o.slot.steps;
    }
};

/// Everything needed to resume a run. Files are little-endian:
///   "MCVAECKP" u32 format_version
///   str config  u64 epoch  u64 rng_key u64 rng_counter
///   f64 best_metric  i64 best_epoch
///   u32 n_frozen {str prefix}
///   u32 n_tensors {str name  u32 rank {u64 extent}  f64[numel] values
///                  u64 adam_steps  u8 has_moments [f64[numel] m  f64[numel] v]}
/// where str is u32 length followed by bytes. Tensors are stored in name order.
struct Checkpoint {
    static constexpr std::uint32_t kFormatVersion = 1;

    std::string config_text;
    std::uint64_t epoch = 0;  // completed epochs
    CounterRng::State rng{};
    double best_metric = -1.0;
    std::int64_t best_epoch = -1;
    std::set<std::string> frozen;
    std::map<std::string, TensorRecord> tensors;

    ExperimentConfig config() const { return parse_config(config_text); }
    bool operator==(const Checkpoint &) const = default;
};

std::vector<std::uint8_t> encode(const Checkpoint &ckpt);
/// Throws CheckpointError on bad magic, a version mismatch or truncation.
Checkpoint decode(const std::vector<std::uint8_t> &bytes);

void save_checkpoint(const Checkpoint &ckpt, const std::filesystem::path &path);
Checkpoint load_checkpoint(const std::filesystem::path &path);

} // namespace mcvae::train
