#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "aggronet/datapipe.hpp"
#include "aggronet/model.hpp"
#include "aggronet/tomlmini.hpp"
#include "aggronet/train.hpp"

namespace aggronet {

// Synthetic-data source. `size` of 0 follows the model input size.
struct SynthSpec {
    int64_t per_class = 75;
    int64_t size = 0;
};

// Partition sizes, either absolute counts or fractions of the dataset.
struct SplitSpec {
    bool by_fraction = true;
    int64_t train = 0;
    int64_t val = 0;
    int64_t test = 0;
    double train_frac = 0.7;
    double val_frac = 0.2;
    double test_frac = 0.1;
};

// One resolved run: data source, model, trainer, outputs. A single seed
// drives synthesis, weight init, shuffling, augmentation, and dropout.
struct RunConfig {
    uint64_t seed = 42;
    std::string out = "run";
    std::string data_path;  // exactly one of data_path / synth per run
    bool use_synth = false;
    SynthSpec synth;
    SplitSpec split;
    AugmentParams augment;
    HybridSpec model;  // defaults to default_desk_spec()
    TrainConfig train;
    bool svgs = false;

    RunConfig();
};

// Flag-level overrides, applied on top of file values (flag > file > default).
struct CliOverrides {
    std::optional<uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int64_t> epochs;
    std::optional<int64_t> batch_size;
    std::optional<double> base_lr;
    std::optional<int64_t> image_size;
    std::optional<double> dropout;
};

RunConfig run_config_from_toml(const toml::Table& t);
RunConfig load_run_config(const std::string& path);
void apply_overrides(RunConfig& c, const CliOverrides& o);

// Cross-field validation with dotted field paths in every message. When
// `require_data` is set, exactly one of data.path / [data.synth] must be
// configured (a config naming both is always an error).
void validate_run_config(const RunConfig& c, bool require_data);

// Counts pass through; fractions resolve against n with the remainder
// going to the test partition.
SplitCounts resolve_split(const SplitSpec& s, int64_t n);

// Synthetic image edge: explicit size, or the model input size.
int64_t resolve_synth_size(const RunConfig& c);

// Canonical JSON echo of every resolved field, for the run manifest.
std::string run_config_json(const RunConfig& c);

}  // namespace aggronet
