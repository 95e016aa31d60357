#pragma once

// Adversarial training loop and the supervised baseline. One logical thread
// owns all parameters and optimizer state. Seed streams derived from
// config.seed: split(1) generator init, split(2) discriminator init,
// split(3) batch sampling, split(4) noise draws, split(5) split creation
// when the dataset ships none.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ssgan/adam.hpp"
#include "ssgan/checkpoint.hpp"
#include "ssgan/dataset.hpp"
#include "ssgan/losses.hpp"
#include "ssgan/models.hpp"

namespace ssgan {

enum class TrainMode { Ssgan, SupervisedBaseline };

const char* train_mode_name(TrainMode mode);
TrainMode parse_train_mode(const std::string& name); // "ssgan" | "baseline" | "supervised_baseline"

struct TrainConfig {
    ChannelSelection selection = ChannelSelection::RedNir;
    double labeled_fraction = 0.3;
    int epochs = 5;
    int steps_per_epoch = 100;
    int batch_size = 32;
    int tile_h = 32;
    int tile_w = 32;
    double lr = 0.0002;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double lambda_u = 1.0;
    std::uint64_t seed = 0;
    int checkpoint_every = 500;
    TrainMode mode = TrainMode::Ssgan;
    // Labeled pixels also feed the unsupervised real term on their images.
    bool unsup_on_labeled = true;

    void validate() const;
    int total_steps() const { return epochs * steps_per_epoch; }
    GeneratorSpec generator_spec() const;
    DiscriminatorSpec discriminator_spec() const;
    AdamConfig adam() const { return AdamConfig{lr, beta1, beta2, 1e-8}; }
};

void to_json(nlohmann::json& j, const TrainConfig& config);
// Rejects unknown keys; missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& origin);

// Mutable training state. The generator set stays empty in baseline mode.
struct TrainState {
    GeneratorParams<float> gen;
    DiscriminatorParams<float> disc;
    std::map<std::string, AdamState<float>> gen_opt;  // keyed by parameter name
    std::map<std::string, AdamState<float>> disc_opt;
    std::int64_t step = 0;

    bool has_generator() const { return !gen.params.entries().empty(); }
};

TrainState init_train_state(const TrainConfig& config);

// The caller samples everything; train_step only computes and applies
// updates, so two modes can be fed bit-identical batches.
struct StepBatches {
    Tensor<float> labeled_images;
    MaskBatch labeled_masks;
    std::optional<Tensor<float>> unlabeled_images;
    std::optional<Tensor<float>> noise_d; // fakes for the discriminator step
    std::optional<Tensor<float>> noise_g; // fresh fakes for the generator step
};

Tensor<float> sample_noise(Prng& prng, int n, int noise_dim);

// One optimization step: discriminator update (supervised + weighted
// unsupervised terms), then generator update on re-sampled noise. Baseline
// mode runs the supervised discriminator update only. Generated batches never
// touch the discriminator's running statistics.
LossBreakdown train_step(TrainState& state, const StepBatches& batches,
                         const TrainConfig& config);

Checkpoint state_to_checkpoint(const TrainState& state, const TrainConfig& config);
TrainState state_from_checkpoint(const Checkpoint& checkpoint);

struct TrainResult {
    TrainState state;
    std::vector<LossBreakdown> history; // one entry per step
    std::filesystem::path checkpoint_path;
    std::filesystem::path metrics_path;
};

// The dataset's split.json is reused when its labeled fraction matches the
// config; anything else derives a fresh split from the config seed with a
// held-out fifth for testing.
DatasetSplit resolve_split(const TrainConfig& config, const Dataset& dataset,
                           const std::filesystem::path& dataset_dir);

// Runs epochs x steps_per_epoch steps against <dataset_dir>, writing
// metrics.jsonl (one JSON object per step), cadence checkpoints and
// checkpoint_final.ckpt plus config.json under <out_dir>. Split resolution:
// an explicit override wins; else resolve_split.
TrainResult train(const TrainConfig& config, const std::filesystem::path& dataset_dir,
                  const std::filesystem::path& out_dir,
                  const DatasetSplit* split_override = nullptr);

// `train` with mode forced to the supervised baseline (no generator, no
// unsupervised terms).
TrainResult train_supervised_baseline(TrainConfig config,
                                      const std::filesystem::path& dataset_dir,
                                      const std::filesystem::path& out_dir);

} // namespace ssgan
