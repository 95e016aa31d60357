#include "ssgan/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "ssgan/errors.hpp"

namespace ssgan {

namespace {

using nlohmann::json;

std::string step_name(const char* net, const std::string& param) {
    return std::string(net) + "." + param;
}

// Applies one Adam update per trainable entry, reading gradients off the tape.
void apply_updates(Tape<float>& tape, const TapedParams& vars, ParamSet<float>& params,
                   std::map<std::string, AdamState<float>>& opt, const AdamConfig& cfg,
                   const char* net) {
    for (auto& entry : params.entries()) {
        if (!entry.trainable) continue;
        const Tensor<float>& grad = tape.grad(vars.at(entry.name));
        adam_step(entry.value, grad, opt[entry.name], cfg, step_name(net, entry.name));
    }
}

float node_scalar(const Tape<float>& tape, Var v) { return tape.value(v)[0]; }

} // namespace

const char* train_mode_name(TrainMode mode) {
    return mode == TrainMode::Ssgan ? "ssgan" : "supervised_baseline";
}

TrainMode parse_train_mode(const std::string& name) {
    if (name == "ssgan") return TrainMode::Ssgan;
    if (name == "baseline" || name == "supervised_baseline") return TrainMode::SupervisedBaseline;
    throw ConfigError("unknown mode '" + name + "' (choose ssgan or baseline)");
}

void TrainConfig::validate() const {
    if (!(labeled_fraction > 0.0) || labeled_fraction > 1.0) {
        throw ConfigError("labeled_fraction must be in (0, 1], got " +
                          std::to_string(labeled_fraction));
    }
    if (epochs < 1 || steps_per_epoch < 1) {
        throw ConfigError("epochs and steps_per_epoch must be >= 1");
    }
    if (batch_size < 1) {
        throw ConfigError("batch_size must be >= 1, got " + std::to_string(batch_size));
    }
    if (!(lr > 0.0)) {
        throw ConfigError("lr must be > 0, got " + std::to_string(lr));
    }
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
        throw ConfigError("betas must lie in [0, 1)");
    }
    if (lambda_u < 0.0) {
        throw ConfigError("lambda_u must be >= 0, got " + std::to_string(lambda_u));
    }
    if (checkpoint_every < 1) {
        throw ConfigError("checkpoint_every must be >= 1");
    }
    generator_spec().validate();
    discriminator_spec().validate();
}

GeneratorSpec TrainConfig::generator_spec() const {
    GeneratorSpec spec;
    spec.out_channels = selection_channel_count(selection);
    spec.tile_h = tile_h;
    spec.tile_w = tile_w;
    return spec;
}

DiscriminatorSpec TrainConfig::discriminator_spec() const {
    DiscriminatorSpec spec;
    spec.in_channels = selection_channel_count(selection);
    return spec;
}

void to_json(json& j, const TrainConfig& config) {
    j = json{{"selection", selection_name(config.selection)},
             {"labeled_fraction", config.labeled_fraction},
             {"epochs", config.epochs},
             {"steps_per_epoch", config.steps_per_epoch},
             {"batch_size", config.batch_size},
             {"tile_h", config.tile_h},
             {"tile_w", config.tile_w},
             {"lr", config.lr},
             {"beta1", config.beta1},
             {"beta2", config.beta2},
             {"lambda_u", config.lambda_u},
             {"seed", config.seed},
             {"checkpoint_every", config.checkpoint_every},
             {"mode", train_mode_name(config.mode)},
             {"unsup_on_labeled", config.unsup_on_labeled}};
}

TrainConfig train_config_from_json(const json& j, const std::string& origin) {
    if (!j.is_object()) {
        throw FormatError(origin + ": train config must be a JSON object");
    }
    static const std::set<std::string> known = {
        "selection",  "labeled_fraction", "epochs",           "steps_per_epoch",
        "batch_size", "tile_h",           "tile_w",           "lr",
        "beta1",      "beta2",            "lambda_u",         "seed",
        "checkpoint_every", "mode",       "unsup_on_labeled"};
    for (const auto& item : j.items()) {
        if (known.count(item.key()) == 0) {
            throw FormatError(origin + ": unknown key '" + item.key() + "'");
        }
    }
    TrainConfig config;
    auto get_int = [&](const char* key, int& out) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_number_integer()) {
            throw FormatError(origin + ": '" + key + "' must be an integer");
        }
        out = j.at(key).get<int>();
    };
    auto get_double = [&](const char* key, double& out) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_number()) {
            throw FormatError(origin + ": '" + key + "' must be a number");
        }
        out = j.at(key).get<double>();
    };
    if (j.contains("selection")) {
        if (!j.at("selection").is_string()) {
            throw FormatError(origin + ": 'selection' must be a string");
        }
        config.selection = parse_selection(j.at("selection").get<std::string>());
    }
    get_double("labeled_fraction", config.labeled_fraction);
    get_int("epochs", config.epochs);
    get_int("steps_per_epoch", config.steps_per_epoch);
    get_int("batch_size", config.batch_size);
    get_int("tile_h", config.tile_h);
    get_int("tile_w", config.tile_w);
    get_double("lr", config.lr);
    get_double("beta1", config.beta1);
    get_double("beta2", config.beta2);
    get_double("lambda_u", config.lambda_u);
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) {
            throw FormatError(origin + ": 'seed' must be an unsigned integer");
        }
        config.seed = j.at("seed").get<std::uint64_t>();
    }
    get_int("checkpoint_every", config.checkpoint_every);
    if (j.contains("mode")) {
        if (!j.at("mode").is_string()) {
            throw FormatError(origin + ": 'mode' must be a string");
        }
        config.mode = parse_train_mode(j.at("mode").get<std::string>());
    }
    if (j.contains("unsup_on_labeled")) {
        if (!j.at("unsup_on_labeled").is_boolean()) {
            throw FormatError(origin + ": 'unsup_on_labeled' must be a boolean");
        }
        config.unsup_on_labeled = j.at("unsup_on_labeled").get<bool>();
    }
    return config;
}

TrainState init_train_state(const TrainConfig& config) {
    config.validate();
    const Prng root(config.seed);
    TrainState state;
    if (config.mode == TrainMode::Ssgan) {
        Prng gen_prng = root.split(1);
        state.gen = build_generator<float>(config.generator_spec(), gen_prng);
    }
    Prng disc_prng = root.split(2);
    state.disc = build_discriminator<float>(config.discriminator_spec(), disc_prng);
    return state;
}

Tensor<float> sample_noise(Prng& prng, int n, int noise_dim) {
    return prng_uniform<float>(prng, Shape{n, noise_dim}, -1.0f, 1.0f);
}

LossBreakdown train_step(TrainState& state, const StepBatches& batches,
                         const TrainConfig& config) {
    const AdamConfig adam_cfg = config.adam();
    LossBreakdown losses;

    if (config.mode == TrainMode::SupervisedBaseline) {
        if (batches.unlabeled_images || batches.noise_d || batches.noise_g) {
            throw ContractError("baseline step must not carry unlabeled images or noise");
        }
        Tape<float> tape;
        TapedParams d_vars = lift_params(tape, state.disc.params, true);
        Var logits = discriminator_forward(tape, state.disc, d_vars,
                                           tape.constant(batches.labeled_images),
                                           NormMode::Train);
        Var sup = supervised_loss(tape, logits, batches.labeled_masks);
        tape.backward(sup);
        apply_updates(tape, d_vars, state.disc.params, state.disc_opt, adam_cfg, "disc");
        losses.sup = node_scalar(tape, sup);
        losses.unsup_real = 0.0f;
        losses.unsup_fake = 0.0f;
        losses.d_total = losses.sup;
        losses.g_loss = 0.0f;
        state.step += 1;
        return losses;
    }

    if (!state.has_generator()) {
        throw ContractError("ssgan step requires a generator in the training state");
    }
    if (!batches.noise_d || !batches.noise_g) {
        throw ContractError("ssgan step requires noise for both updates");
    }
    if (!batches.unlabeled_images && !config.unsup_on_labeled) {
        throw ContractError(
            "no unsupervised real source: provide unlabeled images or enable unsup_on_labeled");
    }

    // Discriminator update. The generator runs frozen (its parameters are
    // lifted without gradients), so fakes act as constants with respect to
    // the discriminator's update.
    {
        Tape<float> tape;
        TapedParams d_vars = lift_params(tape, state.disc.params, true);
        TapedParams g_vars = lift_params(tape, state.gen.params, false);
        Var fake = generator_forward(tape, state.gen, g_vars, tape.constant(*batches.noise_d),
                                     NormMode::Train);

        Var logits_labeled = discriminator_forward(tape, state.disc, d_vars,
                                                   tape.constant(batches.labeled_images),
                                                   NormMode::Train);
        Var sup = supervised_loss(tape, logits_labeled, batches.labeled_masks);

        std::vector<Var> real_terms;
        if (config.unsup_on_labeled) {
            real_terms.push_back(unsupervised_real_loss(tape, logits_labeled));
        }
        if (batches.unlabeled_images) {
            Var logits_unlabeled = discriminator_forward(tape, state.disc, d_vars,
                                                         tape.constant(*batches.unlabeled_images),
                                                         NormMode::Train);
            real_terms.push_back(unsupervised_real_loss(tape, logits_unlabeled));
        }
        Var unsup_real = real_terms.size() == 1
                             ? real_terms[0]
                             : scale(tape, add(tape, real_terms[0], real_terms[1]), 0.5f);

        Var logits_fake = discriminator_forward(tape, state.disc, d_vars, fake, NormMode::Train,
                                                /*update_stats=*/false);
        Var unsup_fake = unsupervised_fake_loss(tape, logits_fake);

        Var d_total = discriminator_loss(tape, sup, unsup_real, unsup_fake,
                                         static_cast<float>(config.lambda_u));
        tape.backward(d_total);
        apply_updates(tape, d_vars, state.disc.params, state.disc_opt, adam_cfg, "disc");

        losses.sup = node_scalar(tape, sup);
        losses.unsup_real = node_scalar(tape, unsup_real);
        losses.unsup_fake = node_scalar(tape, unsup_fake);
        losses.d_total = node_scalar(tape, d_total);
    }

    // Generator update against the just-updated discriminator, fresh noise.
    {
        Tape<float> tape;
        TapedParams g_vars = lift_params(tape, state.gen.params, true);
        TapedParams d_vars = lift_params(tape, state.disc.params, false);
        Var fake = generator_forward(tape, state.gen, g_vars, tape.constant(*batches.noise_g),
                                     NormMode::Train);
        Var logits_fake = discriminator_forward(tape, state.disc, d_vars, fake, NormMode::Train,
                                                /*update_stats=*/false);
        Var g_loss = generator_loss(tape, logits_fake);
        tape.backward(g_loss);
        apply_updates(tape, g_vars, state.gen.params, state.gen_opt, adam_cfg, "gen");
        losses.g_loss = node_scalar(tape, g_loss);
    }

    // Matches the scalar recombination exactly; also re-checks finiteness.
    (void)discriminator_loss(losses.sup, losses.unsup_real, losses.unsup_fake,
                             static_cast<float>(config.lambda_u));
    if (!std::isfinite(losses.g_loss)) {
        throw NumericError("generator loss is non-finite");
    }
    state.step += 1;
    return losses;
}

Checkpoint state_to_checkpoint(const TrainState& state, const TrainConfig& config) {
    Checkpoint cp;
    cp.step = state.step;
    json config_json;
    to_json(config_json, config);
    cp.config = config_json;
    cp.config_hash = config_hash_hex(config_json);

    auto add_set = [&](const char* net, const ParamSet<float>& params) {
        for (const auto& entry : params.entries()) {
            cp.add(step_name(net, entry.name), entry.value);
        }
    };
    auto add_opt = [&](const char* net, const ParamSet<float>& params,
                       const std::map<std::string, AdamState<float>>& opt) {
        for (const auto& entry : params.entries()) {
            if (!entry.trainable) continue;
            const std::string base = "adam." + step_name(net, entry.name);
            auto it = opt.find(entry.name);
            if (it != opt.end() && it->second.t > 0) {
                cp.add(base + ".m", it->second.m);
                cp.add(base + ".v", it->second.v);
                cp.add(base + ".t",
                       Tensor<float>::scalar(static_cast<float>(it->second.t)));
            } else {
                cp.add(base + ".m", Tensor<float>(entry.value.shape()));
                cp.add(base + ".v", Tensor<float>(entry.value.shape()));
                cp.add(base + ".t", Tensor<float>::scalar(0.0f));
            }
        }
    };
    if (state.has_generator()) {
        add_set("gen", state.gen.params);
    }
    add_set("disc", state.disc.params);
    if (state.has_generator()) {
        add_opt("gen", state.gen.params, state.gen_opt);
    }
    add_opt("disc", state.disc.params, state.disc_opt);
    return cp;
}

TrainState state_from_checkpoint(const Checkpoint& checkpoint) {
    TrainConfig config = train_config_from_json(checkpoint.config, "checkpoint config");
    TrainState state = init_train_state(config);
    state.step = checkpoint.step;

    auto restore_set = [&](const char* net, ParamSet<float>& params) {
        for (auto& entry : params.entries()) {
            const std::string name = step_name(net, entry.name);
            if (!checkpoint.has(name)) {
                throw FormatError("checkpoint is missing tensor '" + name + "'");
            }
            const Tensor<float>& stored = checkpoint.tensor(name);
            if (stored.shape() != entry.value.shape()) {
                throw FormatError("checkpoint tensor '" + name + "' has shape " +
                                  stored.shape().str() + ", expected " +
                                  entry.value.shape().str());
            }
            entry.value = stored;
        }
    };
    auto restore_opt = [&](const char* net, const ParamSet<float>& params,
                           std::map<std::string, AdamState<float>>& opt) {
        for (const auto& entry : params.entries()) {
            if (!entry.trainable) continue;
            const std::string base = "adam." + step_name(net, entry.name);
            for (const char* leaf : {".m", ".v", ".t"}) {
                if (!checkpoint.has(base + leaf)) {
                    throw FormatError("checkpoint is missing tensor '" + base + leaf + "'");
                }
            }
            AdamState<float> adam;
            adam.m = checkpoint.tensor(base + ".m");
            adam.v = checkpoint.tensor(base + ".v");
            adam.t = static_cast<std::int64_t>(checkpoint.tensor(base + ".t")[0]);
            if (adam.m.shape() != entry.value.shape() || adam.v.shape() != entry.value.shape()) {
                throw FormatError("checkpoint optimizer moments for '" + base +
                                  "' do not match the parameter shape");
            }
            opt[entry.name] = std::move(adam);
        }
    };
    if (state.has_generator()) {
        restore_set("gen", state.gen.params);
        restore_opt("gen", state.gen.params, state.gen_opt);
    }
    restore_set("disc", state.disc.params);
    restore_opt("disc", state.disc.params, state.disc_opt);
    return state;
}

DatasetSplit resolve_split(const TrainConfig& config, const Dataset& dataset,
                           const std::filesystem::path& dataset_dir) {
    const std::filesystem::path split_path = dataset_dir / "split.json";
    if (std::filesystem::exists(split_path)) {
        DatasetSplit split = load_split(split_path);
        if (std::abs(split.labeled_fraction - config.labeled_fraction) < 1e-9) {
            for (const std::string& id : split.labeled_train) {
                if (!dataset.has(id)) {
                    throw DataError("split id '" + id + "' has no image in the dataset");
                }
            }
            return split;
        }
    }
    Prng split_prng = Prng(config.seed).split(5);
    DatasetSplit split = make_split(dataset.ids(), config.labeled_fraction, 0.2, split_prng);
    split.seed = config.seed;
    return split;
}

TrainResult train(const TrainConfig& config, const std::filesystem::path& dataset_dir,
                  const std::filesystem::path& out_dir, const DatasetSplit* split_override) {
    namespace fs = std::filesystem;
    config.validate();
    fs::create_directories(out_dir);

    const Dataset dataset = Dataset::load_dir(dataset_dir);
    const DatasetSplit split =
        split_override ? *split_override : resolve_split(config, dataset, dataset_dir);
    const bool use_unlabeled =
        config.mode == TrainMode::Ssgan && !split.unlabeled_train.empty();
    if (config.mode == TrainMode::Ssgan && !use_unlabeled && !config.unsup_on_labeled) {
        throw ConfigError("unlabeled pool is empty and unsup_on_labeled is disabled");
    }

    // Surface dataset problems before step 1: run the samplers' validation
    // with a throwaway stream.
    {
        Prng probe(0);
        (void)sample_batch(dataset, split, Pool::Labeled, config.selection, 1, config.tile_h,
                           config.tile_w, probe);
        if (use_unlabeled) {
            (void)sample_batch(dataset, split, Pool::Unlabeled, config.selection, 1,
                               config.tile_h, config.tile_w, probe);
        }
    }

    json config_json;
    to_json(config_json, config);
    {
        std::ofstream out(out_dir / "config.json");
        out << config_json.dump(2) << '\n';
    }

    TrainState state = init_train_state(config);
    const Prng root(config.seed);
    Prng batch_prng = root.split(3);
    Prng noise_prng = root.split(4);
    const int noise_dim = config.generator_spec().noise_dim;

    const fs::path metrics_path = out_dir / "metrics.jsonl";
    std::ofstream metrics(metrics_path, std::ios::trunc);
    if (!metrics) {
        throw FormatError("cannot open " + metrics_path.string() + " for writing");
    }

    TrainResult result;
    const int total = config.total_steps();
    for (int step = 1; step <= total; ++step) {
        StepBatches batches;
        Batch labeled = sample_batch(dataset, split, Pool::Labeled, config.selection,
                                     config.batch_size, config.tile_h, config.tile_w, batch_prng);
        batches.labeled_images = std::move(labeled.images);
        batches.labeled_masks = std::move(*labeled.masks);
        if (config.mode == TrainMode::Ssgan) {
            if (use_unlabeled) {
                Batch unlabeled =
                    sample_batch(dataset, split, Pool::Unlabeled, config.selection,
                                 config.batch_size, config.tile_h, config.tile_w, batch_prng);
                batches.unlabeled_images = std::move(unlabeled.images);
            }
            batches.noise_d = sample_noise(noise_prng, config.batch_size, noise_dim);
            batches.noise_g = sample_noise(noise_prng, config.batch_size, noise_dim);
        }

        const auto t0 = std::chrono::steady_clock::now();
        LossBreakdown losses;
        try {
            losses = train_step(state, batches, config);
        } catch (const NumericError& e) {
            throw NumericError("step " + std::to_string(step) + ": " + e.what());
        }
        const auto t1 = std::chrono::steady_clock::now();
        const double wall_ms =
            std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(t1 - t0)
                .count();

        json line{{"step", step},
                  {"sup", losses.sup},
                  {"unsup_real", losses.unsup_real},
                  {"unsup_fake", losses.unsup_fake},
                  {"d_total", losses.d_total},
                  {"g_loss", losses.g_loss},
                  {"wall_ms", wall_ms}};
        metrics << line.dump() << '\n';
        result.history.push_back(losses);

        if (step % config.checkpoint_every == 0 && step != total) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "checkpoint_%06d.ckpt", step);
            save_checkpoint(out_dir / buf, state_to_checkpoint(state, config));
        }
    }
    metrics.flush();
    if (!metrics) {
        throw FormatError("failed writing " + metrics_path.string());
    }

    result.checkpoint_path = out_dir / "checkpoint_final.ckpt";
    save_checkpoint(result.checkpoint_path, state_to_checkpoint(state, config));
    result.metrics_path = metrics_path;
    result.state = std::move(state);
    return result;
}

TrainResult train_supervised_baseline(TrainConfig config,
                                      const std::filesystem::path& dataset_dir,
                                      const std::filesystem::path& out_dir) {
    config.mode = TrainMode::SupervisedBaseline;
    config.lambda_u = 0.0;
    return train(config, dataset_dir, out_dir);
}

} // namespace ssgan
