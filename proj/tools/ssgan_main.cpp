// Command-line surface: synth, prepare, train, eval, sweep, sample,
// gradcheck. Every command is deterministic given its flags; commands that
// draw randomness demand an explicit seed. Config precedence: --config file,
// then --set dotted overrides, then named flags.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric
// failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ssgan/checkpoint.hpp"
#include "ssgan/dataset.hpp"
#include "ssgan/errors.hpp"
#include "ssgan/eval.hpp"
#include "ssgan/gradcheck_suite.hpp"
#include "ssgan/raster_io.hpp"
#include "ssgan/sweep.hpp"
#include "ssgan/synth.hpp"
#include "ssgan/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ssgan;

namespace {

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const OracleError*>(&e)) return 3;
    if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const DataError*>(&e) ||
        dynamic_cast<const ShapeError*>(&e)) {
        return 2;
    }
    return 1; // ConfigError, ContractError, anything else usage-shaped
}

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return j;
}

// --set a.b=value; the value parses as JSON when possible, else as a string.
void apply_set_overrides(json& config, const std::vector<std::string>& sets) {
    for (const std::string& kv : sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        }
        std::string key = kv.substr(0, eq);
        std::string value = kv.substr(eq + 1);
        for (char& c : key) {
            if (c == '.') c = '/';
        }
        json parsed;
        try {
            parsed = json::parse(value);
        } catch (const json::exception&) {
            parsed = value;
        }
        config[json::json_pointer("/" + key)] = parsed;
    }
}

std::uint64_t require_seed(const CLI::App* cmd, std::uint64_t seed_flag, const json& config) {
    if (cmd->count("--seed") > 0) return seed_flag;
    if (config.contains("seed") && config.at("seed").is_number_unsigned()) {
        return config.at("seed").get<std::uint64_t>();
    }
    throw ConfigError("an explicit --seed (or a 'seed' key in --config) is required so the "
                      "run is reproducible");
}

void echo_config(const json& config) { std::cout << "config: " << config.dump() << "\n"; }

std::vector<ChannelSelection> parse_selection_list(const std::string& csv) {
    std::vector<ChannelSelection> out;
    std::string item;
    std::stringstream ss(csv);
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(parse_selection(item));
    }
    if (out.empty()) throw ConfigError("empty channel list");
    return out;
}

std::vector<double> parse_fraction_list(const std::string& csv) {
    std::vector<double> out;
    std::string item;
    std::stringstream ss(csv);
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("bad fraction '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("empty fraction list");
    return out;
}

// ---------------------------------------------------------------------------

struct SynthOptions {
    std::string out;
    std::string config_file;
    std::uint64_t seed = 0;
    bool force = false;
    std::vector<std::string> sets;
    const CLI::App* cmd = nullptr;
};

int cmd_synth(const SynthOptions& opt) {
    json config_json = opt.config_file.empty() ? json::object() : load_json_file(opt.config_file);
    apply_set_overrides(config_json, opt.sets);
    config_json["seed"] = require_seed(opt.cmd, opt.seed, config_json);

    SyntheticFieldConfig config = synth_config_from_json(config_json, "synth config");
    json effective;
    to_json(effective, config);
    echo_config(effective);

    write_synth_dataset(opt.out, config, opt.force);
    {
        std::ofstream out(fs::path(opt.out) / "synth_config.json");
        out << effective.dump(2) << '\n';
    }
    std::cout << "wrote " << config.image_count << " images (3 channels each) + masks + "
              << "split.json under " << opt.out << "\n";
    return 0;
}

struct PrepareOptions {
    std::string dataset;
    double labeled_fraction = 0.3;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
    bool force = false;
    const CLI::App* cmd = nullptr;
};

int cmd_prepare(const PrepareOptions& opt) {
    const fs::path dataset_dir(opt.dataset);
    const fs::path images_dir = dataset_dir / "images";
    if (!fs::is_directory(images_dir)) {
        throw DataError("no images directory at " + images_dir.string());
    }
    const std::uint64_t seed = require_seed(opt.cmd, opt.seed, json::object());

    json effective{{"labeled_fraction", opt.labeled_fraction},
                   {"test_fraction", opt.test_fraction},
                   {"seed", seed}};
    echo_config(effective);

    // Derive missing ndvi rasters from the raw red/nir bands.
    std::vector<std::string> ids;
    int ndvi_written = 0;
    for (const auto& entry : fs::directory_iterator(images_dir)) {
        const std::string name = entry.path().filename().string();
        const std::string suffix = std::string(".") + kChannelRed + ".msr";
        if (name.size() <= suffix.size() || name.substr(name.size() - suffix.size()) != suffix) {
            continue;
        }
        const std::string id = name.substr(0, name.size() - suffix.size());
        ids.push_back(id);
        const fs::path ndvi_path = images_dir / (id + "." + kChannelNdvi + ".msr");
        if (fs::exists(ndvi_path) && !opt.force) continue;
        Raster red = load_raster(images_dir / (id + "." + kChannelRed + ".msr"));
        Raster nir = load_raster(images_dir / (id + "." + kChannelNir + ".msr"));
        save_raster(ndvi_path, compute_ndvi(nir, red));
        ++ndvi_written;
    }
    if (ids.empty()) {
        throw DataError("no images named <id>." + std::string(kChannelRed) + ".msr under " +
                        images_dir.string());
    }
    std::sort(ids.begin(), ids.end());

    const fs::path split_path = dataset_dir / "split.json";
    if (fs::exists(split_path) && !opt.force) {
        throw DataError(split_path.string() + " already exists; pass --force to replace it");
    }
    Prng prng(seed);
    DatasetSplit split = make_split(ids, opt.labeled_fraction, opt.test_fraction, prng);
    split.seed = seed;
    save_split(split_path, split);
    std::cout << "split: " << split.labeled_train.size() << " labeled / "
              << split.unlabeled_train.size() << " unlabeled / " << split.test.size()
              << " test; ndvi rasters written: " << ndvi_written << "\n";
    return 0;
}

struct TrainOptions {
    std::string dataset;
    std::string out;
    std::string config_file;
    std::vector<std::string> sets;
    std::string channels;
    std::string mode;
    double labeled_fraction = 0.0;
    int epochs = 0;
    int steps_per_epoch = 0;
    int batch_size = 0;
    int tile = 0;
    double lr = 0.0;
    double beta1 = -1.0;
    double beta2 = -1.0;
    double lambda_u = -1.0;
    int checkpoint_every = 0;
    int unsup_on_labeled = -1;
    std::uint64_t seed = 0;
    const CLI::App* cmd = nullptr;
};

json merge_train_config(const TrainOptions& opt) {
    json config_json = opt.config_file.empty() ? json::object() : load_json_file(opt.config_file);
    apply_set_overrides(config_json, opt.sets);

    const CLI::App* cmd = opt.cmd;
    if (cmd->count("--channels")) config_json["selection"] = opt.channels;
    if (cmd->count("--mode")) config_json["mode"] = opt.mode;
    if (cmd->count("--labeled-fraction")) config_json["labeled_fraction"] = opt.labeled_fraction;
    if (cmd->count("--epochs")) config_json["epochs"] = opt.epochs;
    if (cmd->count("--steps-per-epoch")) config_json["steps_per_epoch"] = opt.steps_per_epoch;
    if (cmd->count("--batch-size")) config_json["batch_size"] = opt.batch_size;
    if (cmd->count("--tile")) {
        config_json["tile_h"] = opt.tile;
        config_json["tile_w"] = opt.tile;
    }
    if (cmd->count("--lr")) config_json["lr"] = opt.lr;
    if (cmd->count("--beta1")) config_json["beta1"] = opt.beta1;
    if (cmd->count("--beta2")) config_json["beta2"] = opt.beta2;
    if (cmd->count("--lambda-u")) config_json["lambda_u"] = opt.lambda_u;
    if (cmd->count("--checkpoint-every")) config_json["checkpoint_every"] = opt.checkpoint_every;
    if (cmd->count("--unsup-on-labeled")) {
        config_json["unsup_on_labeled"] = opt.unsup_on_labeled != 0;
    }
    if (config_json.contains("mode") && config_json.at("mode").is_string()) {
        // Normalize the CLI alias before strict parsing.
        config_json["mode"] = train_mode_name(parse_train_mode(config_json.at("mode")));
    }
    config_json["seed"] = require_seed(cmd, opt.seed, config_json);
    return config_json;
}

int cmd_train(const TrainOptions& opt) {
    json config_json = merge_train_config(opt);
    TrainConfig config = train_config_from_json(config_json, "train config");
    json effective;
    to_json(effective, config);
    echo_config(effective);

    TrainResult result = train(config, opt.dataset, opt.out);
    const LossBreakdown& last = result.history.back();
    std::cout << "trained " << result.history.size() << " steps; final sup=" << last.sup
              << " d_total=" << last.d_total << " g_loss=" << last.g_loss << "\n";
    std::cout << "checkpoint: " << result.checkpoint_path.string() << "\n";
    std::cout << "metrics: " << result.metrics_path.string() << "\n";
    return 0;
}

struct EvalOptions {
    std::string checkpoint;
    std::string dataset;
    std::string channels;
    std::string pool = "test";
    std::string out;
};

int cmd_eval(const EvalOptions& opt) {
    Checkpoint cp = load_checkpoint(opt.checkpoint);
    TrainConfig config = train_config_from_json(cp.config, "checkpoint config");
    if (!opt.channels.empty()) {
        const ChannelSelection requested = parse_selection(opt.channels);
        if (requested != config.selection) {
            throw ConfigError("checkpoint was trained on " +
                              std::string(selection_name(config.selection)) +
                              " but --channels asks for " + opt.channels);
        }
    }
    json effective;
    to_json(effective, config);
    echo_config(effective);

    TrainState state = state_from_checkpoint(cp);
    const Dataset dataset = Dataset::load_dir(opt.dataset);
    const DatasetSplit split = resolve_split(config, dataset, opt.dataset);

    Pool pool;
    if (opt.pool == "test") {
        pool = Pool::Test;
    } else if (opt.pool == "labeled" || opt.pool == "labeled_train") {
        pool = Pool::Labeled;
    } else if (opt.pool == "unlabeled" || opt.pool == "unlabeled_train") {
        pool = Pool::Unlabeled;
    } else {
        throw ConfigError("unknown pool '" + opt.pool + "' (test, labeled, unlabeled)");
    }

    EvalReport report = evaluate(state.disc, dataset, split, pool, config.selection,
                                 config.tile_h, config.tile_w);
    report.config = cp.config;
    report.config_hash = cp.config_hash;

    std::cout << report_text(report);
    json report_json;
    to_json(report_json, report);
    if (!opt.out.empty()) {
        std::ofstream out(opt.out);
        out << report_json.dump(2) << '\n';
        std::cout << "report: " << opt.out << "\n";
    } else {
        std::cout << report_json.dump(2) << "\n";
    }
    return 0;
}

struct SweepOptions {
    std::string dataset;
    std::string out;
    std::string config_file;
    std::vector<std::string> sets;
    std::string channels;
    std::string fractions;
    std::uint64_t seed = 0;
    int epochs = 0;
    int steps_per_epoch = 0;
    int batch_size = 0;
    const CLI::App* cmd = nullptr;
};

int cmd_sweep(const SweepOptions& opt) {
    json config_json = opt.config_file.empty() ? json::object() : load_json_file(opt.config_file);
    apply_set_overrides(config_json, opt.sets);
    if (opt.cmd->count("--epochs")) config_json["epochs"] = opt.epochs;
    if (opt.cmd->count("--steps-per-epoch")) config_json["steps_per_epoch"] = opt.steps_per_epoch;
    if (opt.cmd->count("--batch-size")) config_json["batch_size"] = opt.batch_size;
    config_json["seed"] = require_seed(opt.cmd, opt.seed, config_json);

    TrainConfig base = train_config_from_json(config_json, "sweep config");
    json effective;
    to_json(effective, base);
    echo_config(effective);

    const std::vector<ChannelSelection> selections =
        opt.channels.empty()
            ? std::vector<ChannelSelection>(std::begin(kAllSelections), std::end(kAllSelections))
            : parse_selection_list(opt.channels);
    const std::vector<double> fractions =
        opt.fractions.empty() ? kSweepFractions : parse_fraction_list(opt.fractions);

    SweepTable table = run_sweep(selections, fractions, base, opt.dataset, opt.out);
    std::cout << sweep_text(table);
    std::cout << "cells: " << table.cells.size() * 2 << " F1 values across "
              << table.cells.size() << " runs\n";
    std::cout << "outputs: " << (fs::path(opt.out) / "sweep.json").string() << ", "
              << (fs::path(opt.out) / "sweep.txt").string() << "\n";
    return 0;
}

struct SampleOptions {
    std::string checkpoint;
    std::string out;
    int n = 4;
    std::string channels;
    std::uint64_t seed = 0;
    const CLI::App* cmd = nullptr;
};

int cmd_sample(const SampleOptions& opt) {
    Checkpoint cp = load_checkpoint(opt.checkpoint);
    TrainConfig config = train_config_from_json(cp.config, "checkpoint config");
    if (!opt.channels.empty() && parse_selection(opt.channels) != config.selection) {
        throw ConfigError("checkpoint was trained on " +
                          std::string(selection_name(config.selection)) +
                          " but --channels asks for " + opt.channels);
    }
    const std::uint64_t seed = require_seed(opt.cmd, opt.seed, json::object());
    if (opt.n < 1) throw ConfigError("--n must be >= 1");

    TrainState state = state_from_checkpoint(cp);
    if (!state.has_generator()) {
        throw ConfigError("checkpoint holds no generator (supervised baseline); cannot sample");
    }
    json effective;
    to_json(effective, config);
    echo_config(effective);

    Prng noise_prng = Prng(seed).split(4);
    Tensor<float> noise = sample_noise(noise_prng, opt.n, state.gen.spec.noise_dim);
    Tensor<float> tiles = generator_forward(state.gen, noise, NormMode::Infer);

    fs::create_directories(opt.out);
    const std::vector<std::string> channel_names = selection_channels(config.selection);
    std::vector<std::uint8_t> plane(static_cast<std::size_t>(config.tile_h) * config.tile_w);
    int files = 0;
    for (int i = 0; i < opt.n; ++i) {
        for (std::size_t c = 0; c < channel_names.size(); ++c) {
            for (int y = 0; y < config.tile_h; ++y) {
                for (int x = 0; x < config.tile_w; ++x) {
                    const float v = tiles.at(i, static_cast<int>(c), y, x); // in [-1, 1]
                    plane[static_cast<std::size_t>(y) * config.tile_w + x] =
                        static_cast<std::uint8_t>(
                            std::lround(std::clamp((v + 1.0f) * 0.5f, 0.0f, 1.0f) * 255.0f));
                }
            }
            char name[64];
            std::snprintf(name, sizeof name, "sample_%03d.%s.pgm", i,
                          channel_names[c].c_str());
            save_gray_pgm(fs::path(opt.out) / name, config.tile_h, config.tile_w, plane);
            ++files;
        }
    }
    std::cout << "wrote " << files << " PGM files under " << opt.out << "\n";
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    GradSuiteReport report = run_gradient_suite(seed);
    std::cout << report.str();
    if (!report.all_passed()) {
        throw NumericError("gradient suite failed");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"semi-supervised GAN for pixel-wise crop/weed classification"};
    app.require_subcommand(1);

    SynthOptions synth_opt;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic field dataset");
    synth->add_option("--out", synth_opt.out, "output dataset directory")->required();
    synth->add_option("--config", synth_opt.config_file, "JSON config file");
    synth->add_option("--seed", synth_opt.seed, "generation seed (required for reproducibility)");
    synth->add_flag("--force", synth_opt.force, "overwrite a non-empty output directory");
    synth->add_option("--set", synth_opt.sets, "dotted key=value config override")
        ->take_all();
    synth_opt.cmd = synth;

    PrepareOptions prepare_opt;
    CLI::App* prepare = app.add_subcommand("prepare", "derive ndvi rasters and write a split");
    prepare->add_option("--dataset", prepare_opt.dataset, "dataset directory")->required();
    prepare->add_option("--labeled-fraction", prepare_opt.labeled_fraction,
                        "fraction of train images with labels");
    prepare->add_option("--test-fraction", prepare_opt.test_fraction, "held-out fraction");
    prepare->add_option("--seed", prepare_opt.seed, "split seed");
    prepare->add_flag("--force", prepare_opt.force, "replace an existing split.json");
    prepare_opt.cmd = prepare;

    TrainOptions train_opt;
    CLI::App* train_cmd = app.add_subcommand("train", "train the ssgan or the baseline");
    train_cmd->add_option("--dataset", train_opt.dataset, "dataset directory")->required();
    train_cmd->add_option("--out", train_opt.out, "output directory")->required();
    train_cmd->add_option("--config", train_opt.config_file, "JSON config file");
    train_cmd->add_option("--set", train_opt.sets, "dotted key=value config override")
        ->take_all();
    train_cmd->add_option("--channels", train_opt.channels,
                          "Red | NIR | NDVI | Red+NIR | Red+NIR+NDVI");
    train_cmd->add_option("--mode", train_opt.mode, "ssgan | baseline");
    train_cmd->add_option("--labeled-fraction", train_opt.labeled_fraction, "labeled fraction");
    train_cmd->add_option("--epochs", train_opt.epochs, "epochs");
    train_cmd->add_option("--steps-per-epoch", train_opt.steps_per_epoch, "steps per epoch");
    train_cmd->add_option("--batch-size", train_opt.batch_size, "batch size");
    train_cmd->add_option("--tile", train_opt.tile, "square tile extent (multiple of 16)");
    train_cmd->add_option("--lr", train_opt.lr, "Adam learning rate");
    train_cmd->add_option("--beta1", train_opt.beta1, "Adam beta1");
    train_cmd->add_option("--beta2", train_opt.beta2, "Adam beta2");
    train_cmd->add_option("--lambda-u", train_opt.lambda_u, "unsupervised loss weight");
    train_cmd->add_option("--checkpoint-every", train_opt.checkpoint_every,
                          "checkpoint cadence in steps");
    train_cmd->add_option("--unsup-on-labeled", train_opt.unsup_on_labeled,
                          "1: labeled pixels feed unsup_real; 0: unlabeled only");
    train_cmd->add_option("--seed", train_opt.seed, "experiment seed");
    train_opt.cmd = train_cmd;

    EvalOptions eval_opt;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a pool");
    eval_cmd->add_option("--checkpoint", eval_opt.checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("--dataset", eval_opt.dataset, "dataset directory")->required();
    eval_cmd->add_option("--channels", eval_opt.channels, "must match the checkpoint");
    eval_cmd->add_option("--pool", eval_opt.pool, "test | labeled | unlabeled");
    eval_cmd->add_option("--out", eval_opt.out, "write the JSON report here");

    SweepOptions sweep_opt;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "channel x labeled-fraction sweep");
    sweep_cmd->add_option("--dataset", sweep_opt.dataset, "dataset directory")->required();
    sweep_cmd->add_option("--out", sweep_opt.out, "output directory")->required();
    sweep_cmd->add_option("--config", sweep_opt.config_file, "JSON base config file");
    sweep_cmd->add_option("--set", sweep_opt.sets, "dotted key=value config override")
        ->take_all();
    sweep_cmd->add_option("--channels", sweep_opt.channels,
                          "comma list of selections (default: all five)");
    sweep_cmd->add_option("--fractions", sweep_opt.fractions,
                          "comma list of labeled fractions (default: 0.5,0.4,0.3)");
    sweep_cmd->add_option("--epochs", sweep_opt.epochs, "epochs per cell");
    sweep_cmd->add_option("--steps-per-epoch", sweep_opt.steps_per_epoch, "steps per epoch");
    sweep_cmd->add_option("--batch-size", sweep_opt.batch_size, "batch size");
    sweep_cmd->add_option("--seed", sweep_opt.seed, "base seed for the sweep's seed policy");
    sweep_opt.cmd = sweep_cmd;

    SampleOptions sample_opt;
    CLI::App* sample_cmd = app.add_subcommand("sample", "emit generated tiles from a checkpoint");
    sample_cmd->add_option("--checkpoint", sample_opt.checkpoint, "checkpoint file")->required();
    sample_cmd->add_option("--out", sample_opt.out, "output directory")->required();
    sample_cmd->add_option("--n", sample_opt.n, "number of tiles");
    sample_cmd->add_option("--channels", sample_opt.channels, "must match the checkpoint");
    sample_cmd->add_option("--seed", sample_opt.seed, "noise seed");
    sample_opt.cmd = sample_cmd;

    std::uint64_t gradcheck_seed = 7;
    CLI::App* gradcheck_cmd =
        app.add_subcommand("gradcheck", "run the finite-difference gradient suite");
    gradcheck_cmd->add_option("--seed", gradcheck_seed, "suite seed (default 7)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_opt);
        if (prepare->parsed()) return cmd_prepare(prepare_opt);
        if (train_cmd->parsed()) return cmd_train(train_opt);
        if (eval_cmd->parsed()) return cmd_eval(eval_opt);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_opt);
        if (sample_cmd->parsed()) return cmd_sample(sample_opt);
        if (gradcheck_cmd->parsed()) return cmd_gradcheck(gradcheck_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    std::cerr << "usage error: no subcommand\n";
    return 1;
}
