#include "ssgan/sweep.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "ssgan/errors.hpp"
#include "ssgan/eval.hpp"

namespace ssgan {

namespace {

using nlohmann::json;

int canonical_row(ChannelSelection selection) {
    int row = 0;
    for (ChannelSelection s : kAllSelections) {
        if (s == selection) return row;
        ++row;
    }
    throw ContractError("selection outside the canonical row order");
}

int fraction_percent(double fraction) {
    return static_cast<int>(std::lround(fraction * 100.0));
}

std::string run_dir_name(ChannelSelection selection, double fraction) {
    std::string name = selection_name(selection);
    for (char& c : name) {
        if (c == '+') c = '_';
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "run_%s_%02d", name.c_str(), fraction_percent(fraction));
    return buf;
}

} // namespace

const SweepCell& SweepTable::cell(ChannelSelection selection, double fraction) const {
    for (const SweepCell& c : cells) {
        if (c.selection == selection && std::abs(c.fraction - fraction) < 1e-9) return c;
    }
    throw ContractError("sweep has no cell for " + std::string(selection_name(selection)) +
                        " at fraction " + std::to_string(fraction));
}

// Row offsets stride past the largest possible column offset (a percentage).
std::uint64_t sweep_run_seed(std::uint64_t base, ChannelSelection selection, double fraction) {
    return base + 1024ull * static_cast<std::uint64_t>(canonical_row(selection)) +
           static_cast<std::uint64_t>(fraction_percent(fraction));
}

std::uint64_t sweep_split_seed(std::uint64_t base, double fraction) {
    return base + static_cast<std::uint64_t>(fraction_percent(fraction));
}

std::string format_cell(double f1) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.3f", f1);
    return buf;
}

void to_json(json& j, const SweepTable& table) {
    json rows = json::array();
    for (ChannelSelection selection : table.selections) {
        json row;
        row["selection"] = selection_name(selection);
        json cells = json::array();
        for (double fraction : table.fractions) {
            const SweepCell& c = table.cell(selection, fraction);
            json cell{{"fraction", c.fraction}, {"failed", c.failed}};
            if (c.failed) {
                cell["error"] = c.error;
            } else {
                cell["background_f1"] = c.background_f1;
                cell["crop_f1"] = c.crop_f1;
                cell["weed_f1"] = c.weed_f1;
            }
            cells.push_back(cell);
        }
        row["cells"] = cells;
        rows.push_back(row);
    }
    j = json{{"base_config", table.base_config}, {"rows", rows}};
}

std::string sweep_text(const SweepTable& table) {
    std::string out;
    char buf[64];

    // Column-group header: one percentage per fraction, two cells wide.
    std::snprintf(buf, sizeof buf, "%-14s", "");
    out += buf;
    for (double fraction : table.fractions) {
        std::snprintf(buf, sizeof buf, "%d%%", fraction_percent(fraction));
        std::string label(buf);
        std::snprintf(buf, sizeof buf, "%-16s", label.c_str());
        out += buf;
    }
    out += '\n';

    std::snprintf(buf, sizeof buf, "%-14s", "channels");
    out += buf;
    for (std::size_t i = 0; i < table.fractions.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%-8s%-8s", "crop", "weed");
        out += buf;
    }
    out += '\n';

    for (ChannelSelection selection : table.selections) {
        std::snprintf(buf, sizeof buf, "%-14s", selection_name(selection));
        out += buf;
        for (double fraction : table.fractions) {
            const SweepCell& c = table.cell(selection, fraction);
            if (c.failed) {
                std::snprintf(buf, sizeof buf, "%-8s%-8s", "failed", "failed");
            } else {
                std::snprintf(buf, sizeof buf, "%-8s%-8s", format_cell(c.crop_f1).c_str(),
                              format_cell(c.weed_f1).c_str());
            }
            out += buf;
        }
        out += '\n';
    }
    return out;
}

SweepTable run_sweep(const std::vector<ChannelSelection>& selections,
                     const std::vector<double>& fractions, const TrainConfig& base,
                     const std::filesystem::path& dataset_dir,
                     const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    if (selections.empty() || fractions.empty()) {
        throw ConfigError("sweep needs at least one selection and one fraction");
    }
    fs::create_directories(out_dir);

    const Dataset dataset = Dataset::load_dir(dataset_dir);

    SweepTable table;
    table.selections = selections;
    table.fractions = fractions;
    to_json(table.base_config, base);

    for (ChannelSelection selection : selections) {
        for (double fraction : fractions) {
            SweepCell cell;
            cell.selection = selection;
            cell.fraction = fraction;
            try {
                TrainConfig config = base;
                config.selection = selection;
                config.labeled_fraction = fraction;
                config.seed = sweep_run_seed(base.seed, selection, fraction);

                Prng split_prng(sweep_split_seed(base.seed, fraction));
                DatasetSplit split = make_split(dataset.ids(), fraction, 0.2, split_prng);
                split.seed = sweep_split_seed(base.seed, fraction);

                const fs::path run_dir = out_dir / run_dir_name(selection, fraction);
                TrainResult result = train(config, dataset_dir, run_dir, &split);
                EvalReport report = evaluate(result.state.disc, dataset, split, Pool::Test,
                                             selection, config.tile_h, config.tile_w);
                cell.background_f1 = report.per_class[kClassBackground].f1;
                cell.crop_f1 = report.per_class[kClassCrop].f1;
                cell.weed_f1 = report.per_class[kClassWeed].f1;
            } catch (const std::exception& e) {
                cell.failed = true;
                cell.error = e.what();
            }
            table.cells.push_back(cell);
        }
    }

    json table_json;
    to_json(table_json, table);
    {
        std::ofstream out(out_dir / "sweep.json");
        out << table_json.dump(2) << '\n';
    }
    {
        std::ofstream out(out_dir / "sweep.txt");
        out << sweep_text(table);
    }
    return table;
}

} // namespace ssgan
