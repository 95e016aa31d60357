#pragma once

// Channel x labeled-fraction sweep: one training run and test-pool
// evaluation per cell, emitted as a fixed-width text table and JSON. Seeds
// derive from the base seed plus canonical row/column offsets, so any two
// sweeps over the same dataset produce comparable cells: runs at the same
// fraction share a split, and a (selection, fraction) cell does not depend on
// which other cells were swept.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "ssgan/train.hpp"

namespace ssgan {

inline const std::vector<double> kSweepFractions{0.5, 0.4, 0.3};

struct SweepCell {
    ChannelSelection selection = ChannelSelection::Red;
    double fraction = 0.0;
    bool failed = false;
    std::string error;
    double background_f1 = 0.0;
    double crop_f1 = 0.0;
    double weed_f1 = 0.0;
};

struct SweepTable {
    std::vector<ChannelSelection> selections; // row order
    std::vector<double> fractions;            // column-group order
    std::vector<SweepCell> cells;             // row-major
    nlohmann::json base_config;

    const SweepCell& cell(ChannelSelection selection, double fraction) const;
};

std::uint64_t sweep_run_seed(std::uint64_t base, ChannelSelection selection, double fraction);
std::uint64_t sweep_split_seed(std::uint64_t base, double fraction);

std::string format_cell(double f1); // fixed 3 decimals, e.g. 0.857

void to_json(nlohmann::json& j, const SweepTable& table);
std::string sweep_text(const SweepTable& table);

// Trains and evaluates every (selection, fraction) cell; a failed run marks
// its cell and the sweep continues. Writes sweep.json and sweep.txt (plus one
// run directory per cell) under out_dir.
SweepTable run_sweep(const std::vector<ChannelSelection>& selections,
                     const std::vector<double>& fractions, const TrainConfig& base,
                     const std::filesystem::path& dataset_dir,
                     const std::filesystem::path& out_dir);

} // namespace ssgan
