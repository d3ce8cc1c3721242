#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>

#include "mbcr/config.hpp"
#include "mbcr/core.hpp"
#include "mbcr/sampler.hpp"

namespace mbcr {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_number(double value);

/// Reads a CSV with header x1,...,xp,y (columns in any order).
DatasetD read_dataset_csv(const std::filesystem::path& path);
DatasetD parse_dataset_csv(std::string_view text);

/// Reads query points from a CSV with header x1,...,xp.
Eigen::MatrixXd read_query_csv(const std::filesystem::path& path);
Eigen::MatrixXd parse_query_csv(std::string_view text);

/// Cartesian grid from "x1=lo:hi:count,x2=...". Every coordinate 1..dim must appear once;
/// the last coordinate varies fastest.
Eigen::MatrixXd parse_grid(std::string_view spec, Eigen::Index dim);

/// Box from "lo:hi,lo:hi,..." with lo < hi in every coordinate.
std::pair<Eigen::VectorXd, Eigen::VectorXd> parse_box(std::string_view spec);

struct FitConfig {
    PriorConfig prior;
    ProposalConfig proposal;
    ChainConfig chain;
};

/// Defaults for dimension p: PriorConfig::defaults, ProposalConfig::from_prior, ChainConfig{}.
FitConfig default_fit_config(Eigen::Index p);

/// JSON object with optional "prior", "proposal" and "chain" members keyed by the config field
/// names. Missing fields keep their defaults; a proposal without mu/V/a/b inherits them from the
/// (possibly overridden) prior. Unknown keys are ignored.
FitConfig parse_fit_config(std::string_view json_text, Eigen::Index p);
std::string fit_config_to_json(const FitConfig& config);

/// Model file: {"dim", "draws": [{"k", "planes": [{"alpha", "beta", "sigma2"}]}], "diagnostics", "config"}.
std::string model_to_json(const ChainResult& result);
PosteriorSamples parse_model(std::string_view json_text);
PosteriorSamples read_model(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace mbcr
