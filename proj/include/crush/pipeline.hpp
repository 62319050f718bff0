/**
 * @file pipeline.hpp
 * @brief Config-driven pipeline stages with file handoff and a hash manifest.
 *
 * Every stage reads its inputs from the work directory and writes its outputs
 * there, then records a manifest entry with SHA-256 hashes of both.
 *
 * Exit codes:
 *   0  success
 *   1  usage or configuration error
 *   2  missing input file
 *   3  schema or shape mismatch in an input
 *   4  stage failure (numerical or data error)
 *   5  unexpected internal error
 */
#pragma once

#include "crush/learn.hpp"
#include "crush/simulator.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace crush::pipeline {

constexpr const char* kConfigSchema = "crush.config/1";
constexpr const char* kManifestSchema = "crush.manifest/1";
constexpr const char* kToolVersion = "crushctl 1.0.0";
/// Environment variable naming the default config (a preset name or a path).
constexpr const char* kConfigEnv = "CRUSH_CONFIG";

enum ExitCode { kOk = 0, kUsage = 1, kMissingInput = 2, kSchema = 3, kStageFailure = 4, kInternal = 5 };

struct DatasetConfig {
    std::vector<double> diameters;
    std::vector<std::string> shapes;  ///< table notation, e.g. "1.25,1.44/1.25,1"
    std::vector<Axis> axes;
    int tests_per_type = 50;
    std::uint64_t seed = 0;
    int facet_count = 320;
};

struct AttributionConfig {
    std::string task = "diameter";
    bool exclude_last_pmd = true;
};

struct PipelineConfig {
    DatasetConfig dataset;
    simulator::CzmParams czm;
    simulator::LoadControl load;
    int min_valid = 30;
    double val_fraction = 0.1;
    std::uint64_t split_seed = 0;
    learn::ModelConfig model;
    AttributionConfig attribution;
};

/// The full dataset table and the published parameters.
PipelineConfig default_config();
/// INI text; keys absent from the text keep their defaults. Throws Config.
PipelineConfig parse_config(const std::string& text);
/// A preset name ("default", "desk") or a file path; empty means the
/// environment variable, then "default".
std::filesystem::path resolve_config(const std::string& name);

enum class Ablation { Baseline, NoPmd, NoNef };
std::string_view to_string(Ablation a);
Ablation parse_ablation(std::string_view text);
learn::ModelConfig apply_ablation(learn::ModelConfig config, Ablation a);

struct Options {
    std::string command;
    std::string config;
    std::optional<std::uint64_t> seed;
    int workers = 0;  ///< 0: hardware concurrency
    std::optional<int> limit;
    std::optional<std::string> task;
    std::string ablation = "baseline";
    std::filesystem::path out = "work";
};

const std::vector<std::string>& commands();

/// Runs one command; diagnostics go to `log`. Returns an exit code.
int run(const Options& options, std::ostream& log);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace crush::pipeline
