#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdqt/cil.hpp"
#include "hdqt/data.hpp"
#include "hdqt/nn.hpp"
#include "hdqt/qgemm.hpp"

namespace hdqt {

struct DatasetSpec {
    std::string source = "synthetic";  // "synthetic" or "csv"
    // csv
    std::string path;
    std::string schema;  // optional schema file; kind below overrides it when set
    std::string kind;
    bool apply_filters = true;
    // synthetic
    std::size_t classes = 10;
    std::size_t samples_per_class = 100;
    std::size_t dim = 16;
    double separation = 1.0;
    // preprocessing
    bool normalize = true;
    double test_fraction = 0.2;

    bool operator==(const DatasetSpec&) const = default;
};

/// Everything needed to reproduce a run except the seed.
struct ExperimentConfig {
    DatasetSpec dataset;
    Method method = Method::Icarl;
    Precision quant = QuantConfig{};
    TrainHyper hyper;
    std::vector<std::uint64_t> seeds{0};
    std::size_t classes_per_task = 2;

    /// Throws ConfigError on any inconsistent field.
    void validate() const;
    bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Missing keys take their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Result of one seed of one configuration.
struct RunRecord {
    ExperimentConfig config;  // resolved, seeds = {seed}
    std::uint64_t seed = 0;
    std::vector<int> class_order;
    std::vector<std::vector<int>> task_classes;
    AccuracyMatrix accuracy;
    std::vector<double> task_accuracy;
    std::vector<double> forgetting;
    double final_accuracy = 0.0;
    GemmStats stats;
    double wall_clock_s = 0.0;

    CilResult as_cil_result() const;
};

nlohmann::json to_json(const RunRecord& record);
RunRecord record_from_json(const nlohmann::json& j);
/// Record JSON without timing, for exact reproducibility comparisons.
nlohmann::json reproducible_json(const RunRecord& record);

/// Builds the dataset a given seed sees (load or synthesize, filter, split,
/// normalize).
FeatureDataset prepare_dataset(const DatasetSpec& spec, std::uint64_t seed);

RunRecord run_seed(const ExperimentConfig& config, std::uint64_t seed);

/// One record per seed. Seeds run on HDQT_WORKERS threads (default 1).
std::vector<RunRecord> run_experiment(const ExperimentConfig& config);

enum class SweepAxis { InputBits, AccumBits };
SweepAxis parse_sweep_axis(const std::string& name);

/// Input sweeps set accum = 2 * input; accumulator sweeps keep the input
/// width. Points with accum < input are dropped with a warning.
std::vector<ExperimentConfig> sweep_configs(const ExperimentConfig& base, SweepAxis axis,
                                            const std::vector<int>& values);
std::vector<RunRecord> sweep(const ExperimentConfig& base, SweepAxis axis,
                             const std::vector<int>& values);

enum class ResultFormat { Json, Csv };
enum class Figure { StepAcc, Forgetting, PerClassDelta, BinOccupancy };
Figure parse_figure(const std::string& name);

/// Serialized result table; CSV has one row per (run, seed, task, metric).
std::string emit_results(const std::vector<RunRecord>& records, ResultFormat format);

/// Plot data as CSV: mean and sample std across seeds per x position.
std::string emit_plotdata(const std::vector<RunRecord>& records, Figure figure);

/// Optional SVG rendering of the same data (step_acc and forgetting only).
std::string emit_svg(const std::vector<RunRecord>& records, Figure figure);

/// Writes records.json, results.csv and step_acc/forgetting plot CSVs to `dir`.
void write_run_directory(const std::vector<RunRecord>& records, const std::filesystem::path& dir);
std::vector<RunRecord> read_run_directory(const std::filesystem::path& dir);

}  // namespace hdqt
