#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "hdqt/matrix.hpp"
#include "hdqt/rng.hpp"

namespace hdqt {

enum class DatasetKind { Generic, Dsads, Pamap2, Hapt };

DatasetKind parse_dataset_kind(const std::string& name);
std::string to_string(DatasetKind kind);

/// Feature-vector classification data with a train/test partition.
struct FeatureDataset {
    Matrix features;                  // samples x feature_dim
    std::vector<int> labels;          // dense in [0, num_classes)
    std::vector<int> user_ids;        // empty when the source has none
    std::vector<long long> class_ids; // original label value of each dense class
    std::vector<std::string> class_names;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;

    std::size_t size() const { return labels.size(); }
    std::size_t feature_dim() const { return features.cols(); }
    std::size_t num_classes() const { return class_ids.size(); }

    /// Throws DataError if any structural invariant is broken.
    void validate() const;
};

/// Column roles for CSV ingestion. Every column that is not named here is a
/// feature column.
struct CsvSchema {
    std::string label_col = "label";
    std::string user_col;   // optional
    std::string split_col;  // optional; values "train" / "test"
    DatasetKind dataset_kind = DatasetKind::Generic;
};

/// Reads a schema descriptor (JSON object with keys label_col, user_col,
/// split_col, dataset_kind).
CsvSchema load_schema(const std::filesystem::path& path);

/// Parses a header-first CSV. Without a split column every sample is placed
/// in the train split. Errors name the offending line.
FeatureDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// Writes features (round-trip exact), label, optional user and split columns.
void save_csv(const FeatureDataset& ds, const std::filesystem::path& path);

/// Drops the users and classes that are known to be incomplete for the
/// given HAR corpus and re-densifies labels in original order.
FeatureDataset apply_paper_filters(const FeatureDataset& ds, DatasetKind kind);

/// Per-feature z-score with train-split statistics; constant features map to 0.
FeatureDataset normalize(const FeatureDataset& ds);

/// Replaces the partition with a per-class random split.
FeatureDataset stratified_split(const FeatureDataset& ds, double test_fraction, Rng& rng);

/// Isotropic Gaussian blobs: class centers ~ N(0, separation^2 I), samples
/// ~ N(center, I). Stratified 80/20 split.
FeatureDataset synth_blobs(std::size_t classes, std::size_t samples_per_class, std::size_t dim,
                           double separation, Rng& rng);

}  // namespace hdqt
