#include "hdqt/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "hdqt/errors.hpp"
#include "hdqt/log.hpp"

namespace hdqt {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line) + ": ";
}

double parse_double(std::string_view field, const std::string& context) {
    double v = 0.0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (field.empty() || ec != std::errc() || ptr != last) {
        throw DataError(context + "non-numeric value '" + std::string(field) + "'");
    }
    if (!std::isfinite(v)) {
        throw DataError(context + "non-finite value '" + std::string(field) + "'");
    }
    return v;
}

long long parse_integer(std::string_view field, const std::string& context) {
    const double v = parse_double(field, context);
    if (v != std::floor(v)) {
        throw DataError(context + "expected an integer, got '" + std::string(field) + "'");
    }
    return static_cast<long long>(v);
}

// Builds the dense label space from original ids, preserving their order.
void densify(FeatureDataset& ds, const std::vector<long long>& raw) {
    std::set<long long> ids(raw.begin(), raw.end());
    ds.class_ids.assign(ids.begin(), ids.end());
    ds.class_names.clear();
    std::map<long long, int> dense;
    for (std::size_t c = 0; c < ds.class_ids.size(); ++c) {
        dense[ds.class_ids[c]] = static_cast<int>(c);
        ds.class_names.push_back(std::to_string(ds.class_ids[c]));
    }
    ds.labels.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        ds.labels[i] = dense.at(raw[i]);
    }
}

}  // namespace

DatasetKind parse_dataset_kind(const std::string& name) {
    if (name.empty() || name == "generic") return DatasetKind::Generic;
    if (name == "dsads") return DatasetKind::Dsads;
    if (name == "pamap2") return DatasetKind::Pamap2;
    if (name == "hapt") return DatasetKind::Hapt;
    throw ParameterError("unknown dataset kind '" + name + "'");
}

std::string to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::Generic: return "generic";
        case DatasetKind::Dsads: return "dsads";
        case DatasetKind::Pamap2: return "pamap2";
        case DatasetKind::Hapt: return "hapt";
    }
    return "generic";
}

void FeatureDataset::validate() const {
    const std::size_t n = labels.size();
    if (features.rows() != n) {
        throw DataError("dataset: feature rows != label count");
    }
    if (!user_ids.empty() && user_ids.size() != n) {
        throw DataError("dataset: user id count != sample count");
    }
    if (class_names.size() != class_ids.size()) {
        throw DataError("dataset: class name count != class count");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes()) {
            throw DataError("dataset: label " + std::to_string(y) + " not dense");
        }
    }
    std::vector<std::uint8_t> seen(n, 0);
    for (const auto* part : {&train, &test}) {
        for (std::size_t i : *part) {
            if (i >= n) throw DataError("dataset: split index out of range");
            if (seen[i]++) throw DataError("dataset: sample " + std::to_string(i) + " in both splits");
        }
    }
    if (!all_finite(features)) {
        throw DataError("dataset: non-finite feature values");
    }
}

CsvSchema load_schema(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw DataError("cannot read schema " + path.string());
    }
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    CsvSchema s;
    s.label_col = j.value("label_col", s.label_col);
    s.user_col = j.value("user_col", s.user_col);
    s.split_col = j.value("split_col", s.split_col);
    s.dataset_kind = parse_dataset_kind(j.value("dataset_kind", std::string("generic")));
    return s;
}

FeatureDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream is(path);
    if (!is) {
        throw DataError("cannot read " + path.string());
    }
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(is, line)) {
        throw DataError(path.string() + ": empty file");
    }
    const auto header_views = split_fields(line);
    std::vector<std::string> header(header_views.begin(), header_views.end());

    auto find_col = [&](const std::string& name, bool required) -> long {
        if (name.empty()) return -1;
        const auto it = std::ranges::find(header, name);
        if (it == header.end()) {
            if (required) throw DataError(where(path, 1) + "missing column '" + name + "'");
            throw DataError(where(path, 1) + "declared column '" + name + "' not found");
        }
        return static_cast<long>(it - header.begin());
    };
    const long label_col = find_col(schema.label_col, true);
    const long user_col = find_col(schema.user_col, false);
    const long split_col = find_col(schema.split_col, false);
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const long lc = static_cast<long>(c);
        if (lc != label_col && lc != user_col && lc != split_col) feature_cols.push_back(c);
    }
    if (feature_cols.empty()) {
        throw DataError(where(path, 1) + "no feature columns");
    }

    FeatureDataset ds;
    std::vector<double> values;
    std::vector<long long> raw_labels;
    std::vector<std::size_t> train, test;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        const std::string ctx = where(path, line_no);
        if (fields.size() != header.size()) {
            throw DataError(ctx + "expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        }
        for (std::size_t c : feature_cols) {
            values.push_back(parse_double(fields[c], ctx + "column '" + header[c] + "': "));
        }
        raw_labels.push_back(parse_integer(fields[static_cast<std::size_t>(label_col)], ctx + "label: "));
        if (user_col >= 0) {
            ds.user_ids.push_back(static_cast<int>(
                parse_integer(fields[static_cast<std::size_t>(user_col)], ctx + "user: ")));
        }
        const std::size_t idx = raw_labels.size() - 1;
        if (split_col >= 0) {
            const auto s = fields[static_cast<std::size_t>(split_col)];
            if (s == "train") train.push_back(idx);
            else if (s == "test") test.push_back(idx);
            else throw DataError(ctx + "split must be 'train' or 'test', got '" + std::string(s) + "'");
        } else {
            train.push_back(idx);
        }
    }
    if (raw_labels.empty()) {
        throw DataError(path.string() + ": no data rows");
    }
    ds.features = Matrix(raw_labels.size(), feature_cols.size(), std::move(values));
    densify(ds, raw_labels);
    ds.train = std::move(train);
    ds.test = std::move(test);
    ds.validate();
    return ds;
}

void save_csv(const FeatureDataset& ds, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) {
        throw DataError("cannot write " + path.string());
    }
    for (std::size_t c = 0; c < ds.feature_dim(); ++c) {
        os << 'f' << c << ',';
    }
    os << "label";
    if (!ds.user_ids.empty()) os << ",user";
    os << ",split\n";
    std::vector<const char*> split(ds.size(), "train");
    for (std::size_t i : ds.test) split[i] = "test";
    char buf[40];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (double v : ds.features.row(i)) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << buf << ',';
        }
        os << ds.class_ids[static_cast<std::size_t>(ds.labels[i])];
        if (!ds.user_ids.empty()) os << ',' << ds.user_ids[i];
        os << ',' << split[i] << '\n';
    }
}

FeatureDataset apply_paper_filters(const FeatureDataset& ds, DatasetKind kind) {
    std::set<int> drop_users;
    std::set<long long> drop_classes;
    switch (kind) {
        case DatasetKind::Generic:
        case DatasetKind::Dsads:
            return ds;
        case DatasetKind::Pamap2:
            drop_users = {3, 4, 9};
            drop_classes = {24};
            break;
        case DatasetKind::Hapt:
            drop_users = {7, 28};
            drop_classes = {8};
            break;
    }
    if (ds.user_ids.empty()) {
        throw DataError("apply_paper_filters: " + to_string(kind) + " requires user ids");
    }
    std::vector<std::size_t> keep;
    std::vector<std::size_t> remap(ds.size(), static_cast<std::size_t>(-1));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const long long cls = ds.class_ids[static_cast<std::size_t>(ds.labels[i])];
        if (drop_users.contains(ds.user_ids[i]) || drop_classes.contains(cls)) continue;
        remap[i] = keep.size();
        keep.push_back(i);
    }
    if (keep.size() == ds.size()) {
        warn("apply_paper_filters: no " + to_string(kind) +
             " users or classes to remove; dataset already filtered");
        return ds;
    }
    if (keep.empty()) {
        throw DataError("apply_paper_filters: no samples survive filtering");
    }
    FeatureDataset out;
    out.features = gather_rows(ds.features, keep);
    std::vector<long long> raw;
    raw.reserve(keep.size());
    for (std::size_t i : keep) {
        raw.push_back(ds.class_ids[static_cast<std::size_t>(ds.labels[i])]);
        out.user_ids.push_back(ds.user_ids[i]);
    }
    densify(out, raw);
    // Keep names of surviving classes that came with the source.
    for (std::size_t c = 0; c < out.class_ids.size(); ++c) {
        const auto it = std::ranges::find(ds.class_ids, out.class_ids[c]);
        out.class_names[c] = ds.class_names[static_cast<std::size_t>(it - ds.class_ids.begin())];
    }
    for (std::size_t i : ds.train) if (remap[i] != static_cast<std::size_t>(-1)) out.train.push_back(remap[i]);
    for (std::size_t i : ds.test) if (remap[i] != static_cast<std::size_t>(-1)) out.test.push_back(remap[i]);
    return out;
}

FeatureDataset normalize(const FeatureDataset& ds) {
    if (ds.train.empty()) {
        throw DataError("normalize: train split is empty");
    }
    const std::size_t d = ds.feature_dim();
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    const double n = static_cast<double>(ds.train.size());
    for (std::size_t i : ds.train) {
        auto row = ds.features.row(i);
        for (std::size_t c = 0; c < d; ++c) mean[c] += row[c];
    }
    for (double& m : mean) m /= n;
    for (std::size_t i : ds.train) {
        auto row = ds.features.row(i);
        for (std::size_t c = 0; c < d; ++c) {
            const double e = row[c] - mean[c];
            var[c] += e * e;
        }
    }
    FeatureDataset out = ds;
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto row = out.features.row(i);
        for (std::size_t c = 0; c < d; ++c) {
            const double sd = std::sqrt(var[c] / n);
            row[c] = sd > 0.0 ? (row[c] - mean[c]) / sd : 0.0;
        }
    }
    return out;
}

FeatureDataset stratified_split(const FeatureDataset& ds, double test_fraction, Rng& rng) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
        throw ParameterError("stratified_split: test fraction must lie in [0, 1)");
    }
    std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    }
    FeatureDataset out = ds;
    out.train.clear();
    out.test.clear();
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        Rng r = rng.split(static_cast<std::uint64_t>(c));
        r.shuffle(idx);
        const auto n_test = static_cast<std::size_t>(
            std::floor(static_cast<double>(idx.size()) * test_fraction + 0.5));
        out.test.insert(out.test.end(), idx.begin(), idx.begin() + static_cast<long>(n_test));
        out.train.insert(out.train.end(), idx.begin() + static_cast<long>(n_test), idx.end());
    }
    std::ranges::sort(out.train);
    std::ranges::sort(out.test);
    return out;
}

FeatureDataset synth_blobs(std::size_t classes, std::size_t samples_per_class, std::size_t dim,
                           double separation, Rng& rng) {
    if (classes < 2) {
        throw ParameterError("synth_blobs: need at least two classes");
    }
    if (samples_per_class < 1 || dim < 1) {
        throw ParameterError("synth_blobs: samples per class and dimension must be positive");
    }
    if (!(separation >= 0.0) || !std::isfinite(separation)) {
        throw ParameterError("synth_blobs: separation must be finite and non-negative");
    }
    Rng center_rng = rng.split("centers");
    Rng sample_rng = rng.split("samples");
    Matrix centers(classes, dim);
    for (double& v : centers.values()) v = gaussian(center_rng, 0.0, separation);

    FeatureDataset ds;
    ds.features = Matrix(classes * samples_per_class, dim);
    std::vector<long long> raw;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t s = 0; s < samples_per_class; ++s) {
            const std::size_t i = c * samples_per_class + s;
            auto row = ds.features.row(i);
            for (std::size_t f = 0; f < dim; ++f) {
                row[f] = centers(c, f) + gaussian(sample_rng, 0.0, 1.0);
            }
            raw.push_back(static_cast<long long>(c));
        }
    }
    densify(ds, raw);
    Rng split_rng = rng.split("split");
    return stratified_split(ds, 0.2, split_rng);
}

}  // namespace hdqt
