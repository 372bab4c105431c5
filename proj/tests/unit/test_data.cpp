#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <unistd.h>

#include "hdqt/errors.hpp"
#include "hdqt/data.hpp"
#include "hdqt/log.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using hdqt::FeatureDataset;
using hdqt::Matrix;
using hdqt::Rng;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("hdqt_data_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name) << text;
        return path / name;
    }
};

// Small dataset with users 1..n_users and classes given by original ids.
FeatureDataset toy_with_users(const std::vector<long long>& class_ids, int n_users) {
    FeatureDataset ds;
    std::size_t n = class_ids.size() * static_cast<std::size_t>(n_users);
    ds.features = Matrix(n, 2);
    ds.class_ids = class_ids;
    for (auto c : class_ids) ds.class_names.push_back("c" + std::to_string(c));
    std::size_t i = 0;
    for (int u = 1; u <= n_users; ++u) {
        for (std::size_t c = 0; c < class_ids.size(); ++c, ++i) {
            ds.features(i, 0) = static_cast<double>(i);
            ds.features(i, 1) = static_cast<double>(u) + 0.5;
            ds.labels.push_back(static_cast<int>(c));
            ds.user_ids.push_back(u);
            (i % 5 == 0 ? ds.test : ds.train).push_back(i);
        }
    }
    ds.validate();
    return ds;
}

}  // namespace

TEST_CASE("toy csv") {
    TempDir tmp;
    const auto p = tmp.write("toy.csv", "a,b,label\n1,2,5\n3,4,7\n5,6,5\n");
    const auto ds = hdqt::load_csv(p, {});
    CHECK(ds.size() == 3);
    CHECK(ds.feature_dim() == 2);
    CHECK(ds.labels == std::vector<int>{0, 1, 0});
    CHECK(ds.class_ids == std::vector<long long>{5, 7});
    CHECK(ds.train.size() == 3);
    CHECK(ds.test.empty());
    CHECK(ds.features(1, 1) == 4.0);
}

TEST_CASE("csv with user and split columns") {
    TempDir tmp;
    const auto p = tmp.write("s.csv", "f0,user,label,split\n0.5,3,1,train\n-1.5,4,2,test\n2,3,1,test\n");
    hdqt::CsvSchema schema;
    schema.user_col = "user";
    schema.split_col = "split";
    const auto ds = hdqt::load_csv(p, schema);
    CHECK(ds.feature_dim() == 1);
    CHECK(ds.user_ids == std::vector<int>{3, 4, 3});
    CHECK(ds.train == std::vector<std::size_t>{0});
    CHECK(ds.test == std::vector<std::size_t>{1, 2});
}

TEST_CASE("wide csv keeps every feature column") {
    TempDir tmp;
    std::string text;
    for (int c = 0; c < 561; ++c) text += "f" + std::to_string(c) + ",";
    text += "label\n";
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 561; ++c) text += std::to_string(r * 0.25 + c) + ",";
        text += std::to_string(r) + "\n";
    }
    CHECK(hdqt::load_csv(tmp.write("wide.csv", text), {}).feature_dim() == 561);
}

TEST_CASE("csv errors name the line") {
    TempDir tmp;
    auto message = [&](const std::string& text) {
        try {
            hdqt::load_csv(tmp.write("e.csv", text), {});
        } catch (const hdqt::DataError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(message("a,label\n1,0\nnan,1\n").find(":3:") != std::string::npos);
    CHECK(message("a,label\n1,0\n2,1\nx,1\n").find(":4:") != std::string::npos);
    CHECK(message("a,label\n1,0\n2\n").find(":3:") != std::string::npos);
    CHECK(message("a,label\n1,0.5\n").find(":2:") != std::string::npos);
    CHECK(message("a,b\n1,0\n").find("missing column 'label'") != std::string::npos);
    CHECK(message("").find("empty") != std::string::npos);
    CHECK_THROWS_AS(hdqt::load_csv(tmp.path / "absent.csv", {}), hdqt::DataError);
}

TEST_CASE("schema files") {
    TempDir tmp;
    const auto p = tmp.write("schema.json",
                             R"({"label_col": "activity", "user_col": "subject", "dataset_kind": "hapt"})");
    const auto s = hdqt::load_schema(p);
    CHECK(s.label_col == "activity");
    CHECK(s.user_col == "subject");
    CHECK(s.dataset_kind == hdqt::DatasetKind::Hapt);
    CHECK_THROWS_AS(hdqt::parse_dataset_kind("cifar"), hdqt::ParameterError);
    for (auto k : {hdqt::DatasetKind::Generic, hdqt::DatasetKind::Dsads, hdqt::DatasetKind::Pamap2,
                   hdqt::DatasetKind::Hapt}) {
        CHECK(hdqt::parse_dataset_kind(hdqt::to_string(k)) == k);
    }
}

TEST_CASE("save and load round trip bit-exactly") {
    TempDir tmp;
    Rng rng(3);
    FeatureDataset ds = hdqt::synth_blobs(3, 10, 4, 2.0, rng);
    ds.features(0, 0) = 1.0 / 3.0;
    ds.features(1, 1) = -1e-310;
    const auto p = tmp.path / "rt.csv";
    hdqt::save_csv(ds, p);
    hdqt::CsvSchema schema;
    schema.split_col = "split";
    const auto back = hdqt::load_csv(p, schema);
    CHECK(back.features == ds.features);
    CHECK(back.labels == ds.labels);
    CHECK(back.train == ds.train);
    CHECK(back.test == ds.test);
}

TEST_CASE("PAMAP2 and HAPT filters") {
    const auto pamap = toy_with_users({1, 2, 24, 5}, 10);
    const auto f = hdqt::apply_paper_filters(pamap, hdqt::DatasetKind::Pamap2);
    CHECK(f.class_ids == std::vector<long long>{1, 2, 5});
    CHECK(f.class_names == std::vector<std::string>{"c1", "c2", "c5"});
    std::set<int> users(f.user_ids.begin(), f.user_ids.end());
    CHECK(users == std::set<int>{1, 2, 5, 6, 7, 8, 10});
    CHECK(f.size() == 3u * 7u);
    f.validate();
    // Feature values are untouched, only membership changes.
    for (std::size_t i = 0; i < f.size(); ++i) {
        const auto orig = static_cast<std::size_t>(f.features(i, 0));
        CHECK(f.features(i, 1) == pamap.features(orig, 1));
        CHECK(f.class_ids[f.labels[i]] == pamap.class_ids[pamap.labels[orig]]);
    }
    CHECK(f.train.size() + f.test.size() == f.size());

    const auto hapt = toy_with_users({1, 2, 8, 12}, 30);
    const auto h = hdqt::apply_paper_filters(hapt, hdqt::DatasetKind::Hapt);
    CHECK(h.class_ids == std::vector<long long>{1, 2, 12});
    std::set<int> hu(h.user_ids.begin(), h.user_ids.end());
    CHECK_FALSE(hu.contains(7));
    CHECK_FALSE(hu.contains(28));
    CHECK(hu.size() == 28);

    const auto dsads = toy_with_users({1, 2}, 3);
    const auto d = hdqt::apply_paper_filters(dsads, hdqt::DatasetKind::Dsads);
    CHECK(d.features == dsads.features);
    CHECK(d.labels == dsads.labels);

    std::vector<std::string> warnings;
    auto prev = hdqt::set_warning_sink([&](const std::string& m) { warnings.push_back(m); });
    const auto again = hdqt::apply_paper_filters(f, hdqt::DatasetKind::Pamap2);
    hdqt::set_warning_sink(prev);
    CHECK(warnings.size() == 1);
    CHECK(again.features == f.features);

    FeatureDataset no_users = pamap;
    no_users.user_ids.clear();
    CHECK_THROWS_AS(hdqt::apply_paper_filters(no_users, hdqt::DatasetKind::Hapt), hdqt::DataError);
}

TEST_CASE("normalization uses train statistics") {
    Rng rng(4);
    FeatureDataset ds = hdqt::synth_blobs(3, 40, 5, 3.0, rng);
    for (std::size_t i = 0; i < ds.size(); ++i) ds.features(i, 2) = 7.0;
    const auto n = hdqt::normalize(ds);
    for (std::size_t c = 0; c < 5; ++c) {
        double mean = 0.0, sq = 0.0;
        for (std::size_t i : n.train) {
            mean += n.features(i, c);
            sq += n.features(i, c) * n.features(i, c);
        }
        mean /= n.train.size();
        CHECK(std::abs(mean) < 1e-9);
        if (c == 2) {
            for (std::size_t i = 0; i < n.size(); ++i) CHECK(n.features(i, 2) == 0.0);
        } else {
            CHECK(sq / n.train.size() == doctest::Approx(1.0));
        }
    }
    double test_mean = 0.0;
    for (std::size_t i : n.test) test_mean += n.features(i, 0);
    CHECK(test_mean / n.test.size() != 0.0);
    FeatureDataset empty_train = ds;
    empty_train.train.clear();
    CHECK_THROWS_AS(hdqt::normalize(empty_train), hdqt::DataError);
}

TEST_CASE("synthetic blobs") {
    Rng a(5), b(5);
    const auto d1 = hdqt::synth_blobs(4, 25, 3, 1.0, a);
    const auto d2 = hdqt::synth_blobs(4, 25, 3, 1.0, b);
    CHECK(d1.features == d2.features);
    CHECK(d1.train == d2.train);
    CHECK(d1.size() == 100);
    CHECK(d1.test.size() == 20);
    std::vector<int> per_class(4, 0);
    for (std::size_t i : d1.test) ++per_class[d1.labels[i]];
    CHECK(per_class == std::vector<int>{5, 5, 5, 5});
    d1.validate();
    CHECK_THROWS_AS(hdqt::synth_blobs(1, 10, 2, 1.0, a), hdqt::ParameterError);

    // Nearest-center classification: separable limit and chance limit.
    auto nearest_center_accuracy = [](const FeatureDataset& ds) {
        Matrix centers(ds.num_classes(), ds.feature_dim());
        std::vector<double> counts(ds.num_classes(), 0.0);
        for (std::size_t i : ds.train) {
            counts[ds.labels[i]] += 1;
            for (std::size_t f = 0; f < ds.feature_dim(); ++f) centers(ds.labels[i], f) += ds.features(i, f);
        }
        for (std::size_t c = 0; c < ds.num_classes(); ++c)
            for (std::size_t f = 0; f < ds.feature_dim(); ++f) centers(c, f) /= counts[c];
        double correct = 0;
        for (std::size_t i : ds.test) {
            std::size_t best = 0;
            double best_d = INFINITY;
            for (std::size_t c = 0; c < ds.num_classes(); ++c) {
                double d = 0;
                for (std::size_t f = 0; f < ds.feature_dim(); ++f) {
                    d += std::pow(ds.features(i, f) - centers(c, f), 2);
                }
                if (d < best_d) best_d = d, best = c;
            }
            correct += static_cast<int>(best) == ds.labels[i];
        }
        return correct / ds.test.size();
    };
    Rng far(6), none(7);
    CHECK(nearest_center_accuracy(hdqt::synth_blobs(5, 200, 8, 50.0, far)) == 1.0);
    CHECK(std::abs(nearest_center_accuracy(hdqt::synth_blobs(5, 400, 8, 0.0, none)) - 0.2) < 0.08);
}

TEST_CASE("stratified split") {
    Rng rng(8);
    const auto ds = hdqt::synth_blobs(3, 50, 2, 1.0, rng);
    Rng r1(1);
    const auto s = hdqt::stratified_split(ds, 0.3, r1);
    CHECK(s.test.size() == 45);
    CHECK(s.train.size() == 105);
    s.validate();
    CHECK_THROWS_AS(hdqt::stratified_split(ds, 1.0, r1), hdqt::ParameterError);
}
