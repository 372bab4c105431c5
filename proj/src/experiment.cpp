#include "hdqt/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "hdqt/errors.hpp"
#include "hdqt/log.hpp"

namespace hdqt {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) {
        throw ConfigError(where + " must be an object");
    }
    for (const auto& [key, value] : j.items()) {
        if (!allowed.contains(key)) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& dst) {
    if (!j.contains(key)) return;
    try {
        dst = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

json quant_json(const Precision& p) {
    if (!p) return "fp";
    return {{"input_bits", p->input_bits},
            {"accum_bits", p->accum_bits},
            {"tile_size", p->tile_size},
            {"fwd_outlier_scale", p->fwd_outlier_scale}};
}

Precision quant_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "fp") return std::nullopt;
        throw ConfigError("quant must be \"fp\" or an object");
    }
    reject_unknown(j, {"input_bits", "accum_bits", "tile_size", "fwd_outlier_scale"}, "quant");
    QuantConfig q;
    read(j, "input_bits", q.input_bits);
    read(j, "accum_bits", q.accum_bits);
    read(j, "tile_size", q.tile_size);
    read(j, "fwd_outlier_scale", q.fwd_outlier_scale);
    return q;
}

json stats_json(const GemmStats& s) {
    return {{"saturation_count_inputs", s.saturation_count_inputs},
            {"saturation_count_accum", s.saturation_count_accum},
            {"accumulations", s.accumulations},
            {"bins_used", s.bins_used}};
}

GemmStats stats_from_json(const json& j) {
    GemmStats s;
    s.saturation_count_inputs = j.at("saturation_count_inputs").get<std::uint64_t>();
    s.saturation_count_accum = j.at("saturation_count_accum").get<std::uint64_t>();
    s.accumulations = j.at("accumulations").get<std::uint64_t>();
    s.bins_used = j.at("bins_used").get<std::map<std::string, std::vector<std::uint64_t>>>();
    return s;
}

json accuracy_json(const AccuracyMatrix& acc) {
    json rows = json::array();
    for (std::size_t c = 0; c < acc.num_classes(); ++c) {
        json row = json::array();
        for (std::size_t t = 0; t < acc.num_tasks(); ++t) {
            const auto v = acc.at(c, t);
            row.push_back(v ? json(*v) : json(nullptr));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

AccuracyMatrix accuracy_from_json(const json& j) {
    const std::size_t classes = j.size();
    const std::size_t tasks = classes ? j.at(0).size() : 0;
    AccuracyMatrix acc(classes, tasks);
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t t = 0; t < tasks; ++t) {
            const auto& v = j.at(c).at(t);
            if (!v.is_null()) acc.set(c, t, v.get<double>());
        }
    }
    return acc;
}

std::size_t worker_count() {
    if (const char* env = std::getenv("HDQT_WORKERS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n > 0) return static_cast<std::size_t>(n);
    }
    return 1;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string label_of(const ExperimentConfig& cfg) {
    std::string s = to_string(cfg.method);
    if (cfg.quant) {
        s += "_in" + std::to_string(cfg.quant->input_bits) + "_acc" +
             std::to_string(cfg.quant->accum_bits);
    } else {
        s += "_fp";
    }
    return s;
}

json config_key(const ExperimentConfig& cfg) {
    json j = to_json(cfg);
    j.erase("seeds");
    return j;
}

struct Summary {
    double mean = 0.0;
    double std = 0.0;
    std::size_t n = 0;
};

// Sample standard deviation; zero for a single observation.
Summary summarize(const std::vector<double>& xs) {
    Summary s;
    s.n = xs.size();
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return s;
}

void require_single_config(const std::vector<RunRecord>& records) {
    if (records.empty()) {
        throw ConfigError("no records to plot");
    }
    const json key = config_key(records.front().config);
    for (const auto& r : records) {
        if (config_key(r.config) != key) {
            throw ConfigError("records mix incompatible configurations (" +
                              label_of(records.front().config) + " vs " + label_of(r.config) + ")");
        }
    }
}

std::vector<std::vector<double>> per_task_series(const std::vector<RunRecord>& records,
                                                 bool forgetting) {
    std::size_t tasks = records.front().task_accuracy.size();
    for (const auto& r : records) {
        if (r.task_accuracy.size() != tasks) {
            throw ConfigError("records have different task counts");
        }
    }
    std::vector<std::vector<double>> series(tasks);
    for (const auto& r : records) {
        const auto& src = forgetting ? r.forgetting : r.task_accuracy;
        for (std::size_t t = 0; t < tasks; ++t) series[t].push_back(src[t]);
    }
    return series;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (dataset.source != "synthetic" && dataset.source != "csv") {
        throw ConfigError("dataset.source must be 'synthetic' or 'csv'");
    }
    if (dataset.source == "csv" && dataset.path.empty()) {
        throw ConfigError("dataset.path is required for csv datasets");
    }
    if (dataset.source == "synthetic" && (dataset.classes < 2 || dataset.dim < 1 ||
                                          dataset.samples_per_class < 2)) {
        throw ConfigError("synthetic dataset needs >= 2 classes, >= 2 samples per class, dim >= 1");
    }
    try {
        parse_dataset_kind(dataset.kind);
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
    if (!(dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0)) {
        throw ConfigError("dataset.test_fraction must lie in (0, 1)");
    }
    if (quant) {
        try {
            quant->validate();
        } catch (const ParameterError& e) {
            throw ConfigError(std::string("quant: ") + e.what());
        }
    }
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (classes_per_task < 1) throw ConfigError("classes_per_task must be >= 1");
    if (hyper.epochs < 0 || hyper.batch < 1) throw ConfigError("epochs >= 0 and batch >= 1 required");
    if (!(hyper.lr > 0.0)) throw ConfigError("lr must be positive");
    if (!(hyper.temperature > 0.0)) throw ConfigError("temperature must be positive");
    if (uses_replay(method) && hyper.memory == 0) throw ConfigError("replay methods need memory > 0");
    if (!(hyper.split_ratio > 0.0 && hyper.split_ratio < 1.0)) {
        throw ConfigError("split_ratio must lie in (0, 1)");
    }
}

json to_json(const ExperimentConfig& cfg) {
    const auto& d = cfg.dataset;
    const auto& h = cfg.hyper;
    json schedule = json::array();
    for (const auto& [epoch, mult] : h.schedule) schedule.push_back({epoch, mult});
    return {
        {"dataset",
         {{"source", d.source}, {"path", d.path}, {"schema", d.schema}, {"kind", d.kind},
          {"apply_filters", d.apply_filters}, {"classes", d.classes},
          {"samples_per_class", d.samples_per_class}, {"dim", d.dim},
          {"separation", d.separation}, {"normalize", d.normalize},
          {"test_fraction", d.test_fraction}}},
        {"method", to_string(cfg.method)},
        {"quant", quant_json(cfg.quant)},
        {"hyper",
         {{"lr", h.lr}, {"momentum", h.momentum}, {"weight_decay", h.weight_decay},
          {"schedule", schedule}, {"epochs", h.epochs}, {"batch", h.batch},
          {"memory", h.memory}, {"lambda", h.kd_lambda}, {"temperature", h.temperature},
          {"split_ratio", h.split_ratio}, {"bic_epochs", h.bic_epochs}, {"bic_lr", h.bic_lr},
          {"hidden_layers", h.hidden_layers}}},
        {"seeds", cfg.seeds},
        {"classes_per_task", cfg.classes_per_task},
    };
}

ExperimentConfig config_from_json(const json& j) {
    reject_unknown(j, {"dataset", "method", "quant", "hyper", "seeds", "classes_per_task"}, "config");
    ExperimentConfig cfg;
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        reject_unknown(d, {"source", "path", "schema", "kind", "apply_filters", "classes",
                           "samples_per_class", "dim", "separation", "normalize", "test_fraction"},
                       "dataset");
        auto& s = cfg.dataset;
        read(d, "source", s.source);
        read(d, "path", s.path);
        read(d, "schema", s.schema);
        read(d, "kind", s.kind);
        read(d, "apply_filters", s.apply_filters);
        read(d, "classes", s.classes);
        read(d, "samples_per_class", s.samples_per_class);
        read(d, "dim", s.dim);
        read(d, "separation", s.separation);
        read(d, "normalize", s.normalize);
        read(d, "test_fraction", s.test_fraction);
    }
    if (j.contains("method")) {
        std::string name;
        read(j, "method", name);
        cfg.method = parse_method(name);
    }
    if (j.contains("quant")) {
        cfg.quant = quant_from_json(j.at("quant"));
    }
    if (j.contains("hyper")) {
        const json& h = j.at("hyper");
        reject_unknown(h, {"lr", "momentum", "weight_decay", "schedule", "epochs", "batch", "memory",
                           "lambda", "temperature", "split_ratio", "bic_epochs", "bic_lr",
                           "hidden_layers"},
                       "hyper");
        auto& hp = cfg.hyper;
        read(h, "lr", hp.lr);
        read(h, "momentum", hp.momentum);
        read(h, "weight_decay", hp.weight_decay);
        if (h.contains("schedule")) {
            hp.schedule.clear();
            for (const auto& e : h.at("schedule")) {
                if (!e.is_array() || e.size() != 2) {
                    throw ConfigError("schedule entries must be [epoch, multiplier]");
                }
                if (!e.at(0).is_number_integer() || !e.at(1).is_number()) {
                    throw ConfigError("schedule entries must be [epoch, multiplier]");
                }
                hp.schedule.emplace_back(e.at(0).get<int>(), e.at(1).get<double>());
            }
        }
        read(h, "epochs", hp.epochs);
        read(h, "batch", hp.batch);
        read(h, "memory", hp.memory);
        read(h, "lambda", hp.kd_lambda);
        read(h, "temperature", hp.temperature);
        read(h, "split_ratio", hp.split_ratio);
        read(h, "bic_epochs", hp.bic_epochs);
        read(h, "bic_lr", hp.bic_lr);
        read(h, "hidden_layers", hp.hidden_layers);
    }
    read(j, "seeds", cfg.seeds);
    read(j, "classes_per_task", cfg.classes_per_task);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw ConfigError("cannot read config " + path.string());
    }
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

CilResult RunRecord::as_cil_result() const {
    CilResult r;
    r.class_order = class_order;
    r.task_classes = task_classes;
    r.accuracy = accuracy;
    r.task_accuracy = task_accuracy;
    r.forgetting = forgetting;
    r.final_accuracy = final_accuracy;
    r.stats = stats;
    return r;
}

json to_json(const RunRecord& r) {
    json j = reproducible_json(r);
    j["wall_clock_s"] = r.wall_clock_s;
    return j;
}

json reproducible_json(const RunRecord& r) {
    return {{"config", to_json(r.config)},
            {"seed", r.seed},
            {"class_order", r.class_order},
            {"task_classes", r.task_classes},
            {"accuracy", accuracy_json(r.accuracy)},
            {"task_accuracy", r.task_accuracy},
            {"forgetting", r.forgetting},
            {"final_accuracy", r.final_accuracy},
            {"gemm_stats", stats_json(r.stats)}};
}

RunRecord record_from_json(const json& j) {
    try {
        RunRecord r;
        r.config = config_from_json(j.at("config"));
        r.seed = j.at("seed").get<std::uint64_t>();
        r.class_order = j.at("class_order").get<std::vector<int>>();
        r.task_classes = j.at("task_classes").get<std::vector<std::vector<int>>>();
        r.accuracy = accuracy_from_json(j.at("accuracy"));
        r.task_accuracy = j.at("task_accuracy").get<std::vector<double>>();
        r.forgetting = j.at("forgetting").get<std::vector<double>>();
        r.final_accuracy = j.at("final_accuracy").get<double>();
        r.stats = stats_from_json(j.at("gemm_stats"));
        r.wall_clock_s = j.value("wall_clock_s", 0.0);
        return r;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed run record: ") + e.what());
    }
}

FeatureDataset prepare_dataset(const DatasetSpec& spec, std::uint64_t seed) {
    Rng root(seed);
    FeatureDataset ds;
    if (spec.source == "synthetic") {
        Rng data_rng = root.split("data");
        ds = synth_blobs(spec.classes, spec.samples_per_class, spec.dim, spec.separation, data_rng);
        // Blobs come pre-split 80/20; re-split only when asked for another ratio.
        if (spec.test_fraction != 0.2) {
            Rng split_rng = root.split("split");
            ds = stratified_split(ds, spec.test_fraction, split_rng);
        }
    } else {
        CsvSchema schema;
        if (!spec.schema.empty()) schema = load_schema(spec.schema);
        if (!spec.kind.empty()) schema.dataset_kind = parse_dataset_kind(spec.kind);
        ds = load_csv(spec.path, schema);
        if (spec.apply_filters) ds = apply_paper_filters(ds, schema.dataset_kind);
        if (ds.test.empty()) {
            Rng split_rng = root.split("split");
            ds = stratified_split(ds, spec.test_fraction, split_rng);
        }
    }
    if (spec.normalize) ds = normalize(ds);
    return ds;
}

RunRecord run_seed(const ExperimentConfig& config, std::uint64_t seed) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const FeatureDataset ds = prepare_dataset(config.dataset, seed);
    Rng root(seed);
    Rng stream_rng = root.split("stream");
    const TaskStream stream = split_tasks(ds, config.classes_per_task, stream_rng);
    Rng train_rng = root.split("train");
    CilResult res = run_cil(config.method, ds, stream, config.hyper, config.quant, train_rng);

    RunRecord r;
    r.config = config;
    r.config.seeds = {seed};
    r.seed = seed;
    r.class_order = std::move(res.class_order);
    r.task_classes = std::move(res.task_classes);
    r.accuracy = std::move(res.accuracy);
    r.task_accuracy = std::move(res.task_accuracy);
    r.forgetting = std::move(res.forgetting);
    r.final_accuracy = res.final_accuracy;
    r.stats = std::move(res.stats);
    r.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config) {
    config.validate();
    std::vector<RunRecord> out(config.seeds.size());
    const std::size_t workers = std::min(worker_count(), config.seeds.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < config.seeds.size(); ++i) out[i] = run_seed(config, config.seeds[i]);
        return out;
    }
    std::vector<std::exception_ptr> errors(config.seeds.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < config.seeds.size(); i += workers) {
                try {
                    out[i] = run_seed(config, config.seeds[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

SweepAxis parse_sweep_axis(const std::string& name) {
    if (name == "input" || name == "input_bits") return SweepAxis::InputBits;
    if (name == "accum" || name == "accum_bits") return SweepAxis::AccumBits;
    throw ConfigError("sweep axis must be 'input' or 'accum'");
}

std::vector<ExperimentConfig> sweep_configs(const ExperimentConfig& base, SweepAxis axis,
                                            const std::vector<int>& values) {
    if (values.empty()) {
        throw ConfigError("sweep needs at least one value");
    }
    std::vector<ExperimentConfig> out;
    std::string rejected;
    for (int v : values) {
        ExperimentConfig cfg = base;
        QuantConfig q = base.quant.value_or(QuantConfig{});
        if (axis == SweepAxis::InputBits) {
            q.input_bits = v;
            q.accum_bits = std::min(2 * v, 32);
        } else {
            q.accum_bits = v;
        }
        if (q.accum_bits < q.input_bits) {
            rejected += " (input " + std::to_string(q.input_bits) + ", accum " +
                        std::to_string(q.accum_bits) + ")";
            continue;
        }
        cfg.quant = q;
        cfg.validate();
        out.push_back(std::move(cfg));
    }
    if (!rejected.empty()) {
        warn("sweep: dropping points with accumulator narrower than input:" + rejected);
    }
    if (out.empty()) {
        throw ConfigError("sweep: every point was rejected");
    }
    return out;
}

std::vector<RunRecord> sweep(const ExperimentConfig& base, SweepAxis axis,
                             const std::vector<int>& values) {
    std::vector<RunRecord> out;
    for (const auto& cfg : sweep_configs(base, axis, values)) {
        auto recs = run_experiment(cfg);
        out.insert(out.end(), std::make_move_iterator(recs.begin()),
                   std::make_move_iterator(recs.end()));
    }
    return out;
}

Figure parse_figure(const std::string& name) {
    if (name == "step_acc") return Figure::StepAcc;
    if (name == "forgetting") return Figure::Forgetting;
    if (name == "per_class_delta") return Figure::PerClassDelta;
    if (name == "bin_occupancy") return Figure::BinOccupancy;
    throw ConfigError("unknown figure '" + name + "'");
}

std::string emit_results(const std::vector<RunRecord>& records, ResultFormat format) {
    if (records.empty()) {
        throw ConfigError("no records to emit");
    }
    if (format == ResultFormat::Json) {
        json arr = json::array();
        for (const auto& r : records) arr.push_back(to_json(r));
        return arr.dump(2) + "\n";
    }
    // Runs are numbered by distinct configuration, in first-seen order.
    std::vector<json> keys;
    std::ostringstream os;
    os << "run,label,seed,task,metric,value\n";
    for (const auto& r : records) {
        const json key = config_key(r.config);
        auto it = std::ranges::find(keys, key);
        if (it == keys.end()) {
            keys.push_back(key);
            it = keys.end() - 1;
        }
        const auto run = it - keys.begin();
        const std::string prefix =
            std::to_string(run) + "," + label_of(r.config) + "," + std::to_string(r.seed) + ",";
        for (std::size_t t = 0; t < r.task_accuracy.size(); ++t) {
            os << prefix << t << ",task_accuracy," << fmt(r.task_accuracy[t]) << '\n';
            os << prefix << t << ",forgetting," << fmt(r.forgetting[t]) << '\n';
        }
        os << prefix << r.task_accuracy.size() - 1 << ",final_accuracy," << fmt(r.final_accuracy)
           << '\n';
    }
    return os.str();
}

std::string emit_plotdata(const std::vector<RunRecord>& records, Figure figure) {
    if (records.empty()) {
        throw ConfigError("no records to plot");
    }
    std::ostringstream os;
    switch (figure) {
        case Figure::StepAcc:
        case Figure::Forgetting: {
            require_single_config(records);
            const auto series = per_task_series(records, figure == Figure::Forgetting);
            os << "task,mean,std,n\n";
            for (std::size_t t = 0; t < series.size(); ++t) {
                const Summary s = summarize(series[t]);
                os << t << ',' << fmt(s.mean) << ',' << fmt(s.std) << ',' << s.n << '\n';
            }
            break;
        }
        case Figure::PerClassDelta: {
            std::vector<json> keys;
            std::vector<std::vector<const RunRecord*>> groups;
            for (const auto& r : records) {
                const json key = config_key(r.config);
                auto it = std::ranges::find(keys, key);
                if (it == keys.end()) {
                    keys.push_back(key);
                    groups.emplace_back();
                    it = keys.end() - 1;
                }
                groups[static_cast<std::size_t>(it - keys.begin())].push_back(&r);
            }
            if (groups.size() != 2) {
                throw ConfigError("per_class_delta needs records from exactly two configurations");
            }
            std::map<std::uint64_t, const RunRecord*> second;
            for (const auto* r : groups[1]) second[r->seed] = r;
            std::vector<std::vector<double>> deltas;
            std::vector<int> classes;
            for (const auto* a : groups[0]) {
                const auto it = second.find(a->seed);
                if (it == second.end()) continue;
                const auto d = per_class_delta(a->as_cil_result(), it->second->as_cil_result());
                if (deltas.empty()) {
                    deltas.resize(d.size());
                    classes = a->class_order;
                }
                if (d.size() != deltas.size()) {
                    throw ConfigError("per_class_delta: runs have different class counts");
                }
                for (std::size_t k = 0; k < d.size(); ++k) {
                    deltas[k].push_back(d[k]);
                    if (classes[k] != a->class_order[k]) classes[k] = -1;
                }
            }
            if (deltas.empty()) {
                throw ConfigError("per_class_delta: no seeds shared by both configurations");
            }
            os << "position,class,mean,std,n\n";
            for (std::size_t k = 0; k < deltas.size(); ++k) {
                const Summary s = summarize(deltas[k]);
                os << k << ',' << classes[k] << ',' << fmt(s.mean) << ',' << fmt(s.std) << ','
                   << s.n << '\n';
            }
            break;
        }
        case Figure::BinOccupancy: {
            require_single_config(records);
            os << "role,code,mean,std,n\n";
            for (const auto& [role, bins] : records.front().stats.bins_used) {
                const auto top = static_cast<long>(bins.size() / 2);
                for (std::size_t b = 0; b < bins.size(); ++b) {
                    std::vector<double> xs;
                    for (const auto& r : records) {
                        const auto it = r.stats.bins_used.find(role);
                        xs.push_back(it == r.stats.bins_used.end() || b >= it->second.size()
                                         ? 0.0
                                         : static_cast<double>(it->second[b]));
                    }
                    const Summary s = summarize(xs);
                    os << role << ',' << static_cast<long>(b) - top << ',' << fmt(s.mean) << ','
                       << fmt(s.std) << ',' << s.n << '\n';
                }
            }
            break;
        }
    }
    return os.str();
}

std::string emit_svg(const std::vector<RunRecord>& records, Figure figure) {
    if (figure != Figure::StepAcc && figure != Figure::Forgetting) {
        throw ConfigError("SVG output is available for step_acc and forgetting only");
    }
    require_single_config(records);
    const auto series = per_task_series(records, figure == Figure::Forgetting);
    const double w = 480, h = 320, pad = 40;
    const std::size_t n = series.size();
    auto px = [&](std::size_t t) {
        return pad + (n > 1 ? (w - 2 * pad) * static_cast<double>(t) / static_cast<double>(n - 1) : 0.0);
    };
    auto py = [&](double v) { return h - pad - (h - 2 * pad) * std::clamp(v, 0.0, 1.0); };
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<text x=\"" << pad << "\" y=\"20\" font-size=\"14\">"
       << (figure == Figure::StepAcc ? "step accuracy" : "forgetting") << " - "
       << label_of(records.front().config) << "</text>\n";
    os << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad << "\" y2=\""
       << h - pad << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << h - pad
       << "\" stroke=\"black\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (std::size_t t = 0; t < n; ++t) {
        os << px(t) << ',' << py(summarize(series[t]).mean) << ' ';
    }
    os << "\"/>\n";
    for (std::size_t t = 0; t < n; ++t) {
        const Summary s = summarize(series[t]);
        os << "<line x1=\"" << px(t) << "\" y1=\"" << py(s.mean - s.std) << "\" x2=\"" << px(t)
           << "\" y2=\"" << py(s.mean + s.std) << "\" stroke=\"steelblue\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void write_run_directory(const std::vector<RunRecord>& records, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write = [&](const char* name, const std::string& content) {
        std::ofstream os(dir / name);
        if (!os) throw Error("cannot write " + (dir / name).string());
        os << content;
    };
    write("records.json", emit_results(records, ResultFormat::Json));
    write("results.csv", emit_results(records, ResultFormat::Csv));
    try {
        require_single_config(records);
        write("step_acc.csv", emit_plotdata(records, Figure::StepAcc));
        write("forgetting.csv", emit_plotdata(records, Figure::Forgetting));
    } catch (const ConfigError&) {
        // Sweeps mix configurations; per-figure files come from `plot`.
    }
}

std::vector<RunRecord> read_run_directory(const std::filesystem::path& dir) {
    const auto path = std::filesystem::is_directory(dir) ? dir / "records.json" : dir;
    std::ifstream is(path);
    if (!is) {
        throw DataError("cannot read " + path.string());
    }
    json arr;
    try {
        is >> arr;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    std::vector<RunRecord> out;
    for (const auto& j : arr) out.push_back(record_from_json(j));
    return out;
}

}  // namespace hdqt
