// Experiment runner.
//
//   hdqt run   --config FILE [--seed N] [--method M] [--bits B] [--accum A] [--fp]
//              [--dataset PATH] [--out DIR]
//   hdqt sweep --config FILE --axis {input|accum} --values a,b,c [--out DIR]
//   hdqt plot  --figure {step_acc|forgetting|per_class_delta|bin_occupancy}
//              --in DIR --out FILE
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 runtime failure.
// HDQT_WORKERS sets the number of seeds run in parallel.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hdqt/errors.hpp"
#include "hdqt/experiment.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kData = 2, kRuntime = 3 };

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> method;
    std::optional<int> bits;
    std::optional<int> accum;
    bool fp = false;
    std::optional<std::string> dataset;
};

hdqt::ExperimentConfig resolve(const std::string& path, const Overrides& o) {
    hdqt::ExperimentConfig cfg = path.empty() ? hdqt::ExperimentConfig{} : hdqt::load_config(path);
    if (o.seed) cfg.seeds = {*o.seed};
    if (o.method) cfg.method = hdqt::parse_method(*o.method);
    if (o.fp) {
        cfg.quant.reset();
    } else if (o.bits || o.accum) {
        hdqt::QuantConfig q = cfg.quant.value_or(hdqt::QuantConfig{});
        if (o.bits) q.input_bits = *o.bits;
        if (o.accum) q.accum_bits = *o.accum;
        cfg.quant = q;
    }
    if (o.dataset) {
        cfg.dataset.source = "csv";
        cfg.dataset.path = *o.dataset;
    }
    cfg.validate();
    return cfg;
}

void print_summary(const std::vector<hdqt::RunRecord>& records) {
    for (const auto& r : records) {
        std::printf("seed %llu  %s  final accuracy %.4f  final forgetting %.4f  (%.1fs)\n",
                    static_cast<unsigned long long>(r.seed), hdqt::to_string(r.config.method).c_str(),
                    r.final_accuracy, r.forgetting.back(), r.wall_clock_s);
    }
}

std::vector<int> parse_values(const std::string& csv) {
    std::vector<int> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const std::size_t comma = csv.find(',', start);
        const std::string tok = csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw hdqt::ConfigError("--values: '" + tok + "' is not an integer");
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hadamard-domain quantized class-incremental training"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "results";
    Overrides ov;

    auto* run = app.add_subcommand("run", "run one configuration over its seeds");
    run->add_option("--config", config_path, "experiment config (JSON)");
    run->add_option("--seed", ov.seed, "run a single seed");
    run->add_option("--method", ov.method, "nocl | finetune | lwf | icarl | icarl_nme | bic");
    run->add_option("--bits", ov.bits, "input bit-width");
    run->add_option("--accum", ov.accum, "accumulator bit-width");
    run->add_flag("--fp", ov.fp, "disable quantization");
    run->add_option("--dataset", ov.dataset, "CSV dataset path");
    run->add_option("--out", out_dir, "output directory");

    std::string axis;
    std::string values;
    auto* sw = app.add_subcommand("sweep", "bit-width sweep with paired seeds");
    sw->add_option("--config", config_path, "experiment config (JSON)");
    sw->add_option("--axis", axis, "input | accum")->required();
    sw->add_option("--values", values, "comma-separated bit-widths")->required();
    sw->add_option("--seed", ov.seed, "run a single seed");
    sw->add_option("--method", ov.method, "training method");
    sw->add_option("--dataset", ov.dataset, "CSV dataset path");
    sw->add_option("--out", out_dir, "output directory");

    std::string figure;
    std::string in_dir;
    std::string out_file;
    auto* plot = app.add_subcommand("plot", "emit plot data from a results directory");
    plot->add_option("--figure", figure, "step_acc | forgetting | per_class_delta | bin_occupancy")
        ->required();
    plot->add_option("--in", in_dir, "results directory or records.json")->required();
    plot->add_option("--out", out_file, "output file (.csv or .svg)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfig;
    }

    try {
        if (*run) {
            const auto cfg = resolve(config_path, ov);
            const auto records = hdqt::run_experiment(cfg);
            hdqt::write_run_directory(records, out_dir);
            print_summary(records);
        } else if (*sw) {
            const auto cfg = resolve(config_path, ov);
            const auto records = hdqt::sweep(cfg, hdqt::parse_sweep_axis(axis), parse_values(values));
            hdqt::write_run_directory(records, out_dir);
            print_summary(records);
        } else if (*plot) {
            const auto fig = hdqt::parse_figure(figure);
            const auto records = hdqt::read_run_directory(in_dir);
            const bool svg = out_file.size() > 4 && out_file.substr(out_file.size() - 4) == ".svg";
            std::ofstream os(out_file);
            if (!os) throw hdqt::Error("cannot write " + out_file);
            os << (svg ? hdqt::emit_svg(records, fig) : hdqt::emit_plotdata(records, fig));
        }
    } catch (const hdqt::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const hdqt::ParameterError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const hdqt::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kOk;
}
