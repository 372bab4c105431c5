#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "hdqt/errors.hpp"
#include "hdqt/nn.hpp"

namespace hdqt {

namespace {

constexpr const char* kMagic = "hdqt-fcn";
constexpr int kVersion = 1;

std::string hex(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_hex(const std::string& token, const std::filesystem::path& path) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') {
        throw DataError(path.string() + ": bad number '" + token + "'");
    }
    return v;
}

void write_layer(std::ostream& os, const LinearLayer& layer) {
    os << "layer " << layer.in_dim() << ' ' << layer.out_dim() << '\n';
    for (std::size_t i = 0; i < layer.in_dim(); ++i) {
        for (std::size_t j = 0; j < layer.out_dim(); ++j) {
            os << (j ? " " : "") << hex(layer.weights(i, j));
        }
        os << '\n';
    }
    for (std::size_t j = 0; j < layer.out_dim(); ++j) {
        os << (j ? " " : "") << hex(layer.bias[j]);
    }
    os << '\n';
}

LinearLayer read_layer(std::istream& is, const std::filesystem::path& path) {
    std::string tag;
    std::size_t in = 0, out = 0;
    if (!(is >> tag >> in >> out) || tag != "layer") {
        throw DataError(path.string() + ": expected 'layer <in> <out>'");
    }
    LinearLayer layer{Matrix(in, out), std::vector<double>(out)};
    std::string token;
    for (double& v : layer.weights.values()) {
        if (!(is >> token)) throw DataError(path.string() + ": truncated weights");
        v = parse_hex(token, path);
    }
    for (double& v : layer.bias) {
        if (!(is >> token)) throw DataError(path.string() + ": truncated bias");
        v = parse_hex(token, path);
    }
    return layer;
}

}  // namespace

void save_checkpoint(const FcnModel& model, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) {
        throw DataError("cannot write checkpoint " + path.string());
    }
    os << kMagic << ' ' << kVersion << '\n';
    os << "hidden " << model.hidden.size() << '\n';
    for (const auto& layer : model.hidden) {
        write_layer(os, layer);
    }
    write_layer(os, model.head);
    if (!os) {
        throw DataError("failed writing checkpoint " + path.string());
    }
}

FcnModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw DataError("cannot read checkpoint " + path.string());
    }
    std::string magic, tag;
    int version = 0;
    std::size_t hidden = 0;
    if (!(is >> magic >> version) || magic != kMagic) {
        throw DataError(path.string() + ": not an hdqt checkpoint");
    }
    if (version != kVersion) {
        throw DataError(path.string() + ": unsupported checkpoint version " +
                        std::to_string(version));
    }
    if (!(is >> tag >> hidden) || tag != "hidden") {
        throw DataError(path.string() + ": expected 'hidden <count>'");
    }
    FcnModel model;
    for (std::size_t i = 0; i < hidden; ++i) {
        model.hidden.push_back(read_layer(is, path));
    }
    model.head = read_layer(is, path);
    return model;
}

}  // namespace hdqt
