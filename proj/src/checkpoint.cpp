#include "spedit/checkpoint.hpp"

#include <cstdint>
#include <fstream>

#include "spedit/errors.hpp"

namespace spedit {

namespace {
constexpr char kMagic[] = "SPEDITCKPT1\n";
}

void save_checkpoint(const std::string& path, const nlohmann::json& meta,
                     const std::vector<nn::Parameter*>& params) {
    nlohmann::json j = meta;
    j["params"] = nlohmann::json::array();
    for (const auto* p : params)
        j["params"].push_back({{"name", p->name}, {"rows", p->value.rows()},
                               {"cols", p->value.cols()}});
    std::string header = j.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write checkpoint: " + path);
    f.write(kMagic, sizeof(kMagic) - 1);
    uint64_t len = header.size();
    f.write(reinterpret_cast<const char*>(&len), sizeof(len));
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto* p : params)
        f.write(reinterpret_cast<const char*>(p->value.data()),
                static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    if (!f) throw IoError("checkpoint write failed: " + path);
}

namespace {

nlohmann::json read_header(std::ifstream& f, const std::string& path) {
    char magic[sizeof(kMagic) - 1];
    f.read(magic, sizeof(magic));
    if (!f || std::string(magic, sizeof(magic)) != std::string(kMagic, sizeof(magic)))
        throw SchemaError(path + ": not a checkpoint file");
    uint64_t len = 0;
    f.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string header(len, '\0');
    f.read(header.data(), static_cast<std::streamsize>(len));
    if (!f) throw SchemaError(path + ": truncated checkpoint header");
    return nlohmann::json::parse(header);
}

}  // namespace

nlohmann::json load_checkpoint(const std::string& path, std::vector<nn::Parameter*>& params) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint: " + path);
    nlohmann::json j = read_header(f, path);

    const auto& plist = j.at("params");
    if (plist.size() != params.size())
        throw SchemaError(path + ": parameter count mismatch (config-incompatible)");
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto rows = plist[i].at("rows").get<Eigen::Index>();
        auto cols = plist[i].at("cols").get<Eigen::Index>();
        if (rows != params[i]->value.rows() || cols != params[i]->value.cols())
            throw SchemaError(path + ": shape mismatch for " + params[i]->name);
        f.read(reinterpret_cast<char*>(params[i]->value.data()),
               static_cast<std::streamsize>(params[i]->value.size() * sizeof(double)));
    }
    if (!f) throw SchemaError(path + ": truncated parameter blob");
    return j;
}

nlohmann::json read_checkpoint_meta(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint: " + path);
    return read_header(f, path);
}

}  // namespace spedit
