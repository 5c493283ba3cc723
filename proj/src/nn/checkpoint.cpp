#include "exnet/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace exnet::nn {

namespace {

constexpr char kMagic[4] = {'E', 'X', 'N', 'T'};
constexpr uint32_t kVersion = 1;

struct NamedTensor {
    std::string name;
    Tensor* tensor;
};

std::vector<NamedTensor> all_tensors(Network& net) {
    std::vector<NamedTensor> out;
    for (Parameter* p : net.parameters()) out.push_back({p->name, &p->value});
    for (Buffer* b : net.buffers()) out.push_back({b->name, &b->value});
    return out;
}

}  // namespace

void save_checkpoint(const std::string& path, Network& net, const nlohmann::json& metadata) {
    auto tensors = all_tensors(net);
    nlohmann::json header;
    header["config"] = net.config_json();
    header["metadata"] = metadata;
    header["tensors"] = nlohmann::json::array();
    int64_t offset = 0;
    for (const auto& nt : tensors) {
        header["tensors"].push_back(
            {{"name", nt.name}, {"shape", nt.tensor->shape()}, {"offset", offset}});
        offset += nt.tensor->numel() * int64_t(sizeof(float));
    }
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(kMagic, 4);
    const uint32_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const uint64_t header_len = header_str.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_str.data(), std::streamsize(header_str.size()));
    for (const auto& nt : tensors)
        out.write(reinterpret_cast<const char*>(nt.tensor->data()),
                  std::streamsize(nt.tensor->numel() * int64_t(sizeof(float))));
    if (!out) throw std::runtime_error("failed while writing '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("'" + path + "' is not a checkpoint file");
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), std::streamsize(header_len));
    if (!in) throw std::runtime_error("truncated checkpoint header in '" + path + "'");
    const nlohmann::json header = nlohmann::json::parse(header_str);

    LoadedCheckpoint loaded;
    loaded.config = header.at("config");
    loaded.metadata = header.value("metadata", nlohmann::json::object());
    loaded.network = build_network(loaded.config.at("arch").get<std::string>(), loaded.config);

    auto tensors = all_tensors(*loaded.network);
    const std::streampos data_start = in.tellg();
    for (const auto& entry : header.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<int64_t>>();
        const int64_t offset = entry.at("offset").get<int64_t>();
        NamedTensor* target = nullptr;
        for (auto& nt : tensors)
            if (nt.name == name) {
                target = &nt;
                break;
            }
        if (!target)
            throw std::runtime_error("checkpoint tensor '" + name +
                                     "' does not exist in the rebuilt network");
        if (target->tensor->shape() != shape)
            throw std::runtime_error("checkpoint tensor '" + name + "' has shape mismatch");
        in.seekg(data_start + std::streampos(offset));
        in.read(reinterpret_cast<char*>(target->tensor->data()),
                std::streamsize(target->tensor->numel() * int64_t(sizeof(float))));
        if (!in) throw std::runtime_error("truncated tensor data for '" + name + "'");
    }
    return loaded;
}

uint64_t trunk_checksum(Network& net) {
    uint64_t hash = 14695981039346656037ULL;
    auto feed = [&hash](const Tensor& t) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
        const size_t n = size_t(t.numel()) * sizeof(float);
        for (size_t i = 0; i < n; ++i) {
            hash ^= bytes[i];
            hash *= 1099511628211ULL;
        }
    };
    for (Parameter* p : net.parameters())
        if (p->name.rfind("head.", 0) != 0) feed(p->value);
    for (Buffer* b : net.buffers())
        if (b->name.rfind("head.", 0) != 0) feed(b->value);
    return hash;
}

}  // namespace exnet::nn
