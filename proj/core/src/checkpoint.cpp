#include "chronoqa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "chronoqa/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

namespace chronoqa {

using nlohmann::json;

const Tensor& LoadedCheckpoint::require(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t.value;
    }
    throw CorruptionError("checkpoint: tensor '" + name + "' missing");
}

bool LoadedCheckpoint::contains(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return true;
    }
    return false;
}

void save_checkpoint(const ParamStore& store, const CheckpointMeta& meta,
                     const std::string& path) {
    json manifest;
    manifest["format_version"] = 1;
    manifest["dtype"] = "f64le";
    manifest["seed"] = meta.seed;
    try {
        manifest["config"] = meta.config_json.empty() ? json::object() : json::parse(meta.config_json);
    } catch (const json::exception& e) {
        throw ContractError(std::string("checkpoint: config echo is not valid JSON: ") + e.what());
    }
    manifest["token_vocab"] = meta.token_vocab;
    manifest["entity_vocab"] = meta.entity_vocab;
    manifest["relation_vocab"] = meta.relation_vocab;
    manifest["time_vocab"] = meta.time_vocab;

    json params = json::array();
    uint64_t offset = 0;
    for (size_t i = 0; i < store.size(); ++i) {
        const Param& p = store[i];
        json entry;
        entry["name"] = p.name;
        entry["shape"] = {p.value.rows(), p.value.cols()};
        entry["offset"] = offset;
        entry["count"] = p.value.size();
        params.push_back(entry);
        offset += p.value.size() * sizeof(double);
    }
    manifest["params"] = params;
    manifest["payload_bytes"] = offset;

    const std::string manifest_str = manifest.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot write '" + path + "'");
    const uint64_t manifest_len = manifest_str.size();
    out.write(reinterpret_cast<const char*>(&manifest_len), sizeof(manifest_len));
    out.write(manifest_str.data(), static_cast<std::streamsize>(manifest_str.size()));
    for (size_t i = 0; i < store.size(); ++i) {
        const Param& p = store[i];
        out.write(reinterpret_cast<const char*>(p.value.data()),
                  static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
    if (!out) throw IoError("checkpoint: write failed for '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
    uint64_t manifest_len = 0;
    in.read(reinterpret_cast<char*>(&manifest_len), sizeof(manifest_len));
    if (!in) throw CorruptionError("checkpoint: file too short for manifest header");
    std::string manifest_str(manifest_len, '\0');
    in.read(manifest_str.data(), static_cast<std::streamsize>(manifest_len));
    if (!in) throw CorruptionError("checkpoint: truncated manifest");

    json manifest;
    try {
        manifest = json::parse(manifest_str);
    } catch (const json::exception& e) {
        throw CorruptionError(std::string("checkpoint: manifest is not valid JSON: ") + e.what());
    }

    LoadedCheckpoint loaded;
    try {
        if (manifest.at("dtype").get<std::string>() != "f64le") {
            throw CorruptionError("checkpoint: unsupported dtype");
        }
        loaded.meta.seed = manifest.at("seed").get<uint64_t>();
        loaded.meta.config_json = manifest.at("config").dump();
        loaded.meta.token_vocab = manifest.at("token_vocab").get<std::vector<std::string>>();
        loaded.meta.entity_vocab = manifest.at("entity_vocab").get<std::vector<std::string>>();
        loaded.meta.relation_vocab =
            manifest.at("relation_vocab").get<std::vector<std::string>>();
        loaded.meta.time_vocab = manifest.at("time_vocab").get<std::vector<int>>();

        const uint64_t payload_bytes = manifest.at("payload_bytes").get<uint64_t>();
        std::string payload(payload_bytes, '\0');
        in.read(payload.data(), static_cast<std::streamsize>(payload_bytes));
        if (static_cast<uint64_t>(in.gcount()) != payload_bytes) {
            throw CorruptionError("checkpoint: truncated payload");
        }
        char extra = 0;
        if (in.read(&extra, 1); in.gcount() != 0) {
            throw CorruptionError("checkpoint: trailing bytes after payload");
        }

        for (const auto& entry : manifest.at("params")) {
            const std::string name = entry.at("name").get<std::string>();
            const int rows = entry.at("shape").at(0).get<int>();
            const int cols = entry.at("shape").at(1).get<int>();
            const uint64_t offset = entry.at("offset").get<uint64_t>();
            const uint64_t count = entry.at("count").get<uint64_t>();
            if (count != static_cast<uint64_t>(rows) * static_cast<uint64_t>(cols)) {
                throw CorruptionError("checkpoint: count/shape mismatch for '" + name + "'");
            }
            if (offset + count * sizeof(double) > payload_bytes) {
                throw CorruptionError("checkpoint: tensor '" + name + "' exceeds payload");
            }
            Tensor value(rows, cols);
            std::memcpy(value.data(), payload.data() + offset, count * sizeof(double));
            loaded.tensors.push_back({name, std::move(value)});
        }
    } catch (const json::exception& e) {
        throw CorruptionError(std::string("checkpoint: malformed manifest: ") + e.what());
    }
    return loaded;
}

void restore_params(ParamStore& store, const LoadedCheckpoint& loaded) {
    for (const auto& t : loaded.tensors) {
        if (!store.contains(t.name)) {
            throw CorruptionError("checkpoint: parameter '" + t.name + "' unknown to this model");
        }
        Param& p = store.get(t.name);
        if (!p.value.same_shape(t.value)) {
            throw CorruptionError("checkpoint: shape mismatch for '" + t.name + "': " +
                                  p.value.shape_str() + " vs " + t.value.shape_str());
        }
        p.value = t.value;
    }
}

}  // namespace chronoqa
