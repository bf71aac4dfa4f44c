#ifndef OPO_NOISE_MANIFEST_HPP
#define OPO_NOISE_MANIFEST_HPP

// Run manifests: one JSON file next to each output CSV, holding what is
// needed to rerun the command and check the result byte for byte. No
// timestamps, so a rerun reproduces the manifest too.
// Needs OpenSSL (libcrypto) for SHA-256.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include <openssl/evp.h>

#include "opo_noise/config.hpp"

namespace opo
{
inline std::string sha256_hex(std::string_view data)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

inline std::string file_sha256(const std::string& path)
{
    return sha256_hex(read_text_file(path));
}

struct FileDigest
{
    std::string path;
    std::string sha256;
};

struct RunManifest
{
    std::string command;
    std::vector<std::string> arguments;        // argv after the program name
    nlohmann::json config = nlohmann::json::object();   // resolved key/value snapshot
    std::vector<FileDigest> inputs;
    std::string tool_version;
    std::optional<std::uint64_t> master_seed;
    std::vector<FileDigest> outputs;           // file names relative to the output directory
};

inline nlohmann::json to_json(const RunManifest& m)
{
    nlohmann::json j;
    j["command"] = m.command;
    j["arguments"] = m.arguments;
    j["config"] = m.config;
    j["tool_version"] = m.tool_version;
    j["master_seed"] = m.master_seed ? nlohmann::json(*m.master_seed) : nlohmann::json(nullptr);
    auto files = [](const std::vector<FileDigest>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& f : v)
            a.push_back({{"path", f.path}, {"sha256", f.sha256}});
        return a;
    };
    j["inputs"] = files(m.inputs);
    j["outputs"] = files(m.outputs);
    return j;
}

inline RunManifest manifest_from_json(const nlohmann::json& j)
{
    try {
        RunManifest m;
        m.command = j.at("command").get<std::string>();
        m.arguments = j.at("arguments").get<std::vector<std::string>>();
        m.config = j.at("config");
        m.tool_version = j.at("tool_version").get<std::string>();
        if (!j.at("master_seed").is_null())
            m.master_seed = j.at("master_seed").get<std::uint64_t>();
        for (const auto& f : j.at("inputs"))
            m.inputs.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
        for (const auto& f : j.at("outputs"))
            m.outputs.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed manifest: ") + e.what());
    }
}

inline RunManifest load_manifest(const std::string& path)
{
    try {
        return manifest_from_json(nlohmann::json::parse(read_text_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

inline nlohmann::json config_snapshot(const KeyValues& kv)
{
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, entry] : kv.entries)
        j[key] = entry.value;
    return j;
}

inline std::string manifest_path_for(const std::string& csv_path)
{
    return csv_path + ".manifest.json";
}

// Writes <csv>.manifest.json for every output listed in the manifest.
inline void write_manifests(RunManifest m, const std::filesystem::path& out_dir)
{
    for (auto& f : m.outputs)
        f.sha256 = file_sha256((out_dir / f.path).string());
    const std::string text = to_json(m).dump(2) + "\n";
    for (const auto& f : m.outputs) {
        std::ofstream os(manifest_path_for((out_dir / f.path).string()), std::ios::binary);
        if (!os)
            throw ValidationError("cannot write manifest for " + f.path);
        os << text;
    }
}

} // namespace opo

#endif // OPO_NOISE_MANIFEST_HPP
