#include "sapi/serialize.hpp"

#include <algorithm>
#include <bit>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "blob I/O assumes a little-endian host");

namespace sapi {

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    Json j;
    try {
        in >> j;
    } catch (const Json::parse_error& e) {
        throw IoError("malformed JSON in '" + path.string() + "': " + e.what());
    }
    return j;
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void reject_unknown_keys(const Json& obj, const std::vector<std::string>& allowed,
                         const std::string& context) {
    if (!obj.is_object()) throw ConfigError(context + ": expected a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ConfigError(context + ": unknown key '" + it.key() + "'");
    }
}

void require_schema_version(const Json& obj, int expected, const std::string& context) {
    if (!obj.is_object() || !obj.contains("schema_version"))
        throw SchemaVersionMismatch(context + ": missing schema_version");
    int got = obj.at("schema_version").get<int>();
    if (got != expected)
        throw SchemaVersionMismatch(context + ": schema_version " + std::to_string(got) +
                                    ", expected " + std::to_string(expected));
}

void write_f32_blob(const std::filesystem::path& path, const std::vector<float>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<float> read_f32_blob(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::streamsize bytes = in.tellg();
    if (bytes % sizeof(float) != 0)
        throw IoError("blob '" + path.string() + "' is not a whole number of f32 values");
    std::vector<float> data(static_cast<std::size_t>(bytes) / sizeof(float));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(data.data()), bytes);
    if (!in) throw IoError("failed reading '" + path.string() + "'");
    return data;
}

}  // namespace sapi
