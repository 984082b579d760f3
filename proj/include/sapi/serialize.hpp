#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sapi/common.hpp"

namespace sapi {

using Json = nlohmann::json;

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

// Rejects keys outside `allowed`; used everywhere a schema is strict.
void reject_unknown_keys(const Json& obj, const std::vector<std::string>& allowed,
                         const std::string& context);

void require_schema_version(const Json& obj, int expected, const std::string& context);

// Raw little-endian IEEE-754 32-bit blobs, row-major.
void write_f32_blob(const std::filesystem::path& path, const std::vector<float>& data);
std::vector<float> read_f32_blob(const std::filesystem::path& path);

}  // namespace sapi
