#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "compass/nn/tensor.hpp"

namespace compass::nn {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Binary container, little-endian: "CPNN", u32 version (1), u32 entry count,
/// then per entry: u16 name length, name bytes, u8 rank, u32 dims[rank],
/// f32 payload in row-major order.
std::string encode_checkpoint(const NamedTensors& entries);
NamedTensors decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParameterRefs& params);
/// Loads every parameter by name. Throws DependencyError when the file is
/// missing and InvalidArgument on a missing entry or shape mismatch.
void load_checkpoint(const std::filesystem::path& path, const ParameterRefs& params);

/// Rounds every parameter to the nearest f32, i.e. what a save/load cycle yields.
void round_to_f32(const ParameterRefs& params);

/// Sidecar manifest next to a checkpoint ("<ckpt>.json").
std::filesystem::path manifest_path(const std::filesystem::path& checkpoint);
void write_manifest(const std::filesystem::path& checkpoint, const nlohmann::json& manifest);
nlohmann::json read_manifest(const std::filesystem::path& checkpoint);

}  // namespace compass::nn
