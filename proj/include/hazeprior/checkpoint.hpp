#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "hazeprior/restorer.hpp"

namespace hazeprior {

/// Checkpoint layout, all integers little-endian:
///
///   8 bytes   magic "HZPRCKPT"
///   u32       format version (1)
///   u32       descriptor length n
///   n bytes   architecture descriptor (UTF-8, no terminator)
///   u64       parameter count p
///   p x f64   parameters, IEEE-754 binary64
struct Checkpoint {
    std::string architecture;
    std::vector<double> parameters;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes);

/// Writes through a temporary sibling file and renames it into place.
void save_checkpoint(const RestorerModel& model, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Reads a checkpoint and instantiates its architecture with its parameters.
std::unique_ptr<RestorerModel> load_model(const std::filesystem::path& path);

}  // namespace hazeprior
