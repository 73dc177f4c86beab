#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "nmt/model.hpp"

namespace nmt
{

  // Binary container:
  //   magic "NMTCKPT\0" | u32 version | u32 metadata length | metadata
  //   ("key=value\n", sorted) | u32 tensor count | per tensor: u32 name
  //   length, name, u32 rank, u64 dims[rank] | f64 values of every tensor,
  //   row-major, in directory order | u64 FNV-1a of all preceding bytes.
  // All integers and floats are little-endian.
  inline constexpr std::string_view checkpoint_magic{"NMTCKPT\0", 8};
  inline constexpr std::uint32_t checkpoint_version = 1;

  using Metadata = std::map<std::string, std::string>;

  struct Checkpoint
  {
    ModelParams params;
    Metadata metadata;
  };

  // Model dimensions and flags are written into the metadata automatically
  // (keys prefixed "model.").
  std::string serialize_checkpoint(const ModelParams& params, const Metadata& metadata);
  // Throws IoError on a bad magic, version mismatch, truncation, checksum
  // failure or a tensor directory that does not match the model dimensions.
  Checkpoint deserialize_checkpoint(std::string_view bytes);

  void save_checkpoint_file(const std::string& path, const ModelParams& params,
                            const Metadata& metadata);
  Checkpoint load_checkpoint_file(const std::string& path);

}
