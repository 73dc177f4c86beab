#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nmt/checkpoint.hpp"
#include "nmt/error.hpp"
#include "test_util.hpp"

using namespace nmt;

namespace
{

  std::string temp_path(const std::string& name)
  {
    return (std::filesystem::temp_directory_path() / ("nmt_ckpt_" + name)).string();
  }

}

TEST(Checkpoint, RoundTripIsBitwise)
{
  const auto params = ModelParams::random(test::tiny_config(), 17);
  const auto bytes = serialize_checkpoint(params, {{"note", "hello"}});
  const auto loaded = deserialize_checkpoint(bytes);
  EXPECT_TRUE(bitwise_equal(params, loaded.params));
  EXPECT_EQ(loaded.metadata.at("note"), "hello");
  EXPECT_EQ(loaded.metadata.at("model.hidden"), "8");
  EXPECT_EQ(serialize_checkpoint(loaded.params, loaded.metadata), bytes);
}

TEST(Checkpoint, DetectsCorruption)
{
  const auto params = ModelParams::random(test::tiny_config(), 1);
  const auto bytes = serialize_checkpoint(params, {});
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  EXPECT_THROW(deserialize_checkpoint(flipped), IoError);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), IoError);
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), IoError);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(magic), IoError);
  auto version = bytes;
  version[8] = 2;
  EXPECT_THROW(deserialize_checkpoint(version), IoError);
  EXPECT_THROW(deserialize_checkpoint(""), IoError);
}

TEST(Checkpoint, FileSaveLeavesNoTemporary)
{
  const auto path = temp_path("file.bin");
  const auto params = ModelParams::random(test::tiny_config(), 2);
  save_checkpoint_file(path, params, {{"k", "v"}});
  EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
  EXPECT_TRUE(bitwise_equal(load_checkpoint_file(path).params, params));
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint_file(path), IoError);
}
