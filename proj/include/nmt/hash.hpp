#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace nmt
{

  // 64-bit FNV-1a. Used for vocabulary fingerprints, checkpoint checksums
  // and manifest hashes; it is not a cryptographic hash.
  class Fnv1a
  {
  public:
    void update(std::string_view data)
    {
      for (const unsigned char c : data)
      {
        _state ^= c;
        _state *= 0x100000001b3ULL;
      }
    }

    void update(std::span<const unsigned char> data)
    {
      for (const unsigned char c : data)
      {
        _state ^= c;
        _state *= 0x100000001b3ULL;
      }
    }

    std::uint64_t digest() const
    {
      return _state;
    }

  private:
    std::uint64_t _state = 0xcbf29ce484222325ULL;
  };

  inline std::uint64_t fnv1a(std::string_view data)
  {
    Fnv1a h;
    h.update(data);
    return h.digest();
  }

  std::string to_hex(std::uint64_t value);

  // Hash of a whole file's bytes; throws IoError if unreadable.
  std::uint64_t hash_file(const std::string& path);

}
