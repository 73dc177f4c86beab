#include "nmt/hash.hpp"

#include <cstdio>
#include <fstream>
#include <vector>

#include "nmt/error.hpp"

namespace nmt
{

  std::string to_hex(std::uint64_t value)
  {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
  }

  std::uint64_t hash_file(const std::string& path)
  {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      throw IoError("cannot open file: " + path);
    Fnv1a h;
    std::vector<char> buf(1 << 16);
    while (in)
    {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      const auto n = static_cast<std::size_t>(in.gcount());
      h.update(std::string_view(buf.data(), n));
    }
    return h.digest();
  }

}
