#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace nmt::utf8
{

  using code_point_t = std::uint32_t;

  // Decodes a UTF-8 string. Throws DecodeError with the byte offset of the
  // first invalid sequence (overlong forms and surrogates are rejected).
  std::vector<code_point_t> decode(std::string_view text);

  std::string encode(code_point_t cp);
  std::string encode(const std::vector<code_point_t>& cps);

  // Splits a valid UTF-8 string into its characters, each kept as a string.
  std::vector<std::string> split_chars(std::string_view text);

  bool is_space(code_point_t cp);

  // Simple one-to-one case mapping covering Basic Latin, Latin-1, Latin
  // Extended-A, Greek and Cyrillic. Characters outside these blocks are
  // treated as caseless.
  bool is_upper(code_point_t cp);
  bool is_lower(code_point_t cp);
  code_point_t to_lower(code_point_t cp);
  code_point_t to_upper(code_point_t cp);

  inline bool is_letter(code_point_t cp)
  {
    return is_upper(cp) || is_lower(cp);
  }

}
