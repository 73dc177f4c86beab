#include "nmt/utf8.hpp"

#include "nmt/error.hpp"

namespace nmt::utf8
{

  std::vector<code_point_t> decode(std::string_view text)
  {
    std::vector<code_point_t> out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size())
    {
      const auto lead = static_cast<unsigned char>(text[i]);
      std::size_t len = 0;
      code_point_t cp = 0;
      code_point_t min_cp = 0;
      if (lead < 0x80)
      {
        out.push_back(lead);
        ++i;
        continue;
      }
      else if ((lead & 0xE0) == 0xC0)
      {
        len = 2;
        cp = lead & 0x1F;
        min_cp = 0x80;
      }
      else if ((lead & 0xF0) == 0xE0)
      {
        len = 3;
        cp = lead & 0x0F;
        min_cp = 0x800;
      }
      else if ((lead & 0xF8) == 0xF0)
      {
        len = 4;
        cp = lead & 0x07;
        min_cp = 0x10000;
      }
      else
        throw DecodeError("invalid UTF-8 lead byte", i);

      if (i + len > text.size())
        throw DecodeError("truncated UTF-8 sequence", i);
      for (std::size_t k = 1; k < len; ++k)
      {
        const auto cont = static_cast<unsigned char>(text[i + k]);
        if ((cont & 0xC0) != 0x80)
          throw DecodeError("invalid UTF-8 continuation byte", i);
        cp = (cp << 6) | (cont & 0x3F);
      }
      if (cp < min_cp)
        throw DecodeError("overlong UTF-8 sequence", i);
      if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
        throw DecodeError("invalid code point", i);
      out.push_back(cp);
      i += len;
    }
    return out;
  }

  std::string encode(code_point_t cp)
  {
    std::string out;
    if (cp < 0x80)
      out.push_back(static_cast<char>(cp));
    else if (cp < 0x800)
    {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    else if (cp < 0x10000)
    {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    else
    {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return out;
  }

  std::string encode(const std::vector<code_point_t>& cps)
  {
    std::string out;
    for (const auto cp : cps)
      out += encode(cp);
    return out;
  }

  std::vector<std::string> split_chars(std::string_view text)
  {
    std::vector<std::string> chars;
    for (const auto cp : decode(text))
      chars.push_back(encode(cp));
    return chars;
  }

  bool is_space(code_point_t cp)
  {
    switch (cp)
    {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
    }
  }

  code_point_t to_lower(code_point_t cp)
  {
    if (cp >= 'A' && cp <= 'Z')
      return cp + 0x20;
    if (cp < 0xC0)
      return cp;
    if (cp <= 0xDE)
      return cp == 0xD7 ? cp : cp + 0x20;
    if (cp == 0x178)
      return 0xFF;
    if (cp >= 0x100 && cp <= 0x17F)
    {
      // İ/ı, ĸ, ŉ and ſ have no one-to-one partner and stay caseless.
      if (cp == 0x130 || cp == 0x131 || cp == 0x138 || cp == 0x149 || cp == 0x17F)
        return cp;
      const bool even_upper = (cp < 0x138) || (cp >= 0x14A && cp < 0x178);
      if (even_upper)
        return (cp % 2 == 0) ? cp + 1 : cp;
      return (cp % 2 == 1) ? cp + 1 : cp;
    }
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2)
      return cp + 0x20;
    if (cp >= 0x400 && cp <= 0x40F)
      return cp + 0x50;
    if (cp >= 0x410 && cp <= 0x42F)
      return cp + 0x20;
    return cp;
  }

  code_point_t to_upper(code_point_t cp)
  {
    if (cp >= 'a' && cp <= 'z')
      return cp - 0x20;
    if (cp < 0xE0)
      return cp;
    if (cp <= 0xFE)
      return cp == 0xF7 ? cp : cp - 0x20;
    if (cp == 0xFF)
      return 0x178;
    if (cp >= 0x100 && cp <= 0x17F)
    {
      if (cp == 0x130 || cp == 0x131 || cp == 0x138 || cp == 0x149 || cp == 0x17F)
        return cp;
      const bool even_upper = (cp < 0x138) || (cp >= 0x14A && cp < 0x178);
      if (even_upper)
        return (cp % 2 == 1) ? cp - 1 : cp;
      return (cp % 2 == 0 && cp != 0x178) ? cp - 1 : cp;
    }
    if (cp >= 0x3B1 && cp <= 0x3C9 && cp != 0x3C2)
      return cp - 0x20;
    if (cp >= 0x430 && cp <= 0x44F)
      return cp - 0x20;
    if (cp >= 0x450 && cp <= 0x45F)
      return cp - 0x50;
    return cp;
  }

  bool is_upper(code_point_t cp)
  {
    return to_lower(cp) != cp;
  }

  bool is_lower(code_point_t cp)
  {
    // ß has no single-character uppercase but is still a lowercase letter.
    return to_upper(cp) != cp || cp == 0xDF;
  }

}
