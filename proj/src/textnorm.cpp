#include "nmt/textnorm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nmt/error.hpp"
#include "nmt/utf8.hpp"

namespace nmt
{

  namespace
  {

    using utf8::code_point_t;

    // Rule table, version 1.
    // Detached when leading or trailing a word.
    bool is_edge_punctuation(code_point_t cp)
    {
      if (cp < 0x80)
      {
        switch (cp)
        {
        case '!': case '"': case '#': case '$': case '%': case '&': case '\'':
        case '(': case ')': case '*': case '+': case ',': case '-': case '.':
        case '/': case ':': case ';': case '<': case '=': case '>': case '?':
        case '@': case '[': case '\\': case ']': case '^': case '_': case '`':
        case '{': case '|': case '}': case '~':
          return true;
        default:
          return false;
        }
      }
      switch (cp)
      {
      case 0xA1: case 0xAB: case 0xBB: case 0xBF: case 0xB7:
      case 0x2013: case 0x2014: case 0x2018: case 0x2019: case 0x201A:
      case 0x201C: case 0x201D: case 0x201E: case 0x2026: case 0x2039:
      case 0x203A: case 0x2581:
        return true;
      default:
        return false;
      }
    }

    // Isolated wherever they occur, including inside words.
    bool is_isolated_symbol(code_point_t cp)
    {
      switch (cp)
      {
      case '!': case '"': case '(': case ')': case ';': case '?': case '[':
      case ']': case '{': case '}': case 0xAB: case 0xBB: case 0x201C:
      case 0x201D: case 0x201E: case 0x2581:
        return true;
      default:
        return false;
      }
    }

    void tokenize_word(const std::vector<code_point_t>& word,
                       std::vector<std::string>& tokens)
    {
      std::size_t begin = 0;
      std::size_t end = word.size();
      std::vector<std::string> trailing;
      while (begin < end && is_edge_punctuation(word[begin]))
        tokens.push_back(utf8::encode(word[begin++]));
      while (end > begin && is_edge_punctuation(word[end - 1]))
        trailing.push_back(utf8::encode(word[--end]));

      std::vector<code_point_t> current;
      for (std::size_t i = begin; i < end; ++i)
      {
        if (is_isolated_symbol(word[i]))
        {
          if (!current.empty())
          {
            // The piece before the symbol may itself end in punctuation.
            tokenize_word(current, tokens);
            current.clear();
          }
          tokens.push_back(utf8::encode(word[i]));
        }
        else
          current.push_back(word[i]);
      }
      if (!current.empty())
      {
        if (current.size() == end - begin)
          tokens.push_back(utf8::encode(current));
        else
          tokenize_word(current, tokens);
      }
      tokens.insert(tokens.end(), trailing.rbegin(), trailing.rend());
    }

    bool ends_with_marker(std::string_view token)
    {
      return token.size() > join_marker.size()
        && token.substr(token.size() - join_marker.size()) == join_marker;
    }

    struct SplitCandidate
    {
      std::vector<std::string> parts;
      double score = 0;
    };

    void enumerate_splits(const std::vector<code_point_t>& chars,
                          std::size_t start,
                          std::vector<std::string>& parts,
                          double log_sum,
                          const FreqLexicon& lexicon,
                          const CompoundSplitOptions& options,
                          SplitCandidate& best)
    {
      const std::size_t remaining = chars.size() - start;
      // Close the current split with the remainder as the final part.
      if (!parts.empty() && remaining >= options.min_part_length)
      {
        const std::string last = utf8::encode(std::vector<code_point_t>(chars.begin() + start,
                                                                        chars.end()));
        const auto count = lexicon.count(last);
        if (count > 0)
        {
          const double n = static_cast<double>(parts.size() + 1);
          const double score = std::exp((log_sum + std::log(static_cast<double>(count))) / n);
          if (score > best.score)
          {
            best.parts = parts;
            best.parts.push_back(last);
            best.score = score;
          }
        }
      }
      if (parts.size() + 2 > options.max_parts)
        return;
      for (std::size_t len = options.min_part_length;
           start + len + options.min_part_length <= chars.size();
           ++len)
      {
        const std::string part = utf8::encode(std::vector<code_point_t>(chars.begin() + start,
                                                                       chars.begin() + start + len));
        const auto count = lexicon.count(part);
        if (count == 0)
          continue;
        parts.push_back(part);
        enumerate_splits(chars, start + len, parts,
                         log_sum + std::log(static_cast<double>(count)),
                         lexicon, options, best);
        parts.pop_back();
      }
    }

  }

  std::vector<std::string> tokenize(std::string_view line)
  {
    const auto cps = utf8::decode(line);
    std::vector<std::string> tokens;
    std::vector<code_point_t> word;
    for (const auto cp : cps)
    {
      if (utf8::is_space(cp))
      {
        if (!word.empty())
          tokenize_word(word, tokens);
        word.clear();
      }
      else
        word.push_back(cp);
    }
    if (!word.empty())
      tokenize_word(word, tokens);
    return tokens;
  }

  std::string join_tokens(const std::vector<std::string>& tokens)
  {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i)
    {
      if (i > 0)
        out += ' ';
      out += tokens[i];
    }
    return out;
  }

  void FreqLexicon::add(const std::string& word, std::uint64_t count)
  {
    if (count > 0)
      _counts[word] += count;
  }

  std::uint64_t FreqLexicon::count(const std::string& word) const
  {
    const auto it = _counts.find(word);
    return it == _counts.end() ? 0 : it->second;
  }

  FreqLexicon FreqLexicon::from_corpus(const std::vector<std::vector<std::string>>& sentences)
  {
    FreqLexicon lexicon;
    for (const auto& sentence : sentences)
      for (const auto& token : sentence)
        lexicon.add(token);
    return lexicon;
  }

  void FreqLexicon::save(const std::string& path) const
  {
    std::vector<std::pair<std::string, std::uint64_t>> entries(_counts.begin(), _counts.end());
    std::sort(entries.begin(), entries.end());
    std::ofstream out(path);
    if (!out)
      throw IoError("cannot write lexicon: " + path);
    for (const auto& [word, count] : entries)
      out << word << '\t' << count << '\n';
    if (!out)
      throw IoError("failed writing lexicon: " + path);
  }

  FreqLexicon FreqLexicon::load(const std::string& path)
  {
    std::ifstream in(path);
    if (!in)
      throw IoError("cannot read lexicon: " + path);
    FreqLexicon lexicon;
    std::string line;
    while (std::getline(in, line))
    {
      const auto tab = line.rfind('\t');
      if (tab == std::string::npos || tab == 0)
        throw IoError("malformed lexicon line in " + path + ": " + line);
      try
      {
        lexicon.add(line.substr(0, tab), std::stoull(line.substr(tab + 1)));
      }
      catch (const std::logic_error&)
      {
        throw IoError("malformed lexicon count in " + path + ": " + line);
      }
    }
    return lexicon;
  }

  std::vector<std::string> split_compound(const std::string& token,
                                          const FreqLexicon& lexicon,
                                          const CompoundSplitOptions& options)
  {
    if (options.max_parts < 2 || options.min_part_length == 0)
      return {token};
    const auto chars = utf8::decode(token);
    if (chars.size() < 2 * options.min_part_length)
      return {token};

    SplitCandidate best;
    best.score = static_cast<double>(lexicon.count(token));
    std::vector<std::string> parts;
    enumerate_splits(chars, 0, parts, 0.0, lexicon, options, best);
    if (best.parts.empty())
      return {token};
    for (std::size_t i = 0; i + 1 < best.parts.size(); ++i)
      best.parts[i] += join_marker;
    return best.parts;
  }

  std::vector<std::string> join_compounds(const std::vector<std::string>& tokens,
                                          bool* dangling_marker)
  {
    std::vector<std::string> out;
    std::string pending;
    bool has_pending = false;
    if (dangling_marker)
      *dangling_marker = false;
    for (const auto& token : tokens)
    {
      if (ends_with_marker(token))
      {
        pending += token.substr(0, token.size() - join_marker.size());
        has_pending = true;
        continue;
      }
      out.push_back(pending + token);
      pending.clear();
      has_pending = false;
    }
    if (has_pending)
    {
      if (dangling_marker)
        *dangling_marker = true;
      out.push_back(pending);
    }
    return out;
  }

  char case_factor_tag(CaseFactor factor)
  {
    static constexpr char tags[] = {'L', 'C', 'U', 'M', 'N'};
    return tags[static_cast<int>(factor)];
  }

  CaseFactor case_factor_from_tag(char tag)
  {
    switch (tag)
    {
    case 'L': return CaseFactor::Lower;
    case 'C': return CaseFactor::Capitalized;
    case 'U': return CaseFactor::Upper;
    case 'M': return CaseFactor::Mixed;
    case 'N': return CaseFactor::None;
    default:
      throw InputError(std::string("unknown case factor tag: ") + tag);
    }
  }

  CaseFactor classify_case(std::string_view token)
  {
    std::size_t letters = 0;
    std::size_t upper = 0;
    bool first_upper = false;
    for (const auto cp : utf8::decode(token))
    {
      if (!utf8::is_letter(cp))
        continue;
      const bool up = utf8::is_upper(cp);
      if (letters == 0)
        first_upper = up;
      ++letters;
      upper += up;
    }
    if (letters == 0)
      return CaseFactor::None;
    if (upper == 0)
      return CaseFactor::Lower;
    if (first_upper && upper == 1)
      return CaseFactor::Capitalized;
    if (upper == letters)
      return CaseFactor::Upper;
    return CaseFactor::Mixed;
  }

  std::string to_lower(std::string_view text)
  {
    auto cps = utf8::decode(text);
    for (auto& cp : cps)
      cp = utf8::to_lower(cp);
    return utf8::encode(cps);
  }

  namespace
  {

    std::string apply_case(const std::string& token, CaseFactor factor)
    {
      auto cps = utf8::decode(token);
      switch (factor)
      {
      case CaseFactor::Capitalized:
        for (auto& cp : cps)
        {
          if (utf8::is_letter(cp))
          {
            cp = utf8::to_upper(cp);
            break;
          }
        }
        break;
      case CaseFactor::Upper:
        for (auto& cp : cps)
          cp = utf8::to_upper(cp);
        break;
      default:
        break;
      }
      return utf8::encode(cps);
    }

  }

  CaseEncoded encode_case(const std::vector<std::string>& tokens)
  {
    CaseEncoded encoded;
    encoded.tokens.reserve(tokens.size());
    encoded.factors.reserve(tokens.size());
    encoded.mixed_surfaces.reserve(tokens.size());
    for (const auto& token : tokens)
    {
      const auto factor = classify_case(token);
      encoded.tokens.push_back(to_lower(token));
      encoded.factors.push_back(factor);
      encoded.mixed_surfaces.push_back(factor == CaseFactor::Mixed ? token : std::string());
    }
    return encoded;
  }

  std::vector<std::string> decode_case(const std::vector<std::string>& tokens,
                                       const std::vector<CaseFactor>& factors,
                                       const std::vector<std::string>* mixed_surfaces)
  {
    if (tokens.size() != factors.size())
      throw InputError("decode_case: " + std::to_string(tokens.size()) + " tokens but "
                       + std::to_string(factors.size()) + " case factors");
    if (mixed_surfaces && mixed_surfaces->size() != tokens.size())
      throw InputError("decode_case: mixed-case sidecar length mismatch");
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i)
    {
      if (factors[i] == CaseFactor::Mixed && mixed_surfaces && !(*mixed_surfaces)[i].empty())
        out.push_back((*mixed_surfaces)[i]);
      else
        out.push_back(apply_case(tokens[i], factors[i]));
    }
    return out;
  }

  std::string format_case_factors(const std::vector<CaseFactor>& factors)
  {
    std::string out;
    for (std::size_t i = 0; i < factors.size(); ++i)
    {
      if (i > 0)
        out += ' ';
      out += case_factor_tag(factors[i]);
    }
    return out;
  }

  std::vector<CaseFactor> parse_case_factors(std::string_view line)
  {
    std::vector<CaseFactor> factors;
    std::istringstream in{std::string(line)};
    std::string tag;
    while (in >> tag)
    {
      if (tag.size() != 1)
        throw InputError("invalid case factor tag: " + tag);
      factors.push_back(case_factor_from_tag(tag[0]));
    }
    return factors;
  }

}
