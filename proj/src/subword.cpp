#include "nmt/subword.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_set>

#include "nmt/error.hpp"
#include "nmt/hash.hpp"
#include "nmt/utf8.hpp"

namespace nmt
{

  std::size_t MergeTable::PairHash::operator()(const SymbolPair& p) const
  {
    const std::size_t h1 = std::hash<std::string>()(p.first);
    const std::size_t h2 = std::hash<std::string>()(p.second);
    return h1 ^ (h2 + 0x9e3779b97f4a7c15ULL + (h1 << 6) + (h1 >> 2));
  }

  MergeTable::MergeTable(std::vector<SymbolPair> merges)
  {
    for (auto& pair : merges)
      add(std::move(pair));
  }

  void MergeTable::add(SymbolPair pair)
  {
    if (pair.first.empty() || pair.second.empty())
      throw ConfigError("merge with an empty symbol");
    const auto [it, inserted] = _ranks.emplace(pair, static_cast<long>(_merges.size()));
    if (!inserted)
      throw ConfigError("duplicate merge: " + pair.first + " " + pair.second);
    _merges.push_back(std::move(pair));
  }

  long MergeTable::rank(const std::string& left, const std::string& right) const
  {
    const auto it = _ranks.find(SymbolPair(left, right));
    return it == _ranks.end() ? -1 : it->second;
  }

  void MergeTable::save(std::ostream& out) const
  {
    out << merge_table_header << '\n';
    for (const auto& [left, right] : _merges)
      out << left << ' ' << right << '\n';
  }

  MergeTable MergeTable::load(std::istream& in)
  {
    MergeTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
      ++line_no;
      if (line_no == 1 && !line.empty() && line[0] == '#')
        continue;
      if (line.empty())
        continue;
      const auto space = line.find(' ');
      if (space == std::string::npos || line.find(' ', space + 1) != std::string::npos)
        throw InputError("malformed merge on line " + std::to_string(line_no) + ": " + line);
      table.add(SymbolPair(line.substr(0, space), line.substr(space + 1)));
    }
    return table;
  }

  void MergeTable::save(const std::string& path) const
  {
    std::ofstream out(path);
    if (!out)
      throw IoError("cannot write merge table: " + path);
    save(out);
  }

  MergeTable MergeTable::load(const std::string& path)
  {
    std::ifstream in(path);
    if (!in)
      throw IoError("cannot open merge table: " + path);
    return load(in);
  }

  namespace
  {

    struct Word
    {
      std::vector<std::string> symbols;
      std::int64_t count;
    };

    std::vector<std::string> initial_symbols(const std::string& word)
    {
      auto symbols = utf8::split_chars(word);
      symbols.emplace_back(end_of_word);
      return symbols;
    }

    // Merges every non-overlapping occurrence of (left, right), left to right.
    bool merge_pair(std::vector<std::string>& symbols,
                    const std::string& left,
                    const std::string& right)
    {
      bool changed = false;
      std::vector<std::string> out;
      out.reserve(symbols.size());
      for (std::size_t i = 0; i < symbols.size(); ++i)
      {
        if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right)
        {
          out.push_back(left + right);
          ++i;
          changed = true;
        }
        else
          out.push_back(std::move(symbols[i]));
      }
      symbols = std::move(out);
      return changed;
    }

    class PairStatistics
    {
    public:
      void add_word(const Word& word, std::size_t index, std::int64_t sign)
      {
        for (std::size_t i = 0; i + 1 < word.symbols.size(); ++i)
        {
          SymbolPair pair(word.symbols[i], word.symbols[i + 1]);
          if (sign > 0)
            _where[pair].insert(index);
          _delta[std::move(pair)] += sign * word.count;
        }
      }

      // Folds pending count changes into the ordered view.
      void commit()
      {
        for (auto& [pair, delta] : _delta)
        {
          if (delta == 0)
            continue;
          auto& count = _counts[pair];
          if (count > 0)
            _ordered.erase(std::make_tuple(-count, pair.first, pair.second));
          count += delta;
          if (count > 0)
            _ordered.emplace(-count, pair.first, pair.second);
        }
        _delta.clear();
      }

      bool empty() const
      {
        return _ordered.empty();
      }

      SymbolPair best() const
      {
        const auto& top = *_ordered.begin();
        return SymbolPair(std::get<1>(top), std::get<2>(top));
      }

      std::vector<std::size_t> words_with(const SymbolPair& pair) const
      {
        const auto it = _where.find(pair);
        if (it == _where.end())
          return {};
        return std::vector<std::size_t>(it->second.begin(), it->second.end());
      }

    private:
      std::map<SymbolPair, std::int64_t> _counts;
      std::map<SymbolPair, std::int64_t> _delta;
      std::set<std::tuple<std::int64_t, std::string, std::string>> _ordered;
      // May list words that no longer contain the pair; callers re-check.
      std::map<SymbolPair, std::set<std::size_t>> _where;
    };

  }

  MergeTable learn_bpe(const std::map<std::string, std::uint64_t>& word_counts,
                       std::size_t num_merges)
  {
    MergeTable table;
    if (num_merges == 0)
      return table;

    std::vector<Word> words;
    words.reserve(word_counts.size());
    for (const auto& [word, count] : word_counts)
    {
      if (word.empty() || count == 0)
        continue;
      words.push_back(Word{initial_symbols(word), static_cast<std::int64_t>(count)});
    }

    PairStatistics stats;
    for (std::size_t i = 0; i < words.size(); ++i)
      stats.add_word(words[i], i, +1);
    stats.commit();

    while (table.size() < num_merges && !stats.empty())
    {
      const auto best = stats.best();
      for (const auto index : stats.words_with(best))
      {
        auto& word = words[index];
        auto merged = word.symbols;
        if (!merge_pair(merged, best.first, best.second))
          continue;
        stats.add_word(word, index, -1);
        word.symbols = std::move(merged);
        stats.add_word(word, index, +1);
      }
      stats.commit();
      table.add(best);
    }
    return table;
  }

  std::map<std::string, std::uint64_t>
  count_words(const std::vector<std::vector<std::string>>& sentences)
  {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& sentence : sentences)
      for (const auto& word : sentence)
        ++counts[word];
    return counts;
  }

  BpeModel::BpeModel(MergeTable merges, std::string marker)
    : _merges(std::move(merges))
    , _marker(std::move(marker))
  {
    if (_marker.empty())
      throw ConfigError("BPE continuation marker must not be empty");
  }

  std::vector<std::string> BpeModel::apply(const std::string& word) const
  {
    if (word.empty())
      return {};
    auto symbols = initial_symbols(word);
    while (symbols.size() > 1)
    {
      long best_rank = -1;
      std::size_t best_pos = 0;
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i)
      {
        const long r = _merges.rank(symbols[i], symbols[i + 1]);
        if (r >= 0 && (best_rank < 0 || r < best_rank))
        {
          best_rank = r;
          best_pos = i;
        }
      }
      if (best_rank < 0)
        break;
      const auto left = symbols[best_pos];
      const auto right = symbols[best_pos + 1];
      merge_pair(symbols, left, right);
    }

    // Drop the end-of-word symbol, whether standalone or merged into the
    // final piece.
    auto& last = symbols.back();
    if (last == end_of_word)
      symbols.pop_back();
    else
      last.erase(last.size() - end_of_word.size());

    for (std::size_t i = 0; i + 1 < symbols.size(); ++i)
      symbols[i] += _marker;
    return symbols;
  }

  std::vector<std::string> BpeModel::apply(const std::vector<std::string>& words) const
  {
    std::vector<std::string> pieces;
    for (const auto& word : words)
    {
      auto segmented = apply(word);
      pieces.insert(pieces.end(),
                    std::make_move_iterator(segmented.begin()),
                    std::make_move_iterator(segmented.end()));
    }
    return pieces;
  }

  std::vector<std::string> revert_bpe(const std::vector<std::string>& pieces,
                                      std::string_view marker,
                                      bool* dangling_marker)
  {
    std::vector<std::string> words;
    std::string pending;
    bool has_pending = false;
    if (dangling_marker)
      *dangling_marker = false;
    for (const auto& piece : pieces)
    {
      if (piece.size() >= marker.size()
          && std::string_view(piece).substr(piece.size() - marker.size()) == marker)
      {
        pending.append(piece, 0, piece.size() - marker.size());
        has_pending = true;
        continue;
      }
      words.push_back(pending + piece);
      pending.clear();
      has_pending = false;
    }
    if (has_pending)
    {
      if (dangling_marker)
        *dangling_marker = true;
      words.push_back(pending);
    }
    return words;
  }

  const std::vector<std::string>& Vocabulary::specials()
  {
    static const std::vector<std::string> symbols = {"<unk>", "<s>", "<eos>", "<pad>"};
    return symbols;
  }

  Vocabulary::Vocabulary()
    : Vocabulary(std::vector<std::string>{})
  {
  }

  Vocabulary::Vocabulary(const std::vector<std::string>& symbols)
  {
    for (const auto& s : specials())
    {
      _ids.emplace(s, static_cast<std::int32_t>(_symbols.size()));
      _symbols.push_back(s);
    }
    for (const auto& s : symbols)
    {
      if (s.empty() || s.find_first_of(" \t\n\r") != std::string::npos)
        throw InputError("invalid vocabulary symbol: '" + s + "'");
      if (!_ids.emplace(s, static_cast<std::int32_t>(_symbols.size())).second)
        throw InputError("duplicate vocabulary symbol: " + s);
      _symbols.push_back(s);
    }
  }

  std::int32_t Vocabulary::id(const std::string& symbol) const
  {
    const auto it = _ids.find(symbol);
    return it == _ids.end() ? unk_id : it->second;
  }

  bool Vocabulary::contains(const std::string& symbol) const
  {
    return _ids.count(symbol) > 0;
  }

  const std::string& Vocabulary::symbol(std::int32_t id) const
  {
    if (id < 0 || static_cast<std::size_t>(id) >= _symbols.size())
      throw InputError("vocabulary id out of range: " + std::to_string(id));
    return _symbols[static_cast<std::size_t>(id)];
  }

  std::vector<std::int32_t> Vocabulary::encode(const std::vector<std::string>& tokens) const
  {
    std::vector<std::int32_t> ids;
    ids.reserve(tokens.size());
    for (const auto& token : tokens)
      ids.push_back(id(token));
    return ids;
  }

  std::vector<std::string> Vocabulary::decode(const std::vector<std::int32_t>& ids) const
  {
    std::vector<std::string> tokens;
    tokens.reserve(ids.size());
    for (const auto id : ids)
      tokens.push_back(symbol(id));
    return tokens;
  }

  std::uint64_t Vocabulary::fingerprint() const
  {
    Fnv1a h;
    for (const auto& s : _symbols)
    {
      h.update(s);
      h.update(std::string_view("\n"));
    }
    return h.digest();
  }

  void Vocabulary::save(const std::string& path) const
  {
    std::ofstream out(path);
    if (!out)
      throw IoError("cannot write vocabulary: " + path);
    for (std::size_t i = num_specials; i < _symbols.size(); ++i)
      out << _symbols[i] << '\n';
  }

  Vocabulary Vocabulary::load(const std::string& path)
  {
    std::ifstream in(path);
    if (!in)
      throw IoError("cannot open vocabulary: " + path);
    std::vector<std::string> symbols;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty())
        symbols.push_back(line);
    return Vocabulary(symbols);
  }

  Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t size)
  {
    if (size < Vocabulary::num_specials)
      throw ConfigError("vocabulary size " + std::to_string(size) + " is smaller than the "
                        + std::to_string(Vocabulary::num_specials) + " reserved specials");
    std::map<std::string, std::uint64_t> counts;
    const auto& specials = Vocabulary::specials();
    for (const auto& sentence : corpus)
      for (const auto& symbol : sentence)
        if (std::find(specials.begin(), specials.end(), symbol) == specials.end())
          ++counts[symbol];

    std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
    // counts is already in lexicographic order, so a stable sort on count
    // keeps ties lexicographic.
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    const std::size_t keep = std::min(ranked.size(), size - Vocabulary::num_specials);
    std::vector<std::string> symbols;
    symbols.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i)
      symbols.push_back(ranked[i].first);
    return Vocabulary(symbols);
  }

}
