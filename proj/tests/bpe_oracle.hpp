#pragma once

// Straightforward BPE learner: recount every adjacent pair from scratch
// after each merge. Used only as a reference for learn_bpe.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nmt/utf8.hpp"

namespace oracle
{

  using Pair = std::pair<std::string, std::string>;

  inline std::vector<Pair> brute_force_bpe(const std::map<std::string, std::uint64_t>& counts,
                                           std::size_t num_merges)
  {
    std::vector<std::pair<std::vector<std::string>, std::uint64_t>> words;
    for (const auto& [w, c] : counts)
    {
      auto symbols = nmt::utf8::split_chars(w);
      symbols.push_back("</w>");
      words.emplace_back(symbols, c);
    }
    std::vector<Pair> merges;
    while (merges.size() < num_merges)
    {
      std::map<Pair, std::uint64_t> stats;
      for (const auto& [symbols, c] : words)
        for (std::size_t i = 0; i + 1 < symbols.size(); ++i)
          stats[{symbols[i], symbols[i + 1]}] += c;
      const Pair* best = nullptr;
      std::uint64_t best_count = 0;
      for (const auto& [pair, c] : stats)  // map order = lexicographic
        if (c > best_count)
        {
          best = &pair;
          best_count = c;
        }
      if (!best)
        break;
      const Pair chosen = *best;
      merges.push_back(chosen);
      for (auto& [symbols, c] : words)
      {
        std::vector<std::string> merged;
        for (std::size_t i = 0; i < symbols.size(); ++i)
        {
          if (i + 1 < symbols.size() && symbols[i] == chosen.first && symbols[i + 1] == chosen.second)
          {
            merged.push_back(chosen.first + chosen.second);
            ++i;
          }
          else
            merged.push_back(symbols[i]);
        }
        symbols = std::move(merged);
      }
    }
    return merges;
  }

}
