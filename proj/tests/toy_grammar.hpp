#pragma once

// Two templated grammars with disjoint vocabularies, for selection tests.

#include <string>
#include <vector>

#include "nmt/lm.hpp"
#include "nmt/rng.hpp"

namespace nmt::toy
{

  inline Sentence grammar_sentence(Rng& rng, bool domain_a)
  {
    static const std::vector<std::vector<std::string>> a = {
        {"the", "a", "this"}, {"market", "bank", "index", "share"}, {"rose", "fell", "closed"},
        {"sharply", "slightly", "again", "today"}};
    static const std::vector<std::vector<std::string>> b = {
        {"my", "your", "our"}, {"cat", "dog", "bird", "horse"}, {"sleeps", "eats", "runs"},
        {"outside", "quietly", "now", "alone"}};
    const auto& g = domain_a ? a : b;
    Sentence s;
    for (const auto& slot : g)
      s.push_back(slot[rng.uniform_index(slot.size())]);
    if (rng.uniform_index(2) == 0)
      s.push_back(g[3][rng.uniform_index(g[3].size())]);
    return s;
  }

}
