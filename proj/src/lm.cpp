#include "nmt/lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "nmt/error.hpp"
#include "nmt/rng.hpp"

namespace nmt
{

  namespace
  {

    std::string join_history(const std::string& u, const std::string& v, int n)
    {
      if (n == 3)
        return u + ' ' + v;
      if (n == 2)
        return v;
      return std::string();
    }

    std::string event_key(const std::string& history, const std::string& word)
    {
      return history.empty() ? word : history + ' ' + word;
    }

    std::string format_double(double value)
    {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", value);
      return buf;
    }

  }

  void validate_weights(const NGramModel::Weights& weights)
  {
    double sum = 0;
    for (const double w : weights)
    {
      if (!(w >= 0) || !std::isfinite(w))
        throw ConfigError("LM interpolation weights must be non-negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw ConfigError("LM interpolation weights must sum to 1");
  }

  void NGramModel::add_event(int n, const std::string& history, const std::string& word,
                             std::uint64_t count)
  {
    auto& level = _levels[static_cast<std::size_t>(n - 1)];
    level.events[event_key(history, word)] += count;
    level.histories[history] += count;
  }

  NGramModel NGramModel::train(const std::vector<Sentence>& corpus, const Weights& weights)
  {
    validate_weights(weights);
    if (corpus.empty())
      throw InputError("cannot train a language model on an empty corpus");
    NGramModel model;
    model._weights = weights;
    for (const auto& sentence : corpus)
    {
      std::string u = bos;
      std::string v = bos;
      for (std::size_t i = 0; i <= sentence.size(); ++i)
      {
        const std::string& w = i < sentence.size() ? sentence[i] : std::string(eos);
        for (int n = 1; n <= order; ++n)
          model.add_event(n, join_history(u, v, n), w, 1);
        u = std::move(v);
        v = w;
      }
    }
    model._vocab_size = model._levels[0].events.size();
    model._num_events = model._levels[0].histories[""];
    return model;
  }

  double NGramModel::unigram(const std::string& word) const
  {
    const auto& events = _levels[0].events;
    const auto it = events.find(word);
    const double count = it == events.end() ? 0.0 : static_cast<double>(it->second);
    return (count + 1.0)
      / (static_cast<double>(_num_events) + static_cast<double>(_vocab_size) + 1.0);
  }

  double NGramModel::prob(const std::string& u, const std::string& v, const std::string& word) const
  {
    // Walk up from the unigram level; an unseen history reuses the lower
    // level's estimate.
    double estimate = unigram(word);
    double result = _weights[2] * estimate;
    for (int n = 2; n <= order; ++n)
    {
      const auto& level = _levels[static_cast<std::size_t>(n - 1)];
      const auto history = join_history(u, v, n);
      const auto h = level.histories.find(history);
      if (h != level.histories.end() && h->second > 0)
      {
        const auto e = level.events.find(event_key(history, word));
        const double count = e == level.events.end() ? 0.0 : static_cast<double>(e->second);
        estimate = count / static_cast<double>(h->second);
      }
      result += _weights[static_cast<std::size_t>(order - n)] * estimate;
    }
    return result;
  }

  double NGramModel::cross_entropy(const Sentence& sentence) const
  {
    if (sentence.empty())
      throw InputError("cannot score an empty sentence");
    double log_sum = 0;
    std::string u = bos;
    std::string v = bos;
    for (std::size_t i = 0; i <= sentence.size(); ++i)
    {
      const std::string& w = i < sentence.size() ? sentence[i] : std::string(eos);
      log_sum += std::log2(prob(u, v, w));
      u = std::move(v);
      v = w;
    }
    return -log_sum / static_cast<double>(sentence.size() + 1);
  }

  std::vector<std::string> NGramModel::vocabulary() const
  {
    std::vector<std::string> words;
    for (const auto& [word, count] : _levels[0].events)
      words.push_back(word);
    std::sort(words.begin(), words.end());
    return words;
  }

  void NGramModel::save(std::ostream& out) const
  {
    out << "#nmt-ngram 1\n";
    out << "order\t" << order << '\n';
    out << "lambda\t" << format_double(_weights[0]) << '\t' << format_double(_weights[1]) << '\t'
        << format_double(_weights[2]) << '\n';
    out << "vocab\t" << _vocab_size << '\n';
    out << "events\t" << _num_events << '\n';
    std::vector<std::pair<std::string, std::uint64_t>> lines;
    for (const auto& level : _levels)
      for (const auto& [key, count] : level.events)
        lines.emplace_back(key, count);
    std::sort(lines.begin(), lines.end());
    for (const auto& [key, count] : lines)
      out << key << '\t' << count << '\n';
  }

  NGramModel NGramModel::load(std::istream& in)
  {
    NGramModel model;
    std::string line;
    auto expect = [&](const std::string& key) {
      if (!std::getline(in, line) || line.rfind(key + '\t', 0) != 0)
        throw IoError("malformed LM file: expected '" + key + "' header");
      return line.substr(key.size() + 1);
    };
    if (!std::getline(in, line) || line != "#nmt-ngram 1")
      throw IoError("not an n-gram model file (bad header)");
    if (std::stoi(expect("order")) != order)
      throw IoError("unsupported LM order");
    {
      std::istringstream ws(expect("lambda"));
      for (auto& w : model._weights)
        if (!(ws >> w))
          throw IoError("malformed LM weights");
      validate_weights(model._weights);
    }
    model._vocab_size = std::stoull(expect("vocab"));
    model._num_events = std::stoull(expect("events"));
    std::uint64_t unigram_total = 0;
    std::uint64_t unigram_types = 0;
    while (std::getline(in, line))
    {
      if (line.empty())
        continue;
      const auto tab = line.rfind('\t');
      if (tab == std::string::npos)
        throw IoError("malformed LM entry: " + line);
      const std::string key = line.substr(0, tab);
      const std::uint64_t count = std::stoull(line.substr(tab + 1));
      const auto n = static_cast<int>(std::count(key.begin(), key.end(), ' ')) + 1;
      if (n > order)
        throw IoError("LM entry longer than the model order: " + key);
      const auto split = key.rfind(' ');
      const std::string history = split == std::string::npos ? std::string() : key.substr(0, split);
      const std::string word = split == std::string::npos ? key : key.substr(split + 1);
      model.add_event(n, history, word, count);
      if (n == 1)
      {
        unigram_total += count;
        ++unigram_types;
      }
    }
    // Counts may be absent (a bare uniform model) but must agree when present.
    if (unigram_types > 0 && (unigram_types != model._vocab_size || unigram_total != model._num_events))
      throw IoError("LM header does not match its unigram counts");
    return model;
  }

  void NGramModel::save(const std::string& path) const
  {
    std::ofstream out(path);
    if (!out)
      throw IoError("cannot write LM: " + path);
    save(out);
  }

  NGramModel NGramModel::load(const std::string& path)
  {
    std::ifstream in(path);
    if (!in)
      throw IoError("cannot open LM: " + path);
    return load(in);
  }

  std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, std::uint64_t seed)
  {
    if (n > size)
      throw InputError("sample size " + std::to_string(n) + " exceeds corpus size "
                       + std::to_string(size));
    std::vector<std::size_t> indices(size);
    std::iota(indices.begin(), indices.end(), 0);
    Rng rng(seed);
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < n; ++i)
    {
      const std::size_t j = i + rng.uniform_index(size - i);
      std::swap(indices[i], indices[j]);
    }
    indices.resize(n);
    return indices;
  }

  std::vector<Sentence> sample_corpus(const std::vector<Sentence>& corpus,
                                      std::size_t n,
                                      std::uint64_t seed)
  {
    std::vector<Sentence> sample;
    sample.reserve(n);
    for (const auto i : sample_indices(corpus.size(), n, seed))
      sample.push_back(corpus[i]);
    return sample;
  }

}
