#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nmt/checkpoint.hpp"
#include "nmt/config.hpp"
#include "nmt/error.hpp"
#include "nmt/eval.hpp"
#include "nmt/hash.hpp"
#include "nmt/lm.hpp"
#include "nmt/pipeline.hpp"
#include "nmt/rng.hpp"
#include "nmt/select.hpp"
#include "nmt/subword.hpp"
#include "nmt/textnorm.hpp"
#include "nmt/train.hpp"
#include "nmt/translate.hpp"

using namespace nmt;

namespace
{

  struct Globals
  {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::optional<bool> deterministic;
  };

  PipelineConfig load_config(const Globals& g)
  {
    const auto env = environment_overrides();
    auto c = g.config.empty() ? parse_config("", ".", env) : validate_config(g.config, env);
    if (g.seed)
      c.seed = *g.seed;
    if (g.threads)
      c.threads = *g.threads;
    if (g.deterministic)
      c.deterministic = *g.deterministic;
    return c;
  }

  // Input from a file or stdin.
  class Input
  {
  public:
    explicit Input(const std::string& path)
    {
      if (path.empty() || path == "-")
        return;
      _file = std::make_unique<std::ifstream>(path);
      if (!*_file)
        throw IoError("cannot read " + path);
    }

    bool next(std::string& line)
    {
      if (!std::getline(stream(), line))
        return false;
      if (!line.empty() && line.back() == '\r')
        line.pop_back();
      return true;
    }

    std::vector<std::string> all()
    {
      std::vector<std::string> lines;
      std::string line;
      while (next(line))
        lines.push_back(line);
      return lines;
    }

  private:
    std::istream& stream()
    {
      return _file ? static_cast<std::istream&>(*_file) : std::cin;
    }

    std::unique_ptr<std::ifstream> _file;
  };

  class Output
  {
  public:
    explicit Output(const std::string& path)
    {
      if (path.empty() || path == "-")
        return;
      _file = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*_file)
        throw IoError("cannot write " + path);
    }

    void line(const std::string& text)
    {
      stream() << text << '\n';
      if (!_file)
        std::cout.flush();
    }

    std::ostream& stream()
    {
      return _file ? static_cast<std::ostream&>(*_file) : std::cout;
    }

    void close()
    {
      stream().flush();
      if (!stream())
        throw IoError("write failed");
    }

  private:
    std::unique_ptr<std::ofstream> _file;
  };

  std::vector<std::string> split_ws(const std::string& line)
  {
    std::istringstream in(line);
    std::vector<std::string> out;
    std::string w;
    while (in >> w)
      out.push_back(w);
    return out;
  }

  std::vector<std::vector<std::string>> read_tokenized(const std::string& path)
  {
    std::vector<std::vector<std::string>> out;
    for (const auto& line : Input(path).all())
      out.push_back(split_ws(line));
    return out;
  }

  // Refuses a checkpoint trained with different vocabularies.
  void check_vocab(const Metadata& meta, const Vocabulary& src, const Vocabulary& tgt)
  {
    auto check = [&](const char* key, const Vocabulary& v) {
      const auto it = meta.find(key);
      if (it != meta.end() && it->second != to_hex(v.fingerprint()))
        throw ConfigError(std::string("checkpoint ") + key + " does not match the artifacts");
    };
    check("vocab.src", src);
    check("vocab.tgt", tgt);
  }

  TrainOptions train_options(const PipelineConfig& c)
  {
    TrainOptions o;
    o.batch_size = c.batch;
    o.dropout = c.dropout;
    o.max_length = c.max_length;
    o.clip_norm = c.clip_norm;
    o.initial_lr = c.lr;
    o.decay = c.decay;
    o.plateau_threshold = c.threshold;
    return o;
  }

  DecodeOptions decode_options(const PipelineConfig& c)
  {
    DecodeOptions o;
    o.beam_size = c.beam;
    o.normalize = c.normalize;
    o.max_length = c.decode_max_length;
    return o;
  }

  Shard read_pairs(const Preprocessor& pre, const std::string& src, const std::string& tgt)
  {
    const auto s = read_lines(src);
    const auto t = read_lines(tgt);
    if (s.size() != t.size())
      throw InputError(src + " and " + tgt + " differ in line count");
    Shard shard;
    for (std::size_t i = 0; i < s.size(); ++i)
      shard.push_back({pre.encode(s[i], Side::Source), pre.encode(t[i], Side::Target)});
    return shard;
  }

  int report(const char* kind, const std::string& message, int code)
  {
    std::cerr << "nmt: " << kind << ": " << message << std::endl;
    return code;
  }

}

int main(int argc, char** argv)
{
  CLI::App app{"Neural machine translation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tool_version));

  Globals g;
  app.add_option("--config", g.config, "Pipeline config file");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--threads", g.threads, "Decoding threads");
  app.add_option("--deterministic", g.deterministic, "Deterministic mode (true/false)");
  app.fallthrough();

  // tokenize
  std::string in_path, out_path;
  std::string factors_path, lexicon_path, save_lexicon_path;
  CompoundSplitOptions compound;
  auto* tok = app.add_subcommand("tokenize", "Tokenize raw text; optionally lowercase with case factors");
  tok->add_option("-i,--input", in_path);
  tok->add_option("-o,--output", out_path);
  tok->add_option("--factors", factors_path, "Write case factors here and lowercase the tokens");
  tok->add_option("--lexicon", lexicon_path, "Split compounds with this lexicon")->check(CLI::ExistingFile);
  tok->add_option("--min-part-length", compound.min_part_length)->capture_default_str();
  tok->add_option("--max-parts", compound.max_parts)->capture_default_str();
  tok->add_option("--save-lexicon", save_lexicon_path, "Write a lexicon of the lowercased tokens");

  // learn-bpe
  std::size_t merges = 30000, vocab_size = 30000;
  std::string vocab_path, artifacts, src_path, tgt_path, mono_path;
  auto* lbpe = app.add_subcommand("learn-bpe", "Learn BPE merges from tokenized text");
  lbpe->add_option("-i,--input", in_path, "Tokenized text");
  lbpe->add_option("-o,--output", out_path, "Merge table");
  lbpe->add_option("--merges", merges)->capture_default_str();
  lbpe->add_option("--vocab", vocab_path, "Also write a vocabulary of the segmented input");
  lbpe->add_option("--vocab-size", vocab_size)->capture_default_str();
  lbpe->add_option("--artifacts", artifacts, "Build a full preprocessing directory from raw --src/--tgt");
  lbpe->add_option("--src", src_path, "Raw source text (with --artifacts)");
  lbpe->add_option("--tgt", tgt_path, "Raw target text (with --artifacts)");
  lbpe->add_option("--mono", mono_path, "Raw monolingual target text (with --artifacts)");

  // apply-bpe
  std::string codes_path;
  std::string marker(default_bpe_marker);
  bool revert = false;
  auto* abpe = app.add_subcommand("apply-bpe", "Segment tokenized text with a merge table");
  abpe->add_option("-c,--codes", codes_path)->check(CLI::ExistingFile);
  abpe->add_option("-i,--input", in_path);
  abpe->add_option("-o,--output", out_path);
  abpe->add_option("--marker", marker)->capture_default_str();
  abpe->add_flag("--revert", revert, "Join segmented text back into words");

  // train-lm
  std::vector<double> weights;
  auto* tlm = app.add_subcommand("train-lm", "Train an interpolated trigram LM on tokenized text");
  tlm->add_option("-i,--input", in_path);
  tlm->add_option("-o,--output", out_path)->required();
  tlm->add_option("--weights", weights, "Trigram, bigram, unigram weights")->expected(3);

  // select
  std::string in_domain_path, out_src, out_tgt, scores_path;
  std::vector<std::string> generic_src, generic_tgt, labels;
  std::vector<std::size_t> quotas;
  std::size_t sample_size = 0;
  auto* sel = app.add_subcommand("select", "Moore-Lewis selection of generic data close to a domain");
  sel->add_option("--in-domain", in_domain_path, "Tokenized in-domain text")->required();
  sel->add_option("--generic-src", generic_src, "Tokenized generic source (repeatable)")->required();
  sel->add_option("--generic-tgt", generic_tgt, "Matching target side (repeatable)");
  sel->add_option("--quota", quotas, "Pairs to keep per generic corpus")->required();
  sel->add_option("--label", labels, "Corpus labels");
  sel->add_option("--sample-size", sample_size, "Generic LM sample size (0: in-domain size)");
  sel->add_option("--out-src", out_src);
  sel->add_option("--out-tgt", out_tgt);
  sel->add_option("--scores", scores_path, "Per-sentence score sidecar");

  // train
  std::string model_path, init_path, valid_src, valid_tgt, schedule = "plateau";
  TrainOptions topt;
  std::size_t epochs = 0, decay_epochs = 0;
  auto* tr = app.add_subcommand("train", "Train a translation model on raw parallel text");
  tr->add_option("--artifacts", artifacts, "Preprocessing directory")->required();
  tr->add_option("--src", src_path)->required();
  tr->add_option("--tgt", tgt_path)->required();
  tr->add_option("--valid-src", valid_src)->required();
  tr->add_option("--valid-tgt", valid_tgt)->required();
  tr->add_option("-o,--output", model_path)->required();
  tr->add_option("--init", init_path, "Continue from this checkpoint");
  tr->add_option("--schedule", schedule)->check(CLI::IsMember({"plateau", "constant", "decay"}))->capture_default_str();
  tr->add_option("--epochs", epochs, "Epoch cap (plateau) or length (decay)");
  tr->add_option("--decay-epochs", decay_epochs, "Epochs after the plateau");
  tr->add_option("--batch", topt.batch_size)->capture_default_str();
  tr->add_option("--dropout", topt.dropout)->capture_default_str();
  tr->add_option("--max-length", topt.max_length)->capture_default_str();
  tr->add_option("--lr", topt.initial_lr)->capture_default_str();
  tr->add_option("--decay", topt.decay)->capture_default_str();
  tr->add_option("--threshold", topt.plateau_threshold)->capture_default_str();
  tr->add_option("--clip-norm", topt.clip_norm)->capture_default_str();

  // translate / backtranslate
  DecodeOptions dopt;
  bool no_normalize = false;
  std::size_t shard_size = 4500000;
  auto add_decode = [&](CLI::App* sub) {
    sub->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    sub->add_option("--artifacts", artifacts)->required()->check(CLI::ExistingDirectory);
    sub->add_option("-i,--input", in_path);
    sub->add_option("-o,--output", out_path);
    sub->add_option("--beam", dopt.beam_size)->capture_default_str();
    sub->add_option("--max-length", dopt.max_length)->capture_default_str();
    sub->add_flag("--no-normalize", no_normalize, "Rank by raw log-probability");
  };
  auto* trans = app.add_subcommand("translate", "Translate raw source text");
  add_decode(trans);
  trans->add_option("--scores", scores_path, "Per-sentence log-probability sidecar");
  auto* bt = app.add_subcommand("backtranslate", "Back-translate target text with a reverse model");
  add_decode(bt);
  bt->add_option("--shard-size", shard_size)->capture_default_str();
  bt->add_option("--shard-dir", out_src, "Write shard_<i>.src/.tgt pairs here");

  // hyperspec
  std::string mode = "own", refs_path;
  double hs_lr = 0.7;
  std::size_t hs_epochs = 1;
  auto* hs = app.add_subcommand("hyperspec", "Fine-tune a model on in-domain source text");
  hs->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  hs->add_option("--artifacts", artifacts)->required()->check(CLI::ExistingDirectory);
  hs->add_option("--source", src_path, "Raw in-domain source text")->required();
  hs->add_option("--references", refs_path, "Raw references (mode references)");
  hs->add_option("--mode", mode)->check(CLI::IsMember({"own", "references"}))->capture_default_str();
  hs->add_option("--lr", hs_lr)->capture_default_str();
  hs->add_option("--epochs", hs_epochs)->capture_default_str();
  hs->add_option("-o,--output", out_path)->required();

  // bleu
  std::string hyp_path, ref_path;
  bool lowercase = false;
  auto* bl = app.add_subcommand("bleu", "Corpus BLEU of tokenized hypotheses");
  bl->add_option("--hyp", hyp_path, "Hypotheses (stdin if omitted)");
  bl->add_option("--ref", ref_path)->required();
  bl->add_flag("--lowercase,--lc", lowercase);

  // pipeline
  std::string output_dir;
  auto* pl = app.add_subcommand("pipeline", "Run every stage from a config file");
  pl->add_option("--output-dir", output_dir, "Overrides run.output_dir");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e)
  {
    return app.exit(e);
  }

  try
  {
    auto config = load_config(g);

    if (*tok)
    {
      FreqLexicon lexicon;
      if (!lexicon_path.empty())
        lexicon = FreqLexicon::load(lexicon_path);
      FreqLexicon seen;
      std::optional<Output> factors;
      if (!factors_path.empty())
        factors.emplace(factors_path);
      Input in(in_path);
      Output out(out_path);
      std::string line;
      while (in.next(line))
      {
        const auto tokens = tokenize(line);
        if (!factors && lexicon_path.empty())
        {
          out.line(join_tokens(tokens));
          continue;
        }
        const auto enc = encode_case(tokens);
        for (const auto& t : enc.tokens)
          seen.add(t);
        std::vector<std::string> words;
        std::vector<CaseFactor> word_factors;
        for (std::size_t i = 0; i < enc.tokens.size(); ++i)
        {
          auto parts = lexicon_path.empty() ? std::vector<std::string>{enc.tokens[i]}
                                            : split_compound(enc.tokens[i], lexicon, compound);
          for (auto& p : parts)
          {
            words.push_back(std::move(p));
            word_factors.push_back(enc.factors[i]);
          }
        }
        if (factors)
        {
          out.line(join_tokens(words));
          factors->line(format_case_factors(word_factors));
        }
        else
          out.line(join_tokens(decode_case(words, word_factors, nullptr)));
      }
      out.close();
      if (factors)
        factors->close();
      if (!save_lexicon_path.empty())
        seen.save(save_lexicon_path);
    }
    else if (*lbpe)
    {
      if (!artifacts.empty())
      {
        if (src_path.empty() || tgt_path.empty())
          throw ConfigError("--artifacts needs --src and --tgt");
        PreprocessSettings settings;
        settings.split_compounds = config.split_compounds;
        settings.compound.min_part_length = config.min_part_length;
        settings.compound.max_parts = config.max_parts;
        Preprocessor pre(settings);
        const auto src = read_lines(src_path);
        auto tgt = read_lines(tgt_path);
        const auto mono = mono_path.empty() ? std::vector<std::string>{} : read_lines(mono_path);
        pre.learn_lexicon(Side::Source, src);
        auto tgt_all = tgt;
        tgt_all.insert(tgt_all.end(), mono.begin(), mono.end());
        pre.learn_lexicon(Side::Target, tgt_all);
        std::vector<WordSequence> sw, tw;
        for (const auto& l : src)
          sw.push_back(pre.words(l, Side::Source));
        for (const auto& l : tgt_all)
          tw.push_back(pre.words(l, Side::Target));
        pre.learn_subwords(sw, tw, merges, vocab_size);
        pre.save(artifacts);
        std::cerr << "merges " << pre.bpe().merges().size() << ", vocab " << pre.vocab(Side::Source).size()
                  << " / " << pre.vocab(Side::Target).size() << std::endl;
      }
      else
      {
        if (out_path.empty())
          throw ConfigError("learn-bpe needs --output");
        const auto corpus = read_tokenized(in_path);
        const auto table = learn_bpe(count_words(corpus), merges);
        table.save(out_path);
        if (!vocab_path.empty())
        {
          const BpeModel model(table);
          std::vector<std::vector<std::string>> segmented;
          for (const auto& s : corpus)
            segmented.push_back(model.apply(s));
          build_vocab(segmented, vocab_size).save(vocab_path);
        }
      }
    }
    else if (*abpe)
    {
      std::optional<BpeModel> model;
      if (!revert)
      {
        if (codes_path.empty())
          throw ConfigError("apply-bpe needs --codes");
        model.emplace(MergeTable::load(codes_path), marker);
      }
      Input in(in_path);
      Output out(out_path);
      std::string line;
      while (in.next(line))
        out.line(join_tokens(revert ? revert_bpe(split_ws(line), marker) : model->apply(split_ws(line))));
      out.close();
    }
    else if (*tlm)
    {
      NGramModel::Weights w = NGramModel::default_weights;
      if (!weights.empty())
        w = {weights[0], weights[1], weights[2]};
      NGramModel::train(read_tokenized(in_path), w).save(out_path);
    }
    else if (*sel)
    {
      if (!generic_tgt.empty() && generic_tgt.size() != generic_src.size())
        throw ConfigError("--generic-tgt must be given once per --generic-src");
      if (quotas.size() != generic_src.size())
        throw ConfigError("--quota must be given once per --generic-src");
      if (!labels.empty() && labels.size() != generic_src.size())
        throw ConfigError("--label must be given once per --generic-src");
      SelectionJob job;
      job.seed = config.seed;
      job.options.sample_size = sample_size;
      job.in_domain = read_tokenized(in_domain_path);
      for (std::size_t i = 0; i < generic_src.size(); ++i)
      {
        LabeledCorpus c;
        c.label = labels.empty() ? "corpus" + std::to_string(i + 1) : labels[i];
        c.data.source = read_tokenized(generic_src[i]);
        if (!generic_tgt.empty())
        {
          c.data.target = read_tokenized(generic_tgt[i]);
          if (c.data.target.size() != c.data.source.size())
            throw InputError(generic_src[i] + " and " + generic_tgt[i] + " differ in line count");
        }
        else
          c.data.target.assign(c.data.source.size(), {});
        c.quota = quotas[i];
        job.generic.push_back(std::move(c));
      }
      const auto result = select_top(job);
      Output src(out_src);
      for (const auto& s : result.selected.source)
        src.line(join_tokens(s));
      src.close();
      if (!out_tgt.empty())
      {
        Output tgt(out_tgt);
        for (const auto& s : result.selected.target)
          tgt.line(join_tokens(s));
        tgt.close();
      }
      if (!scores_path.empty())
      {
        Output scores(scores_path);
        write_score_sidecar(scores.stream(), result.scores);
        scores.close();
      }
      for (std::size_t i = 0; i < result.counts.size(); ++i)
        std::cerr << job.generic[i].label << ": " << result.counts[i] << " selected" << std::endl;
    }
    else if (*tr)
    {
      // Flags win over the config.
      const auto base = train_options(config);
      auto fallback = [&](const char* flag, auto& field, auto value) {
        if (tr->count(flag) == 0)
          field = value;
      };
      fallback("--batch", topt.batch_size, base.batch_size);
      fallback("--dropout", topt.dropout, base.dropout);
      fallback("--max-length", topt.max_length, base.max_length);
      fallback("--lr", topt.initial_lr, base.initial_lr);
      fallback("--decay", topt.decay, base.decay);
      fallback("--threshold", topt.plateau_threshold, base.plateau_threshold);
      fallback("--clip-norm", topt.clip_norm, base.clip_norm);
      const auto pre = Preprocessor::load(artifacts);
      const auto shard = read_pairs(pre, src_path, tgt_path);
      const auto valid = read_pairs(pre, valid_src, valid_tgt);
      const auto& sv = pre.vocab(Side::Source);
      const auto& tv = pre.vocab(Side::Target);
      TrainState state;
      if (!init_path.empty())
      {
        Metadata meta;
        state = load_checkpoint(init_path, &meta);
        check_vocab(meta, sv, tv);
      }
      else
      {
        ModelConfig mc;
        mc.src_vocab = sv.size();
        mc.tgt_vocab = tv.size();
        mc.embedding_dim = config.embedding;
        mc.case_dim = config.case_embedding;
        mc.hidden = config.hidden;
        mc.layers = config.layers;
        mc.input_feed = config.input_feed;
        state = TrainState::fresh(ModelParams::random(mc, Rng::derive(config.seed, 1), config.init_range),
                                  Rng::derive(config.seed, 2), topt.initial_lr);
      }
      SchedulePhase phase;
      phase.shards = {parallel_label};
      if (schedule == "plateau")
      {
        phase.kind = PhaseKind::UntilPlateau;
        phase.max_epochs = epochs ? epochs : config.max_epochs;
        phase.decay_epochs = tr->count("--decay-epochs") ? decay_epochs : config.decay_epochs;
      }
      else if (schedule == "constant")
        phase.kind = PhaseKind::Constant;
      else
      {
        phase.kind = PhaseKind::Decay;
        phase.decay_epochs = epochs ? epochs : config.selected_epochs;
      }
      run_phase(state, phase, [&](const std::string&) -> const Shard& { return shard; }, valid, topt,
                [](const EpochLog& e, const TrainState&) { std::cerr << format_epoch_log(e) << std::endl; });
      save_checkpoint(state, model_path,
                      {{"vocab.src", to_hex(sv.fingerprint())}, {"vocab.tgt", to_hex(tv.fingerprint())}});
    }
    else if (*trans || *bt)
    {
      auto* sub = *trans ? trans : bt;
      if (sub->count("--beam") == 0)
        dopt.beam_size = config.beam;
      if (sub->count("--max-length") == 0)
        dopt.max_length = config.decode_max_length;
      dopt.normalize = no_normalize ? false : config.normalize;
      const auto pre = Preprocessor::load(artifacts);
      Metadata meta;
      const auto state = load_checkpoint(model_path, &meta);
      const Side from = *trans ? Side::Source : Side::Target;
      const Side to = *trans ? Side::Target : Side::Source;
      check_vocab(meta, pre.vocab(from), pre.vocab(to));
      const auto lines = Input(in_path).all();
      std::vector<Sequence> sources;
      for (const auto& l : lines)
        sources.push_back(pre.encode(l, from));
      if (*trans)
      {
        const auto hyps = translate_corpus(state.params, sources, dopt, config.threads);
        Output out(out_path);
        for (const auto& h : hyps)
          out.line(pre.decode(h.output(), Side::Target));
        out.close();
        if (!scores_path.empty())
        {
          Output scores(scores_path);
          for (const auto& h : hyps)
          {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.6f", h.log_prob);
            scores.line(buf);
          }
          scores.close();
        }
      }
      else
      {
        const auto synthetic = back_translate(state.params, sources, shard_size, dopt, config.threads);
        Output out(out_path);
        for (const auto& p : synthetic.pairs)
          out.line(pre.decode(p.source, Side::Source));
        out.close();
        if (!out_src.empty())
          for (std::size_t i = 0; i < synthetic.num_shards(); ++i)
          {
            std::vector<std::string> s, t;
            for (std::size_t k = synthetic.bounds[i]; k < synthetic.bounds[i + 1]; ++k)
            {
              s.push_back(pre.decode(synthetic.pairs[k].source, Side::Source));
              t.push_back(lines[k]);
            }
            write_lines(out_src + "/shard_" + std::to_string(i + 1) + ".src", s);
            write_lines(out_src + "/shard_" + std::to_string(i + 1) + ".tgt", t);
          }
        std::cerr << synthetic.num_shards() << " shards" << std::endl;
      }
    }
    else if (*hs)
    {
      const auto pre = Preprocessor::load(artifacts);
      Metadata meta;
      const auto state = load_checkpoint(model_path, &meta);
      check_vocab(meta, pre.vocab(Side::Source), pre.vocab(Side::Target));
      InDomainSet set;
      set.label = "in-domain";
      for (const auto& l : read_lines(src_path))
        set.sources.push_back(pre.encode(l, Side::Source));
      if (!refs_path.empty())
        for (const auto& l : read_lines(refs_path))
          set.references.push_back(pre.encode(l, Side::Target));
      HyperspecOptions options;
      options.mode = mode == "own" ? HyperspecMode::OwnHypotheses : HyperspecMode::References;
      options.lr = hs_lr;
      options.epochs = hs_epochs;
      options.decode = decode_options(config);
      options.threads = config.threads;
      const auto adapted = hyper_specialize(state, set, options, train_options(config));
      save_checkpoint(adapted, out_path, meta);
    }
    else if (*bl)
    {
      const auto hyps = Input(hyp_path).all();
      const auto refs = read_lines(ref_path);
      std::cout << format_bleu(bleu(hyps, refs, lowercase)) << std::endl;
    }
    else if (*pl)
    {
      if (g.config.empty())
        throw ConfigError("pipeline needs --config");
      if (!output_dir.empty())
        config.output_dir = output_dir;
      const auto summary = run_pipeline(config, &std::cerr);
      std::cout << "base average BLEU " << summary.manifest.results.at("bleu.base.average") << std::endl;
      if (!summary.adapted.empty())
        std::cout << "adapted average BLEU " << summary.manifest.results.at("bleu.adapted.average") << std::endl;
      std::cout << "manifest " << config.output_dir << "/manifest.json" << std::endl;
    }
    return 0;
  }
  catch (const ConfigErrors& e)
  {
    for (const auto& msg : e.errors())
      report("config error", msg, 2);
    return 2;
  }
  catch (const ConfigError& e)
  {
    return report("config error", e.what(), 2);
  }
  catch (const InputError& e)
  {
    return report("input error", e.what(), 3);
  }
  catch (const IoError& e)
  {
    return report("io error", e.what(), 4);
  }
  catch (const NumericError& e)
  {
    return report("numeric error", e.what(), 5);
  }
  catch (const std::exception& e)
  {
    return report("error", e.what(), 1);
  }
}
