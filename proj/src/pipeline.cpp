#include "nmt/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "nmt/checkpoint.hpp"
#include "nmt/error.hpp"
#include "nmt/hash.hpp"
#include "nmt/rng.hpp"
#include "nmt/select.hpp"
#include "nmt/train.hpp"
#include "nmt/translate.hpp"

namespace fs = std::filesystem;

namespace nmt
{

  namespace
  {

    int index(Side side)
    {
      return side == Side::Source ? 0 : 1;
    }

    bool ends_with(std::string_view s, std::string_view suffix)
    {
      return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
    }

    std::string fixed(double v, int digits)
    {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
      return buf;
    }

  }

  // --- Preprocessor -------------------------------------------------------------

  Preprocessor::Preprocessor(PreprocessSettings settings)
    : _settings(std::move(settings))
  {
    if (_settings.split_compounds != "source" && _settings.split_compounds != "target"
        && _settings.split_compounds != "none")
      throw ConfigError("split_compounds must be source, target or none");
  }

  void Preprocessor::learn_lexicon(Side side, const std::vector<std::string>& lines)
  {
    FreqLexicon lexicon;
    for (const auto& line : lines)
      for (const auto& token : encode_case(tokenize(line)).tokens)
        lexicon.add(token);
    _lexicon[index(side)] = std::move(lexicon);
  }

  WordSequence Preprocessor::words(std::string_view line, Side side) const
  {
    const auto encoded = encode_case(tokenize(line));
    WordSequence out;
    for (std::size_t i = 0; i < encoded.tokens.size(); ++i)
    {
      if (_settings.splits(side))
      {
        for (auto& part : split_compound(encoded.tokens[i], _lexicon[index(side)], _settings.compound))
        {
          out.words.push_back(std::move(part));
          out.factors.push_back(encoded.factors[i]);
        }
      }
      else
      {
        out.words.push_back(encoded.tokens[i]);
        out.factors.push_back(encoded.factors[i]);
      }
    }
    return out;
  }

  void Preprocessor::learn_subwords(const std::vector<WordSequence>& source_words,
                                    const std::vector<WordSequence>& target_words,
                                    std::size_t merges,
                                    std::size_t vocab_size)
  {
    std::map<std::string, std::uint64_t> counts;
    for (const auto* side : {&source_words, &target_words})
      for (const auto& ws : *side)
        for (const auto& w : ws.words)
          ++counts[w];
    _bpe.emplace(learn_bpe(counts, merges), _settings.marker);
    for (const Side side : {Side::Source, Side::Target})
    {
      std::vector<std::vector<std::string>> corpus;
      for (const auto& ws : side == Side::Source ? source_words : target_words)
        corpus.push_back(pieces(ws));
      _vocab[index(side)] = build_vocab(corpus, vocab_size);
    }
  }

  const BpeModel& Preprocessor::bpe() const
  {
    if (!_bpe)
      throw ConfigError("subword model not learned or loaded");
    return *_bpe;
  }

  const Vocabulary& Preprocessor::vocab(Side side) const
  {
    return _vocab[index(side)];
  }

  std::vector<std::string> Preprocessor::pieces(const WordSequence& ws) const
  {
    std::vector<std::string> out;
    for (const auto& w : ws.words)
      for (auto& p : bpe().apply(w))
        out.push_back(std::move(p));
    return out;
  }

  Sequence Preprocessor::encode(const WordSequence& ws, Side side) const
  {
    Sequence seq;
    const auto& vocab = _vocab[index(side)];
    for (std::size_t i = 0; i < ws.words.size(); ++i)
      for (const auto& p : bpe().apply(ws.words[i]))
      {
        seq.ids.push_back(vocab.id(p));
        seq.case_ids.push_back(static_cast<std::int32_t>(ws.factors[i]));
      }
    return seq;
  }

  std::string Preprocessor::piece_text(const Sequence& seq, Side side) const
  {
    return join_tokens(_vocab[index(side)].decode(seq.ids));
  }

  std::string Preprocessor::decode(const Sequence& seq, Side side) const
  {
    const auto& vocab = _vocab[index(side)];
    const auto& marker = _settings.marker;
    std::vector<std::string> words;
    std::vector<CaseFactor> factors;
    std::string current;
    CaseFactor factor = CaseFactor::None;
    bool open = false;
    for (std::size_t i = 0; i < seq.ids.size(); ++i)
    {
      const auto& symbol = vocab.symbol(seq.ids[i]);
      const auto c = i < seq.case_ids.size() ? seq.case_ids[i] : num_case_factors - 1;
      if (!open)
      {
        factor = c >= 0 && c < num_case_factors ? static_cast<CaseFactor>(c) : CaseFactor::None;
        current.clear();
        open = true;
      }
      if (ends_with(symbol, marker))
      {
        current += symbol.substr(0, symbol.size() - marker.size());
        continue;
      }
      current += symbol;
      words.push_back(current);
      factors.push_back(factor);
      open = false;
    }
    if (open && !current.empty())
    {
      words.push_back(current);
      factors.push_back(factor);
    }

    if (_settings.splits(side))
    {
      // join_compounds fuses a marked word into its successor; the fused
      // word keeps the case factor of its first part.
      std::vector<CaseFactor> fused_factors;
      bool joining = false;
      for (std::size_t i = 0; i < words.size(); ++i)
      {
        if (!joining)
          fused_factors.push_back(factors[i]);
        joining = ends_with(words[i], join_marker);
      }
      words = join_compounds(words);
      factors = std::move(fused_factors);
    }
    return join_tokens(decode_case(words, factors));
  }

  void Preprocessor::save(const std::string& dir) const
  {
    fs::create_directories(dir);
    const fs::path d(dir);
    {
      std::ofstream out(d / "preprocess.txt");
      out << "tokenizer_rules=" << tokenizer_rules_version << '\n'
          << "split_compounds=" << _settings.split_compounds << '\n'
          << "min_part_length=" << _settings.compound.min_part_length << '\n'
          << "max_parts=" << _settings.compound.max_parts << '\n'
          << "marker=" << _settings.marker << '\n';
      if (!out)
        throw IoError("cannot write " + (d / "preprocess.txt").string());
    }
    _lexicon[0].save((d / "lexicon.src").string());
    _lexicon[1].save((d / "lexicon.tgt").string());
    if (_bpe)
    {
      _bpe->merges().save((d / "bpe.merges").string());
      _vocab[0].save((d / "vocab.src").string());
      _vocab[1].save((d / "vocab.tgt").string());
    }
  }

  Preprocessor Preprocessor::load(const std::string& dir)
  {
    const fs::path d(dir);
    std::ifstream in(d / "preprocess.txt");
    if (!in)
      throw IoError("no preprocessing settings in " + dir);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line))
    {
      const auto eq = line.find('=');
      if (eq != std::string::npos)
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (kv["tokenizer_rules"] != std::to_string(tokenizer_rules_version))
      throw IoError("artifacts were made with tokenizer rules version " + kv["tokenizer_rules"]);
    PreprocessSettings settings;
    try
    {
      settings.split_compounds = kv.at("split_compounds");
      settings.compound.min_part_length = std::stoul(kv.at("min_part_length"));
      settings.compound.max_parts = std::stoul(kv.at("max_parts"));
      settings.marker = kv.at("marker");
    }
    catch (const std::logic_error&)
    {
      throw IoError("malformed preprocessing settings in " + dir);
    }
    Preprocessor pre(settings);
    pre._lexicon[0] = FreqLexicon::load((d / "lexicon.src").string());
    pre._lexicon[1] = FreqLexicon::load((d / "lexicon.tgt").string());
    if (fs::exists(d / "bpe.merges"))
    {
      pre._bpe.emplace(MergeTable::load((d / "bpe.merges").string()), settings.marker);
      pre._vocab[0] = Vocabulary::load((d / "vocab.src").string());
      pre._vocab[1] = Vocabulary::load((d / "vocab.tgt").string());
    }
    return pre;
  }

  std::string tokenized_reference(std::string_view line)
  {
    return join_tokens(tokenize(line));
  }

  std::vector<std::string> read_lines(const std::string& path)
  {
    std::ifstream in(path);
    if (!in)
      throw IoError("cannot read " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
    {
      if (!line.empty() && line.back() == '\r')
        line.pop_back();
      lines.push_back(std::move(line));
    }
    return lines;
  }

  void write_lines(const std::string& path, const std::vector<std::string>& lines)
  {
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty())
      fs::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out)
      throw IoError("cannot write " + path);
    for (const auto& l : lines)
      out << l << '\n';
    if (!out)
      throw IoError("failed writing " + path);
  }

  // --- manifest ---------------------------------------------------------------

  std::map<std::string, std::string> RunManifest::output_hashes() const
  {
    std::map<std::string, std::string> out;
    for (const auto& stage : stages)
      for (const auto& [file, hash] : stage.outputs)
        out[stage.name + "/" + file] = hash;
    return out;
  }

  std::string RunManifest::to_json() const
  {
    nlohmann::ordered_json j;
    j["tool"] = "nmt";
    j["version"] = version;
    j["seed"] = seed;
    j["deterministic"] = deterministic;
    j["config"] = config;
    j["inputs"] = inputs;
    j["stages"] = nlohmann::ordered_json::array();
    for (const auto& s : stages)
      j["stages"].push_back({{"name", s.name}, {"outputs", s.outputs}, {"seconds", s.seconds}});
    j["results"] = results;
    return j.dump(2) + "\n";
  }

  RunManifest RunManifest::from_json(const std::string& text)
  {
    try
    {
      const auto j = nlohmann::json::parse(text);
      RunManifest m;
      m.version = j.at("version").get<std::string>();
      m.seed = j.at("seed").get<std::uint64_t>();
      m.deterministic = j.at("deterministic").get<bool>();
      m.config = j.at("config").get<std::map<std::string, std::string>>();
      m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
      for (const auto& s : j.at("stages"))
        m.stages.push_back({s.at("name").get<std::string>(),
                            s.at("outputs").get<std::map<std::string, std::string>>(),
                            s.at("seconds").get<double>()});
      m.results = j.at("results").get<std::map<std::string, std::string>>();
      return m;
    }
    catch (const nlohmann::json::exception& e)
    {
      throw IoError(std::string("malformed manifest: ") + e.what());
    }
  }

  void RunManifest::write(const std::string& path) const
  {
    std::ofstream out(path, std::ios::binary);
    out << to_json();
    if (!out)
      throw IoError("cannot write manifest " + path);
  }

  RunManifest RunManifest::read(const std::string& path)
  {
    std::ifstream in(path);
    if (!in)
      throw IoError("cannot read manifest " + path);
    std::stringstream text;
    text << in.rdbuf();
    return from_json(text.str());
  }

  // --- pipeline ---------------------------------------------------------------

  namespace
  {

    class Stage
    {
    public:
      Stage(RunManifest& manifest, const fs::path& root, std::string name, std::ostream* log)
        : _manifest(manifest)
        , _root(root)
        , _log(log)
        , _start(std::chrono::steady_clock::now())
      {
        _record.name = std::move(name);
        if (_log)
          *_log << "[" << _record.name << "]" << std::endl;
      }

      std::string path(const std::string& rel) const
      {
        const auto p = _root / rel;
        fs::create_directories(p.parent_path());
        return p.string();
      }

      void output(const std::string& rel)
      {
        _record.outputs[rel] = to_hex(hash_file((_root / rel).string()));
      }

      void write(const std::string& rel, const std::vector<std::string>& lines)
      {
        write_lines(path(rel), lines);
        output(rel);
      }

      void finish()
      {
        _record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - _start).count();
        if (_log)
          *_log << "[" << _record.name << "] " << fixed(_record.seconds, 1) << "s" << std::endl;
        _manifest.stages.push_back(std::move(_record));
      }

    private:
      RunManifest& _manifest;
      fs::path _root;
      std::ostream* _log;
      StageRecord _record;
      std::chrono::steady_clock::time_point _start;
    };

    struct Bitext
    {
      std::vector<std::string> source;
      std::vector<std::string> target;
    };

    Bitext read_bitext(const std::string& src, const std::string& tgt)
    {
      Bitext b{read_lines(src), read_lines(tgt)};
      if (b.source.size() != b.target.size())
        throw InputError(src + " and " + tgt + " differ in line count");
      return b;
    }

    Shard encode_pairs(const Preprocessor& pre, const Bitext& text)
    {
      Shard shard;
      for (std::size_t i = 0; i < text.source.size(); ++i)
        shard.push_back({pre.encode(text.source[i], Side::Source), pre.encode(text.target[i], Side::Target)});
      return shard;
    }

    Shard reversed(const Shard& shard)
    {
      Shard out;
      for (const auto& p : shard)
        out.push_back({p.target, p.source});
      return out;
    }

    Sentence symbols(const Vocabulary& vocab, const Sequence& seq)
    {
      return vocab.decode(seq.ids);
    }

    std::vector<std::string> piece_lines(const Preprocessor& pre, const Shard& shard, bool source)
    {
      std::vector<std::string> out;
      for (const auto& p : shard)
        out.push_back(source ? pre.piece_text(p.source, Side::Source) : pre.piece_text(p.target, Side::Target));
      return out;
    }

    ModelConfig model_config(const PipelineConfig& c, std::size_t src_vocab, std::size_t tgt_vocab)
    {
      ModelConfig m;
      m.src_vocab = src_vocab;
      m.tgt_vocab = tgt_vocab;
      m.embedding_dim = c.embedding;
      m.case_dim = c.case_embedding;
      m.hidden = c.hidden;
      m.layers = c.layers;
      m.input_feed = c.input_feed;
      return m;
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

    std::vector<std::string> detokenize_all(const Preprocessor& pre, const std::vector<Hypothesis>& hyps)
    {
      std::vector<std::string> out;
      for (const auto& h : hyps)
        out.push_back(pre.decode(h.output(), Side::Target));
      return out;
    }

  }

  PipelineSummary run_pipeline(const PipelineConfig& config, std::ostream* log)
  {
    require_pipeline_inputs(config);
    const fs::path root(config.output_dir);
    fs::create_directories(root);

    PipelineSummary summary;
    RunManifest& manifest = summary.manifest;
    manifest.config = config.resolved();
    manifest.seed = config.seed;
    manifest.deterministic = config.deterministic;
    auto record_input = [&](const std::string& path) {
      if (!path.empty())
        manifest.inputs[path] = to_hex(hash_file(path));
    };
    for (const auto* p : {&config.parallel_source, &config.parallel_target, &config.monolingual,
                          &config.valid_source, &config.valid_target})
      record_input(*p);
    for (const auto& t : config.tests)
    {
      record_input(t.source);
      record_input(t.target);
    }

    const auto parallel_text = read_bitext(config.parallel_source, config.parallel_target);
    const auto valid_text = read_bitext(config.valid_source, config.valid_target);
    const auto mono_text = config.monolingual.empty() ? std::vector<std::string>{}
                                                      : read_lines(config.monolingual);
    std::vector<Bitext> test_text;
    for (const auto& t : config.tests)
    {
      test_text.push_back(read_bitext(t.source, t.target));
      summary.test_labels.push_back(t.label);
    }

    const auto training = train_options(config);
    const auto decoding = decode_options(config);
    const std::size_t threads = config.threads;
    std::vector<std::string> train_log;
    auto epoch_logger = [&](const std::string& model) {
      return [&, model](const EpochLog& e, const TrainState&) {
        const auto line = model + '\t' + format_epoch_log(e);
        train_log.push_back(line);
        if (log)
          *log << "  " << line << std::endl;
      };
    };

    // ---- preprocess: tokens, case factors, compound splitting
    PreprocessSettings settings;
    settings.split_compounds = config.split_compounds;
    settings.compound.min_part_length = config.min_part_length;
    settings.compound.max_parts = config.max_parts;
    Preprocessor pre(settings);
    std::vector<WordSequence> src_words, tgt_words, mono_words;
    {
      Stage stage(manifest, root, "preprocess", log);
      pre.learn_lexicon(Side::Source, parallel_text.source);
      auto target_lines = parallel_text.target;
      target_lines.insert(target_lines.end(), mono_text.begin(), mono_text.end());
      pre.learn_lexicon(Side::Target, target_lines);

      auto run_side = [&](const std::vector<std::string>& lines, Side side, std::vector<WordSequence>& out,
                          const std::string& name) {
        std::vector<std::string> text;
        for (const auto& line : lines)
        {
          out.push_back(pre.words(line, side));
          text.push_back(join_tokens(out.back().words) + '\t' + format_case_factors(out.back().factors));
        }
        stage.write("prep/" + name, text);
      };
      run_side(parallel_text.source, Side::Source, src_words, "train.words.src");
      run_side(parallel_text.target, Side::Target, tgt_words, "train.words.tgt");
      if (!mono_text.empty())
        run_side(mono_text, Side::Target, mono_words, "mono.words.tgt");
      stage.finish();
    }

    // ---- joint BPE over the parallel data, one vocabulary per side
    {
      Stage stage(manifest, root, "bpe", log);
      auto vocab_target = tgt_words;
      vocab_target.insert(vocab_target.end(), mono_words.begin(), mono_words.end());
      pre.learn_subwords(src_words, vocab_target, config.bpe_merges, config.vocab_size);
      pre.save((root / "artifacts").string());
      for (const auto* f : {"preprocess.txt", "lexicon.src", "lexicon.tgt", "bpe.merges", "vocab.src", "vocab.tgt"})
        stage.output(std::string("artifacts/") + f);
      if (log)
        *log << "  merges " << pre.bpe().merges().size() << ", vocab " << pre.vocab(Side::Source).size()
             << " / " << pre.vocab(Side::Target).size() << std::endl;
      stage.finish();
    }

    const Shard parallel = encode_pairs(pre, parallel_text);
    const Shard validation = encode_pairs(pre, valid_text);
    std::vector<Shard> tests;
    for (const auto& t : test_text)
      tests.push_back(encode_pairs(pre, t));
    const Vocabulary& src_vocab = pre.vocab(Side::Source);
    const Vocabulary& tgt_vocab = pre.vocab(Side::Target);
    const Metadata vocab_meta{{"vocab.src", to_hex(src_vocab.fingerprint())},
                              {"vocab.tgt", to_hex(tgt_vocab.fingerprint())}};

    ScheduleOptions schedule_options;
    schedule_options.max_plateau_epochs = config.max_epochs;
    schedule_options.decay_epochs_parallel = config.decay_epochs;
    schedule_options.decay_epochs_selected = config.selected_epochs;

    // ---- forward model on P, reverse model for back-translation
    TrainState state = TrainState::fresh(
      ModelParams::random(model_config(config, src_vocab.size(), tgt_vocab.size()),
                          Rng::derive(config.seed, 1), config.init_range),
      Rng::derive(config.seed, 2), config.lr);
    std::optional<TrainState> reverse;
    {
      Stage stage(manifest, root, "train-P", log);
      const auto schedule = build_schedule(true, 0, false, schedule_options);
      run_phase(state, schedule.phases[0], [&](const std::string&) -> const Shard& { return parallel; },
                validation, training, epoch_logger("forward"));
      save_checkpoint(state, stage.path("models/model.P.ckpt"), vocab_meta);
      stage.output("models/model.P.ckpt");

      if (!mono_text.empty())
      {
        reverse = TrainState::fresh(
          ModelParams::random(model_config(config, tgt_vocab.size(), src_vocab.size()),
                              Rng::derive(config.seed, 3), config.init_range),
          Rng::derive(config.seed, 4), config.lr);
        const Shard reverse_parallel = reversed(parallel);
        const Shard reverse_valid = reversed(validation);
        SchedulePhase phase = schedule.phases[0];
        phase.max_epochs = config.reverse_max_epochs;
        run_phase(*reverse, phase, [&](const std::string&) -> const Shard& { return reverse_parallel; },
                  reverse_valid, training, epoch_logger("reverse"));
        save_checkpoint(*reverse, stage.path("models/reverse.ckpt"),
                        {{"vocab.src", to_hex(tgt_vocab.fingerprint())},
                         {"vocab.tgt", to_hex(src_vocab.fingerprint())}});
        stage.output("models/reverse.ckpt");
      }
      stage.finish();
    }

    // ---- back-translation of the monolingual target text
    SyntheticCorpus synthetic;
    if (reverse)
    {
      Stage stage(manifest, root, "backtranslate", log);
      std::vector<Sequence> mono;
      for (const auto& ws : mono_words)
        mono.push_back(pre.encode(ws, Side::Target));
      synthetic = back_translate(reverse->params, mono, config.shard_size, decoding, threads);
      stage.write("synthetic/synthetic.src", piece_lines(pre, synthetic.pairs, true));
      stage.write("synthetic/synthetic.tgt", piece_lines(pre, synthetic.pairs, false));
      if (log)
        *log << "  " << synthetic.pairs.size() << " pairs in " << synthetic.num_shards() << " shards"
             << std::endl;
      stage.finish();
    }

    // ---- P + M_i, one epoch per shard
    std::vector<Shard> mixed;
    if (synthetic.num_shards() > 0)
    {
      Stage stage(manifest, root, "train-P+M", log);
      for (std::size_t i = 0; i < synthetic.num_shards(); ++i)
      {
        Shard shard = parallel;
        const auto part = synthetic.shard(i);
        shard.insert(shard.end(), part.begin(), part.end());
        mixed.push_back(std::move(shard));
      }
      const auto schedule = build_schedule(true, mixed.size(), true, schedule_options);
      run_phase(state, schedule.phases[1],
                [&](const std::string& label) -> const Shard& {
                  for (std::size_t i = 0; i < mixed.size(); ++i)
                    if (label == synthetic_shard_label(i + 1))
                      return mixed[i];
                  throw ConfigError("unknown shard " + label);
                },
                validation, training, epoch_logger("forward"));
      save_checkpoint(state, stage.path("models/model.P+M.ckpt"), vocab_meta);
      stage.output("models/model.P+M.ckpt");
      stage.finish();
    }

    // ---- Moore-Lewis selection of P' and M' against the test sources
    Shard selected;
    {
      Stage stage(manifest, root, "select", log);
      SelectionJob job;
      job.seed = Rng::derive(config.seed, 5);
      job.options.sample_size = config.sample_size;
      Shard pool;
      auto add_corpus = [&](const std::string& label, const Shard& shard, std::size_t quota) {
        LabeledCorpus corpus;
        corpus.label = label;
        for (const auto& p : shard)
        {
          if (p.source.ids.empty() || p.target.ids.empty())
            continue;
          corpus.data.source.push_back(symbols(src_vocab, p.source));
          corpus.data.target.push_back(symbols(tgt_vocab, p.target));
          pool.push_back(p);
        }
        if (quota > corpus.data.size())
        {
          if (log)
            *log << "  quota for " << label << " lowered from " << quota << " to " << corpus.data.size()
                 << std::endl;
          quota = corpus.data.size();
        }
        corpus.quota = quota;
        job.generic.push_back(std::move(corpus));
      };
      add_corpus("P", parallel, config.quota_parallel);
      if (!synthetic.pairs.empty())
        add_corpus("M", synthetic.pairs, config.quota_synthetic);
      for (const auto& t : tests)
        for (const auto& p : t)
          job.in_domain.push_back(symbols(src_vocab, p.source));
      const auto result = select_top(job);
      for (const auto i : result.indices)
        selected.push_back(pool[i]);
      stage.write("select/selected.src", piece_lines(pre, selected, true));
      stage.write("select/selected.tgt", piece_lines(pre, selected, false));
      {
        std::ofstream out(stage.path("select/scores.tsv"));
        write_score_sidecar(out, result.scores);
      }
      stage.output("select/scores.tsv");
      if (log)
      {
        *log << "  selected";
        for (std::size_t i = 0; i < result.counts.size(); ++i)
          *log << ' ' << job.generic[i].label << '=' << result.counts[i];
        *log << std::endl;
      }
      stage.finish();
    }

    // ---- decay phase on P' + M'
    {
      Stage stage(manifest, root, "train-P'+M'", log);
      const auto schedule = build_schedule(true, mixed.size(), true, schedule_options);
      run_phase(state, schedule.phases.back(), [&](const std::string&) -> const Shard& { return selected; },
                validation, training, epoch_logger("forward"));
      save_checkpoint(state, stage.path("models/model.base.ckpt"), vocab_meta);
      stage.output("models/model.base.ckpt");
      stage.finish();
    }

    // ---- hyper-specialisation on the test sources
    std::vector<InDomainSet> in_domain_sets;
    for (std::size_t t = 0; t < tests.size(); ++t)
    {
      InDomainSet set;
      set.label = config.tests[t].label;
      for (const auto& p : tests[t])
      {
        set.sources.push_back(p.source);
        set.references.push_back(p.target);
      }
      in_domain_sets.push_back(std::move(set));
    }
    const auto in_domain = merge_in_domain(in_domain_sets, config.hyperspec_exclude);
    Shard in_domain_pairs;
    for (std::size_t i = 0; i < in_domain.sources.size(); ++i)
      in_domain_pairs.push_back({in_domain.sources[i], in_domain.references[i]});

    std::optional<TrainState> adapted;
    if (config.hyperspec)
    {
      Stage stage(manifest, root, "hyperspec", log);
      HyperspecOptions options;
      options.mode = config.hyperspec_mode == "references" ? HyperspecMode::References
                                                           : HyperspecMode::OwnHypotheses;
      options.lr = config.hyperspec_lr;
      options.epochs = config.hyperspec_epochs;
      options.decode = decoding;
      options.threads = threads;
      summary.in_domain_ppl_before = evaluate_ppl(state.params, in_domain_pairs, training.max_length);
      adapted = hyper_specialize(state, in_domain, options, training);
      summary.in_domain_ppl_after = evaluate_ppl(adapted->params, in_domain_pairs, training.max_length);
      manifest.results["in_domain_ppl.before"] = fixed(summary.in_domain_ppl_before, 6);
      manifest.results["in_domain_ppl.after"] = fixed(summary.in_domain_ppl_after, 6);
      if (log)
        *log << "  in-domain ppl " << fixed(summary.in_domain_ppl_before, 4) << " -> "
             << fixed(summary.in_domain_ppl_after, 4) << std::endl;
      save_checkpoint(*adapted, stage.path("models/model.adapted.ckpt"), vocab_meta);
      stage.output("models/model.adapted.ckpt");
      stage.finish();
    }

    // ---- BLEU per test set
    {
      Stage stage(manifest, root, "bleu", log);
      std::vector<std::string> report;
      auto score = [&](const TrainState& model, const std::string& name, std::vector<BleuReport>& out) {
        for (std::size_t t = 0; t < tests.size(); ++t)
        {
          std::vector<Sequence> sources;
          for (const auto& p : tests[t])
            sources.push_back(p.source);
          const auto hyps = detokenize_all(pre, translate_corpus(model.params, sources, decoding, threads));
          std::vector<std::string> refs;
          for (const auto& line : test_text[t].target)
            refs.push_back(tokenized_reference(line));
          const auto& label = config.tests[t].label;
          stage.write("translations/" + label + "." + name + ".txt", hyps);
          out.push_back(bleu(hyps, refs));
          report.push_back(name + '\t' + label + '\t' + format_bleu(out.back()));
          manifest.results["bleu." + name + "." + label] = fixed(out.back().bleu, 2);
        }
        const double avg = average_bleu(out);
        report.push_back(name + "\taverage\t" + fixed(avg, 2));
        manifest.results["bleu." + name + ".average"] = fixed(avg, 2);
      };
      score(state, "base", summary.base);
      if (adapted)
        score(*adapted, "adapted", summary.adapted);
      stage.write("bleu.txt", report);
      if (log)
        for (const auto& line : report)
          *log << "  " << line << std::endl;
      stage.finish();
    }

    write_lines((root / "train.log").string(), train_log);
    manifest.write((root / "manifest.json").string());
    return summary;
  }

}
