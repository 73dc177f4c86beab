#include "nmt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "nmt/error.hpp"
#include "nmt/hash.hpp"

namespace nmt
{

  namespace
  {

    class Writer
    {
    public:
      void bytes(std::string_view data)
      {
        _out.append(data);
      }

      template <typename T>
      void uint(T value)
      {
        for (std::size_t i = 0; i < sizeof(T); ++i)
          _out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
      }

      void f64(double value)
      {
        uint(std::bit_cast<std::uint64_t>(value));
      }

      std::string& str()
      {
        return _out;
      }

    private:
      std::string _out;
    };

    class Reader
    {
    public:
      explicit Reader(std::string_view data)
        : _data(data)
      {
      }

      std::string_view bytes(std::size_t n)
      {
        need(n);
        const auto view = _data.substr(_pos, n);
        _pos += n;
        return view;
      }

      template <typename T>
      T uint()
      {
        need(sizeof(T));
        std::uint64_t value = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
          value |= static_cast<std::uint64_t>(static_cast<unsigned char>(_data[_pos + i])) << (8 * i);
        _pos += sizeof(T);
        return static_cast<T>(value);
      }

      double f64()
      {
        return std::bit_cast<double>(uint<std::uint64_t>());
      }

      std::size_t position() const
      {
        return _pos;
      }

    private:
      void need(std::size_t n) const
      {
        if (_data.size() - _pos < n)
          throw IoError("checkpoint is truncated");
      }

      std::string_view _data;
      std::size_t _pos = 0;
    };

    Metadata model_metadata(const ModelConfig& cfg)
    {
      return {
        {"model.src_vocab", std::to_string(cfg.src_vocab)},
        {"model.tgt_vocab", std::to_string(cfg.tgt_vocab)},
        {"model.embedding_dim", std::to_string(cfg.embedding_dim)},
        {"model.case_dim", std::to_string(cfg.case_dim)},
        {"model.hidden", std::to_string(cfg.hidden)},
        {"model.layers", std::to_string(cfg.layers)},
        {"model.input_feed", cfg.input_feed ? "1" : "0"},
      };
    }

    std::size_t meta_size(const Metadata& meta, const std::string& key)
    {
      const auto it = meta.find(key);
      if (it == meta.end())
        throw IoError("checkpoint metadata lacks " + key);
      try
      {
        return std::stoull(it->second);
      }
      catch (const std::exception&)
      {
        throw IoError("invalid checkpoint metadata value for " + key);
      }
    }

  }

  std::string serialize_checkpoint(const ModelParams& params, const Metadata& metadata)
  {
    Metadata meta = metadata;
    for (auto& [key, value] : model_metadata(params.config))
      meta[key] = value;
    // Stored as text with full precision so the config round-trips.
    {
      std::ostringstream w;
      w.precision(17);
      w << params.config.case_loss_weight;
      meta["model.case_loss_weight"] = w.str();
    }

    std::string meta_text;
    for (const auto& [key, value] : meta)
    {
      if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos)
        throw ConfigError("invalid checkpoint metadata entry: " + key);
      meta_text += key + "=" + value + "\n";
    }

    Writer w;
    w.bytes(checkpoint_magic);
    w.uint<std::uint32_t>(checkpoint_version);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(meta_text.size()));
    w.bytes(meta_text);

    std::vector<std::pair<std::string, const Matrix*>> tensors;
    params.for_each([&](const std::string& name, const Matrix& m) { tensors.emplace_back(name, &m); });
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, m] : tensors)
    {
      w.uint<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
      w.bytes(name);
      w.uint<std::uint32_t>(2);
      w.uint<std::uint64_t>(static_cast<std::uint64_t>(m->rows()));
      w.uint<std::uint64_t>(static_cast<std::uint64_t>(m->cols()));
    }
    for (const auto& [name, m] : tensors)
      for (Eigen::Index r = 0; r < m->rows(); ++r)
        for (Eigen::Index c = 0; c < m->cols(); ++c)
          w.f64((*m)(r, c));
    w.uint<std::uint64_t>(fnv1a(w.str()));
    return std::move(w.str());
  }

  Checkpoint deserialize_checkpoint(std::string_view bytes)
  {
    if (bytes.size() < checkpoint_magic.size() + 8
        || bytes.substr(0, checkpoint_magic.size()) != checkpoint_magic)
      throw IoError("not a checkpoint file (bad magic)");
    {
      Reader tail(bytes.substr(bytes.size() - 8));
      if (tail.uint<std::uint64_t>() != fnv1a(bytes.substr(0, bytes.size() - 8)))
      {
        // Report version problems ahead of the generic corruption error.
        Reader head(bytes.substr(checkpoint_magic.size()));
        if (head.uint<std::uint32_t>() != checkpoint_version)
          throw IoError("unsupported checkpoint version");
        throw IoError("checkpoint is corrupt or truncated (checksum mismatch)");
      }
    }
    Reader r(bytes.substr(0, bytes.size() - 8));
    r.bytes(checkpoint_magic.size());
    const auto version = r.uint<std::uint32_t>();
    if (version != checkpoint_version)
      throw IoError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint ckpt;
    {
      const auto meta_len = r.uint<std::uint32_t>();
      std::istringstream meta_in{std::string(r.bytes(meta_len))};
      std::string line;
      while (std::getline(meta_in, line))
      {
        const auto eq = line.find('=');
        if (eq == std::string::npos)
          throw IoError("malformed checkpoint metadata line: " + line);
        ckpt.metadata[line.substr(0, eq)] = line.substr(eq + 1);
      }
    }

    ModelConfig cfg;
    const auto& meta = ckpt.metadata;
    cfg.src_vocab = meta_size(meta, "model.src_vocab");
    cfg.tgt_vocab = meta_size(meta, "model.tgt_vocab");
    cfg.embedding_dim = meta_size(meta, "model.embedding_dim");
    cfg.case_dim = meta_size(meta, "model.case_dim");
    cfg.hidden = meta_size(meta, "model.hidden");
    cfg.layers = meta_size(meta, "model.layers");
    cfg.input_feed = meta_size(meta, "model.input_feed") != 0;
    if (const auto it = meta.find("model.case_loss_weight"); it != meta.end())
      cfg.case_loss_weight = std::stod(it->second);
    try
    {
      ckpt.params = ModelParams::zeros(cfg);
    }
    catch (const ConfigError& e)
    {
      throw IoError(std::string("invalid model dimensions in checkpoint: ") + e.what());
    }

    std::vector<std::pair<std::string, Matrix*>> tensors;
    ckpt.params.for_each([&](const std::string& name, Matrix& m) { tensors.emplace_back(name, &m); });
    const auto count = r.uint<std::uint32_t>();
    if (count != tensors.size())
      throw IoError("checkpoint tensor count does not match the model");
    for (const auto& [name, m] : tensors)
    {
      const auto name_len = r.uint<std::uint32_t>();
      const auto stored = r.bytes(name_len);
      if (stored != name)
        throw IoError("unexpected tensor '" + std::string(stored) + "', expected " + name);
      if (r.uint<std::uint32_t>() != 2)
        throw IoError("tensor " + name + " has an unsupported rank");
      const auto rows = r.uint<std::uint64_t>();
      const auto cols = r.uint<std::uint64_t>();
      if (rows != static_cast<std::uint64_t>(m->rows()) || cols != static_cast<std::uint64_t>(m->cols()))
        throw IoError("tensor " + name + " has a shape inconsistent with the model dimensions");
    }
    for (const auto& [name, m] : tensors)
      for (Eigen::Index row = 0; row < m->rows(); ++row)
        for (Eigen::Index col = 0; col < m->cols(); ++col)
          (*m)(row, col) = r.f64();
    if (r.position() != bytes.size() - 8)
      throw IoError("trailing bytes in checkpoint");
    return ckpt;
  }

  void save_checkpoint_file(const std::string& path, const ModelParams& params,
                            const Metadata& metadata)
  {
    const auto bytes = serialize_checkpoint(params, metadata);
    // Write to a sibling temporary and rename so a crash never leaves a
    // half-written checkpoint under the final name.
    const std::string tmp = path + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out)
        throw IoError("cannot write checkpoint: " + path);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out)
        throw IoError("failed writing checkpoint: " + path);
    }
    std::filesystem::rename(tmp, path);
  }

  Checkpoint load_checkpoint_file(const std::string& path)
  {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      throw IoError("cannot open checkpoint: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_checkpoint(buf.str());
  }

}
