#include "nmt/config.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

extern char** environ;

namespace nmt
{

  namespace
  {

    std::string trim(const std::string& s)
    {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos)
        return {};
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    }

    std::string fmt_double(double v)
    {
      std::ostringstream out;
      out.precision(17);
      out << v;
      return out.str();
    }

    enum class Kind
    {
      Size,
      U64,
      Real,
      Flag,
      Text,
      Path,
    };

    struct Field
    {
      std::string section;
      std::string key;
      Kind kind;
      void* target;
      // Returns an error message for an out-of-range value, or "".
      std::function<std::string(double)> check_number;
      std::vector<std::string> choices;
    };

    std::function<std::string(double)> at_least(double lo)
    {
      return [lo](double v) {
        return v >= lo ? std::string() : "must be at least " + fmt_double(lo);
      };
    }

    std::function<std::string(double)> positive()
    {
      return [](double v) { return v > 0 ? std::string() : "must be positive"; };
    }

    std::function<std::string(double)> half_open(double lo, double hi)
    {
      return [lo, hi](double v) {
        return v >= lo && v < hi ? std::string()
                                 : "out of range [" + fmt_double(lo) + ", " + fmt_double(hi) + ")";
      };
    }

    std::function<std::string(double)> open(double lo, double hi)
    {
      return [lo, hi](double v) {
        return v > lo && v < hi ? std::string()
                                : "out of range (" + fmt_double(lo) + ", " + fmt_double(hi) + ")";
      };
    }

    std::vector<Field> fields(PipelineConfig& c)
    {
      using K = Kind;
      return {
          {"data", "parallel_source", K::Path, &c.parallel_source, {}, {}},
          {"data", "parallel_target", K::Path, &c.parallel_target, {}, {}},
          {"data", "monolingual", K::Path, &c.monolingual, {}, {}},
          {"data", "valid_source", K::Path, &c.valid_source, {}, {}},
          {"data", "valid_target", K::Path, &c.valid_target, {}, {}},
          {"preprocess", "split_compounds", K::Text, &c.split_compounds, {}, {"source", "target", "none"}},
          {"preprocess", "min_part_length", K::Size, &c.min_part_length, at_least(1), {}},
          {"preprocess", "max_parts", K::Size, &c.max_parts, at_least(1), {}},
          {"preprocess", "bpe_merges", K::Size, &c.bpe_merges, at_least(0), {}},
          {"preprocess", "vocab_size", K::Size, &c.vocab_size, at_least(5), {}},
          {"model", "layers", K::Size, &c.layers, at_least(1), {}},
          {"model", "hidden", K::Size, &c.hidden, at_least(1), {}},
          {"model", "embedding", K::Size, &c.embedding, at_least(1), {}},
          {"model", "case_embedding", K::Size, &c.case_embedding, at_least(1), {}},
          {"model", "input_feed", K::Flag, &c.input_feed, {}, {}},
          {"model", "init_range", K::Real, &c.init_range, positive(), {}},
          {"train", "batch", K::Size, &c.batch, at_least(1), {}},
          {"train", "dropout", K::Real, &c.dropout, half_open(0, 1), {}},
          {"train", "max_length", K::Size, &c.max_length, at_least(1), {}},
          {"train", "lr", K::Real, &c.lr, positive(), {}},
          {"train", "decay", K::Real, &c.decay, open(0, 1), {}},
          {"train", "threshold", K::Real, &c.threshold, half_open(0, 1), {}},
          {"train", "clip_norm", K::Real, &c.clip_norm, at_least(0), {}},
          {"train", "max_epochs", K::Size, &c.max_epochs, at_least(1), {}},
          {"train", "decay_epochs", K::Size, &c.decay_epochs, at_least(0), {}},
          {"train", "selected_epochs", K::Size, &c.selected_epochs, at_least(0), {}},
          {"backtranslate", "shard_size", K::Size, &c.shard_size, at_least(1), {}},
          {"backtranslate", "reverse_max_epochs", K::Size, &c.reverse_max_epochs, at_least(1), {}},
          {"select", "quota_parallel", K::Size, &c.quota_parallel, at_least(0), {}},
          {"select", "quota_synthetic", K::Size, &c.quota_synthetic, at_least(0), {}},
          {"select", "sample_size", K::Size, &c.sample_size, at_least(0), {}},
          {"hyperspec", "enabled", K::Flag, &c.hyperspec, {}, {}},
          {"hyperspec", "mode", K::Text, &c.hyperspec_mode, {}, {"own", "references"}},
          {"hyperspec", "lr", K::Real, &c.hyperspec_lr, positive(), {}},
          {"hyperspec", "epochs", K::Size, &c.hyperspec_epochs, at_least(0), {}},
          {"hyperspec", "exclude", K::Text, &c.hyperspec_exclude, {}, {}},
          {"decode", "beam", K::Size, &c.beam, at_least(1), {}},
          {"decode", "normalize", K::Flag, &c.normalize, {}, {}},
          {"decode", "max_length", K::Size, &c.decode_max_length, at_least(1), {}},
          {"run", "seed", K::U64, &c.seed, {}, {}},
          {"run", "threads", K::Size, &c.threads, at_least(1), {}},
          {"run", "deterministic", K::Flag, &c.deterministic, {}, {}},
          {"run", "output_dir", K::Text, &c.output_dir, {}, {}},
      };
    }

    bool parse_unsigned(const std::string& v, std::uint64_t& out)
    {
      if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
        return false;
      errno = 0;
      out = std::strtoull(v.c_str(), nullptr, 10);
      return errno == 0;
    }

    bool parse_real(const std::string& v, double& out)
    {
      char* end = nullptr;
      out = std::strtod(v.c_str(), &end);
      return !v.empty() && end == v.c_str() + v.size() && std::isfinite(out);
    }

    bool parse_flag(const std::string& v, bool& out)
    {
      if (v == "true" || v == "yes" || v == "on" || v == "1")
        out = true;
      else if (v == "false" || v == "no" || v == "off" || v == "0")
        out = false;
      else
        return false;
      return true;
    }

    std::string resolve_path(const std::string& base_dir, const std::string& path)
    {
      if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute())
        return path;
      return (std::filesystem::path(base_dir) / path).lexically_normal().string();
    }

    // Stores `value` into the field; returns an error message or "".
    std::string assign(const Field& f, const std::string& value, const std::string& base_dir)
    {
      const std::string name = f.section + "." + f.key;
      switch (f.kind)
      {
      case Kind::Size:
      case Kind::U64: {
        std::uint64_t v = 0;
        if (!parse_unsigned(value, v))
          return name + ": expected a non-negative integer, got '" + value + "'";
        if (f.check_number)
          if (auto err = f.check_number(static_cast<double>(v)); !err.empty())
            return name + ": " + value + " " + err;
        if (f.kind == Kind::Size)
          *static_cast<std::size_t*>(f.target) = static_cast<std::size_t>(v);
        else
          *static_cast<std::uint64_t*>(f.target) = v;
        return {};
      }
      case Kind::Real: {
        double v = 0;
        if (!parse_real(value, v))
          return name + ": expected a number, got '" + value + "'";
        if (f.check_number)
          if (auto err = f.check_number(v); !err.empty())
            return name + ": " + value + " " + err;
        *static_cast<double*>(f.target) = v;
        return {};
      }
      case Kind::Flag: {
        bool v = false;
        if (!parse_flag(value, v))
          return name + ": expected a boolean (true/false), got '" + value + "'";
        *static_cast<bool*>(f.target) = v;
        return {};
      }
      case Kind::Text:
        if (!f.choices.empty())
        {
          bool ok = false;
          std::string list;
          for (const auto& c : f.choices)
          {
            ok |= c == value;
            list += (list.empty() ? "" : ", ") + c;
          }
          if (!ok)
            return name + ": expected one of {" + list + "}, got '" + value + "'";
        }
        *static_cast<std::string*>(f.target) = value;
        return {};
      case Kind::Path:
        *static_cast<std::string*>(f.target) = resolve_path(base_dir, value);
        return {};
      }
      return {};
    }

    std::string upper(std::string s)
    {
      for (auto& ch : s)
        if (ch >= 'a' && ch <= 'z')
          ch = static_cast<char>(ch - 'a' + 'A');
      return s;
    }

  }

  ConfigErrors::ConfigErrors(std::vector<std::string> errors)
    : ConfigError([&] {
      std::string msg;
      for (const auto& e : errors)
        msg += (msg.empty() ? "" : "; ") + e;
      return msg;
    }())
    , _errors(std::move(errors))
  {
  }

  std::map<std::string, std::string> PipelineConfig::resolved() const
  {
    auto copy = *this;
    std::map<std::string, std::string> out;
    for (const auto& f : fields(copy))
    {
      const std::string name = f.section + "." + f.key;
      switch (f.kind)
      {
      case Kind::Size:
        out[name] = std::to_string(*static_cast<const std::size_t*>(f.target));
        break;
      case Kind::U64:
        out[name] = std::to_string(*static_cast<const std::uint64_t*>(f.target));
        break;
      case Kind::Real:
        out[name] = fmt_double(*static_cast<const double*>(f.target));
        break;
      case Kind::Flag:
        out[name] = *static_cast<const bool*>(f.target) ? "true" : "false";
        break;
      case Kind::Text:
      case Kind::Path:
        out[name] = *static_cast<const std::string*>(f.target);
        break;
      }
    }
    for (const auto& t : tests)
      out["tests." + t.label] = t.source + " " + t.target;
    return out;
  }

  namespace
  {

    PipelineConfig parse_collect(const std::string& text,
                                 const std::string& base_dir,
                                 const std::map<std::string, std::string>& env,
                                 std::vector<std::string>& errors)
    {
      PipelineConfig config;
      const auto table = fields(config);
      auto find = [&](const std::string& section, const std::string& key) -> const Field* {
        for (const auto& f : table)
          if (f.section == section && f.key == key)
            return &f;
        return nullptr;
      };

      std::istringstream in(text);
      std::string raw;
      std::string section;
      std::size_t line_no = 0;
      while (std::getline(in, raw))
      {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty())
          continue;
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (line.front() == '[')
        {
          if (line.back() != ']')
          {
            errors.push_back(where + "malformed section header '" + line + "'");
            continue;
          }
          section = trim(line.substr(1, line.size() - 2));
          bool known = section == "tests";
          for (const auto& f : table)
            known |= f.section == section;
          if (!known)
            errors.push_back(where + "unknown section [" + section + "]");
          continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
        {
          errors.push_back(where + "expected 'key = value', got '" + line + "'");
          continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty())
        {
          errors.push_back(where + "key '" + key + "' outside of any section");
          continue;
        }
        if (section == "tests")
        {
          std::istringstream parts(value);
          std::string src, tgt, extra;
          if (!(parts >> src >> tgt) || (parts >> extra))
            errors.push_back(where + "tests." + key + ": expected 'source-path target-path'");
          else
            config.tests.push_back({key, resolve_path(base_dir, src), resolve_path(base_dir, tgt)});
          continue;
        }
        const Field* f = find(section, key);
        if (!f)
        {
          errors.push_back(where + "unknown key '" + section + "." + key + "'");
          continue;
        }
        if (auto err = assign(*f, value, base_dir); !err.empty())
          errors.push_back(where + err);
      }

      for (const auto& [name, value] : env)
      {
        bool matched = false;
        for (const auto& f : table)
          if (name == "NMT_" + upper(f.section) + "_" + upper(f.key))
          {
            matched = true;
            if (auto err = assign(f, value, ""); !err.empty())
              errors.push_back("environment " + name + ": " + err);
          }
        if (!matched)
          errors.push_back("environment " + name + ": unknown override");
      }
      return config;
    }

  }

  PipelineConfig parse_config(const std::string& text,
                              const std::string& base_dir,
                              const std::map<std::string, std::string>& env)
  {
    std::vector<std::string> errors;
    auto config = parse_collect(text, base_dir, env, errors);
    if (!errors.empty())
      throw ConfigErrors(std::move(errors));
    return config;
  }

  PipelineConfig validate_config(const std::string& path, const std::map<std::string, std::string>& env)
  {
    std::ifstream in(path);
    if (!in)
      throw IoError("cannot read config file: " + path);
    std::stringstream text;
    text << in.rdbuf();
    const auto base = std::filesystem::path(path).parent_path().string();
    std::vector<std::string> errors;
    auto config = parse_collect(text.str(), base, env, errors);
    auto check = [&](const std::string& name, const std::string& file) {
      if (!file.empty() && !std::filesystem::is_regular_file(file))
        errors.push_back(name + ": file not found: " + file);
    };
    check("data.parallel_source", config.parallel_source);
    check("data.parallel_target", config.parallel_target);
    check("data.monolingual", config.monolingual);
    check("data.valid_source", config.valid_source);
    check("data.valid_target", config.valid_target);
    for (const auto& t : config.tests)
    {
      check("tests." + t.label, t.source);
      check("tests." + t.label, t.target);
    }
    if (!errors.empty())
      throw ConfigErrors(std::move(errors));
    return config;
  }

  std::map<std::string, std::string> environment_overrides()
  {
    std::map<std::string, std::string> out;
    for (char** e = environ; e && *e; ++e)
    {
      const std::string entry = *e;
      if (entry.rfind("NMT_", 0) != 0)
        continue;
      const auto eq = entry.find('=');
      if (eq != std::string::npos)
        out[entry.substr(0, eq)] = entry.substr(eq + 1);
    }
    return out;
  }

  void require_pipeline_inputs(const PipelineConfig& c)
  {
    std::vector<std::string> errors;
    auto need = [&](const std::string& name, const std::string& value) {
      if (value.empty())
        errors.push_back(name + ": required by the pipeline");
    };
    need("data.parallel_source", c.parallel_source);
    need("data.parallel_target", c.parallel_target);
    need("data.valid_source", c.valid_source);
    need("data.valid_target", c.valid_target);
    if (c.tests.empty())
      errors.push_back("tests: at least one test set is required");
    if (!c.hyperspec_exclude.empty())
    {
      bool found = false;
      for (const auto& t : c.tests)
        found |= t.label == c.hyperspec_exclude;
      if (!found)
        errors.push_back("hyperspec.exclude: no test set named '" + c.hyperspec_exclude + "'");
    }
    if (!errors.empty())
      throw ConfigErrors(std::move(errors));
  }

}
