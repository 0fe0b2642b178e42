#include "icsad/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <variant>

#include "icsad/error.hpp"
#include "icsad/model_io.hpp"

namespace icsad::config {
namespace {

using IntList = std::vector<std::int64_t>;
using Value = std::variant<std::string, std::int64_t, std::uint64_t, double, bool, IntList>;

struct Entry {
  Value value;
  std::size_t line;
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string line_key(std::size_t line) { return "line " + std::to_string(line); }

// Drops a trailing '#' comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && in_string) {
      ++i;
    } else if (s[i] == '"') {
      in_string = !in_string;
    } else if (s[i] == '#' && !in_string) {
      return s.substr(0, i);
    }
  }
  return s;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

Value parse_value(std::string_view raw, const std::string& key) {
  raw = trim(raw);
  if (raw.empty()) throw ConfigError(key, "missing value");
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') throw ConfigError(key, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      if (raw[i] == '\\') {
        if (i + 2 >= raw.size()) throw ConfigError(key, "dangling escape");
        const char c = raw[++i];
        if (c == 'n') out.push_back('\n');
        else if (c == 't') out.push_back('\t');
        else if (c == '"' || c == '\\') out.push_back(c);
        else throw ConfigError(key, std::string("unknown escape \\") + c);
      } else if (raw[i] == '"') {
        throw ConfigError(key, "unescaped quote in string");
      } else {
        out.push_back(raw[i]);
      }
    }
    return out;
  }
  if (raw == "true") return true;
  if (raw == "false") return false;
  if (raw.front() == '[') {
    if (raw.back() != ']') throw ConfigError(key, "unterminated list");
    IntList list;
    auto body = trim(raw.substr(1, raw.size() - 2));
    while (!body.empty()) {
      const auto comma = body.find(',');
      const auto item = trim(body.substr(0, comma));
      const auto v = parse_int(item);
      if (!v) throw ConfigError(key, "list items must be integers");
      list.push_back(*v);
      if (comma == std::string_view::npos) break;
      body = trim(body.substr(comma + 1));
      if (body.empty()) throw ConfigError(key, "trailing comma in list");
    }
    return list;
  }
  if (const auto i = parse_int(raw)) return *i;
  std::uint64_t big = 0;
  if (const auto [end, err] = std::from_chars(raw.data(), raw.data() + raw.size(), big);
      err == std::errc() && end == raw.data() + raw.size()) {
    return big;
  }
  double d = 0.0;
  const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), d);
  if (ec == std::errc() && ptr == raw.data() + raw.size() && std::isfinite(d)) return d;
  throw ConfigError(key, "cannot parse value '" + std::string(raw) + "'");
}

class Document {
 public:
  explicit Document(std::string_view text) {
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto eol = text.find('\n', pos);
      if (eol == std::string_view::npos) eol = text.size();
      const auto line = trim(strip_comment(text.substr(pos, eol - pos)));
      pos = eol + 1;
      ++line_no;
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError(line_key(line_no), "malformed section header");
        section = std::string(trim(line.substr(1, line.size() - 2)));
        if (section.empty()) throw ConfigError(line_key(line_no), "empty section name");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError(line_key(line_no), "expected key = value");
      const auto name = trim(line.substr(0, eq));
      if (name.empty()) throw ConfigError(line_key(line_no), "empty key");
      const std::string key = section.empty() ? std::string(name) : section + "." + std::string(name);
      if (entries_.count(key)) throw ConfigError(key, "duplicate key");
      entries_.emplace(key, Entry{parse_value(line.substr(eq + 1), key), line_no});
    }
  }

  // Consumes `key` if present; every key must be consumed exactly once.
  std::optional<Value> take(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    Value v = std::move(it->second.value);
    entries_.erase(it);
    return v;
  }

  void reject_leftovers() const {
    if (!entries_.empty()) throw ConfigError(entries_.begin()->first, "unknown key");
  }

 private:
  std::map<std::string, Entry> entries_;
};

std::string as_string(const Value& v, const std::string& key) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError(key, "expected a string");
}

double as_double(const Value& v, const std::string& key) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  throw ConfigError(key, "expected a number");
}

std::size_t as_count(const Value& v, const std::string& key) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) {
    if (*i < 0) throw ConfigError(key, "must be non-negative");
    return static_cast<std::size_t>(*i);
  }
  throw ConfigError(key, "expected an integer");
}

std::uint64_t as_seed(const Value& v, const std::string& key) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) {
    if (*i < 0) throw ConfigError(key, "must be non-negative");
    return static_cast<std::uint64_t>(*i);
  }
  if (const auto* u = std::get_if<std::uint64_t>(&v)) return *u;
  throw ConfigError(key, "expected an integer");
}

// "auto"/"off" style keys: a keyword string or a number.
std::optional<double> as_optional_double(const Value& v, const std::string& key,
                                         std::string_view keyword) {
  if (const auto* s = std::get_if<std::string>(&v)) {
    if (*s == keyword) return std::nullopt;
    throw ConfigError(key, "expected a number or \"" + std::string(keyword) + "\"");
  }
  return as_double(v, key);
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '\t') {
      out += "\\t";
      continue;
    }
    out.push_back(c);
  }
  return out + "\"";
}

std::string number(double v) {
  // Keep a decimal point or exponent so the value reads back as a float.
  std::string s = io::format_double(v);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

void validate(const RunConfig& c) {
  require(!c.dataset_path.empty(), "dataset.path", "is required");
  require(c.train_fraction > 0.0 && c.train_fraction < 1.0, "split.train_fraction",
          "must lie in (0, 1)");
  require(c.window_size >= 1, "window.size", "must be >= 1");
  require(c.hidden_dim >= 1, "autoencoder.hidden_dim", "must be >= 1");
  require(c.latent_dim >= 1, "autoencoder.latent_dim", "must be >= 1");
  require(c.learning_rate > 0.0, "autoencoder.learning_rate", "must be > 0");
  require(c.batch_size >= 1, "autoencoder.batch_size", "must be >= 1");
  require(!c.clip_norm || *c.clip_norm > 0.0, "autoencoder.clip_norm", "must be > 0 or \"off\"");
  require(c.nu > 0.0 && c.nu <= 1.0, "ocsvm.nu", "must lie in (0, 1]");
  require(!c.gamma || *c.gamma > 0.0, "ocsvm.gamma", "must be > 0 or \"auto\"");
  require(c.tolerance > 0.0, "ocsvm.tolerance", "must be > 0");
  require(c.max_iterations >= 1, "ocsvm.max_iterations", "must be >= 1");
  require(c.baselines >= 1, "explain.baselines", "must be >= 1");
  require(c.explain_samples >= 1, "explain.samples", "must be >= 1");
  require(!c.grid_sizes.empty(), "gridsearch.sizes", "must not be empty");
  for (auto s : c.grid_sizes) require(s >= 1, "gridsearch.sizes", "entries must be >= 1");
}

RunConfig parse_config(std::string_view text, const std::string& base_dir) {
  Document doc(text);
  RunConfig c;

  if (auto v = doc.take("dataset.path")) {
    std::filesystem::path p = as_string(*v, "dataset.path");
    if (p.empty()) throw ConfigError("dataset.path", "must not be empty");
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    c.dataset_path = std::filesystem::absolute(p).lexically_normal().string();
  } else {
    throw ConfigError("dataset.path", "missing required key");
  }
  if (auto v = doc.take("dataset.format")) {
    try {
      c.format = ingest::parse_format(as_string(*v, "dataset.format"));
    } catch (const InvalidArgument& e) {
      throw ConfigError("dataset.format", e.what());
    }
  }
  if (auto v = doc.take("seed")) c.seed = as_seed(*v, "seed");
  if (auto v = doc.take("split.train_fraction")) c.train_fraction = as_double(*v, "split.train_fraction");
  if (auto v = doc.take("window.size")) c.window_size = as_count(*v, "window.size");
  if (auto v = doc.take("autoencoder.hidden_dim")) c.hidden_dim = as_count(*v, "autoencoder.hidden_dim");
  if (auto v = doc.take("autoencoder.latent_dim")) c.latent_dim = as_count(*v, "autoencoder.latent_dim");
  if (auto v = doc.take("autoencoder.epochs")) c.epochs = as_count(*v, "autoencoder.epochs");
  if (auto v = doc.take("autoencoder.learning_rate")) c.learning_rate = as_double(*v, "autoencoder.learning_rate");
  if (auto v = doc.take("autoencoder.batch_size")) c.batch_size = as_count(*v, "autoencoder.batch_size");
  if (auto v = doc.take("autoencoder.clip_norm")) c.clip_norm = as_optional_double(*v, "autoencoder.clip_norm", "off");
  if (auto v = doc.take("ocsvm.nu")) c.nu = as_double(*v, "ocsvm.nu");
  if (auto v = doc.take("ocsvm.gamma")) c.gamma = as_optional_double(*v, "ocsvm.gamma", "auto");
  if (auto v = doc.take("ocsvm.tolerance")) c.tolerance = as_double(*v, "ocsvm.tolerance");
  if (auto v = doc.take("ocsvm.max_iterations")) c.max_iterations = as_count(*v, "ocsvm.max_iterations");
  if (auto v = doc.take("residual.mode")) {
    const auto s = as_string(*v, "residual.mode");
    try {
      c.residual_mode = pipeline::parse_residual_mode(s);
    } catch (const InvalidArgument&) {
      throw ConfigError("residual.mode", "expected \"aggregated\" or \"flattened\"");
    }
  }
  if (auto v = doc.take("explain.baselines")) c.baselines = as_count(*v, "explain.baselines");
  if (auto v = doc.take("explain.samples")) c.explain_samples = as_count(*v, "explain.samples");
  if (auto v = doc.take("explain.target")) {
    const auto s = as_string(*v, "explain.target");
    try {
      c.explain_target = pipeline::parse_explain_target(s);
    } catch (const InvalidArgument&) {
      throw ConfigError("explain.target", "expected \"surrogate\" or \"flattened\"");
    }
  }
  if (auto v = doc.take("explain.output_index")) c.explain_output_index = as_count(*v, "explain.output_index");
  if (auto v = doc.take("gridsearch.sizes")) {
    const auto* list = std::get_if<IntList>(&*v);
    if (!list) throw ConfigError("gridsearch.sizes", "expected a list of integers");
    c.grid_sizes.clear();
    for (auto s : *list) {
      if (s < 1) throw ConfigError("gridsearch.sizes", "entries must be >= 1");
      c.grid_sizes.push_back(static_cast<std::size_t>(s));
    }
  }
  if (auto v = doc.take("output.dir")) c.output_dir = as_string(*v, "output.dir");
  doc.reject_leftovers();
  validate(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  const auto base = std::filesystem::path(path).parent_path();
  return parse_config(text.str(), base.empty() ? "." : base.string());
}

std::string echo(const RunConfig& c) {
  std::ostringstream out;
  out << "seed = " << c.seed << "\n\n";
  out << "[dataset]\npath = " << quote(c.dataset_path) << "\nformat = "
      << (c.format == ingest::Format::kCsv ? "\"csv\"" : "\"arff\"") << "\n\n";
  out << "[split]\ntrain_fraction = " << number(c.train_fraction) << "\n\n";
  out << "[window]\nsize = " << c.window_size << "\n\n";
  out << "[autoencoder]\nhidden_dim = " << c.hidden_dim << "\nlatent_dim = " << c.latent_dim
      << "\nepochs = " << c.epochs << "\nlearning_rate = " << number(c.learning_rate)
      << "\nbatch_size = " << c.batch_size
      << "\nclip_norm = " << (c.clip_norm ? number(*c.clip_norm) : "\"off\"") << "\n\n";
  out << "[ocsvm]\nnu = " << number(c.nu)
      << "\ngamma = " << (c.gamma ? number(*c.gamma) : "\"auto\"")
      << "\ntolerance = " << number(c.tolerance) << "\nmax_iterations = " << c.max_iterations
      << "\n\n";
  out << "[residual]\nmode = \"" << pipeline::to_string(c.residual_mode) << "\"\n\n";
  out << "[explain]\nbaselines = " << c.baselines << "\nsamples = " << c.explain_samples
      << "\ntarget = \"" << pipeline::to_string(c.explain_target) << "\"\noutput_index = "
      << c.explain_output_index << "\n\n";
  out << "[gridsearch]\nsizes = [";
  for (std::size_t i = 0; i < c.grid_sizes.size(); ++i) out << (i ? ", " : "") << c.grid_sizes[i];
  out << "]\n";
  if (!c.output_dir.empty()) out << "\n[output]\ndir = " << quote(c.output_dir) << "\n";
  return out.str();
}

pipeline::PipelineParams to_pipeline_params(const RunConfig& c) {
  pipeline::PipelineParams p;
  p.window_length = c.window_size;
  p.hidden_dim = c.hidden_dim;
  p.latent_dim = c.latent_dim;
  p.epochs = c.epochs;
  p.learning_rate = c.learning_rate;
  p.batch_size = c.batch_size;
  p.clip_norm = c.clip_norm;
  p.ocsvm.nu = c.nu;
  p.ocsvm.gamma = c.gamma;
  p.ocsvm.tolerance = c.tolerance;
  p.ocsvm.max_iterations = c.max_iterations;
  p.residual_mode = c.residual_mode;
  p.baseline_count = c.baselines;
  p.explain_samples = c.explain_samples;
  p.explain_target = c.explain_target;
  p.explain_output_index = c.explain_output_index;
  p.train_fraction = c.train_fraction;
  p.seed = c.seed;
  return p;
}

}  // namespace icsad::config
