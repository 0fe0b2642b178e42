#include "icsad/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "icsad/error.hpp"

namespace icsad::ingest {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return std::string(s);
}

// Comma split honouring single or double quotes; no escapes inside quotes.
std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  char quote = 0;
  for (char c : line) {
    if (quote) {
      if (c == quote) quote = 0;
      current.push_back(c);
    } else if (c == '"' || c == '\'') {
      quote = c;
      current.push_back(c);
    } else if (c == ',') {
      fields.push_back(unquote(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(unquote(current));
  return fields;
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

bool is_label_name(const std::string& lowered) {
  return lowered == "result" || lowered == "label" || lowered == "binary result";
}

// Multi-class companions of the binary label in the public gas pipeline
// distribution. Keeping them as features would leak the answer.
bool is_auxiliary_label_name(const std::string& lowered) {
  return lowered == "categorized result" || lowered == "specific result";
}

enum class ColumnRole { kFeature, kLabel, kDropped };

struct ColumnPlan {
  std::vector<ColumnRole> roles;
  std::vector<std::string> feature_names;
};

ColumnPlan plan_columns(const std::vector<std::string>& names, std::size_t line) {
  ColumnPlan plan;
  bool have_label = false;
  for (const auto& name : names) {
    const std::string key = lower(trim(name));
    if (key == "time") {
      plan.roles.push_back(ColumnRole::kDropped);
    } else if (is_label_name(key)) {
      if (have_label) throw ParseError("more than one label column ('" + name + "')", line);
      have_label = true;
      plan.roles.push_back(ColumnRole::kLabel);
    } else if (is_auxiliary_label_name(key)) {
      plan.roles.push_back(ColumnRole::kDropped);
    } else {
      plan.roles.push_back(ColumnRole::kFeature);
      plan.feature_names.push_back(std::string(trim(name)));
    }
  }
  if (plan.feature_names.empty()) throw ParseError("no feature columns", line);
  return plan;
}

int parse_label(std::string_view raw, std::size_t line) {
  const std::string key = lower(trim(raw));
  if (key == "normal") return 0;
  if (key == "attack" || key == "anomaly") return 1;
  if (const auto v = to_double(key)) {
    if (*v == 0.0) return 0;
    if (*v == 1.0) return 1;
  }
  throw ParseError("label value '" + std::string(raw) + "' is not 0/1", line);
}

class TableBuilder {
 public:
  explicit TableBuilder(ColumnPlan plan) : plan_(std::move(plan)) {
    has_label_ = std::find(plan_.roles.begin(), plan_.roles.end(), ColumnRole::kLabel) !=
                 plan_.roles.end();
  }

  void add_row(const std::vector<std::string>& fields, std::size_t line) {
    if (fields.size() != plan_.roles.size()) {
      throw ParseError("expected " + std::to_string(plan_.roles.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line);
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      switch (plan_.roles[c]) {
        case ColumnRole::kDropped:
          break;
        case ColumnRole::kLabel:
          labels_.push_back(parse_label(fields[c], line));
          break;
        case ColumnRole::kFeature: {
          const auto v = to_double(fields[c]);
          if (!v) throw ParseError("non-numeric value '" + fields[c] + "'", line);
          values_.push_back(*v);
          break;
        }
      }
    }
    ++n_;
  }

  RecordTable finish() && {
    if (n_ == 0) throw ParseError("no data rows");
    RecordTable table;
    const auto m = plan_.feature_names.size();
    table.feature_names = std::move(plan_.feature_names);
    table.rows = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                Eigen::RowMajor>>(
        values_.data(), static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(m));
    if (has_label_) table.labels = std::move(labels_);
    return table;
  }

 private:
  ColumnPlan plan_;
  bool has_label_ = false;
  std::size_t n_ = 0;
  std::vector<double> values_;
  std::vector<int> labels_;
};

RecordTable parse_csv(std::string_view raw) {
  std::optional<TableBuilder> builder;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    auto eol = raw.find('\n', pos);
    if (eol == std::string_view::npos) eol = raw.size();
    const auto line = trim(raw.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (!builder) {
      builder.emplace(plan_columns(fields, line_no));
    } else {
      builder->add_row(fields, line_no);
    }
  }
  if (!builder) throw ParseError("empty input");
  return std::move(*builder).finish();
}

// Splits "@attribute <name> <type>" where the name may be quoted.
std::pair<std::string, std::string> split_attribute(std::string_view rest, std::size_t line) {
  rest = trim(rest);
  if (rest.empty()) throw ParseError("attribute without a name", line);
  std::size_t name_end;
  if (rest.front() == '\'' || rest.front() == '"') {
    name_end = rest.find(rest.front(), 1);
    if (name_end == std::string_view::npos) throw ParseError("unterminated attribute name", line);
    ++name_end;
  } else {
    name_end = rest.find_first_of(" \t");
    if (name_end == std::string_view::npos) throw ParseError("attribute without a type", line);
  }
  return {unquote(rest.substr(0, name_end)), lower(trim(rest.substr(name_end)))};
}

RecordTable parse_arff(std::string_view raw) {
  std::vector<std::string> names;
  std::optional<TableBuilder> builder;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool in_data = false;
  while (pos < raw.size()) {
    auto eol = raw.find('\n', pos);
    if (eol == std::string_view::npos) eol = raw.size();
    const auto line = trim(raw.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line.front() == '%') continue;

    if (!in_data) {
      const std::string head = lower(line.substr(0, std::min<std::size_t>(line.size(), 10)));
      if (head.rfind("@relation", 0) == 0) continue;
      if (head.rfind("@attribute", 0) == 0) {
        auto [name, type] = split_attribute(line.substr(10), line_no);
        const bool nominal = !type.empty() && type.front() == '{';
        const bool numeric = type == "numeric" || type == "real" || type == "integer";
        if (!nominal && !numeric) {
          throw ParseError("unsupported attribute type '" + type + "'", line_no);
        }
        names.push_back(std::move(name));
        continue;
      }
      if (head.rfind("@data", 0) == 0) {
        if (names.empty()) throw ParseError("@data before any @attribute", line_no);
        builder.emplace(plan_columns(names, line_no));
        in_data = true;
        continue;
      }
      throw ParseError("unexpected header line", line_no);
    }
    if (line.front() == '{') throw ParseError("sparse ARFF rows are not supported", line_no);
    builder->add_row(split_fields(line), line_no);
  }
  if (!builder) throw ParseError(line_no == 0 ? "empty input" : "missing @data section");
  return std::move(*builder).finish();
}

void require_same_width(const Scaler& scaler, const RecordTable& table) {
  if (scaler.num_features() != table.num_features() ||
      static_cast<std::size_t>(table.rows.cols()) != scaler.num_features()) {
    throw InvalidArgument("scaler has " + std::to_string(scaler.num_features()) +
                          " features, table has " + std::to_string(table.num_features()));
  }
}

}  // namespace

Format parse_format(std::string_view tag) {
  const auto key = lower(tag);
  if (key == "csv") return Format::kCsv;
  if (key == "arff") return Format::kArff;
  throw InvalidArgument("unknown format '" + std::string(tag) + "' (expected csv or arff)");
}

RecordTable RecordTable::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > num_rows()) throw InvalidArgument("slice out of range");
  RecordTable out;
  out.feature_names = feature_names;
  out.rows = rows.middleRows(static_cast<Eigen::Index>(begin),
                             static_cast<Eigen::Index>(end - begin));
  if (labels) {
    out.labels = std::vector<int>(labels->begin() + static_cast<std::ptrdiff_t>(begin),
                                  labels->begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

RecordTable parse_dataset(std::string_view raw, Format format) {
  if (trim(raw).empty()) throw ParseError("empty input");
  return format == Format::kCsv ? parse_csv(raw) : parse_arff(raw);
}

RecordTable load_dataset(const std::string& path, Format format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str(), format);
}

Scaler fit_scaler(const RecordTable& table) {
  if (table.num_rows() == 0) throw InvalidArgument("cannot fit a scaler on an empty table");
  return Scaler{table.rows.colwise().minCoeff().transpose(),
                table.rows.colwise().maxCoeff().transpose()};
}

RecordTable apply_scaler(const Scaler& scaler, const RecordTable& table) {
  require_same_width(scaler, table);
  RecordTable out = table;
  for (Eigen::Index k = 0; k < out.rows.cols(); ++k) {
    const double span = scaler.maximum[k] - scaler.minimum[k];
    if (span > 0.0) {
      out.rows.col(k) = (table.rows.col(k).array() - scaler.minimum[k]) / span;
    } else {
      out.rows.col(k).setZero();
    }
  }
  return out;
}

RecordTable invert_scaler(const Scaler& scaler, const RecordTable& table) {
  require_same_width(scaler, table);
  RecordTable out = table;
  for (Eigen::Index k = 0; k < out.rows.cols(); ++k) {
    const double span = scaler.maximum[k] - scaler.minimum[k];
    out.rows.col(k) = table.rows.col(k).array() * span + scaler.minimum[k];
  }
  return out;
}

std::vector<Window> make_windows(const RecordTable& table, std::size_t length) {
  const auto n = table.num_rows();
  if (length < 1 || length > n) {
    throw InvalidArgument("window length " + std::to_string(length) + " outside [1, " +
                          std::to_string(n) + "]");
  }
  // Prefix counts of attack rows make the any-attack label O(1) per window.
  std::vector<std::size_t> attacks(n + 1, 0);
  if (table.labels) {
    for (std::size_t i = 0; i < n; ++i) attacks[i + 1] = attacks[i] + ((*table.labels)[i] != 0);
  }
  std::vector<Window> windows;
  windows.reserve(n - length + 1);
  for (std::size_t i = 0; i + length <= n; ++i) {
    Window w;
    w.start_index = i;
    w.values = table.rows.middleRows(static_cast<Eigen::Index>(i),
                                     static_cast<Eigen::Index>(length));
    w.label = attacks[i + length] > attacks[i] ? 1 : 0;
    windows.push_back(std::move(w));
  }
  return windows;
}

std::pair<RecordTable, RecordTable> split_train_test(const RecordTable& table,
                                                     double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train fraction must lie in (0, 1)");
  }
  const auto n = table.num_rows();
  const auto n_train =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
  return {table.slice(0, n_train), table.slice(n_train, n)};
}

RecordTable normal_rows(const RecordTable& table) {
  if (!table.labels) return table;
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < table.num_rows(); ++i) {
    if ((*table.labels)[i] == 0) keep.push_back(static_cast<Eigen::Index>(i));
  }
  RecordTable out;
  out.feature_names = table.feature_names;
  out.rows = table.rows(keep, Eigen::all);
  out.labels = std::vector<int>(keep.size(), 0);
  return out;
}

std::vector<Window> normal_windows(const std::vector<Window>& windows) {
  std::vector<Window> out;
  std::copy_if(windows.begin(), windows.end(), std::back_inserter(out),
               [](const Window& w) { return w.label == 0; });
  return out;
}

}  // namespace icsad::ingest
