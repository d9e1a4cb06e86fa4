#pragma once

// Experiment configuration (YAML) and CSV output with a reproducibility header.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "anosov/expression.hpp"
#include "anosov/metric.hpp"
#include "anosov/profile.hpp"
#include "anosov/pullback.hpp"

namespace anosov::io {

inline constexpr const char* kVersion = "1.0.0";

/// Configuration problem tied to a dotted field path and, when known, a 1-based line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, int line, const std::string& message)
      : std::runtime_error(format(field, line, message)), field_(std::move(field)), line_(line) {}
  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  static std::string format(const std::string& field, int line, const std::string& message) {
    std::string s = "config field '" + field + "'";
    if (line > 0) s += " (line " + std::to_string(line) + ")";
    return s + ": " + message;
  }
  std::string field_;
  int line_;
};

inline int line_of(const YAML::Node& n) { return n && n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

/// A mapping node together with its dotted path, for diagnostics.
class Section {
 public:
  Section() = default;
  Section(YAML::Node node, std::string path, std::filesystem::path dir = {})
      : node_(std::move(node)), path_(std::move(path)), dir_(std::move(dir)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(path_, line_of(node_), "expected a mapping");
  }

  bool has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const YAML::Node& node() const { return node_; }
  const std::string& path() const { return path_; }
  const std::filesystem::path& dir() const { return dir_; }
  int line() const { return line_of(node_); }

  Section child(const std::string& key) const {
    if (!has(key)) return Section(YAML::Node(YAML::NodeType::Null), field(key), dir_);
    return Section(node_[key], field(key), dir_);
  }

  template <class T>
  T get(const std::string& key) const {
    if (!has(key)) throw ConfigError(field(key), line(), "required field is missing");
    return as<T>(node_[key], field(key));
  }

  template <class T>
  T get(const std::string& key, T fallback) const {
    return has(key) ? as<T>(node_[key], field(key)) : fallback;
  }

  double positive(const std::string& key, double fallback) const {
    const double v = get<double>(key, fallback);
    if (!(v > 0.0)) throw ConfigError(field(key), line_at(key), "must be positive");
    return v;
  }

  long count(const std::string& key, long fallback, long min = 1) const {
    const long v = get<long>(key, fallback);
    if (v < min) throw ConfigError(field(key), line_at(key), "must be at least " + std::to_string(min));
    return v;
  }

  int line_at(const std::string& key) const { return has(key) ? line_of(node_[key]) : line(); }

  /// Rejects keys outside `allowed`, catching misspelled options.
  void only(std::initializer_list<const char*> allowed) const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const std::string k = kv.first.as<std::string>();
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      if (!ok) throw ConfigError(field(k), line_of(kv.first), "unknown field");
    }
  }

 private:
  template <class T>
  static T as(const YAML::Node& n, const std::string& field) {
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(field, line_of(n), "cannot read value '" + scalar(n) + "' as " + type_name<T>());
    }
  }
  static std::string scalar(const YAML::Node& n) { return n.IsScalar() ? n.Scalar() : "<non-scalar>"; }
  template <class T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, double>) return "a number";
    else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) return "an integer";
    else if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else return "the expected type";
  }

  YAML::Node node_;
  std::string path_;
  std::filesystem::path dir_;
};

/// Loaded configuration file: root section, raw text, and its hash.
struct ConfigFile {
  Section root;
  std::string text;
  std::uint64_t hash = 0;
  std::filesystem::path path;
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string read_text(const std::filesystem::path& p, const std::string& field) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError(field, 0, "cannot open file '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline YAML::Node parse_yaml(const std::string& text, const std::string& field) {
  try {
    return YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(field, e.mark.line + 1, "YAML syntax error: " + e.msg);
  }
}

inline ConfigFile load_config(const std::filesystem::path& path) {
  ConfigFile c;
  c.path = path;
  c.text = read_text(path, "config");
  c.hash = fnv1a(c.text);
  YAML::Node n = parse_yaml(c.text, "config");
  if (!n.IsMap()) throw ConfigError("config", line_of(n), "top level must be a mapping");
  c.root = Section(n, "", path.parent_path());
  return c;
}

namespace detail {

inline Expression expression(const Section& s, const std::string& key, std::vector<std::string> vars) {
  const std::string text = s.get<std::string>(key);
  try {
    return Expression::parse(text, std::move(vars));
  } catch (const ExpressionError& e) {
    throw ConfigError(s.field(key), s.line_at(key), e.what());
  }
}

inline Profile warped_profile(const Section& s) {
  if (s.has("profile") == s.has("samples"))
    throw ConfigError(s.field("profile"), s.line(), "give exactly one of 'profile' or 'samples'");
  if (s.has("profile")) return Profile::from_expression(expression(s, "profile", {"t"}));
  const Section smp = s.child("samples");
  smp.only({"t0", "dt", "values"});
  auto values = smp.get<std::vector<double>>("values");
  if (values.size() < 8) throw ConfigError(smp.field("values"), smp.line_at("values"), "need at least 8 samples");
  return Profile::from_samples(std::move(values), smp.get<double>("t0"), smp.positive("dt", 0.0));
}

inline Diffeomorphism map_of(const Section& s, const Chart& chart) {
  s.only({"map", "a"});
  const std::string kind = s.get<std::string>("map");
  const double a = s.get<double>("a");
  if (kind == "identity") return Diffeomorphism::identity();
  if (kind == "twist") {
    if (chart.kind == ChartKind::Disk) return Diffeomorphism::disk_twist(a, chart.radius);
    return Diffeomorphism::collar_twist(a, chart.t_min, chart.t_max);
  }
  throw ConfigError(s.field("map"), s.line_at("map"), "unknown map '" + kind + "' (identity, twist)");
}

}  // namespace detail

/// Metric from a `metric:` mapping. Kinds: warped, euclidean_disk,
/// conformal_disk, spherical_cap; `file: PATH` loads the mapping from another
/// YAML file; an optional `pullback:` block pulls the result back by a
/// boundary-fixing map.
inline Metric parse_metric(const Section& s) {
  if (!s.node() || s.node().IsNull()) throw ConfigError(s.path(), s.line(), "metric definition is missing");
  if (s.has("file")) {
    s.only({"file"});
    const std::filesystem::path p = s.dir() / s.get<std::string>("file");
    if (!std::filesystem::exists(p))
      throw ConfigError(s.field("file"), s.line_at("file"), "metric file '" + p.string() + "' does not exist");
    YAML::Node n = parse_yaml(read_text(p, s.field("file")), s.field("file"));
    if (n.IsMap() && n["metric"]) n = n["metric"];
    return parse_metric(Section(n, s.field("file") + ":metric", p.parent_path()));
  }
  const std::string kind = s.get<std::string>("kind");
  Metric m;
  try {
    if (kind == "warped") {
      s.only({"kind", "profile", "samples", "t_min", "t_max", "period", "pullback"});
      WarpedMetric w{detail::warped_profile(s), s.get<double>("t_min"), s.get<double>("t_max"),
                     s.positive("period", 2.0 * std::numbers::pi)};
      if (!(w.t_max > w.t_min)) throw ConfigError(s.field("t_max"), s.line_at("t_max"), "must exceed t_min");
      m = w.metric("warped");
    } else if (kind == "euclidean_disk") {
      s.only({"kind", "radius", "pullback"});
      m = Metric::euclidean_disk(s.positive("radius", 1.0));
    } else if (kind == "conformal_disk") {
      s.only({"kind", "phi", "radius", "pullback"});
      const Expression phi = detail::expression(s, "phi", {"x", "y"});
      m = Metric::conformal_disk([phi](const auto& x, const auto& y) { return phi(x, y); }, s.positive("radius", 1.0));
    } else if (kind == "spherical_cap") {
      s.only({"kind", "c", "pullback"});
      m = Metric::spherical_cap(s.positive("c", 1.0));
    } else {
      throw ConfigError(s.field("kind"), s.line_at("kind"),
                        "unknown metric kind '" + kind + "' (warped, euclidean_disk, conformal_disk, spherical_cap)");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(s.path(), s.line(), e.what());
  }
  if (s.has("pullback")) {
    const Section pb = s.child("pullback");
    try {
      m = pullback(m, detail::map_of(pb, m.chart()));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(pb.path(), pb.line(), e.what());
    }
  }
  return m;
}

/// Shortest round-trip decimal form.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Header fields shared by every output file.
struct RunInfo {
  std::string command;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::string config_path;

  std::string hash_hex() const {
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016" PRIx64, config_hash);
    return std::string("fnv1a64:") + hash;
  }

  std::string header(const std::string& comment = "# ") const {
    std::ostringstream os;
    os << comment << "anosov " << kVersion << "\n"
       << comment << "command: " << command << "\n"
       << comment << "seed: " << seed << "\n"
       << comment << "config_hash: " << hash_hex() << "\n";
    return os.str();
  }
};

/// CSV file: comment header, column row, then rows of cells.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const RunInfo& info, std::vector<std::string> columns,
            const std::vector<std::string>& notes = {})
      : out_(path, std::ios::binary), columns_(columns.size()) {
    if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
    out_ << info.header();
    for (const auto& n : notes) out_ << "# " << n << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
  }

  class Row {
   public:
    explicit Row(CsvWriter& w) : w_(w) {}
    Row& operator<<(double v) { return cell(fmt(v)); }
    Row& operator<<(int v) { return cell(std::to_string(v)); }
    Row& operator<<(long v) { return cell(std::to_string(v)); }
    Row& operator<<(std::size_t v) { return cell(std::to_string(v)); }
    Row& operator<<(bool v) { return cell(v ? "1" : "0"); }
    Row& operator<<(const std::string& v) { return cell(quote(v)); }
    Row& operator<<(const char* v) { return cell(quote(v)); }
    ~Row() noexcept(false) {
      if (n_ != w_.columns_) throw std::logic_error("CSV row has wrong width");
      w_.out_ << "\n";
    }

   private:
    Row& cell(const std::string& s) {
      w_.out_ << (n_++ ? "," : "") << s;
      return *this;
    }
    static std::string quote(const std::string& s) {
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string q = "\"";
      for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      return q + "\"";
    }
    CsvWriter& w_;
    std::size_t n_ = 0;
  };

  Row row() { return Row(*this); }

 private:
  std::ofstream out_;
  std::size_t columns_;
};

}  // namespace anosov::io
