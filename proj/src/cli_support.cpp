#include "omlclient/cli_support.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "omlclient/arff.hpp"

namespace oml::cli {

namespace fs = std::filesystem;

namespace {

// Splits on commas that are not nested inside parentheses.
std::vector<std::string> split_top_level(const std::string& s) {
  std::vector<std::string> out;
  int depth = 0;
  std::string current;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  out.push_back(current);
  return out;
}

std::size_t find_top_level_colon(const std::string& s) {
  int depth = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')') --depth;
    if (s[i] == ':' && depth == 0) return i;
  }
  return std::string::npos;
}

std::string strip_ref_prefix(const std::string& name) {
  if (name.rfind("ref.", 0) == 0) return name.substr(4);
  return name;
}

struct RawSpec {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> params;
  std::vector<RawSpec> children;
};

RawSpec parse_raw(const std::string& text);

RawSpec parse_child(const std::string& token) {
  if (!token.empty() && token.front() == '(' && token.back() == ')')
    return parse_raw(token.substr(1, token.size() - 2));
  RawSpec child;
  child.kind = strip_ref_prefix(token);
  return child;
}

RawSpec parse_raw(const std::string& text) {
  if (text.empty()) throw ext::InvalidParameterError("empty model spec");
  std::size_t colon = find_top_level_colon(text);
  std::string head = text.substr(0, colon);
  RawSpec spec;
  std::vector<std::string> head_tokens = split_top_level(head);
  spec.kind = strip_ref_prefix(head_tokens.front());
  for (std::size_t i = 1; i < head_tokens.size(); ++i) {
    auto eq = head_tokens[i].find('=');
    if (eq == std::string::npos || eq == 0)
      throw ext::InvalidParameterError("expected key=value, got '" + head_tokens[i] +
                                       "'");
    spec.params.emplace_back(head_tokens[i].substr(0, eq),
                             head_tokens[i].substr(eq + 1));
  }
  if (colon != std::string::npos) {
    for (const std::string& token : split_top_level(text.substr(colon + 1))) {
      if (token.empty()) throw ext::InvalidParameterError("empty child in model spec");
      auto eq = token.find('=');
      bool is_param = eq != std::string::npos && token.front() != '(' &&
                      token.find('.') > eq;  // "key=value", not a name
      if (is_param) {
        if (spec.children.empty())
          throw ext::InvalidParameterError("parameter '" + token +
                                           "' has no preceding child");
        spec.children.back().params.emplace_back(token.substr(0, eq),
                                                 token.substr(eq + 1));
      } else {
        spec.children.push_back(parse_child(token));
      }
    }
  }
  return spec;
}

ext::ModelSpec to_model(const RawSpec& raw) {
  std::vector<ext::ModelSpec> children;
  for (const RawSpec& c : raw.children) children.push_back(to_model(c));
  return ext::make_spec(raw.kind, raw.params, std::move(children));
}

}  // namespace

ext::ModelSpec parse_model_spec(const std::string& text) {
  return to_model(parse_raw(text));
}

Config load_config(const std::optional<fs::path>& config_file) {
  Config cfg;
  fs::path path;
  if (config_file) {
    path = *config_file;
  } else if (const char* home = std::getenv("HOME"); home && *home) {
    path = fs::path(home) / ".omlclient" / "config";
  }
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      auto last = s.find_last_not_of(" \t\r");
      s.erase(last == std::string::npos ? 0 : last + 1);
      return s;
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "server") cfg.server = value;
    else if (key == "apikey") cfg.apikey = value;
    else if (key == "cachedir") cfg.cachedir = value;
  }
  if (const char* v = std::getenv("OMLCLIENT_SERVER"); v && *v) cfg.server = v;
  if (const char* v = std::getenv("OMLCLIENT_APIKEY"); v && *v) cfg.apikey = v;
  if (const char* v = std::getenv("OMLCLIENT_CACHEDIR"); v && *v) cfg.cachedir = v;
  return cfg;
}

Heatmap bin_heatmap(const std::vector<double>& xs, const std::vector<double>& ys,
                    const std::vector<double>& values, int n) {
  Heatmap map;
  map.nx = map.ny = n;
  map.sums.assign(static_cast<std::size_t>(n) * n, 0.0);
  map.counts.assign(static_cast<std::size_t>(n) * n, 0);
  if (xs.empty()) return map;
  map.xmin = *std::min_element(xs.begin(), xs.end());
  map.xmax = *std::max_element(xs.begin(), xs.end());
  map.ymin = *std::min_element(ys.begin(), ys.end());
  map.ymax = *std::max_element(ys.begin(), ys.end());
  auto cell = [n](double v, double lo, double hi) {
    if (hi == lo) return 0;
    int c = static_cast<int>((v - lo) / (hi - lo) * n);
    return std::min(c, n - 1);
  };
  for (std::size_t i = 0; i < xs.size(); ++i) {
    int cx = cell(xs[i], map.xmin, map.xmax);
    int cy = cell(ys[i], map.ymin, map.ymax);
    map.sums[static_cast<std::size_t>(cy) * n + cx] += values[i];
    ++map.counts[static_cast<std::size_t>(cy) * n + cx];
  }
  return map;
}

std::string render_svg(const Heatmap& map) {
  // One rect per non-empty cell, greyscale by the normalized cell mean.
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int y = 0; y < map.ny; ++y)
    for (int x = 0; x < map.nx; ++x)
      if (map.count(x, y) > 0) {
        lo = std::min(lo, map.mean(x, y));
        hi = std::max(hi, map.mean(x, y));
      }
  const int cell_px = 20;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
     << map.nx * cell_px << "\" height=\"" << map.ny * cell_px << "\">\n";
  for (int y = 0; y < map.ny; ++y) {
    for (int x = 0; x < map.nx; ++x) {
      if (map.count(x, y) == 0) continue;
      double norm = hi > lo ? (map.mean(x, y) - lo) / (hi - lo) : 1.0;
      int shade = static_cast<int>(norm * 255.0 + 0.5);
      // y axis points up: row 0 at the bottom
      os << "  <rect x=\"" << x * cell_px << "\" y=\""
         << (map.ny - 1 - y) * cell_px << "\" width=\"" << cell_px
         << "\" height=\"" << cell_px << "\" fill=\"rgb(" << shade << ","
         << shade / 4 << "," << 255 - shade << ")\" data-mean=\""
         << arff::format_double(map.mean(x, y)) << "\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::string csv_escape(const std::string& field) {
  bool quote = field.find_first_of(",\"\n\r") != std::string::npos;
  if (!quote) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

std::size_t export_evaluations(const protocol::EvaluationTable& table,
                               const std::vector<std::string>& log_cols,
                               bool natural_log, const fs::path& out) {
  std::vector<std::size_t> log_idx;
  for (const std::string& col : log_cols) {
    auto it = std::find(table.columns.begin(), table.columns.end(), col);
    if (it == table.columns.end())
      throw ExportError("log column not in table: " + col);
    log_idx.push_back(static_cast<std::size_t>(it - table.columns.begin()));
  }
  auto value_idx = std::find(table.columns.begin(), table.columns.end(), "value") -
                   table.columns.begin();

  std::vector<std::vector<std::string>> rows = table.rows;
  std::vector<std::vector<double>> log_values(log_idx.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < log_idx.size(); ++k) {
      std::string& cell = rows[r][log_idx[k]];
      double v = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || v <= 0.0)
        throw ExportError("non-positive or unparseable value '" + cell +
                          "' in row " + std::to_string(r) + ", column " +
                          table.columns[log_idx[k]]);
      double lv = natural_log ? std::log(v) : std::log10(v);
      cell = arff::format_double(lv);
      log_values[k].push_back(lv);
    }
  }

  std::ofstream csv(out, std::ios::binary | std::ios::trunc);
  if (!csv) throw ExportError("cannot write " + out.string());
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) csv << ',';
    csv << csv_escape(table.columns[c]);
  }
  csv << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) csv << ',';
      csv << csv_escape(row[c]);
    }
    csv << '\n';
  }

  if (log_idx.size() == 2) {
    std::vector<double> metric;
    for (const auto& row : table.rows) {
      const std::string& cell = row[static_cast<std::size_t>(value_idx)];
      double v = 0;
      std::from_chars(cell.data(), cell.data() + cell.size(), v);
      metric.push_back(v);
    }
    Heatmap map = bin_heatmap(log_values[0], log_values[1], metric, 20);
    fs::path svg_path = out;
    svg_path += ".svg";
    std::ofstream svg(svg_path, std::ios::binary | std::ios::trunc);
    svg << render_svg(map);
  }
  return rows.size();
}

}  // namespace oml::cli
