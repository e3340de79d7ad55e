#include "omlclient/arff.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

namespace oml::arff {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

struct LineCursor {
  std::string_view line;
  std::size_t pos = 0;
  int line_no = 1;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(line_no, static_cast<int>(pos) + 1, msg);
  }
  bool at_end() const { return pos >= line.size(); }
  char peek() const { return line[pos]; }
  void skip_ws() {
    while (!at_end() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
  }
};

// Reads one token: quoted ('...' or "...") with backslash escapes, or a bare
// token ending at any of `stops`. `was_quoted` distinguishes the bare missing
// marker `?` from the literal one-character string '?'.
std::string read_token(LineCursor& cur, std::string_view stops,
                       bool* was_quoted = nullptr) {
  cur.skip_ws();
  if (cur.at_end()) cur.fail("unexpected end of line");
  if (was_quoted) *was_quoted = false;
  std::string out;
  char c = cur.peek();
  if (c == '\'' || c == '"') {
    if (was_quoted) *was_quoted = true;
    char quote = c;
    ++cur.pos;
    while (true) {
      if (cur.at_end()) cur.fail("unterminated quoted string");
      char d = cur.line[cur.pos++];
      if (d == '\\') {
        if (cur.at_end()) cur.fail("dangling escape");
        char e = cur.line[cur.pos++];
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          default: out.push_back(e); break;
        }
      } else if (d == quote) {
        return out;
      } else {
        out.push_back(d);
      }
    }
  }
  while (!cur.at_end()) {
    char d = cur.peek();
    if (d == ' ' || d == '\t' || stops.find(d) != std::string_view::npos) break;
    out.push_back(d);
    ++cur.pos;
  }
  if (out.empty()) cur.fail("empty token");
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end) {
    // from_chars rejects leading '+'; ARFF data in the wild uses it.
    if (!s.empty() && s[0] == '+') return parse_double(s.substr(1), out);
    return false;
  }
  return true;
}

Cell make_cell(const std::string& raw, bool quoted, const ArffAttribute& attr,
               const LineCursor& cur) {
  if (!quoted && raw == "?") return Missing{};
  switch (attr.kind) {
    case FeatureKind::Numeric: {
      double v;
      if (!parse_double(raw, v))
        cur.fail("non-numeric value '" + raw + "' in numeric attribute '" +
                 attr.name + "'");
      return v;
    }
    case FeatureKind::Nominal: {
      if (std::find(attr.nominal_values.begin(), attr.nominal_values.end(), raw) ==
          attr.nominal_values.end())
        cur.fail("value '" + raw + "' not in nominal domain of '" + attr.name + "'");
      return raw;
    }
    case FeatureKind::String:
    case FeatureKind::Date:
      return raw;
  }
  cur.fail("unreachable attribute kind");
}

Cell sparse_default(const ArffAttribute& attr) {
  switch (attr.kind) {
    case FeatureKind::Numeric: return 0.0;
    case FeatureKind::Nominal: return attr.nominal_values.front();
    default: return std::string();
  }
}

ArffAttribute parse_attribute_decl(LineCursor& cur) {
  ArffAttribute attr;
  attr.name = read_token(cur, ",{}");
  cur.skip_ws();
  if (cur.at_end()) cur.fail("attribute '" + attr.name + "' is missing a type");
  if (cur.peek() == '{') {
    ++cur.pos;
    attr.kind = FeatureKind::Nominal;
    while (true) {
      cur.skip_ws();
      if (!cur.at_end() && cur.peek() == '}') { ++cur.pos; break; }
      attr.nominal_values.push_back(read_token(cur, ",}"));
      cur.skip_ws();
      if (cur.at_end()) cur.fail("unterminated nominal specification");
      if (cur.peek() == ',') ++cur.pos;
    }
    if (attr.nominal_values.empty()) cur.fail("empty nominal specification");
    return attr;
  }
  std::string type = lower(read_token(cur, ","));
  if (type == "numeric" || type == "real" || type == "integer") {
    attr.kind = FeatureKind::Numeric;
  } else if (type == "string") {
    attr.kind = FeatureKind::String;
  } else if (type == "date") {
    attr.kind = FeatureKind::Date;
    cur.skip_ws();
    if (!cur.at_end()) read_token(cur, "");  // optional format, carried verbatim
  } else if (type == "relational") {
    cur.fail("relational attributes are not supported");
  } else {
    cur.fail("unknown attribute type '" + type + "'");
  }
  return attr;
}

std::vector<Cell> parse_dense_row(LineCursor& cur,
                                  const std::vector<ArffAttribute>& attrs) {
  std::vector<Cell> row;
  row.reserve(attrs.size());
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    bool quoted = false;
    std::string raw = read_token(cur, ",", &quoted);
    row.push_back(make_cell(raw, quoted, attrs[i], cur));
    cur.skip_ws();
    if (i + 1 < attrs.size()) {
      if (cur.at_end() || cur.peek() != ',')
        cur.fail("expected " + std::to_string(attrs.size()) + " values, got " +
                 std::to_string(i + 1));
      ++cur.pos;
    }
  }
  cur.skip_ws();
  if (!cur.at_end())
    cur.fail("row has more values than the " + std::to_string(attrs.size()) +
             " declared attributes");
  return row;
}

std::vector<Cell> parse_sparse_row(LineCursor& cur,
                                   const std::vector<ArffAttribute>& attrs) {
  ++cur.pos;  // consume '{'
  std::vector<Cell> row;
  row.reserve(attrs.size());
  for (const ArffAttribute& a : attrs) row.push_back(sparse_default(a));
  long last_index = -1;
  while (true) {
    cur.skip_ws();
    if (cur.at_end()) cur.fail("unterminated sparse row");
    if (cur.peek() == '}') { ++cur.pos; break; }
    std::string idx_tok = read_token(cur, ",}");
    long index;
    {
      auto [ptr, ec] =
          std::from_chars(idx_tok.data(), idx_tok.data() + idx_tok.size(), index);
      if (ec != std::errc() || ptr != idx_tok.data() + idx_tok.size())
        cur.fail("bad sparse index '" + idx_tok + "'");
    }
    if (index < 0 || index >= static_cast<long>(attrs.size()))
      cur.fail("sparse index " + std::to_string(index) + " out of range");
    if (index <= last_index)
      cur.fail("sparse indices must be strictly increasing");
    last_index = index;
    bool quoted = false;
    std::string raw = read_token(cur, ",}", &quoted);
    row[index] = make_cell(raw, quoted, attrs[index], cur);
    cur.skip_ws();
    if (!cur.at_end() && cur.peek() == ',') ++cur.pos;
  }
  cur.skip_ws();
  if (!cur.at_end()) cur.fail("trailing content after sparse row");
  return row;
}

// Strips a trailing comment. `%` starts a comment anywhere outside quotes.
std::string_view strip_comment(std::string_view line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quote) {
      if (c == '\\') ++i;
      else if (c == quote) quote = 0;
    } else if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == '%') {
      return line.substr(0, i);
    }
  }
  return line;
}

bool needs_quoting(const std::string& s) {
  if (s.empty()) return true;
  for (char c : s)
    if (c == ' ' || c == '\t' || c == ',' || c == '\'' || c == '"' || c == '{' ||
        c == '}' || c == '%' || c == '?' || c == '\\' || c == '\n')
      return true;
  return false;
}

void emit_quoted(std::ostream& os, const std::string& s) {
  if (!needs_quoting(s)) {
    os << s;
    return;
  }
  os << '\'';
  for (char c : s) {
    switch (c) {
      case '\'': os << "\\'"; break;
      case '\\': os << "\\\\"; break;
      case '\n': os << "\\n"; break;
      case '\t': os << "\\t"; break;
      default: os << c; break;
    }
  }
  os << '\'';
}

void emit_cell(std::ostream& os, const Cell& cell) {
  if (is_missing(cell)) {
    os << '?';
  } else if (const double* d = std::get_if<double>(&cell)) {
    os << format_double(*d);
  } else {
    emit_quoted(os, std::get<std::string>(cell));
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

ArffDocument parse(std::string_view text) {
  if (text.size() > kMaxInputBytes)
    throw ResourceError("ARFF input exceeds the 512 MiB limit");
  ArffDocument doc;
  bool have_relation = false;
  bool in_data = false;
  int line_no = 0;
  std::size_t offset = 0;
  while (offset <= text.size()) {
    std::size_t eol = text.find('\n', offset);
    std::string_view raw = text.substr(
        offset, eol == std::string_view::npos ? std::string_view::npos : eol - offset);
    if (eol == std::string_view::npos && raw.empty() && offset >= text.size()) break;
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    std::string_view line = strip_comment(raw);
    LineCursor cur{line, 0, line_no};
    cur.skip_ws();
    if (!cur.at_end()) {
      if (cur.peek() == '@') {
        ++cur.pos;
        std::string directive = lower(read_token(cur, ""));
        if (directive == "relation") {
          if (have_relation) cur.fail("duplicate @relation");
          doc.relation = read_token(cur, "");
          have_relation = true;
        } else if (directive == "attribute") {
          if (in_data) cur.fail("@attribute after @data");
          doc.attributes.push_back(parse_attribute_decl(cur));
        } else if (directive == "data") {
          if (!have_relation) cur.fail("@data before @relation");
          if (doc.attributes.empty()) cur.fail("@data with no attributes");
          in_data = true;
        } else {
          cur.fail("unknown directive '@" + directive + "'");
        }
      } else {
        if (!in_data) cur.fail("data row before @data");
        if (cur.peek() == '{') {
          doc.sparse = true;
          doc.rows.push_back(parse_sparse_row(cur, doc.attributes));
        } else {
          doc.rows.push_back(parse_dense_row(cur, doc.attributes));
        }
      }
    }
    if (eol == std::string_view::npos) break;
    offset = eol + 1;
  }
  if (!in_data) throw ParseError(line_no, 1, "missing @data section");
  return doc;
}

std::string serialize(const ArffDocument& doc) {
  std::ostringstream os;
  os << "@RELATION ";
  emit_quoted(os, doc.relation);
  os << '\n';
  for (const ArffAttribute& a : doc.attributes) {
    os << "@ATTRIBUTE ";
    emit_quoted(os, a.name);
    os << ' ';
    switch (a.kind) {
      case FeatureKind::Numeric: os << "NUMERIC"; break;
      case FeatureKind::String: os << "STRING"; break;
      case FeatureKind::Date: os << "DATE"; break;
      case FeatureKind::Nominal: {
        os << '{';
        for (std::size_t i = 0; i < a.nominal_values.size(); ++i) {
          if (i) os << ',';
          emit_quoted(os, a.nominal_values[i]);
        }
        os << '}';
        break;
      }
    }
    os << '\n';
  }
  os << "@DATA\n";
  for (const std::vector<Cell>& row : doc.rows) {
    if (doc.sparse) {
      os << '{';
      bool first = true;
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (!is_missing(row[i]) && row[i] == sparse_default(doc.attributes[i]))
          continue;
        if (!first) os << ", ";
        first = false;
        os << i << ' ';
        emit_cell(os, row[i]);
      }
      os << '}';
    } else {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        emit_cell(os, row[i]);
      }
    }
    os << '\n';
  }
  return os.str();
}

const Column* DataTable::find_column(const std::string& name) const {
  for (const Column& c : columns)
    if (c.name == name) return &c;
  return nullptr;
}

DataTable coerce_table(const ArffDocument& doc) {
  DataTable table;
  table.row_count = doc.rows.size();
  table.columns.reserve(doc.attributes.size());
  for (std::size_t j = 0; j < doc.attributes.size(); ++j) {
    const ArffAttribute& a = doc.attributes[j];
    Column col;
    col.name = a.name;
    col.kind = a.kind;
    col.categories = a.nominal_values;
    col.missing.resize(table.row_count, false);
    for (std::size_t i = 0; i < doc.rows.size(); ++i) {
      const Cell& cell = doc.rows[i][j];
      if (is_missing(cell)) col.missing[i] = true;
      switch (a.kind) {
        case FeatureKind::Numeric:
          col.reals.push_back(is_missing(cell) ? 0.0 : std::get<double>(cell));
          break;
        case FeatureKind::Nominal: {
          std::int32_t code = -1;
          if (!is_missing(cell)) {
            const std::string& v = std::get<std::string>(cell);
            code = static_cast<std::int32_t>(
                std::find(a.nominal_values.begin(), a.nominal_values.end(), v) -
                a.nominal_values.begin());
          }
          col.codes.push_back(code);
          break;
        }
        case FeatureKind::String:
        case FeatureKind::Date:
          col.strings.push_back(is_missing(cell) ? std::string()
                                                 : std::get<std::string>(cell));
          break;
      }
    }
    table.columns.push_back(std::move(col));
  }
  return table;
}

}  // namespace oml::arff
