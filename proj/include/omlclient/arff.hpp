#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "omlclient/entities.hpp"

// Parser and writer for the ARFF subset used by dataset payloads, split
// tables and prediction tables. The wire contract: LF terminators, `?`
// missing marker, single-quote preferred quoting, shortest-roundtrip
// numerics.
namespace oml::arff {

struct Missing {
  bool operator==(const Missing&) const = default;
};

// Numeric cells hold doubles; nominal/string/date cells hold strings.
using Cell = std::variant<Missing, double, std::string>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<Missing>(c); }

struct ArffAttribute {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  std::vector<std::string> nominal_values;

  bool operator==(const ArffAttribute&) const = default;
};

// Rows are stored densified; sparse input is expanded at parse time with the
// convention: omitted numeric = 0, omitted nominal = first declared value.
// The `sparse` flag is preserved so serialization reproduces sparse syntax.
struct ArffDocument {
  std::string relation;
  std::vector<ArffAttribute> attributes;
  std::vector<std::vector<Cell>> rows;
  bool sparse = false;

  bool operator==(const ArffDocument&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& message)
      : std::runtime_error("ARFF parse error at line " + std::to_string(line) +
                           ", column " + std::to_string(column) + ": " + message),
        line(line),
        column(column) {}
  int line;
  int column;
};

class ResourceError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inputs above this size are rejected with ResourceError.
inline constexpr std::size_t kMaxInputBytes = std::size_t{512} * 1024 * 1024;

ArffDocument parse(std::string_view text);
std::string serialize(const ArffDocument& doc);

// Shortest representation that parses back to exactly the same double.
std::string format_double(double v);

struct Column {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  std::vector<double> reals;           // numeric
  std::vector<std::int32_t> codes;     // nominal, index into categories
  std::vector<std::string> strings;    // string/date
  std::vector<bool> missing;
  std::vector<std::string> categories;  // nominal only
};

struct DataTable {
  std::vector<Column> columns;
  std::size_t row_count = 0;

  const Column* find_column(const std::string& name) const;
};

DataTable coerce_table(const ArffDocument& doc);

}  // namespace oml::arff
