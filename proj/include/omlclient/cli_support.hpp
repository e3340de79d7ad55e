#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "omlclient/extension.hpp"
#include "omlclient/protocol.hpp"

// Library half of the CLI: every subcommand is a thin composition of these
// and the core modules.
namespace oml::cli {

// Compact model grammar:
//   spec     := name [ "," key=value ... ] [ ":" children ]
//   children := child [ "," child ... ]
//   child    := name | "(" spec ")" | key=value   (params attach to the
//              preceding child)
// The "ref." prefix on names is optional. Examples:
//   ref.stump,max_depth=2
//   ref.pipeline:impute.mean,onehot,stump
//   ref.grid,grid=max_depth=1;2;3:stump
ext::ModelSpec parse_model_spec(const std::string& text);

struct Config {
  std::string server = "https://www.openml.org/api/v1";
  std::string apikey;
  std::string cachedir;
};

// Resolution order: config file < environment variables < flags (applied by
// the caller). `config_file` defaults to ~/.omlclient/config.
Config load_config(const std::optional<std::filesystem::path>& config_file = {});

struct ExportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 20x20 binned heatmap over two columns; cell value is the mean metric.
struct Heatmap {
  int nx = 20;
  int ny = 20;
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  std::vector<double> sums;   // nx*ny, row-major by y then x
  std::vector<int> counts;

  double mean(int x, int y) const { return sums[y * nx + x] / counts[y * nx + x]; }
  int count(int x, int y) const { return counts[y * nx + x]; }
};

Heatmap bin_heatmap(const std::vector<double>& xs, const std::vector<double>& ys,
                    const std::vector<double>& values, int n = 20);

std::string render_svg(const Heatmap& map);

// Writes an RFC-4180 CSV (LF line ends, header row) with the listed columns
// replaced by their log (base 10, or natural when `natural_log`). When
// exactly two log columns are given, also writes `<out>.svg` with the binned
// heatmap of the metric over those columns. Returns rows written.
std::size_t export_evaluations(const protocol::EvaluationTable& table,
                               const std::vector<std::string>& log_cols,
                               bool natural_log, const std::filesystem::path& out);

std::string csv_escape(const std::string& field);

}  // namespace oml::cli
