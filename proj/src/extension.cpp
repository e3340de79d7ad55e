#include "omlclient/extension.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>

namespace oml::ext {

namespace {

struct ParamDecl {
  const char* name;
  const char* default_value;
  const char* kind;
};

const std::map<std::string, std::vector<ParamDecl>>& param_table() {
  static const std::map<std::string, std::vector<ParamDecl>> table = {
      {"majority", {}},
      {"stump", {{"max_depth", "1", "numeric"}}},
      {"nn1", {}},
      {"impute.mean", {}},
      {"onehot", {}},
      {"pipeline", {}},
      {"grid", {{"grid", "", "string"}}},
  };
  return table;
}

bool is_transformer(const std::string& kind) {
  return kind == "impute.mean" || kind == "onehot";
}

int parse_positive_int(const std::string& s, const std::string& what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 1)
    throw InvalidParameterError(what + " must be a positive integer, got '" + s + "'");
  return v;
}

struct GridSpec {
  std::string param;
  std::vector<std::string> values;
};

GridSpec parse_grid(const std::string& s) {
  auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0)
    throw InvalidParameterError("grid must look like 'name=v1;v2;...', got '" + s + "'");
  GridSpec g;
  g.param = s.substr(0, eq);
  std::size_t pos = eq + 1;
  while (pos <= s.size()) {
    auto semi = s.find(';', pos);
    std::string v = s.substr(pos, semi == std::string::npos ? std::string::npos
                                                            : semi - pos);
    if (v.empty())
      throw InvalidParameterError("grid has an empty candidate value: '" + s + "'");
    g.values.push_back(v);
    if (semi == std::string::npos) break;
    pos = semi + 1;
  }
  if (g.values.empty())
    throw InvalidParameterError("grid has no candidate values: '" + s + "'");
  return g;
}

void check_param_value(const std::string& kind, const std::string& name,
                       const std::string& value) {
  if (kind == "stump" && name == "max_depth") parse_positive_int(value, "max_depth");
  if (kind == "grid" && name == "grid" && !value.empty()) parse_grid(value);
}

std::string get_param(const ModelSpec& m, const std::string& name) {
  for (const auto& [n, v] : m.params)
    if (n == name) return v;
  return {};
}

// ---- working frame: numeric/nominal columns sliced from a DataTable ----

struct WorkCol {
  FeatureKind kind = FeatureKind::Numeric;
  std::vector<double> reals;
  std::vector<bool> missing;
  std::vector<std::int32_t> codes;     // nominal
  std::vector<std::string> categories;  // nominal
};

struct Frame {
  std::size_t rows = 0;
  std::vector<WorkCol> cols;
};

Frame build_frame(const arff::DataTable& table, const std::string& target) {
  Frame f;
  f.rows = table.row_count;
  for (const arff::Column& c : table.columns) {
    if (c.name == target) continue;
    if (c.kind == FeatureKind::String || c.kind == FeatureKind::Date) continue;
    WorkCol w;
    w.kind = c.kind;
    w.missing.assign(c.missing.begin(), c.missing.end());
    if (c.kind == FeatureKind::Numeric) {
      w.reals = c.reals;
    } else {
      w.codes = c.codes;
      w.categories = c.categories;
    }
    f.cols.push_back(std::move(w));
  }
  return f;
}

double train_mean(const WorkCol& c, const std::vector<std::int64_t>& train_idx) {
  double sum = 0;
  std::size_t n = 0;
  for (std::int64_t i : train_idx) {
    if (!c.missing[static_cast<std::size_t>(i)]) {
      sum += c.reals[static_cast<std::size_t>(i)];
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

void apply_impute_mean(Frame& f, const std::vector<std::int64_t>& train_idx) {
  for (WorkCol& c : f.cols) {
    if (c.kind != FeatureKind::Numeric) continue;
    double mean = train_mean(c, train_idx);
    for (std::size_t i = 0; i < c.reals.size(); ++i)
      if (c.missing[i]) c.reals[i] = mean;
    c.missing.assign(c.missing.size(), false);
  }
}

void apply_onehot(Frame& f) {
  std::vector<WorkCol> out;
  for (WorkCol& c : f.cols) {
    if (c.kind != FeatureKind::Nominal) {
      out.push_back(std::move(c));
      continue;
    }
    for (std::size_t cat = 0; cat < c.categories.size(); ++cat) {
      WorkCol ind;
      ind.kind = FeatureKind::Numeric;
      ind.reals.resize(f.rows, 0.0);
      ind.missing.assign(f.rows, false);
      for (std::size_t i = 0; i < f.rows; ++i)
        if (c.codes[i] == static_cast<std::int32_t>(cat)) ind.reals[i] = 1.0;
      out.push_back(std::move(ind));
    }
  }
  f.cols = std::move(out);
}

// Learners consume a dense numeric matrix; leftover nominal columns are
// one-hot encoded and leftover missing values imputed with training means.
struct NumericView {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

NumericView to_numeric(Frame f, const std::vector<std::int64_t>& train_idx) {
  apply_onehot(f);
  apply_impute_mean(f, train_idx);
  NumericView m;
  m.rows = f.rows;
  m.cols = f.cols.size();
  m.data.resize(m.rows * m.cols);
  for (std::size_t c = 0; c < f.cols.size(); ++c)
    for (std::size_t r = 0; r < m.rows; ++r)
      m.data[r * m.cols + c] = f.cols[c].reals[r];
  return m;
}

std::vector<int> label_codes(const arff::DataTable& table, const std::string& target,
                             const std::vector<std::string>& class_labels) {
  const arff::Column* col = table.find_column(target);
  if (!col) throw InvalidParameterError("target column not found: " + target);
  std::vector<int> y(table.row_count, -1);
  for (std::size_t i = 0; i < table.row_count; ++i) {
    if (col->missing[i]) continue;
    std::string label;
    if (col->kind == FeatureKind::Nominal)
      label = col->categories[static_cast<std::size_t>(col->codes[i])];
    else if (col->kind == FeatureKind::String || col->kind == FeatureKind::Date)
      label = col->strings[i];
    else
      label = arff::format_double(col->reals[i]);
    auto it = std::find(class_labels.begin(), class_labels.end(), label);
    y[i] = it == class_labels.end() ? -1 : static_cast<int>(it - class_labels.begin());
  }
  return y;
}

std::vector<double> frequency_confidences(const std::vector<int>& counts) {
  double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  std::vector<double> conf(counts.size(), 0.0);
  if (total > 0)
    for (std::size_t i = 0; i < counts.size(); ++i)
      conf[i] = static_cast<double>(counts[i]) / total;
  return conf;
}

std::size_t argmax_first(const std::vector<double>& v) {
  return static_cast<std::size_t>(
      std::max_element(v.begin(), v.end()) - v.begin());
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// ---- trained model dispatch ----

struct FitContext {
  const NumericView& X;
  const std::vector<int>& y;
  const std::vector<std::string>& class_labels;
  std::int64_t seed;
};

class Trained {
 public:
  virtual ~Trained() = default;
  // Confidences over class_labels for one row; `row_salt` feeds the
  // per-row tie-break stream.
  virtual std::vector<double> predict(std::size_t row, std::uint64_t row_salt) const = 0;
};

class TrainedMajority : public Trained {
 public:
  TrainedMajority(const FitContext& ctx, const std::vector<std::int64_t>& train_idx) {
    std::vector<int> counts(ctx.class_labels.size(), 0);
    for (std::int64_t i : train_idx) {
      int c = ctx.y[static_cast<std::size_t>(i)];
      if (c >= 0) ++counts[static_cast<std::size_t>(c)];
    }
    conf_ = frequency_confidences(counts);
  }
  std::vector<double> predict(std::size_t, std::uint64_t) const override {
    return conf_;
  }

 private:
  std::vector<double> conf_;
};

class TrainedTree : public Trained {
 public:
  TrainedTree(const FitContext& ctx, const std::vector<std::int64_t>& train_idx,
              int max_depth)
      : X_(ctx.X), n_classes_(ctx.class_labels.size()) {
    std::set<int> distinct;
    for (std::int64_t i : train_idx) {
      int c = ctx.y[static_cast<std::size_t>(i)];
      if (c >= 0) distinct.insert(c);
    }
    if (distinct.size() < 2)
      throw DegenerateFoldError(
          "stump requires at least 2 classes in the training fold");
    std::vector<std::size_t> rows;
    rows.reserve(train_idx.size());
    for (std::int64_t i : train_idx)
      if (ctx.y[static_cast<std::size_t>(i)] >= 0)
        rows.push_back(static_cast<std::size_t>(i));
    root_ = build(ctx, rows, max_depth);
  }

  std::vector<double> predict(std::size_t row, std::uint64_t) const override {
    const Node* node = root_.get();
    while (node->feature >= 0) {
      node = X_.at(row, static_cast<std::size_t>(node->feature)) <= node->threshold
                 ? node->left.get()
                 : node->right.get();
    }
    return node->conf;
  }

 private:
  struct Node {
    int feature = -1;
    double threshold = 0;
    std::unique_ptr<Node> left, right;
    std::vector<double> conf;
  };

  std::unique_ptr<Node> make_leaf(const FitContext& ctx,
                                  const std::vector<std::size_t>& rows) const {
    auto node = std::make_unique<Node>();
    std::vector<int> counts(n_classes_, 0);
    for (std::size_t r : rows) ++counts[static_cast<std::size_t>(ctx.y[r])];
    node->conf = frequency_confidences(counts);
    return node;
  }

  std::unique_ptr<Node> build(const FitContext& ctx, std::vector<std::size_t>& rows,
                              int depth_left) const {
    bool pure = true;
    for (std::size_t r : rows)
      if (ctx.y[r] != ctx.y[rows.front()]) { pure = false; break; }
    if (depth_left == 0 || pure || X_.cols == 0) return make_leaf(ctx, rows);

    // Best (feature, threshold) by training accuracy of the two-leaf split.
    // Ties go to the lowest feature index, then the lowest threshold; the
    // threshold is the midpoint between adjacent distinct values.
    int best_feature = -1;
    double best_threshold = 0;
    long best_correct = -1;
    std::vector<std::size_t> order(rows);
    for (std::size_t j = 0; j < X_.cols; ++j) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return X_.at(a, j) < X_.at(b, j);
      });
      std::vector<int> left_counts(n_classes_, 0);
      std::vector<int> total_counts(n_classes_, 0);
      for (std::size_t r : order) ++total_counts[static_cast<std::size_t>(ctx.y[r])];
      int total_max = *std::max_element(total_counts.begin(), total_counts.end());
      (void)total_max;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        ++left_counts[static_cast<std::size_t>(ctx.y[order[k]])];
        double v = X_.at(order[k], j);
        double next = X_.at(order[k + 1], j);
        if (v == next) continue;
        int left_max = *std::max_element(left_counts.begin(), left_counts.end());
        int right_max = 0;
        for (std::size_t c = 0; c < n_classes_; ++c)
          right_max = std::max(right_max, total_counts[c] - left_counts[c]);
        long correct = left_max + right_max;
        if (correct > best_correct) {
          best_correct = correct;
          best_feature = static_cast<int>(j);
          best_threshold = v + (next - v) / 2;
        }
      }
    }
    if (best_feature < 0) return make_leaf(ctx, rows);  // all rows identical

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) {
      (X_.at(r, static_cast<std::size_t>(best_feature)) <= best_threshold
           ? left_rows
           : right_rows)
          .push_back(r);
    }
    auto node = std::make_unique<Node>();
    node->feature = best_feature;
    node->threshold = best_threshold;
    node->left = build(ctx, left_rows, depth_left - 1);
    node->right = build(ctx, right_rows, depth_left - 1);
    return node;
  }

  const NumericView& X_;
  std::size_t n_classes_;
  std::unique_ptr<Node> root_;
};

class TrainedNn1 : public Trained {
 public:
  TrainedNn1(const FitContext& ctx, const std::vector<std::int64_t>& train_idx)
      : X_(ctx.X), y_(ctx.y), n_classes_(ctx.class_labels.size()) {
    for (std::int64_t i : train_idx)
      if (ctx.y[static_cast<std::size_t>(i)] >= 0)
        train_rows_.push_back(static_cast<std::size_t>(i));
    if (train_rows_.empty())
      throw DegenerateFoldError("1-NN has no labeled training rows");
  }

  std::vector<double> predict(std::size_t row, std::uint64_t row_salt) const override {
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> tied_labels;
    for (std::size_t t : train_rows_) {
      double d2 = 0;
      for (std::size_t c = 0; c < X_.cols; ++c) {
        double diff = X_.at(row, c) - X_.at(t, c);
        d2 += diff * diff;
      }
      if (d2 < best) {
        best = d2;
        tied_labels.clear();
      }
      if (d2 == best) {
        int label = y_[t];
        if (std::find(tied_labels.begin(), tied_labels.end(), label) ==
            tied_labels.end())
          tied_labels.push_back(label);
      }
    }
    std::sort(tied_labels.begin(), tied_labels.end());
    int chosen = tied_labels.front();
    if (tied_labels.size() > 1) {
      std::mt19937_64 gen(row_salt);
      chosen = tied_labels[gen() % tied_labels.size()];
    }
    std::vector<double> conf(n_classes_, 0.0);
    conf[static_cast<std::size_t>(chosen)] = 1.0;
    return conf;
  }

 private:
  const NumericView& X_;
  const std::vector<int>& y_;
  std::size_t n_classes_;
  std::vector<std::size_t> train_rows_;
};

// Forward declaration: grid search fits inner learners recursively.
std::vector<PredictionFragment> fit_predict_numeric(
    const ModelSpec& learner, const NumericView& X, const std::vector<int>& y,
    const std::vector<std::string>& class_labels,
    const std::vector<std::int64_t>& train_idx,
    const std::vector<std::int64_t>& test_idx, std::int64_t seed,
    std::vector<TraceRow>* trace_out);

double pooled_accuracy(const std::vector<PredictionFragment>& preds,
                       const std::vector<int>& y,
                       const std::vector<std::string>& class_labels) {
  if (preds.empty()) return 0.0;
  std::size_t correct = 0;
  for (const PredictionFragment& p : preds) {
    int truth = y[static_cast<std::size_t>(p.row_id)];
    if (truth >= 0 && class_labels[static_cast<std::size_t>(truth)] == p.prediction)
      ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

std::vector<PredictionFragment> fit_predict_numeric(
    const ModelSpec& learner, const NumericView& X, const std::vector<int>& y,
    const std::vector<std::string>& class_labels,
    const std::vector<std::int64_t>& train_idx,
    const std::vector<std::int64_t>& test_idx, std::int64_t seed,
    std::vector<TraceRow>* trace_out) {
  FitContext ctx{X, y, class_labels, seed};

  if (learner.kind == "grid") {
    if (learner.children.size() != 1)
      throw InvalidParameterError("grid needs exactly one inner learner");
    GridSpec grid = parse_grid(get_param(learner, "grid"));
    auto [inner_a, inner_b] = inner_cv_split(train_idx, seed);
    int best = -1;
    double best_eval = -1;
    std::vector<TraceRow> trace;
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
      ModelSpec candidate = learner.children.front();
      bool found = false;
      for (auto& [n, v] : candidate.params)
        if (n == grid.param) { v = grid.values[i]; found = true; }
      if (!found)
        throw InvalidParameterError("grid parameter '" + grid.param +
                                    "' is not a parameter of the inner learner");
      auto preds_b =
          fit_predict_numeric(candidate, X, y, class_labels, inner_a, inner_b,
                              seed, nullptr);
      auto preds_a =
          fit_predict_numeric(candidate, X, y, class_labels, inner_b, inner_a,
                              seed, nullptr);
      std::size_t correct = 0, total = preds_a.size() + preds_b.size();
      for (const auto* preds : {&preds_a, &preds_b})
        for (const PredictionFragment& p : *preds) {
          int truth = y[static_cast<std::size_t>(p.row_id)];
          if (truth >= 0 &&
              class_labels[static_cast<std::size_t>(truth)] == p.prediction)
            ++correct;
        }
      double eval = total ? static_cast<double>(correct) / total : 0.0;
      TraceRow row;
      row.iteration = static_cast<int>(i);
      row.setup_string = grid.param + "=" + grid.values[i];
      row.evaluation = eval;
      trace.push_back(row);
      if (eval > best_eval) {  // ties keep the first grid point
        best_eval = eval;
        best = static_cast<int>(i);
      }
    }
    trace[static_cast<std::size_t>(best)].selected = true;
    if (trace_out) *trace_out = std::move(trace);
    ModelSpec selected = learner.children.front();
    for (auto& [n, v] : selected.params)
      if (n == grid.param) v = grid.values[static_cast<std::size_t>(best)];
    return fit_predict_numeric(selected, X, y, class_labels, train_idx, test_idx,
                               seed, nullptr);
  }

  std::unique_ptr<Trained> trained;
  if (learner.kind == "majority") {
    trained = std::make_unique<TrainedMajority>(ctx, train_idx);
  } else if (learner.kind == "stump") {
    trained = std::make_unique<TrainedTree>(
        ctx, train_idx, parse_positive_int(get_param(learner, "max_depth"), "max_depth"));
  } else if (learner.kind == "nn1") {
    trained = std::make_unique<TrainedNn1>(ctx, train_idx);
  } else {
    throw UnknownFlavorError("'" + learner.kind + "' is not a reference learner");
  }

  std::vector<PredictionFragment> out;
  out.reserve(test_idx.size());
  for (std::int64_t row : test_idx) {
    std::uint64_t salt =
        mix64(static_cast<std::uint64_t>(seed) ^ mix64(static_cast<std::uint64_t>(row)));
    PredictionFragment frag;
    frag.row_id = row;
    frag.confidences = trained->predict(static_cast<std::size_t>(row), salt);
    frag.prediction = class_labels[argmax_first(frag.confidences)];
    out.push_back(std::move(frag));
  }
  return out;
}

}  // namespace

ModelSpec make_spec(std::string kind,
                    std::vector<std::pair<std::string, std::string>> params,
                    std::vector<ModelSpec> children) {
  auto it = param_table().find(kind);
  if (it == param_table().end())
    throw UnknownFlavorError("unknown reference node kind '" + kind + "'");
  ModelSpec spec;
  spec.kind = std::move(kind);
  for (const ParamDecl& decl : it->second) {
    std::string value = decl.default_value;
    for (const auto& [n, v] : params)
      if (n == decl.name) value = v;
    check_param_value(spec.kind, decl.name, value);
    spec.params.emplace_back(decl.name, value);
  }
  for (const auto& [n, v] : params) {
    bool known = false;
    for (const ParamDecl& decl : it->second)
      if (n == decl.name) known = true;
    if (!known)
      throw InvalidParameterError("'" + n + "' is not a parameter of '" +
                                  spec.kind + "'");
  }
  for (ModelSpec& c : children)
    spec.children.push_back(make_spec(c.kind, c.params, c.children));
  return spec;
}

std::string role_for_kind(const std::string& kind) {
  if (kind == "impute.mean") return "imputer";
  if (kind == "onehot") return "encoder";
  if (kind == "pipeline") return "pipeline";
  if (kind == "grid") return "learner";
  return "learner";
}

std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> inner_cv_split(
    const std::vector<std::int64_t>& train_idx, std::int64_t seed) {
  std::vector<std::int64_t> shuffled(train_idx);
  std::mt19937_64 gen(mix64(static_cast<std::uint64_t>(seed) ^ 0x67726964ull));
  std::shuffle(shuffled.begin(), shuffled.end(), gen);
  std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> out;
  for (std::size_t i = 0; i < shuffled.size(); ++i)
    (i % 2 == 0 ? out.first : out.second).push_back(shuffled[i]);
  std::sort(out.first.begin(), out.first.end());
  std::sort(out.second.begin(), out.second.end());
  return out;
}

namespace {

class ReferenceExtension : public Extension {
 public:
  std::string flavor() const override { return "ref"; }
  std::string flow_namespace() const override { return "ref."; }

  Flow model_to_flow(const ModelSpec& model) const override {
    ModelSpec normalized = make_spec(model.kind, model.params, model.children);
    return to_flow(normalized);
  }

  ModelSpec flow_to_model(
      const Flow& flow,
      const std::vector<std::pair<std::string, std::string>>& setup) const override {
    ModelSpec spec = to_model(flow);
    for (const auto& [path, value] : setup) apply_setting(spec, path, value);
    return make_spec(spec.kind, spec.params, spec.children);
  }

  FoldResult fit_predict_fold(const ModelSpec& model, const arff::DataTable& table,
                              const std::string& target,
                              const std::vector<std::string>& class_labels,
                              const std::vector<std::int64_t>& train_idx,
                              const std::vector<std::int64_t>& test_idx,
                              std::int64_t seed) const override {
    check_indices(table, train_idx, test_idx);
    ModelSpec spec = make_spec(model.kind, model.params, model.children);
    Frame frame = build_frame(table, target);
    std::vector<int> y = label_codes(table, target, class_labels);

    // Pipeline transformers run first, fitted on training rows only.
    const ModelSpec* learner = &spec;
    if (spec.kind == "pipeline") {
      if (spec.children.empty())
        throw InvalidParameterError("pipeline needs at least a learner");
      for (std::size_t i = 0; i + 1 < spec.children.size(); ++i) {
        const ModelSpec& step = spec.children[i];
        if (step.kind == "impute.mean") apply_impute_mean(frame, train_idx);
        else if (step.kind == "onehot") apply_onehot(frame);
        else
          throw InvalidParameterError("pipeline step '" + step.kind +
                                      "' is not a transformer");
      }
      learner = &spec.children.back();
      if (is_transformer(learner->kind))
        throw InvalidParameterError("pipeline must end in a learner");
    } else if (is_transformer(spec.kind)) {
      throw InvalidParameterError("'" + spec.kind + "' is a transformer, not a learner");
    }

    NumericView X = to_numeric(std::move(frame), train_idx);
    FoldResult result;
    std::vector<TraceRow> trace;
    result.predictions = fit_predict_numeric(*learner, X, y, class_labels, train_idx,
                                             test_idx, seed, &trace);
    result.trace = std::move(trace);
    return result;
  }

 private:
  static void check_indices(const arff::DataTable& table,
                            const std::vector<std::int64_t>& train_idx,
                            const std::vector<std::int64_t>& test_idx) {
    std::set<std::int64_t> train(train_idx.begin(), train_idx.end());
    for (std::int64_t i : test_idx)
      if (train.count(i))
        throw InvalidParameterError("train and test indices overlap at row " +
                                    std::to_string(i));
    for (std::int64_t i : train_idx)
      if (i < 0 || i >= static_cast<std::int64_t>(table.row_count))
        throw InvalidParameterError("train index out of range: " + std::to_string(i));
    for (std::int64_t i : test_idx)
      if (i < 0 || i >= static_cast<std::int64_t>(table.row_count))
        throw InvalidParameterError("test index out of range: " + std::to_string(i));
  }

  Flow to_flow(const ModelSpec& spec) const {
    Flow f;
    f.name = "ref." + spec.kind;
    f.external_version = kExtensionVersion;
    for (const auto& [name, value] : spec.params) {
      std::string kind = "string";
      for (const ParamDecl& decl : param_table().at(spec.kind))
        if (decl.name == name) kind = decl.kind;
      f.parameters.push_back({name, value, kind});
    }
    for (const ModelSpec& child : spec.children) {
      std::string role = spec.kind == "grid" ? "inner" : role_for_kind(child.kind);
      f.components.emplace_back(role, to_flow(child));
    }
    return f;
  }

  ModelSpec to_model(const Flow& flow) const {
    if (flow.name.rfind("ref.", 0) != 0)
      throw UnknownFlowError("flow '" + flow.name +
                             "' is outside the ref. namespace");
    ModelSpec spec;
    spec.kind = flow.name.substr(4);
    if (!param_table().count(spec.kind))
      throw UnknownFlowError("flow '" + flow.name + "' names no reference learner");
    for (const FlowParameter& p : flow.parameters)
      spec.params.emplace_back(p.name, p.default_value);
    for (const auto& [role, child] : flow.components)
      spec.children.push_back(to_model(child));
    return spec;
  }

  void apply_setting(ModelSpec& spec, const std::string& path,
                     const std::string& value) const {
    auto dot = path.find('.');
    std::string head = path.substr(0, dot);
    if (dot != std::string::npos) {
      for (ModelSpec& child : spec.children) {
        std::string role =
            spec.kind == "grid" ? "inner" : role_for_kind(child.kind);
        if (role == head) {
          apply_setting(child, path.substr(dot + 1), value);
          return;
        }
      }
    }
    for (auto& [n, v] : spec.params) {
      if (n == path) {
        check_param_value(spec.kind, n, value);
        v = value;
        return;
      }
    }
    throw InvalidParameterError("setting path '" + path +
                                "' resolves to no parameter of '" + spec.kind + "'");
  }
};

struct Registry {
  std::vector<std::unique_ptr<Extension>> extensions;
  Registry() { extensions.push_back(std::make_unique<ReferenceExtension>()); }
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

const Extension& find_extension(const std::string& flavor) {
  for (const auto& e : registry().extensions)
    if (e->flavor() == flavor) return *e;
  throw UnknownFlavorError("no extension registered for flavor '" + flavor + "'");
}

const Extension& extension_for_flow(const Flow& flow) {
  for (const auto& e : registry().extensions)
    if (flow.name.rfind(e->flow_namespace(), 0) == 0) return *e;
  throw UnknownFlowError("no extension claims flow '" + flow.name + "'");
}

Flow model_to_flow(const ModelSpec& model) {
  return find_extension("ref").model_to_flow(model);
}

ModelSpec flow_to_model(
    const Flow& flow,
    const std::vector<std::pair<std::string, std::string>>& setup) {
  return extension_for_flow(flow).flow_to_model(flow, setup);
}

FoldResult fit_predict_fold(const ModelSpec& model, const arff::DataTable& table,
                            const std::string& target,
                            const std::vector<std::string>& class_labels,
                            const std::vector<std::int64_t>& train_idx,
                            const std::vector<std::int64_t>& test_idx,
                            std::int64_t seed) {
  return find_extension("ref").fit_predict_fold(model, table, target, class_labels,
                                                train_idx, test_idx, seed);
}

std::vector<std::pair<std::string, std::string>> extract_setup(
    const ModelSpec& model) {
  ModelSpec spec = make_spec(model.kind, model.params, model.children);
  std::vector<std::pair<std::string, std::string>> out;
  std::function<void(const ModelSpec&, const std::string&)> walk =
      [&](const ModelSpec& s, const std::string& prefix) {
        for (const auto& [n, v] : s.params) out.emplace_back(prefix + n, v);
        for (const ModelSpec& child : s.children) {
          std::string role = s.kind == "grid" ? "inner" : role_for_kind(child.kind);
          walk(child, prefix + role + ".");
        }
      };
  walk(spec, "");
  return out;
}

}  // namespace oml::ext
