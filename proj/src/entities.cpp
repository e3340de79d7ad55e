#include "omlclient/entities.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace oml {

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Numeric: return "numeric";
    case FeatureKind::Nominal: return "nominal";
    case FeatureKind::String: return "string";
    case FeatureKind::Date: return "date";
  }
  return "numeric";
}

std::optional<FeatureKind> feature_kind_from_string(const std::string& s) {
  if (s == "numeric") return FeatureKind::Numeric;
  if (s == "nominal") return FeatureKind::Nominal;
  if (s == "string") return FeatureKind::String;
  if (s == "date") return FeatureKind::Date;
  return std::nullopt;
}

std::string to_string(TaskType t) {
  return t == TaskType::SupervisedClassification ? "supervised_classification"
                                                 : "supervised_regression";
}

std::optional<TaskType> task_type_from_string(const std::string& s) {
  if (s == "supervised_classification") return TaskType::SupervisedClassification;
  if (s == "supervised_regression") return TaskType::SupervisedRegression;
  return std::nullopt;
}

namespace {

void check_features(const std::vector<Feature>& features,
                    std::vector<std::string>& out) {
  std::set<std::string> names;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const Feature& f = features[i];
    if (f.name.empty()) out.push_back("feature name must be non-empty");
    if (!names.insert(f.name).second)
      out.push_back("feature name not unique: " + f.name);
    if (f.index != static_cast<int>(i))
      out.push_back("feature indices must be contiguous from 0, got " +
                    std::to_string(f.index) + " at position " + std::to_string(i));
    if (f.kind == FeatureKind::Nominal) {
      if (f.nominal_values.empty())
        out.push_back("nominal feature needs nominal_values: " + f.name);
      std::set<std::string> vals(f.nominal_values.begin(), f.nominal_values.end());
      if (vals.size() != f.nominal_values.size())
        out.push_back("nominal_values has duplicates: " + f.name);
    } else if (!f.nominal_values.empty()) {
      out.push_back("nominal_values only allowed on nominal features: " + f.name);
    }
    if (f.missing_count < 0)
      out.push_back("missing_count must be non-negative: " + f.name);
  }
}

int flow_depth(const Flow& f) {
  int deepest = 1;
  for (const auto& [role, child] : f.components)
    deepest = std::max(deepest, 1 + flow_depth(child));
  return deepest;
}

void check_flow(const Flow& f, std::vector<std::string>& out) {
  if (f.name.empty()) out.push_back("flow name must be non-empty");
  if (f.id && *f.id <= 0) out.push_back("flow id must be positive");
  std::set<std::string> pnames;
  for (const FlowParameter& p : f.parameters)
    if (!pnames.insert(p.name).second)
      out.push_back("parameter name not unique: " + p.name);
  std::set<std::string> roles;
  for (const auto& [role, child] : f.components) {
    if (!roles.insert(role).second)
      out.push_back("component role not unique: " + role);
    check_flow(child, out);
  }
}

}  // namespace

std::vector<std::string> validate(const DatasetDescription& d) {
  std::vector<std::string> out;
  if (d.name.empty()) out.push_back("name must be non-empty");
  if (d.version <= 0) out.push_back("version must be positive");
  if (d.id && *d.id <= 0) out.push_back("id must be positive when present");
  check_features(d.features, out);
  if (d.default_target_attribute) {
    bool found = false;
    for (const Feature& f : d.features)
      if (f.name == *d.default_target_attribute) found = true;
    if (!found)
      out.push_back("default_target_attribute names no existing feature: " +
                    *d.default_target_attribute);
  }
  return out;
}

std::vector<std::string> validate(const Task& t) {
  std::vector<std::string> out;
  if (t.id <= 0) out.push_back("id must be positive");
  if (t.dataset_id <= 0) out.push_back("dataset_id must be positive");
  if (t.target_name.empty()) out.push_back("target_name must be non-empty");
  const EstimationProcedure& ep = t.estimation_procedure;
  if (ep.repeats < 1) out.push_back("estimation_procedure.repeats must be >= 1");
  if (ep.kind == EstimationKind::CrossValidation) {
    if (ep.folds < 2)
      out.push_back("estimation_procedure.folds must be >= 2 for crossvalidation");
  } else {
    if (!(ep.percentage > 0.0 && ep.percentage < 100.0))
      out.push_back("estimation_procedure.percentage must be in (0,100)");
  }
  if (t.task_type == TaskType::SupervisedClassification) {
    if (t.class_labels.size() < 2)
      out.push_back("class_labels must have >= 2 entries");
  }
  return out;
}

std::vector<std::string> validate(const Flow& f) {
  std::vector<std::string> out;
  if (flow_depth(f) > kMaxFlowDepth) {
    out.push_back("flow tree exceeds depth limit " + std::to_string(kMaxFlowDepth));
    return out;
  }
  check_flow(f, out);
  return out;
}

std::vector<std::string> validate(const Run& r, const Flow& flow) {
  std::vector<std::string> out;
  if (r.task_id <= 0) out.push_back("task_id must be positive");
  if (r.flow_id <= 0) out.push_back("flow_id must be positive");
  if (r.id && *r.id <= 0) out.push_back("id must be positive when present");
  std::set<std::tuple<int, int, std::int64_t>> keys;
  for (const PredictionRow& p : r.predictions) {
    if (!keys.insert({p.repeat, p.fold, p.row_id}).second)
      out.push_back("duplicate prediction key (" + std::to_string(p.repeat) + "," +
                    std::to_string(p.fold) + "," + std::to_string(p.row_id) + ")");
  }
  for (const auto& [path, value] : r.setup)
    if (!resolve_parameter_path(flow, path))
      out.push_back("setup path does not resolve to a flow parameter: " + path);
  std::set<std::pair<int, int>> selected;
  std::set<std::pair<int, int>> folds_seen;
  for (const TraceRow& t : r.trace) {
    folds_seen.insert({t.repeat, t.fold});
    if (t.selected && !selected.insert({t.repeat, t.fold}).second)
      out.push_back("more than one selected trace row for (" +
                    std::to_string(t.repeat) + "," + std::to_string(t.fold) + ")");
  }
  for (const auto& rf : folds_seen)
    if (!selected.count(rf))
      out.push_back("no selected trace row for (" + std::to_string(rf.first) + "," +
                    std::to_string(rf.second) + ")");
  return out;
}

std::vector<std::string> validate(const Suite& s) {
  std::vector<std::string> out;
  if (s.task_ids.empty()) out.push_back("task_ids must be non-empty");
  std::set<std::int64_t> ids;
  for (std::int64_t id : s.task_ids) {
    if (id <= 0) out.push_back("task id must be positive: " + std::to_string(id));
    if (!ids.insert(id).second)
      out.push_back("duplicate task id: " + std::to_string(id));
  }
  return out;
}

std::vector<std::string> validate(const EvaluationRecord& e) {
  std::vector<std::string> out;
  if (e.run_id <= 0) out.push_back("run_id must be positive");
  if (e.task_id <= 0) out.push_back("task_id must be positive");
  if (e.flow_id <= 0) out.push_back("flow_id must be positive");
  if (e.function.empty()) out.push_back("function must be non-empty");
  if (!std::isfinite(e.value)) out.push_back("value must be finite");
  return out;
}

std::string canonical_flow_name(const Flow& flow) {
  if (flow.components.empty()) return flow.name;
  std::ostringstream os;
  os << flow.name << '(';
  bool first = true;
  for (const auto& [role, child] : flow.components) {
    if (!first) os << ',';
    first = false;
    os << role << '=' << canonical_flow_name(child);
  }
  os << ')';
  return os.str();
}

bool resolve_parameter_path(const Flow& flow, const std::string& path) {
  auto dot = path.find('.');
  std::string head = path.substr(0, dot);
  // A head matching a component role descends; otherwise the whole remaining
  // path must be a parameter of this flow. Reference flow node names contain
  // dots, so parameter segments never do.
  for (const auto& [role, child] : flow.components)
    if (role == head && dot != std::string::npos)
      return resolve_parameter_path(child, path.substr(dot + 1));
  for (const FlowParameter& p : flow.parameters)
    if (p.name == path) return true;
  return false;
}

}  // namespace oml
