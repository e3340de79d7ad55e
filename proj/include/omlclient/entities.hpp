#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

// Immutable domain types mirroring the platform's entity model, plus their
// validation rules. Serialization lives in protocol/ and arff/.
namespace oml {

enum class FeatureKind { Numeric, Nominal, String, Date };

std::string to_string(FeatureKind kind);
std::optional<FeatureKind> feature_kind_from_string(const std::string& s);

struct Feature {
  int index = 0;
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  std::vector<std::string> nominal_values;  // non-empty iff kind == Nominal
  std::int64_t missing_count = 0;

  bool operator==(const Feature&) const = default;
};

struct DatasetDescription {
  std::optional<std::int64_t> id;  // absent for local drafts
  std::string name;
  std::int64_t version = 1;
  std::optional<std::string> default_target_attribute;
  std::string file_checksum;  // hex MD5 of the payload file
  std::string payload_url;    // where the payload ARFF lives, may be relative
  std::vector<Feature> features;
  std::map<std::string, double> qualities;

  bool operator==(const DatasetDescription&) const = default;
};

enum class TaskType { SupervisedClassification, SupervisedRegression };

std::string to_string(TaskType t);
std::optional<TaskType> task_type_from_string(const std::string& s);

enum class EstimationKind { CrossValidation, Holdout };

struct EstimationProcedure {
  EstimationKind kind = EstimationKind::CrossValidation;
  int repeats = 1;
  int folds = 10;           // crossvalidation only
  double percentage = 0.0;  // holdout only, in (0,100)
  std::string splits_ref;   // identifier of the split table artifact

  bool operator==(const EstimationProcedure&) const = default;
};

struct Task {
  std::int64_t id = 0;
  TaskType task_type = TaskType::SupervisedClassification;
  std::int64_t dataset_id = 0;
  std::string target_name;
  EstimationProcedure estimation_procedure;
  std::vector<std::string> class_labels;  // classification only

  bool operator==(const Task&) const = default;
};

struct FlowParameter {
  std::string name;
  std::string default_value;
  std::string kind;

  bool operator==(const FlowParameter&) const = default;
};

struct Flow {
  std::optional<std::int64_t> id;
  std::string name;  // dotted identifier
  std::string external_version;
  std::vector<FlowParameter> parameters;
  std::vector<std::pair<std::string, Flow>> components;  // role -> subflow, ordered
  std::string dependencies;

  bool operator==(const Flow&) const = default;
};

struct PredictionRow {
  int repeat = 0;
  int fold = 0;
  std::int64_t row_id = 0;
  std::string prediction;  // label (classification) or formatted real
  std::string truth;
  std::vector<double> confidences;  // aligned with task class_labels

  bool operator==(const PredictionRow&) const = default;
};

struct TraceRow {
  int repeat = 0;
  int fold = 0;
  int iteration = 0;
  std::string setup_string;  // "name=value;..."
  double evaluation = 0.0;
  bool selected = false;

  bool operator==(const TraceRow&) const = default;
};

struct Run {
  std::optional<std::int64_t> id;
  std::int64_t task_id = 0;
  std::int64_t flow_id = 0;
  std::vector<std::pair<std::string, std::string>> setup;  // parameter path -> value
  std::int64_t seed = 0;
  std::vector<PredictionRow> predictions;
  std::vector<TraceRow> trace;
  std::map<std::string, double> local_evaluations;

  bool operator==(const Run&) const = default;
};

struct Suite {
  std::string alias;
  std::string name;
  std::vector<std::int64_t> task_ids;

  bool operator==(const Suite&) const = default;
};

struct EvaluationRecord {
  std::int64_t run_id = 0;
  std::int64_t task_id = 0;
  std::int64_t flow_id = 0;
  std::string function;
  double value = 0.0;
  std::map<std::string, std::string> parameters;  // flattened setup columns

  bool operator==(const EvaluationRecord&) const = default;
};

// Maximum allowed nesting depth of a flow tree.
inline constexpr int kMaxFlowDepth = 32;

// Each validate returns the list of invariant violations; empty means valid.
// Violations are data, not failures.
std::vector<std::string> validate(const DatasetDescription& d);
std::vector<std::string> validate(const Task& t);
std::vector<std::string> validate(const Flow& f);
std::vector<std::string> validate(const Run& r, const Flow& flow);
std::vector<std::string> validate(const Suite& s);
std::vector<std::string> validate(const EvaluationRecord& e);

// Leaf flows yield their name; composites yield
// name(role1=child1,role2=child2,...) with roles in component order.
std::string canonical_flow_name(const Flow& flow);

// True when `path` ("role.role.param") addresses a parameter of the flow tree.
bool resolve_parameter_path(const Flow& flow, const std::string& path);

}  // namespace oml
