#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "omlclient/arff.hpp"
#include "omlclient/entities.hpp"

// Learner-extension contract (model <-> flow conversion, seeding, fold
// training, trace extraction) plus the built-in reference learner family.
//
// Reference node kinds, all under the "ref." flow namespace:
//   majority     - majority class, frequency confidences
//   stump        - threshold tree on single features, parameter max_depth
//   nn1          - 1-nearest-neighbor, Euclidean over numeric columns
//   impute.mean  - transformer: numeric missing -> training mean
//   onehot       - transformer: nominal columns -> indicator columns
//   pipeline     - composite: transformers then a final learner
//   grid         - meta-learner: grid search by inner 2-fold CV accuracy
namespace oml::ext {

struct ModelSpec {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> params;
  std::vector<ModelSpec> children;

  bool operator==(const ModelSpec&) const = default;
};

// Normalized spec: known defaults filled in, params in declaration order.
ModelSpec make_spec(std::string kind,
                    std::vector<std::pair<std::string, std::string>> params = {},
                    std::vector<ModelSpec> children = {});

struct UnknownFlavorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownFlowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidParameterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateFoldError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PredictionFragment {
  std::int64_t row_id = 0;
  std::string prediction;
  std::vector<double> confidences;  // aligned with task class_labels
};

struct FoldResult {
  std::vector<PredictionFragment> predictions;  // one per test row, test order
  std::vector<TraceRow> trace;                  // grid search only; repeat/fold unset
};

class Extension {
 public:
  virtual ~Extension() = default;
  virtual std::string flavor() const = 0;
  // Exactly one extension may claim a flow namespace prefix.
  virtual std::string flow_namespace() const = 0;
  virtual Flow model_to_flow(const ModelSpec& model) const = 0;
  virtual ModelSpec flow_to_model(
      const Flow& flow,
      const std::vector<std::pair<std::string, std::string>>& setup) const = 0;
  virtual FoldResult fit_predict_fold(const ModelSpec& model,
                                      const arff::DataTable& table,
                                      const std::string& target,
                                      const std::vector<std::string>& class_labels,
                                      const std::vector<std::int64_t>& train_idx,
                                      const std::vector<std::int64_t>& test_idx,
                                      std::int64_t seed) const = 0;
};

// Static registry keyed by flavor string; the reference extension "ref" is
// always registered.
const Extension& find_extension(const std::string& flavor);
const Extension& extension_for_flow(const Flow& flow);

// Convenience wrappers over the registry.
Flow model_to_flow(const ModelSpec& model);
ModelSpec flow_to_model(const Flow& flow,
                        const std::vector<std::pair<std::string, std::string>>& setup);
FoldResult fit_predict_fold(const ModelSpec& model, const arff::DataTable& table,
                            const std::string& target,
                            const std::vector<std::string>& class_labels,
                            const std::vector<std::int64_t>& train_idx,
                            const std::vector<std::int64_t>& test_idx,
                            std::int64_t seed);

// Full parameter assignment of a model, as role-dotted paths from the root.
std::vector<std::pair<std::string, std::string>> extract_setup(const ModelSpec& model);

// Component role a child of the given kind occupies inside a composite.
std::string role_for_kind(const std::string& kind);

// Deterministic inner 2-fold split used by the grid-search learner; exposed
// so tests can evaluate grid points independently.
std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> inner_cv_split(
    const std::vector<std::int64_t>& train_idx, std::int64_t seed);

inline constexpr const char* kExtensionVersion = "ref-1.0.0";

}  // namespace oml::ext
