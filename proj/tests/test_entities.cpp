#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>

#include "omlclient/entities.hpp"

using namespace oml;

namespace {

Flow leaf(const std::string& name) {
  Flow f;
  f.name = name;
  f.external_version = "v1";
  return f;
}

}  // namespace

TEST_CASE("flow with a duplicate parameter name is flagged") {
  Flow f = leaf("ref.stump");
  f.parameters.push_back({"C", "1.0", "numeric"});
  f.parameters.push_back({"C", "2.0", "numeric"});
  auto violations = validate(f);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0] == "parameter name not unique: C");
}

TEST_CASE("classification task needs at least two class labels") {
  Task t;
  t.id = 1;
  t.dataset_id = 1;
  t.target_name = "class";
  t.class_labels = {"only"};
  auto violations = validate(t);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0] == "class_labels must have >= 2 entries");
}

TEST_CASE("a well-formed suite has no violations") {
  Suite s{"OpenML-CC18", "curated", {6}};
  CHECK(validate(s).empty());
}

TEST_CASE("suite violations") {
  CHECK(validate(Suite{"x", "", {}}) ==
        std::vector<std::string>{"task_ids must be non-empty"});
  CHECK(validate(Suite{"x", "", {6, 6}}) ==
        std::vector<std::string>{"duplicate task id: 6"});
  CHECK(validate(Suite{"x", "", {-1}}) ==
        std::vector<std::string>{"task id must be positive: -1"});
}

TEST_CASE("dataset validation") {
  DatasetDescription d;
  d.name = "letter";
  Feature a{0, "x1", FeatureKind::Numeric, {}, 0};
  Feature b{1, "class", FeatureKind::Nominal, {"A", "B"}, 0};
  d.features = {a, b};
  d.default_target_attribute = "class";
  CHECK(validate(d).empty());

  SUBCASE("duplicate feature names") {
    d.features[1].name = "x1";
    d.default_target_attribute.reset();
    auto v = validate(d);
    REQUIRE(!v.empty());
    CHECK(v[0] == "feature name not unique: x1");
  }
  SUBCASE("non-contiguous indices") {
    d.features[1].index = 5;
    auto v = validate(d);
    CHECK(v[0] == "feature indices must be contiguous from 0, got 5 at position 1");
  }
  SUBCASE("target must exist") {
    d.default_target_attribute = "nope";
    auto v = validate(d);
    CHECK(v[0] == "default_target_attribute names no existing feature: nope");
  }
  SUBCASE("duplicate nominal values") {
    d.features[1].nominal_values = {"A", "A"};
    auto v = validate(d);
    CHECK(v[0] == "nominal_values has duplicates: class");
  }
}

TEST_CASE("canonical flow names") {
  CHECK(canonical_flow_name(leaf("ref.majority")) == "ref.majority");

  Flow pipeline = leaf("ref.pipeline");
  pipeline.components.emplace_back("imputer", leaf("ref.impute.mean"));
  pipeline.components.emplace_back("learner", leaf("ref.stump"));
  CHECK(canonical_flow_name(pipeline) ==
        "ref.pipeline(imputer=ref.impute.mean,learner=ref.stump)");

  Flow grid = leaf("ref.grid");
  grid.components.emplace_back("inner", pipeline);
  CHECK(canonical_flow_name(grid) ==
        "ref.grid(inner=ref.pipeline(imputer=ref.impute.mean,learner=ref.stump))");

  // Equal trees yield equal names, and validate-clean flows never fail.
  Flow again = grid;
  CHECK(validate(grid).empty());
  CHECK(canonical_flow_name(again) == canonical_flow_name(grid));
}

TEST_CASE("flow depth limit") {
  Flow f = leaf("ref.pipeline");
  Flow* tip = &f;
  for (int i = 0; i < kMaxFlowDepth; ++i) {
    tip->components.emplace_back("inner", leaf("ref.pipeline"));
    tip = &tip->components.back().second;
  }
  auto v = validate(f);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "flow tree exceeds depth limit 32");
}

TEST_CASE("parameter path resolution walks component roles") {
  Flow stump = leaf("ref.stump");
  stump.parameters.push_back({"max_depth", "1", "numeric"});
  Flow pipeline = leaf("ref.pipeline");
  pipeline.components.emplace_back("learner", stump);

  CHECK(resolve_parameter_path(pipeline, "learner.max_depth"));
  CHECK(resolve_parameter_path(stump, "max_depth"));
  CHECK(!resolve_parameter_path(pipeline, "max_depth"));
  CHECK(!resolve_parameter_path(pipeline, "encoder.max_depth"));
  CHECK(!resolve_parameter_path(pipeline, "learner.min_samples"));
}

TEST_CASE("run validation catches duplicate prediction keys and setup paths") {
  Flow stump = leaf("ref.stump");
  stump.parameters.push_back({"max_depth", "1", "numeric"});

  Run r;
  r.task_id = 6;
  r.flow_id = 1;
  r.setup = {{"max_depth", "2"}};
  PredictionRow p;
  p.repeat = 0;
  p.fold = 1;
  p.row_id = 7;
  r.predictions = {p, p};
  auto v = validate(r, stump);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "duplicate prediction key (0,1,7)");

  r.predictions.pop_back();
  r.setup = {{"bogus", "2"}};
  v = validate(r, stump);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "setup path does not resolve to a flow parameter: bogus");
}

TEST_CASE("trace needs exactly one selected row per repeat-fold") {
  Flow f = leaf("ref.grid");
  Run r;
  r.task_id = 6;
  r.flow_id = 1;
  TraceRow a{0, 0, 0, "max_depth=1", 0.5, false};
  TraceRow b{0, 0, 1, "max_depth=2", 0.6, false};

  SUBCASE("none selected") {
    r.trace = {a, b};
    auto v = validate(r, f);
    REQUIRE(v.size() == 1);
    CHECK(v[0] == "no selected trace row for (0,0)");
  }
  SUBCASE("two selected") {
    a.selected = b.selected = true;
    r.trace = {a, b};
    auto v = validate(r, f);
    REQUIRE(v.size() == 1);
    CHECK(v[0] == "more than one selected trace row for (0,0)");
  }
  SUBCASE("exactly one selected") {
    b.selected = true;
    r.trace = {a, b};
    CHECK(validate(r, f).empty());
  }
}

TEST_CASE("validate is pure and equality is structural") {
  Task t;
  t.id = 3;
  t.dataset_id = 4;
  t.target_name = "y";
  t.class_labels = {"a", "b"};
  CHECK(validate(t) == validate(t));

  DatasetDescription d1, d2;
  d1.name = d2.name = "d";
  d1.qualities["a"] = 1.0;
  d1.qualities["b"] = 2.0;
  d2.qualities["b"] = 2.0;  // insertion order differs, maps compare equal
  d2.qualities["a"] = 1.0;
  CHECK(d1 == d2);
}

TEST_CASE("evaluation record validation") {
  EvaluationRecord e;
  e.run_id = 1;
  e.task_id = 6;
  e.flow_id = 8353;
  e.function = "predictive_accuracy";
  e.value = 0.8;
  CHECK(validate(e).empty());
  e.value = std::numeric_limits<double>::infinity();
  CHECK(validate(e) == std::vector<std::string>{"value must be finite"});
}
