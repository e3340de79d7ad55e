#include <charconv>

#include "omlclient/arff.hpp"
#include "omlclient/protocol.hpp"

namespace oml::protocol {

namespace {

std::int64_t to_int(const std::string& s, const char* what) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DecodeError(std::string("bad integer for ") + what + ": '" + s + "'");
  return v;
}

double to_real(const std::string& s, const char* what) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DecodeError(std::string("bad real for ") + what + ": '" + s + "'");
  return v;
}

const xml::Node& need(const xml::Node& n, const char* child) {
  const xml::Node* c = n.find(child);
  if (!c)
    throw DecodeError("missing <" + std::string(child) + "> in <" + n.name + ">");
  return *c;
}

std::string fmt(double v) { return arff::format_double(v); }

}  // namespace

xml::Node encode(const DatasetDescription& d) {
  xml::Node n("dataset");
  if (d.id) n.add("id", std::to_string(*d.id));
  n.add("name", d.name);
  n.add("version", std::to_string(d.version));
  if (d.default_target_attribute)
    n.add("default_target_attribute", *d.default_target_attribute);
  n.add("file_checksum", d.file_checksum);
  if (!d.payload_url.empty()) n.add("payload_url", d.payload_url);
  for (const Feature& f : d.features) {
    xml::Node& fn = n.add("feature");
    fn.add("index", std::to_string(f.index));
    fn.add("name", f.name);
    fn.add("kind", to_string(f.kind));
    fn.add("missing_count", std::to_string(f.missing_count));
    for (const std::string& v : f.nominal_values) fn.add("nominal_value", v);
  }
  for (const auto& [name, value] : d.qualities) {
    xml::Node& qn = n.add("quality");
    qn.add("name", name);
    qn.add("value", fmt(value));
  }
  return n;
}

DatasetDescription decode_dataset(const xml::Node& n) {
  if (n.name != "dataset") throw DecodeError("expected <dataset>, got <" + n.name + ">");
  DatasetDescription d;
  if (const xml::Node* id = n.find("id")) d.id = to_int(id->text, "dataset.id");
  d.name = need(n, "name").text;
  d.version = to_int(need(n, "version").text, "dataset.version");
  if (const xml::Node* t = n.find("default_target_attribute"))
    d.default_target_attribute = t->text;
  d.file_checksum = need(n, "file_checksum").text;
  d.payload_url = n.child_text("payload_url");
  for (const xml::Node* fn : n.find_all("feature")) {
    Feature f;
    f.index = static_cast<int>(to_int(need(*fn, "index").text, "feature.index"));
    f.name = need(*fn, "name").text;
    auto kind = feature_kind_from_string(need(*fn, "kind").text);
    if (!kind) throw DecodeError("unknown feature kind in dataset " + d.name);
    f.kind = *kind;
    f.missing_count = to_int(need(*fn, "missing_count").text, "feature.missing_count");
    for (const xml::Node* v : fn->find_all("nominal_value"))
      f.nominal_values.push_back(v->text);
    d.features.push_back(std::move(f));
  }
  for (const xml::Node* qn : n.find_all("quality"))
    d.qualities[need(*qn, "name").text] =
        to_real(need(*qn, "value").text, "quality.value");
  return d;
}

xml::Node encode(const Task& t) {
  xml::Node n("task");
  n.add("id", std::to_string(t.id));
  n.add("task_type", to_string(t.task_type));
  n.add("dataset_id", std::to_string(t.dataset_id));
  n.add("target_name", t.target_name);
  xml::Node& ep = n.add("estimation_procedure");
  const EstimationProcedure& p = t.estimation_procedure;
  ep.add("kind", p.kind == EstimationKind::CrossValidation ? "crossvalidation"
                                                           : "holdout");
  ep.add("repeats", std::to_string(p.repeats));
  if (p.kind == EstimationKind::CrossValidation)
    ep.add("folds", std::to_string(p.folds));
  else
    ep.add("percentage", fmt(p.percentage));
  ep.add("splits_ref", p.splits_ref);
  for (const std::string& label : t.class_labels) n.add("class_label", label);
  return n;
}

Task decode_task(const xml::Node& n) {
  if (n.name != "task") throw DecodeError("expected <task>, got <" + n.name + ">");
  Task t;
  t.id = to_int(need(n, "id").text, "task.id");
  auto type = task_type_from_string(need(n, "task_type").text);
  if (!type) throw DecodeError("unknown task_type");
  t.task_type = *type;
  t.dataset_id = to_int(need(n, "dataset_id").text, "task.dataset_id");
  t.target_name = need(n, "target_name").text;
  const xml::Node& ep = need(n, "estimation_procedure");
  EstimationProcedure& p = t.estimation_procedure;
  std::string kind = need(ep, "kind").text;
  if (kind == "crossvalidation") {
    p.kind = EstimationKind::CrossValidation;
    p.folds = static_cast<int>(to_int(need(ep, "folds").text, "folds"));
  } else if (kind == "holdout") {
    p.kind = EstimationKind::Holdout;
    p.percentage = to_real(need(ep, "percentage").text, "percentage");
  } else {
    throw DecodeError("unknown estimation procedure kind '" + kind + "'");
  }
  p.repeats = static_cast<int>(to_int(need(ep, "repeats").text, "repeats"));
  p.splits_ref = ep.child_text("splits_ref");
  for (const xml::Node* c : n.find_all("class_label"))
    t.class_labels.push_back(c->text);
  return t;
}

xml::Node encode(const Flow& f) {
  xml::Node n("flow");
  if (f.id) n.add("id", std::to_string(*f.id));
  n.add("name", f.name);
  n.add("external_version", f.external_version);
  if (!f.dependencies.empty()) n.add("dependencies", f.dependencies);
  for (const FlowParameter& p : f.parameters) {
    xml::Node& pn = n.add("parameter");
    pn.add("name", p.name);
    pn.add("default_value", p.default_value);
    pn.add("kind", p.kind);
  }
  for (const auto& [role, child] : f.components) {
    xml::Node& cn = n.add("component");
    cn.add("role", role);
    cn.children.push_back(encode(child));
  }
  return n;
}

Flow decode_flow(const xml::Node& n) {
  if (n.name != "flow") throw DecodeError("expected <flow>, got <" + n.name + ">");
  Flow f;
  if (const xml::Node* id = n.find("id")) f.id = to_int(id->text, "flow.id");
  f.name = need(n, "name").text;
  f.external_version = need(n, "external_version").text;
  f.dependencies = n.child_text("dependencies");
  for (const xml::Node* pn : n.find_all("parameter"))
    f.parameters.push_back({need(*pn, "name").text, pn->child_text("default_value"),
                            pn->child_text("kind")});
  for (const xml::Node* cn : n.find_all("component"))
    f.components.emplace_back(need(*cn, "role").text,
                              decode_flow(need(*cn, "flow")));
  return f;
}

xml::Node encode(const Run& r) {
  xml::Node n("run");
  if (r.id) n.add("id", std::to_string(*r.id));
  n.add("task_id", std::to_string(r.task_id));
  n.add("flow_id", std::to_string(r.flow_id));
  n.add("seed", std::to_string(r.seed));
  for (const auto& [path, value] : r.setup) {
    xml::Node& sn = n.add("setting");
    sn.add("path", path);
    sn.add("value", value);
  }
  for (const auto& [name, value] : r.local_evaluations) {
    xml::Node& en = n.add("evaluation");
    en.add("name", name);
    en.add("value", fmt(value));
  }
  for (const TraceRow& t : r.trace) {
    xml::Node& tn = n.add("trace_row");
    tn.add("repeat", std::to_string(t.repeat));
    tn.add("fold", std::to_string(t.fold));
    tn.add("iteration", std::to_string(t.iteration));
    tn.add("setup_string", t.setup_string);
    tn.add("evaluation", fmt(t.evaluation));
    tn.add("selected", t.selected ? "true" : "false");
  }
  return n;
}

Run decode_run(const xml::Node& n) {
  if (n.name != "run") throw DecodeError("expected <run>, got <" + n.name + ">");
  Run r;
  if (const xml::Node* id = n.find("id")) r.id = to_int(id->text, "run.id");
  r.task_id = to_int(need(n, "task_id").text, "run.task_id");
  r.flow_id = to_int(need(n, "flow_id").text, "run.flow_id");
  r.seed = to_int(need(n, "seed").text, "run.seed");
  for (const xml::Node* sn : n.find_all("setting"))
    r.setup.emplace_back(need(*sn, "path").text, sn->child_text("value"));
  for (const xml::Node* en : n.find_all("evaluation"))
    r.local_evaluations[need(*en, "name").text] =
        to_real(need(*en, "value").text, "evaluation.value");
  for (const xml::Node* tn : n.find_all("trace_row")) {
    TraceRow t;
    t.repeat = static_cast<int>(to_int(need(*tn, "repeat").text, "trace.repeat"));
    t.fold = static_cast<int>(to_int(need(*tn, "fold").text, "trace.fold"));
    t.iteration =
        static_cast<int>(to_int(need(*tn, "iteration").text, "trace.iteration"));
    t.setup_string = need(*tn, "setup_string").text;
    t.evaluation = to_real(need(*tn, "evaluation").text, "trace.evaluation");
    t.selected = need(*tn, "selected").text == "true";
    r.trace.push_back(std::move(t));
  }
  return r;
}

xml::Node encode(const Suite& s) {
  xml::Node n("study");
  n.add("alias", s.alias);
  n.add("name", s.name);
  for (std::int64_t id : s.task_ids) n.add("task_id", std::to_string(id));
  return n;
}

Suite decode_suite(const xml::Node& n) {
  if (n.name != "study") throw DecodeError("expected <study>, got <" + n.name + ">");
  Suite s;
  s.alias = need(n, "alias").text;
  s.name = n.child_text("name");
  for (const xml::Node* c : n.find_all("task_id"))
    s.task_ids.push_back(to_int(c->text, "study.task_id"));
  return s;
}

xml::Node encode(const EvaluationRecord& e) {
  xml::Node n("evaluation");
  n.add("run_id", std::to_string(e.run_id));
  n.add("task_id", std::to_string(e.task_id));
  n.add("flow_id", std::to_string(e.flow_id));
  n.add("function", e.function);
  n.add("value", fmt(e.value));
  for (const auto& [name, value] : e.parameters) {
    xml::Node& pn = n.add("parameter");
    pn.add("name", name);
    pn.add("value", value);
  }
  return n;
}

EvaluationRecord decode_evaluation(const xml::Node& n) {
  if (n.name != "evaluation")
    throw DecodeError("expected <evaluation>, got <" + n.name + ">");
  EvaluationRecord e;
  e.run_id = to_int(need(n, "run_id").text, "evaluation.run_id");
  e.task_id = to_int(need(n, "task_id").text, "evaluation.task_id");
  e.flow_id = to_int(need(n, "flow_id").text, "evaluation.flow_id");
  e.function = need(n, "function").text;
  e.value = to_real(need(n, "value").text, "evaluation.value");
  for (const xml::Node* pn : n.find_all("parameter"))
    e.parameters[need(*pn, "name").text] = pn->child_text("value");
  return e;
}

ApiError decode_error(int http_status, const std::string& body) {
  try {
    xml::Node n = xml::parse(body);
    if (n.name == "error") {
      int code = static_cast<int>(to_int(need(n, "code").text, "error.code"));
      return ApiError(http_status, code, n.child_text("message"));
    }
  } catch (const std::exception&) {
    // fall through to the opaque-body form
  }
  return ApiError(http_status, 0, body.substr(0, 200));
}

std::string encode_error(int code, const std::string& message) {
  xml::Node n("error");
  n.add("code", std::to_string(code));
  n.add("message", message);
  return xml::serialize(n);
}

std::string to_string(EntityKind k) {
  switch (k) {
    case EntityKind::Dataset: return "dataset";
    case EntityKind::Task: return "task";
    case EntityKind::Flow: return "flow";
    case EntityKind::Run: return "run";
    case EntityKind::Suite: return "study";
  }
  return "dataset";
}

}  // namespace oml::protocol
