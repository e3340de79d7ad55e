#include <cmath>
#include <fstream>
#include <random>

#include "omlclient/arff.hpp"
#include "omlclient/cache.hpp"
#include "omlclient/mockserver.hpp"
#include "omlclient/protocol.hpp"
#include "omlclient/runner.hpp"

namespace oml::mock {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

void fill_missing_counts(DatasetDescription& d, const arff::ArffDocument& doc) {
  for (Feature& f : d.features) {
    std::int64_t count = 0;
    for (const auto& row : doc.rows)
      if (arff::is_missing(row[static_cast<std::size_t>(f.index)])) ++count;
    f.missing_count = count;
  }
}

void write_dataset(const fs::path& dir, DatasetDescription d,
                   const arff::ArffDocument& payload) {
  std::string arff_text = arff::serialize(payload);
  d.file_checksum = cache::md5_hex(arff_text);
  d.payload_url = "/datafile/" + std::to_string(*d.id);
  fill_missing_counts(d, payload);
  d.qualities["NumberOfInstances"] = static_cast<double>(payload.rows.size());
  d.qualities["NumberOfFeatures"] = static_cast<double>(payload.attributes.size());
  fs::path base = dir / "dataset" / std::to_string(*d.id);
  write_file(base / "description.xml", xml::serialize(protocol::encode(d)));
  write_file(base / "payload.arff", arff_text);
}

void write_task(const fs::path& dir, const Task& t, std::size_t n_rows) {
  fs::path base = dir / "task" / std::to_string(t.id);
  write_file(base / "description.xml", xml::serialize(protocol::encode(t)));
  write_file(base / "splits.arff",
             arff::serialize(runner::make_cv_splits(
                 t.id, n_rows, t.estimation_procedure.repeats,
                 t.estimation_procedure.folds)));
}

arff::ArffDocument make_letter(DatasetDescription& d) {
  d.id = 6;
  d.name = "letter";
  d.default_target_attribute = "class";
  arff::ArffDocument doc;
  doc.relation = "letter";
  std::vector<std::string> labels;
  for (char c = 'A'; c <= 'Z'; ++c) labels.push_back(std::string(1, c));
  for (int i = 1; i <= 16; ++i)
    doc.attributes.push_back({"x" + std::to_string(i), FeatureKind::Numeric, {}});
  doc.attributes.push_back({"class", FeatureKind::Nominal, labels});
  std::mt19937_64 gen(6001);
  std::uniform_int_distribution<int> feature_dist(0, 15);
  std::uniform_int_distribution<int> noise_dist(0, 9);
  std::uniform_int_distribution<int> label_dist(0, 25);
  for (int r = 0; r < 500; ++r) {
    std::vector<arff::Cell> row;
    std::vector<int> vals;
    for (int j = 0; j < 16; ++j) {
      int v = feature_dist(gen);
      vals.push_back(v);
      row.emplace_back(static_cast<double>(v));
    }
    int label = (vals[0] * 3 + vals[1] * 5 + vals[2] * 7 + vals[3]) % 26;
    if (noise_dist(gen) == 0) label = label_dist(gen);
    row.emplace_back(labels[static_cast<std::size_t>(label)]);
    doc.rows.push_back(std::move(row));
  }
  for (int i = 0; i < 17; ++i) {
    Feature f;
    f.index = i;
    f.name = i < 16 ? "x" + std::to_string(i + 1) : "class";
    f.kind = i < 16 ? FeatureKind::Numeric : FeatureKind::Nominal;
    if (i == 16) f.nominal_values = labels;
    d.features.push_back(std::move(f));
  }
  return doc;
}

arff::ArffDocument make_credit(DatasetDescription& d) {
  d.id = 31;
  d.name = "credit-mini";
  d.default_target_attribute = "class";
  arff::ArffDocument doc;
  doc.relation = "credit-mini";
  doc.attributes.push_back({"duration", FeatureKind::Numeric, {}});
  doc.attributes.push_back({"amount", FeatureKind::Numeric, {}});
  doc.attributes.push_back(
      {"purpose", FeatureKind::Nominal, {"business", "education", "car"}});
  doc.attributes.push_back({"housing", FeatureKind::Nominal, {"own", "rent"}});
  doc.attributes.push_back({"class", FeatureKind::Nominal, {"good", "bad"}});
  std::mt19937_64 gen(3101);
  std::uniform_int_distribution<int> duration_dist(6, 48);
  std::uniform_int_distribution<int> amount_dist(500, 10000);
  std::uniform_int_distribution<int> purpose_dist(0, 2);
  std::uniform_int_distribution<int> housing_dist(0, 1);
  std::uniform_int_distribution<int> pct(0, 99);
  for (int r = 0; r < 120; ++r) {
    int duration = duration_dist(gen);
    int amount = amount_dist(gen);
    int purpose = purpose_dist(gen);
    int housing = housing_dist(gen);
    bool dur_missing = pct(gen) < 7;
    bool purpose_missing = pct(gen) < 5;
    double risk = duration / 48.0 + amount / 10000.0 + (housing == 1 ? 0.3 : 0.0);
    std::string label = risk + (pct(gen) - 50) / 200.0 > 1.0 ? "bad" : "good";
    std::vector<arff::Cell> row;
    if (dur_missing) row.emplace_back(arff::Missing{});
    else row.emplace_back(static_cast<double>(duration));
    row.emplace_back(static_cast<double>(amount));
    if (purpose_missing) row.emplace_back(arff::Missing{});
    else row.emplace_back(doc.attributes[2].nominal_values[purpose]);
    row.emplace_back(doc.attributes[3].nominal_values[housing]);
    row.emplace_back(label);
    doc.rows.push_back(std::move(row));
  }
  const char* names[] = {"duration", "amount", "purpose", "housing", "class"};
  for (int i = 0; i < 5; ++i) {
    Feature f;
    f.index = i;
    f.name = names[i];
    f.kind = doc.attributes[static_cast<std::size_t>(i)].kind;
    f.nominal_values = doc.attributes[static_cast<std::size_t>(i)].nominal_values;
    d.features.push_back(std::move(f));
  }
  return doc;
}

arff::ArffDocument make_iris(DatasetDescription& d) {
  d.id = 61;
  d.name = "iris-mini";
  d.default_target_attribute = "class";
  arff::ArffDocument doc;
  doc.relation = "iris-mini";
  const char* attrs[] = {"sepal_length", "sepal_width", "petal_length",
                         "petal_width"};
  for (const char* a : attrs)
    doc.attributes.push_back({a, FeatureKind::Numeric, {}});
  doc.attributes.push_back(
      {"class", FeatureKind::Nominal, {"setosa", "versicolor", "virginica"}});
  const double centers[3][4] = {
      {5.0, 3.4, 1.5, 0.2}, {5.9, 2.8, 4.3, 1.3}, {6.6, 3.0, 5.6, 2.0}};
  std::mt19937_64 gen(6101);
  std::uniform_real_distribution<double> jitter(-0.45, 0.45);
  for (int r = 0; r < 90; ++r) {
    int cls = r % 3;
    std::vector<arff::Cell> row;
    for (int j = 0; j < 4; ++j) {
      double v = centers[cls][j] + jitter(gen);
      row.emplace_back(std::round(v * 10) / 10);  // one decimal
    }
    row.emplace_back(doc.attributes[4].nominal_values[static_cast<std::size_t>(cls)]);
    doc.rows.push_back(std::move(row));
  }
  for (int i = 0; i < 5; ++i) {
    Feature f;
    f.index = i;
    f.name = i < 4 ? attrs[i] : "class";
    f.kind = doc.attributes[static_cast<std::size_t>(i)].kind;
    f.nominal_values = doc.attributes[static_cast<std::size_t>(i)].nominal_values;
    d.features.push_back(std::move(f));
  }
  return doc;
}

arff::ArffDocument make_tiny(DatasetDescription& d, int ordinal) {
  d.id = 70 + ordinal;
  d.name = "tiny-" + std::to_string(ordinal);
  d.default_target_attribute = "class";
  arff::ArffDocument doc;
  doc.relation = d.name;
  doc.attributes.push_back({"v", FeatureKind::Numeric, {}});
  doc.attributes.push_back({"class", FeatureKind::Nominal, {"p", "q"}});
  for (int r = 0; r < 10; ++r) {
    double v = ordinal * 10 + r;
    doc.rows.push_back({v, std::string(r % 2 == 0 ? "p" : "q")});
  }
  Feature fv{0, "v", FeatureKind::Numeric, {}, 0};
  Feature fc{1, "class", FeatureKind::Nominal, {"p", "q"}, 0};
  d.features = {fv, fc};
  return doc;
}

void write_flows(const fs::path& dir) {
  Flow svc;
  svc.id = 16;
  svc.name = "sklearn.svm.classes.SVC";
  svc.external_version = "sklearn==0.21.2";
  svc.parameters = {{"C", "1.0", "numeric"}, {"gamma", "0.1", "numeric"}};
  svc.dependencies = "sklearn>=0.21";
  write_file(dir / "flow" / "16" / "description.xml",
             xml::serialize(protocol::encode(svc)));

  Flow pipeline;
  pipeline.id = 8353;
  pipeline.name = "sklearn.pipeline.Pipeline";
  pipeline.external_version = "sklearn==0.21.2";
  pipeline.dependencies = "sklearn>=0.21";
  pipeline.components.emplace_back("estimator", svc);
  write_file(dir / "flow" / "8353" / "description.xml",
             xml::serialize(protocol::encode(pipeline)));
}

void write_evaluations(const fs::path& dir) {
  const char* c_values[] = {"0.01", "0.1", "1", "10", "100"};
  const char* gamma_values[] = {"0.0001", "0.001", "0.01", "0.1", "1"};
  for (int i = 0; i < 50; ++i) {
    int ci = i % 5;
    int gi = (i / 5) % 5;
    int rep = i / 25;
    double lc = ci - 2.0;    // log10(C)
    double lg = gi - 4.0;    // log10(gamma)
    EvaluationRecord e;
    e.run_id = 1000 + i;
    e.task_id = 6;
    e.flow_id = 8353;
    e.function = "predictive_accuracy";
    e.value = 0.2 +
              0.77 * std::exp(-((lc - 1) * (lc - 1) + (lg + 2) * (lg + 2)) / 6.0) +
              0.001 * rep;
    e.parameters["sklearn.svm.classes.SVC(16)_C"] = c_values[ci];
    e.parameters["sklearn.svm.classes.SVC(16)_gamma"] = gamma_values[gi];
    write_file(dir / "evaluation" / std::to_string(e.run_id) / "description.xml",
               xml::serialize(protocol::encode(e)));
  }
}

void write_studies(const fs::path& dir) {
  Suite mini{"local-mini", "Local mini benchmark suite", {6, 11, 12}};
  write_file(dir / "study" / mini.alias / "description.xml",
             xml::serialize(protocol::encode(mini)));
  Suite cc18{"OpenML-CC18", "Curated classification benchmark", {6, 11, 12}};
  write_file(dir / "study" / cc18.alias / "description.xml",
             xml::serialize(protocol::encode(cc18)));
}

}  // namespace

void write_fixture_corpus(const fs::path& dir) {
  {
    DatasetDescription d;
    arff::ArffDocument doc = make_letter(d);
    write_dataset(dir, d, doc);
    Task t;
    t.id = 6;
    t.dataset_id = 6;
    t.target_name = "class";
    t.estimation_procedure = {EstimationKind::CrossValidation, 1, 10, 0.0,
                              "/task/6/splits"};
    t.class_labels = doc.attributes.back().nominal_values;
    write_task(dir, t, doc.rows.size());
  }
  {
    DatasetDescription d;
    arff::ArffDocument doc = make_credit(d);
    write_dataset(dir, d, doc);
    Task t;
    t.id = 11;
    t.dataset_id = 31;
    t.target_name = "class";
    t.estimation_procedure = {EstimationKind::CrossValidation, 2, 2, 0.0,
                              "/task/11/splits"};
    t.class_labels = {"good", "bad"};
    write_task(dir, t, doc.rows.size());
  }
  {
    DatasetDescription d;
    arff::ArffDocument doc = make_iris(d);
    write_dataset(dir, d, doc);
    Task t;
    t.id = 12;
    t.dataset_id = 61;
    t.target_name = "class";
    t.estimation_procedure = {EstimationKind::CrossValidation, 1, 3, 0.0,
                              "/task/12/splits"};
    t.class_labels = {"setosa", "versicolor", "virginica"};
    write_task(dir, t, doc.rows.size());
  }
  for (int i = 0; i < 4; ++i) {
    DatasetDescription d;
    arff::ArffDocument doc = make_tiny(d, i);
    write_dataset(dir, d, doc);
  }
  write_flows(dir);
  write_evaluations(dir);
  write_studies(dir);
  write_file(dir / "errors.tsv",
             "unknown_dataset\t111\tUnknown dataset\n"
             "unknown_task\t151\tUnknown task\n"
             "unknown_flow\t181\tUnknown flow\n"
             "unknown_run\t211\tUnknown run\n"
             "unknown_study\t351\tUnknown study\n"
             "authentication\t103\tAuthentication failed\n"
             "upload_validation\t131\tUpload validation failed\n"
             "unknown_metric\t570\tUnknown evaluation function\n"
             "unknown_route\t0\tUnknown route\n");
}

}  // namespace oml::mock
