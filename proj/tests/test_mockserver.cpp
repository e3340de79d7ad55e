#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <unistd.h>

#include <httplib.h>

#include "omlclient/arff.hpp"
#include "omlclient/mockserver.hpp"
#include "omlclient/protocol.hpp"

using namespace oml;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("omlmock-" + std::to_string(::getpid()) + "-" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// Shared fixture corpus + running server for the read-only tests.
struct ServerFixture {
  TempDir dir;
  mock::MockServer server;
  protocol::Client client;
  protocol::Client authed;

  ServerFixture()
      : server((mock::write_fixture_corpus(dir.path), dir.path)),
        client(protocol::ServerConfig{server.base_url(), {}, 30.0, 0}),
        authed(protocol::ServerConfig{server.base_url(), "testkey", 30.0, 0}) {}
};

Flow ref_flow(const std::string& name) {
  Flow f;
  f.name = name;
  f.external_version = "ref-1.0.0";
  return f;
}

// A consistent 4-row prediction table over labels {A,B} with 3 correct rows.
arff::ArffDocument small_predictions() {
  arff::ArffDocument doc;
  doc.relation = "openml_task_6_predictions";
  doc.attributes.push_back({"repeat", FeatureKind::Numeric, {}});
  doc.attributes.push_back({"fold", FeatureKind::Numeric, {}});
  doc.attributes.push_back({"row_id", FeatureKind::Numeric, {}});
  doc.attributes.push_back({"prediction", FeatureKind::Nominal, {"A", "B"}});
  doc.attributes.push_back({"correct", FeatureKind::Nominal, {"A", "B"}});
  doc.attributes.push_back({"confidence.A", FeatureKind::Numeric, {}});
  doc.attributes.push_back({"confidence.B", FeatureKind::Numeric, {}});
  auto row = [&](double rid, const std::string& pred, const std::string& truth,
                 double ca, double cb) {
    doc.rows.push_back({0.0, 0.0, rid, pred, truth, ca, cb});
  };
  row(0, "A", "A", 0.9, 0.1);
  row(1, "A", "B", 0.6, 0.4);
  row(2, "B", "B", 0.2, 0.8);
  row(3, "B", "B", 0.0, 1.0);
  return doc;
}

Run small_run(std::int64_t flow_id) {
  Run r;
  r.task_id = 6;
  r.flow_id = flow_id;
  r.seed = 1;
  r.local_evaluations["predictive_accuracy"] = 0.75;
  return r;
}

}  // namespace

TEST_CASE("write_fixture_corpus is byte-identical across invocations") {
  TempDir a, b;
  mock::write_fixture_corpus(a.path);
  mock::write_fixture_corpus(b.path);
  std::map<std::string, std::string> files_a, files_b;
  for (const auto& e : fs::recursive_directory_iterator(a.path))
    if (e.is_regular_file())
      files_a[fs::relative(e.path(), a.path).generic_string()] = slurp(e.path());
  for (const auto& e : fs::recursive_directory_iterator(b.path))
    if (e.is_regular_file())
      files_b[fs::relative(e.path(), b.path).generic_string()] = slurp(e.path());
  CHECK(!files_a.empty());
  CHECK(files_a == files_b);
}

TEST_CASE("request counting and entity reads") {
  ServerFixture f;
  Task t = f.client.get_task(6);
  CHECK(t.dataset_id == 6);
  CHECK(f.server.request_counts().at("task/6") == 1);
  CHECK(f.server.total_requests() == 1);
  f.server.reset_counters();
  CHECK(f.server.total_requests() == 0);

  DatasetDescription d = f.client.get_dataset(6);
  CHECK(d.name == "letter");
  Flow svc = f.client.get_flow(16);
  CHECK(svc.external_version == "sklearn==0.21.2");
  Suite cc18 = f.client.get_suite("OpenML-CC18");
  Suite mini = f.client.get_suite("local-mini");
  CHECK(cc18.task_ids == mini.task_ids);
}

TEST_CASE("unknown entities map to the documented error codes") {
  ServerFixture f;
  auto expect_code = [&](auto&& call, const std::string& key) {
    try {
      call();
      FAIL("expected ApiError for " << key);
    } catch (const protocol::ApiError& e) {
      CHECK(e.code == f.server.error_code(key));
      CHECK(e.http_status == 404);
    }
  };
  expect_code([&] { f.client.get_dataset(999999); }, "unknown_dataset");
  expect_code([&] { f.client.get_task(999999); }, "unknown_task");
  expect_code([&] { f.client.get_flow(999999); }, "unknown_flow");
  expect_code([&] { f.client.get_run(999999); }, "unknown_run");
  expect_code([&] { f.client.get_suite("no-such-suite"); }, "unknown_study");
  expect_code([&] { f.client.list_evaluations("f_measure", {16}, {}); },
              "unknown_metric");
  CHECK(f.server.error_code("unknown_dataset") == 111);
  CHECK(f.server.error_code("upload_validation") == 131);

  try {
    f.client.get_bytes("/no/such/route");
    FAIL("expected ApiError");
  } catch (const protocol::ApiError& e) {
    CHECK(e.code == 0);  // unmapped routes carry no platform code
  }
}

TEST_CASE("posting without an api key is rejected by the server") {
  ServerFixture f;
  // Bypass the client (which refuses unauthenticated publishes locally) and
  // hit the endpoint directly.
  httplib::Client raw(f.server.base_url());
  httplib::MultipartFormDataItems parts = {
      {"description", "<oml:flow/>", "description.xml", "text/xml"}};
  auto res = raw.Post("/flow", parts);
  REQUIRE(res);
  CHECK(res->status == 401);
  protocol::ApiError e = protocol::decode_error(res->status, res->body);
  CHECK(e.code == f.server.error_code("authentication"));
  CHECK(e.code == 103);
}

TEST_CASE("flow publication deduplicates on canonical name and version") {
  ServerFixture f;
  std::int64_t first = f.authed.publish_flow(ref_flow("ref.majority"));
  CHECK(first >= 10000);
  CHECK(f.authed.publish_flow(ref_flow("ref.majority")) == first);

  Flow other = ref_flow("ref.nn1");
  std::int64_t second = f.authed.publish_flow(other);
  CHECK(second != first);
  CHECK(second >= 10000);

  // Same name but a different external version is a distinct flow.
  Flow versioned = ref_flow("ref.majority");
  versioned.external_version = "ref-2.0.0";
  CHECK(f.authed.publish_flow(versioned) != first);

  // A flow already present in the fixtures keeps its fixture id.
  Flow svc = f.client.get_flow(16);
  svc.id.reset();
  CHECK(f.authed.publish_flow(svc) == 16);
}

TEST_CASE("run uploads are validated against their own predictions") {
  ServerFixture f;
  std::int64_t flow_id = f.authed.publish_flow(ref_flow("ref.majority"));
  std::string good = arff::serialize(small_predictions());

  SUBCASE("consistent run is accepted and served back verbatim") {
    std::int64_t run_id = f.authed.publish_run(small_run(flow_id), good);
    CHECK(run_id >= 10000);
    Run fetched = f.client.get_run(run_id);
    CHECK(fetched.id == run_id);
    CHECK(fetched.task_id == 6);
    CHECK(f.client.predictions_of_run(run_id) == good);
  }
  SUBCASE("claimed accuracy must match the recomputed value") {
    Run r = small_run(flow_id);
    r.local_evaluations["predictive_accuracy"] = 0.8;  // actually 0.75
    try {
      f.authed.publish_run(r, good);
      FAIL("expected ApiError");
    } catch (const protocol::ApiError& e) {
      CHECK(e.code == 131);
      CHECK(e.message.find("does not match") != std::string::npos);
    }
  }
  SUBCASE("confidence rows must sum to one") {
    arff::ArffDocument doc = small_predictions();
    doc.rows[1][5] = 0.5;  // row sums to 0.9
    try {
      f.authed.publish_run(small_run(flow_id), arff::serialize(doc));
      FAIL("expected ApiError");
    } catch (const protocol::ApiError& e) {
      CHECK(e.code == 131);
      CHECK(e.message.find("sum to 1") != std::string::npos);
    }
  }
  SUBCASE("confidences outside [0,1] are rejected") {
    arff::ArffDocument doc = small_predictions();
    doc.rows[2][5] = -0.1;
    doc.rows[2][6] = 1.1;
    try {
      f.authed.publish_run(small_run(flow_id), arff::serialize(doc));
      FAIL("expected ApiError");
    } catch (const protocol::ApiError& e) {
      CHECK(e.code == 131);
    }
  }
  SUBCASE("runs must reference known tasks and flows") {
    Run r = small_run(flow_id);
    r.task_id = 999999;
    try {
      f.authed.publish_run(r, good);
      FAIL("expected ApiError");
    } catch (const protocol::ApiError& e) {
      CHECK(e.code == f.server.error_code("unknown_task"));
    }
    Run r2 = small_run(999999);
    try {
      f.authed.publish_run(r2, good);
      FAIL("expected ApiError");
    } catch (const protocol::ApiError& e) {
      CHECK(e.code == f.server.error_code("unknown_flow"));
    }
  }
}

TEST_CASE("dataset listing pages deterministically") {
  ServerFixture f;
  // Full fixture inventory, ascending by id.
  auto all = f.client.list_entities(protocol::EntityKind::Dataset, {}, 0, 100);
  REQUIRE(all.size() == 7);
  for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i - 1].id < all[i].id);

  // Paged reads concatenate back to the full listing.
  std::vector<protocol::EntitySummary> paged;
  for (std::int64_t offset = 0; offset < 7; offset += 3) {
    auto page = f.client.list_entities(protocol::EntityKind::Dataset, {}, offset, 3);
    CHECK(page.size() == std::min<std::size_t>(3, 7 - static_cast<std::size_t>(offset)));
    paged.insert(paged.end(), page.begin(), page.end());
  }
  REQUIRE(paged.size() == all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(paged[i].id == all[i].id);
    CHECK(paged[i].name == all[i].name);
  }

  CHECK(f.client.list_entities(protocol::EntityKind::Dataset, {}, 100, 5).empty());

  auto named =
      f.client.list_entities(protocol::EntityKind::Dataset, {{"name", "letter"}}, 0, 10);
  REQUIRE(named.size() == 1);
  CHECK(named[0].id == 6);
  CHECK(named[0].name == "letter");

  auto tasks = f.client.list_entities(protocol::EntityKind::Task, {}, 0, 100);
  CHECK(tasks.size() == 3);
  auto flows = f.client.list_entities(protocol::EntityKind::Flow, {}, 0, 100);
  CHECK(flows.size() == 2);
}

TEST_CASE("evaluation listing filters by flow and task") {
  ServerFixture f;
  auto all = f.client.list_evaluations("predictive_accuracy", {8353}, {6});
  CHECK(all.size() == 50);
  for (const EvaluationRecord& e : all) {
    CHECK(e.flow_id == 8353);
    CHECK(e.task_id == 6);
    CHECK(e.function == "predictive_accuracy");
    CHECK(e.parameters.count("sklearn.svm.classes.SVC(16)_C") == 1);
    CHECK(e.parameters.count("sklearn.svm.classes.SVC(16)_gamma") == 1);
  }
  std::set<std::int64_t> run_ids;
  for (const EvaluationRecord& e : all) CHECK(run_ids.insert(e.run_id).second);

  CHECK(f.client.list_evaluations("predictive_accuracy", {16}, {}).empty());
}

TEST_CASE("task uploads validate and assign the splits reference") {
  ServerFixture f;
  Task t;
  t.id = 1;  // placeholder; the server assigns the real id
  t.dataset_id = 6;
  t.target_name = "class";
  t.class_labels = {"A", "B"};
  t.estimation_procedure.folds = 2;
  t.estimation_procedure.repeats = 1;
  arff::ArffDocument splits;
  splits.relation = "splits";
  splits.attributes.push_back({"type", FeatureKind::Nominal, {"TRAIN", "TEST"}});
  splits.attributes.push_back({"rowid", FeatureKind::Numeric, {}});
  splits.attributes.push_back({"repeat", FeatureKind::Numeric, {}});
  splits.attributes.push_back({"fold", FeatureKind::Numeric, {}});
  splits.rows.push_back({std::string("TEST"), 0.0, 0.0, 0.0});
  splits.rows.push_back({std::string("TRAIN"), 0.0, 0.0, 1.0});

  std::int64_t id = f.authed.publish_task(t, arff::serialize(splits));
  CHECK(id >= 10000);
  Task fetched = f.client.get_task(id);
  CHECK(fetched.dataset_id == 6);
  CHECK(fetched.estimation_procedure.splits_ref ==
        "/task/" + std::to_string(id) + "/splits");
  CHECK(f.client.get_bytes("/task/" + std::to_string(id) + "/splits") ==
        arff::serialize(splits));

  Task bad = t;
  bad.dataset_id = 999999;
  try {
    f.authed.publish_task(bad, arff::serialize(splits));
    FAIL("expected ApiError");
  } catch (const protocol::ApiError& e) {
    CHECK(e.code == f.server.error_code("unknown_dataset"));
  }
}
