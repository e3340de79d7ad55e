#include "omlclient/mockserver.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "omlclient/arff.hpp"
#include "omlclient/cache.hpp"
#include "omlclient/entities.hpp"
#include "omlclient/protocol.hpp"

namespace oml::mock {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("fixture missing: " + p.string());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::vector<std::string> split_segments(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    if (s[pos] == '/') { ++pos; continue; }
    auto next = s.find('/', pos);
    out.push_back(s.substr(pos, next == std::string::npos ? std::string::npos
                                                          : next - pos));
    if (next == std::string::npos) break;
    pos = next;
  }
  return out;
}

}  // namespace

struct MockServer::Impl {
  fs::path dir;
  httplib::Server server;
  std::thread thread;
  std::string base_url;

  mutable std::mutex count_mu;
  std::map<std::string, int> counts;

  std::map<std::string, std::pair<int, std::string>> error_table;

  std::map<std::int64_t, std::string> dataset_xml;
  std::map<std::int64_t, std::string> dataset_name;
  std::map<std::int64_t, std::string> payloads;
  std::map<std::int64_t, Task> tasks;
  std::map<std::int64_t, std::string> task_xml;
  std::map<std::int64_t, std::string> splits;
  std::map<std::int64_t, Flow> flows;
  std::map<std::int64_t, std::string> flow_xml;
  std::map<std::string, std::string> study_xml;
  std::vector<EvaluationRecord> evaluations;

  std::mutex upload_mu;  // serializes id assignment
  std::int64_t next_id = 10000;
  std::map<std::pair<std::string, std::string>, std::int64_t> flow_dedup;
  std::map<std::int64_t, std::pair<std::string, std::string>> runs;  // xml, arff

  void count(const std::string& path) {
    std::lock_guard<std::mutex> lock(count_mu);
    std::string key = path;
    if (!key.empty() && key.front() == '/') key.erase(0, 1);
    ++counts[key];
  }

  void send_error(httplib::Response& res, const std::string& key, int http_status,
                  const std::string& detail = {}) {
    auto it = error_table.find(key);
    int code = it == error_table.end() ? 0 : it->second.first;
    std::string message = it == error_table.end() ? key : it->second.second;
    if (!detail.empty()) message += ": " + detail;
    res.status = http_status;
    res.set_content(protocol::encode_error(code, message), "text/xml");
  }

  void load() {
    for (auto& line : [this] {
           std::vector<std::string> lines;
           std::istringstream in(read_file(dir / "errors.tsv"));
           std::string l;
           while (std::getline(in, l))
             if (!l.empty()) lines.push_back(l);
           return lines;
         }()) {
      auto t1 = line.find('\t');
      auto t2 = line.find('\t', t1 + 1);
      error_table[line.substr(0, t1)] = {std::stoi(line.substr(t1 + 1, t2 - t1 - 1)),
                                         line.substr(t2 + 1)};
    }
    if (fs::exists(dir / "dataset"))
      for (const auto& entry : fs::directory_iterator(dir / "dataset")) {
        std::int64_t id = std::stoll(entry.path().filename().string());
        std::string xml_text = read_file(entry.path() / "description.xml");
        DatasetDescription d = protocol::decode_dataset(xml::parse(xml_text));
        dataset_xml[id] = xml_text;
        dataset_name[id] = d.name;
        payloads[id] = read_file(entry.path() / "payload.arff");
        if (cache::md5_hex(payloads[id]) != d.file_checksum)
          throw std::runtime_error("fixture checksum mismatch for dataset " +
                                   std::to_string(id));
      }
    if (fs::exists(dir / "task"))
      for (const auto& entry : fs::directory_iterator(dir / "task")) {
        std::int64_t id = std::stoll(entry.path().filename().string());
        std::string xml_text = read_file(entry.path() / "description.xml");
        tasks[id] = protocol::decode_task(xml::parse(xml_text));
        task_xml[id] = xml_text;
        splits[id] = read_file(entry.path() / "splits.arff");
      }
    if (fs::exists(dir / "flow"))
      for (const auto& entry : fs::directory_iterator(dir / "flow")) {
        std::int64_t id = std::stoll(entry.path().filename().string());
        std::string xml_text = read_file(entry.path() / "description.xml");
        Flow f = protocol::decode_flow(xml::parse(xml_text));
        flows[id] = f;
        flow_xml[id] = xml_text;
        flow_dedup[{canonical_flow_name(f), f.external_version}] = id;
      }
    if (fs::exists(dir / "study"))
      for (const auto& entry : fs::directory_iterator(dir / "study"))
        study_xml[entry.path().filename().string()] =
            read_file(entry.path() / "description.xml");
    if (fs::exists(dir / "evaluation"))
      for (const auto& entry : fs::directory_iterator(dir / "evaluation"))
        evaluations.push_back(protocol::decode_evaluation(
            xml::parse(read_file(entry.path() / "description.xml"))));

    // Fixture self-consistency.
    for (const auto& [id, t] : tasks)
      if (!dataset_xml.count(t.dataset_id))
        throw std::runtime_error("task " + std::to_string(id) +
                                 " references missing dataset " +
                                 std::to_string(t.dataset_id));
    for (const EvaluationRecord& e : evaluations) {
      if (!flows.count(e.flow_id))
        throw std::runtime_error("evaluation references missing flow " +
                                 std::to_string(e.flow_id));
      if (!tasks.count(e.task_id))
        throw std::runtime_error("evaluation references missing task " +
                                 std::to_string(e.task_id));
    }
    for (const auto& [alias, xml_text] : study_xml) {
      Suite s = protocol::decode_suite(xml::parse(xml_text));
      for (std::int64_t tid : s.task_ids)
        if (!tasks.count(tid))
          throw std::runtime_error("study " + alias + " references missing task " +
                                   std::to_string(tid));
    }
  }

  bool check_auth(const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("api_key") || req.get_param_value("api_key").empty()) {
      send_error(res, "authentication", 401);
      return false;
    }
    return true;
  }

  void routes() {
    server.set_pre_routing_handler(
        [this](const httplib::Request& req, httplib::Response&) {
          count(req.path);
          return httplib::Server::HandlerResponse::Unhandled;
        });

    server.Get(R"(/data/(\d+))", [this](const httplib::Request& req,
                                        httplib::Response& res) {
      std::int64_t id = std::stoll(req.matches[1]);
      auto it = dataset_xml.find(id);
      if (it == dataset_xml.end()) return send_error(res, "unknown_dataset", 404);
      res.set_content(it->second, "text/xml");
    });
    server.Get(R"(/datafile/(\d+))", [this](const httplib::Request& req,
                                            httplib::Response& res) {
      std::int64_t id = std::stoll(req.matches[1]);
      auto it = payloads.find(id);
      if (it == payloads.end()) return send_error(res, "unknown_dataset", 404);
      res.set_content(it->second, "text/plain");
    });
    server.Get(R"(/task/(\d+)/splits)", [this](const httplib::Request& req,
                                               httplib::Response& res) {
      std::int64_t id = std::stoll(req.matches[1]);
      auto it = splits.find(id);
      if (it == splits.end()) return send_error(res, "unknown_task", 404);
      res.set_content(it->second, "text/plain");
    });
    server.Get(R"(/task/(\d+))", [this](const httplib::Request& req,
                                        httplib::Response& res) {
      std::int64_t id = std::stoll(req.matches[1]);
      auto it = task_xml.find(id);
      if (it == task_xml.end()) return send_error(res, "unknown_task", 404);
      res.set_content(it->second, "text/xml");
    });
    server.Get(R"(/flow/(\d+))", [this](const httplib::Request& req,
                                        httplib::Response& res) {
      std::int64_t id = std::stoll(req.matches[1]);
      auto it = flow_xml.find(id);
      if (it == flow_xml.end()) return send_error(res, "unknown_flow", 404);
      res.set_content(it->second, "text/xml");
    });
    server.Get(R"(/run/(\d+)/predictions)", [this](const httplib::Request& req,
                                                   httplib::Response& res) {
      std::int64_t id = std::stoll(req.matches[1]);
      std::lock_guard<std::mutex> lock(upload_mu);
      auto it = runs.find(id);
      if (it == runs.end()) return send_error(res, "unknown_run", 404);
      res.set_content(it->second.second, "text/plain");
    });
    server.Get(R"(/run/(\d+))", [this](const httplib::Request& req,
                                       httplib::Response& res) {
      std::int64_t id = std::stoll(req.matches[1]);
      std::lock_guard<std::mutex> lock(upload_mu);
      auto it = runs.find(id);
      if (it == runs.end()) return send_error(res, "unknown_run", 404);
      res.set_content(it->second.first, "text/xml");
    });
    server.Get(R"(/study/([^/]+))", [this](const httplib::Request& req,
                                           httplib::Response& res) {
      auto it = study_xml.find(req.matches[1]);
      if (it == study_xml.end()) return send_error(res, "unknown_study", 404);
      res.set_content(it->second, "text/xml");
    });

    server.Get(R"(/(data|task|flow)/list(/.*)?)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 handle_list(req.matches[1], req.matches.size() > 2
                                                 ? std::string(req.matches[2])
                                                 : std::string(),
                             res);
               });
    server.Get(R"(/evaluation/list(/.*)?)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 handle_evaluation_list(req.matches.size() > 1
                                            ? std::string(req.matches[1])
                                            : std::string(),
                                        res);
               });

    server.Post("/data", [this](const httplib::Request& req, httplib::Response& res) {
      if (!check_auth(req, res)) return;
      handle_post_data(req, res);
    });
    server.Post("/flow", [this](const httplib::Request& req, httplib::Response& res) {
      if (!check_auth(req, res)) return;
      handle_post_flow(req, res);
    });
    server.Post("/run", [this](const httplib::Request& req, httplib::Response& res) {
      if (!check_auth(req, res)) return;
      handle_post_run(req, res);
    });
    server.Post("/task", [this](const httplib::Request& req, httplib::Response& res) {
      if (!check_auth(req, res)) return;
      handle_post_task(req, res);
    });

    server.Get(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
      send_error(res, "unknown_route", 404, req.path);
    });
    server.Post(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
      send_error(res, "unknown_route", 404, req.path);
    });
  }

  void handle_list(const std::string& kind, const std::string& rest,
                   httplib::Response& res) {
    std::vector<std::string> segs = split_segments(rest);
    std::map<std::string, std::string> filters;
    for (std::size_t i = 0; i + 1 < segs.size(); i += 2) filters[segs[i]] = segs[i + 1];
    std::int64_t offset = filters.count("offset") ? std::stoll(filters["offset"]) : 0;
    std::int64_t limit = filters.count("limit") ? std::stoll(filters["limit"]) : 10000;
    filters.erase("offset");
    filters.erase("limit");

    std::vector<std::pair<std::int64_t, std::string>> all;
    if (kind == "data") {
      for (const auto& [id, name] : dataset_name) all.emplace_back(id, name);
    } else if (kind == "task") {
      for (const auto& [id, t] : tasks)
        all.emplace_back(id, "task-" + std::to_string(id));
    } else {
      for (const auto& [id, f] : flows) all.emplace_back(id, f.name);
    }
    // maps iterate in ascending id order already
    std::vector<std::pair<std::int64_t, std::string>> matched;
    for (const auto& [id, name] : all) {
      bool ok = true;
      for (const auto& [fname, fvalue] : filters) {
        if (fname == "name") ok = ok && name == fvalue;
        else ok = false;  // unsupported filter matches nothing
      }
      if (ok) matched.emplace_back(id, name);
    }
    xml::Node out("list");
    std::int64_t skipped = 0, taken = 0;
    for (const auto& [id, name] : matched) {
      if (skipped < offset) { ++skipped; continue; }
      if (taken >= limit) break;
      xml::Node& item = out.add("item");
      item.add("id", std::to_string(id));
      item.add("name", name);
      ++taken;
    }
    res.set_content(xml::serialize(out), "text/xml");
  }

  void handle_evaluation_list(const std::string& rest, httplib::Response& res) {
    std::vector<std::string> segs = split_segments(rest);
    std::string function;
    std::vector<std::int64_t> flow_filter, task_filter;
    for (std::size_t i = 0; i + 1 < segs.size(); i += 2) {
      if (segs[i] == "function") function = segs[i + 1];
      else if (segs[i] == "flow") flow_filter.push_back(std::stoll(segs[i + 1]));
      else if (segs[i] == "task") task_filter.push_back(std::stoll(segs[i + 1]));
    }
    if (function != "predictive_accuracy")
      return send_error(res, "unknown_metric", 404, function);
    xml::Node out("evaluations");
    for (const EvaluationRecord& e : evaluations) {
      if (e.function != function) continue;
      if (!flow_filter.empty() &&
          std::find(flow_filter.begin(), flow_filter.end(), e.flow_id) ==
              flow_filter.end())
        continue;
      if (!task_filter.empty() &&
          std::find(task_filter.begin(), task_filter.end(), e.task_id) ==
              task_filter.end())
        continue;
      out.children.push_back(protocol::encode(e));
    }
    res.set_content(xml::serialize(out), "text/xml");
  }

  void reply_id(httplib::Response& res, std::int64_t id) {
    xml::Node n("upload");
    n.add("id", std::to_string(id));
    res.set_content(xml::serialize(n), "text/xml");
  }

  void handle_post_data(const httplib::Request& req, httplib::Response& res) {
    if (!req.has_file("description") || !req.has_file("dataset"))
      return send_error(res, "upload_validation", 412,
                        "description and dataset parts required");
    try {
      DatasetDescription d =
          protocol::decode_dataset(xml::parse(req.get_file_value("description").content));
      auto violations = validate(d);
      if (!violations.empty())
        return send_error(res, "upload_validation", 412, violations.front());
      std::string payload = req.get_file_value("dataset").content;
      if (cache::md5_hex(payload) != d.file_checksum)
        return send_error(res, "upload_validation", 412, "payload checksum mismatch");
      arff::parse(payload);  // must be well-formed
      std::lock_guard<std::mutex> lock(upload_mu);
      std::int64_t id = next_id++;
      d.id = id;
      d.payload_url = "/datafile/" + std::to_string(id);
      dataset_xml[id] = xml::serialize(protocol::encode(d));
      dataset_name[id] = d.name;
      payloads[id] = payload;
      reply_id(res, id);
    } catch (const std::exception& e) {
      send_error(res, "upload_validation", 412, e.what());
    }
  }

  void handle_post_flow(const httplib::Request& req, httplib::Response& res) {
    if (!req.has_file("description"))
      return send_error(res, "upload_validation", 412, "description part required");
    try {
      Flow f =
          protocol::decode_flow(xml::parse(req.get_file_value("description").content));
      auto violations = validate(f);
      if (!violations.empty())
        return send_error(res, "upload_validation", 412, violations.front());
      std::lock_guard<std::mutex> lock(upload_mu);
      auto key = std::make_pair(canonical_flow_name(f), f.external_version);
      auto it = flow_dedup.find(key);
      if (it != flow_dedup.end()) return reply_id(res, it->second);
      std::int64_t id = next_id++;
      f.id = id;
      flows[id] = f;
      flow_xml[id] = xml::serialize(protocol::encode(f));
      flow_dedup[key] = id;
      reply_id(res, id);
    } catch (const std::exception& e) {
      send_error(res, "upload_validation", 412, e.what());
    }
  }

  void handle_post_run(const httplib::Request& req, httplib::Response& res) {
    if (!req.has_file("description") || !req.has_file("predictions"))
      return send_error(res, "upload_validation", 412,
                        "description and predictions parts required");
    try {
      Run r = protocol::decode_run(xml::parse(req.get_file_value("description").content));
      if (!tasks.count(r.task_id))
        return send_error(res, "unknown_task", 404, std::to_string(r.task_id));
      if (!flows.count(r.flow_id))
        return send_error(res, "unknown_flow", 404, std::to_string(r.flow_id));
      std::string pred_text = req.get_file_value("predictions").content;
      arff::ArffDocument doc = arff::parse(pred_text);
      arff::DataTable table = arff::coerce_table(doc);
      const arff::Column* prediction = table.find_column("prediction");
      const arff::Column* correct = table.find_column("correct");
      if (!prediction || !correct)
        return send_error(res, "upload_validation", 412,
                          "predictions need 'prediction' and 'correct' columns");
      std::vector<const arff::Column*> conf_cols;
      for (const arff::Column& c : table.columns)
        if (c.name.rfind("confidence.", 0) == 0) conf_cols.push_back(&c);
      std::size_t n_correct = 0;
      for (std::size_t i = 0; i < table.row_count; ++i) {
        double sum = 0;
        for (const arff::Column* c : conf_cols) {
          double v = c->missing[i] ? 0.0 : c->reals[i];
          if (v < 0.0 || v > 1.0)
            return send_error(res, "upload_validation", 412,
                              "confidence out of [0,1] in row " + std::to_string(i));
          sum += v;
        }
        if (!conf_cols.empty() && std::abs(sum - 1.0) > 1e-6)
          return send_error(res, "upload_validation", 412,
                            "confidences do not sum to 1 in row " + std::to_string(i));
        bool row_correct = !prediction->missing[i] && !correct->missing[i] &&
                           prediction->codes[i] == correct->codes[i];
        if (row_correct) ++n_correct;
      }
      double accuracy =
          table.row_count
              ? static_cast<double>(n_correct) / static_cast<double>(table.row_count)
              : 0.0;
      auto claimed = r.local_evaluations.find("predictive_accuracy");
      if (claimed != r.local_evaluations.end() &&
          std::abs(claimed->second - accuracy) > 1e-9)
        return send_error(res, "upload_validation", 412,
                          "claimed predictive_accuracy " +
                              arff::format_double(claimed->second) +
                              " does not match recomputed " +
                              arff::format_double(accuracy));
      std::lock_guard<std::mutex> lock(upload_mu);
      std::int64_t id = next_id++;
      r.id = id;
      runs[id] = {xml::serialize(protocol::encode(r)), pred_text};
      reply_id(res, id);
    } catch (const std::exception& e) {
      send_error(res, "upload_validation", 412, e.what());
    }
  }

  void handle_post_task(const httplib::Request& req, httplib::Response& res) {
    if (!req.has_file("description"))
      return send_error(res, "upload_validation", 412, "description part required");
    try {
      Task t = protocol::decode_task(xml::parse(req.get_file_value("description").content));
      if (!dataset_xml.count(t.dataset_id))
        return send_error(res, "unknown_dataset", 404, std::to_string(t.dataset_id));
      std::string splits_text =
          req.has_file("splits") ? req.get_file_value("splits").content : std::string();
      if (!splits_text.empty()) arff::parse(splits_text);
      std::lock_guard<std::mutex> lock(upload_mu);
      std::int64_t id = next_id++;
      t.id = id;
      t.estimation_procedure.splits_ref = "/task/" + std::to_string(id) + "/splits";
      auto violations = validate(t);
      if (!violations.empty())
        return send_error(res, "upload_validation", 412, violations.front());
      tasks[id] = t;
      task_xml[id] = xml::serialize(protocol::encode(t));
      splits[id] = splits_text;
      reply_id(res, id);
    } catch (const std::exception& e) {
      send_error(res, "upload_validation", 412, e.what());
    }
  }
};

MockServer::MockServer(const fs::path& fixtures_dir) : impl_(new Impl) {
  impl_->dir = fixtures_dir;
  impl_->load();
  impl_->routes();
  int port = impl_->server.bind_to_any_port("127.0.0.1");
  if (port <= 0) throw std::runtime_error("mock server failed to bind a port");
  impl_->base_url = "http://127.0.0.1:" + std::to_string(port);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  while (!impl_->server.is_running())
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
}

MockServer::~MockServer() { stop(); }

const std::string& MockServer::base_url() const { return impl_->base_url; }

std::map<std::string, int> MockServer::request_counts() const {
  std::lock_guard<std::mutex> lock(impl_->count_mu);
  return impl_->counts;
}

int MockServer::total_requests() const {
  std::lock_guard<std::mutex> lock(impl_->count_mu);
  int total = 0;
  for (const auto& [path, n] : impl_->counts) total += n;
  return total;
}

void MockServer::reset_counters() {
  std::lock_guard<std::mutex> lock(impl_->count_mu);
  impl_->counts.clear();
}

int MockServer::error_code(const std::string& key) const {
  auto it = impl_->error_table.find(key);
  return it == impl_->error_table.end() ? 0 : it->second.first;
}

void MockServer::stop() {
  if (impl_ && impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

}  // namespace oml::mock
