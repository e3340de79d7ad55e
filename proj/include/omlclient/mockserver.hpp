#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

// Hermetic in-process HTTP test double implementing the client's endpoint
// map over fixture files, with request counting and upload validation.
namespace oml::mock {

// Writes the bundled fixture corpus into `dir`: the 3-task "local-mini"
// suite, four extra tiny datasets for paging tests, flow 8353 metadata,
// 50 synthetic evaluation records over a C/gamma grid, and errors.tsv.
// Deterministic across runs.
void write_fixture_corpus(const std::filesystem::path& dir);

class MockServer {
 public:
  // Loads fixtures (validating self-consistency), binds an ephemeral local
  // port and starts serving.
  explicit MockServer(const std::filesystem::path& fixtures_dir);
  ~MockServer();

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  const std::string& base_url() const;

  // Per-endpoint request counts, keyed by path without the leading slash.
  std::map<std::string, int> request_counts() const;
  int total_requests() const;
  void reset_counters();

  // Error code from the fixtures' errors.tsv table.
  int error_code(const std::string& key) const;

  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace oml::mock
