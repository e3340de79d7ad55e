#include "omlclient/cache.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>

#include <openssl/evp.h>

namespace oml::cache {

namespace fs = std::filesystem;

std::string to_string(Artifact a) {
  switch (a) {
    case Artifact::Description: return "description";
    case Artifact::Payload: return "payload";
    case Artifact::Splits: return "splits";
    case Artifact::Features: return "features";
  }
  return "description";
}

fs::path cache_path(const std::string& host, const std::string& kind,
                    const std::string& id, Artifact artifact) {
  const char* ext = artifact == Artifact::Description ? "xml" : "arff";
  return fs::path(host) / kind / id / (to_string(artifact) + "." + std::string(ext));
}

std::string host_of(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  std::string rest =
      scheme_end == std::string::npos ? base_url : base_url.substr(scheme_end + 3);
  auto slash = rest.find('/');
  return slash == std::string::npos ? rest : rest.substr(0, slash);
}

std::string md5_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_md5(), nullptr);
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

namespace {

std::optional<std::string> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return data;
}

std::atomic<unsigned> temp_counter{0};

void write_atomic(const fs::path& target, const std::string& bytes) {
  fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp" + std::to_string(::getpid()) + "." +
         std::to_string(temp_counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("cache write failed: " + tmp.string());
    }
  }
  fs::rename(tmp, target);  // atomic within one filesystem
}

}  // namespace

std::string fetch_cached(const CacheConfig& cfg, const fs::path& rel_path,
                         const std::optional<std::string>& expected_md5,
                         const Fetcher& fetch) {
  fs::path full = cfg.root_dir / rel_path;
  if (auto existing = read_file(full)) {
    if (!expected_md5 || md5_hex(*existing) == *expected_md5) return *existing;
    // corrupt entry: treat as a miss
  }
  if (cfg.offline)
    throw OfflineError("offline mode: cache miss for " + rel_path.string());
  std::string bytes = fetch();
  if (expected_md5 && md5_hex(bytes) != *expected_md5)
    throw ChecksumError("checksum mismatch for " + rel_path.string() +
                        ": expected " + *expected_md5 + ", got " + md5_hex(bytes));
  write_atomic(full, bytes);
  return bytes;
}

namespace {

std::string host_of_client(const protocol::Client& client) {
  return host_of(client.config().base_url);
}

std::string cached_description(const CacheConfig& cfg, const protocol::Client& client,
                               const std::string& kind, const std::string& id,
                               const std::string& path) {
  fs::path rel =
      cache_path(host_of_client(client), kind, id, Artifact::Description);
  return fetch_cached(cfg, rel, std::nullopt,
                      [&] { return client.get_bytes(path); });
}

}  // namespace

DatasetDescription get_dataset(const CacheConfig& cfg, const protocol::Client& client,
                               std::int64_t id) {
  std::string body = cached_description(cfg, client, "dataset", std::to_string(id),
                                        "/data/" + std::to_string(id));
  return protocol::decode_dataset(xml::parse(body));
}

Task get_task(const CacheConfig& cfg, const protocol::Client& client,
              std::int64_t id) {
  std::string body = cached_description(cfg, client, "task", std::to_string(id),
                                        "/task/" + std::to_string(id));
  return protocol::decode_task(xml::parse(body));
}

Flow get_flow(const CacheConfig& cfg, const protocol::Client& client,
              std::int64_t id) {
  std::string body = cached_description(cfg, client, "flow", std::to_string(id),
                                        "/flow/" + std::to_string(id));
  return protocol::decode_flow(xml::parse(body));
}

Suite get_suite(const CacheConfig& cfg, const protocol::Client& client,
                const std::string& alias) {
  std::string body =
      cached_description(cfg, client, "study", alias, "/study/" + alias);
  return protocol::decode_suite(xml::parse(body));
}

arff::DataTable fetch_dataset_payload(const CacheConfig& cfg,
                                      const protocol::Client& client,
                                      const DatasetDescription& dataset) {
  if (!dataset.id) throw std::invalid_argument("dataset has no id");
  fs::path rel = cache_path(host_of_client(client), "dataset",
                            std::to_string(*dataset.id), Artifact::Payload);
  std::optional<std::string> checksum;
  if (!dataset.file_checksum.empty()) checksum = dataset.file_checksum;
  std::string bytes = fetch_cached(
      cfg, rel, checksum, [&] { return client.get_bytes(dataset.payload_url); });
  return arff::coerce_table(arff::parse(bytes));
}

arff::ArffDocument fetch_task_splits(const CacheConfig& cfg,
                                     const protocol::Client& client,
                                     const Task& task) {
  fs::path rel = cache_path(host_of_client(client), "task", std::to_string(task.id),
                            Artifact::Splits);
  std::string bytes =
      fetch_cached(cfg, rel, std::nullopt, [&] {
        return client.get_bytes(task.estimation_procedure.splits_ref);
      });
  return arff::parse(bytes);
}

std::size_t clear(const CacheConfig& cfg, const std::string& host,
                  const std::string& kind, const std::string& id) {
  fs::path target = cfg.root_dir / host;
  if (!kind.empty()) target /= kind;
  if (!kind.empty() && !id.empty()) target /= id;
  std::error_code ec;
  std::size_t removed = fs::remove_all(target, ec);
  return ec ? 0 : removed;
}

fs::path default_cache_root() {
  if (const char* env = std::getenv("OMLCLIENT_CACHEDIR"); env && *env)
    return fs::path(env);
  if (const char* home = std::getenv("HOME"); home && *home)
    return fs::path(home) / ".omlclient" / "cache";
  return fs::path(".omlclient-cache");
}

}  // namespace oml::cache
