#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hpcadvisor/app.hpp"

namespace httplib {
class Server;
}

namespace hpcadvisor {

// One row of the CLI <-> HTTP parity table.
struct Endpoint {
  std::string method;
  std::string path;
  std::string cli_command;  // e.g. "deploy create"
  std::string description;
};

inline constexpr std::string_view kApiPrefix = "/api/v1";

struct ServiceOptions {
  Workspace workspace;
  std::optional<std::filesystem::path> config;   // defaults for requests without a config
  std::optional<std::filesystem::path> pricing;
  std::optional<std::filesystem::path> model;
  std::optional<std::filesystem::path> ui_dir;   // static UI bundle served at /
};

// Local HTTP API. Collections run on one background worker; every other request reads
// snapshots and never blocks on the worker.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  static const std::vector<Endpoint>& endpoints();

  void register_routes(httplib::Server& server);
  // Blocks until stop() is called from another thread.
  bool listen(const std::string& host, int port);
  // Binds to an ephemeral port and returns it; serving happens on a background thread.
  int start_background(const std::string& host = "127.0.0.1");
  void stop();
  // Waits for the running collection, if any.
  void wait_for_collection();

 private:
  struct Job;
  std::string create_deployment(const std::string& body, int& status);
  std::string start_collection(const std::string& body, int& status);
  std::string collection_status(const std::string& handle, int& status);

  ServiceOptions options_;
  std::mutex cloud_mutex_;
  SimCloud cloud_;
  std::mutex jobs_mutex_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::shared_ptr<Job> running_;
  std::uint64_t next_handle_ = 1;
  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;
};

}  // namespace hpcadvisor
