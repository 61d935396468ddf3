#include <gtest/gtest.h>

#include <filesystem>
#include <set>
#include <thread>

#include "hpcadvisor/cli.hpp"
#include "hpcadvisor/service.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace hpcadvisor;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

const std::filesystem::path kData = HPCADVISOR_TEST_DATA;

class ServiceTest : public ::testing::Test {
 protected:
  std::filesystem::path dir;
  std::unique_ptr<Service> service;
  std::unique_ptr<httplib::Client> client;

  void SetUp() override {
    dir = std::filesystem::temp_directory_path() /
          ("hpca_svc_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    ServiceOptions opts;
    opts.workspace = Workspace{dir / "state", dir / "data.jsonl"};
    opts.config = kData / "openfoam_sweep.yaml";
    opts.pricing = kData / "pricing.csv";
    service = std::make_unique<Service>(opts);
    const int port = service->start_background();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    client->set_read_timeout(30, 0);
  }
  void TearDown() override {
    service.reset();
    std::filesystem::remove_all(dir);
  }

  json get(const std::string& path, int expected = 200) {
    auto res = client->Get(path);
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expected) << path << " " << res->body;
    return json::parse(res->body);
  }
  json post(const std::string& path, const json& body, int expected) {
    auto res = client->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expected) << path << " " << res->body;
    return json::parse(res->body);
  }

  json wait_finished(const std::string& handle) {
    for (int i = 0; i < 3000; ++i) {
      auto s = get("/api/v1/collections/" + handle);
      if (s["state"] != "running") return s;
      std::this_thread::sleep_for(10ms);
    }
    ADD_FAILURE() << "collection did not finish";
    return {};
  }
};

json slow_model() {
  return {{"realtime_factor", 2e-5},
          {"entries", json::array({{{"sku", "*"}, {"t_serial", 20}, {"t_parallel", 2e5}, {"t_comm", 0.5}}})}};
}

}  // namespace

TEST(Parity, EveryCommandHasAnEndpointAndBack) {
  std::set<std::string> from_endpoints;
  for (const auto& e : Service::endpoints()) {
    EXPECT_EQ(e.path.rfind("/api/v1", 0) == 0 || e.path == "/", true) << e.path;
    if (!e.cli_command.empty()) from_endpoints.insert(e.cli_command);
  }
  const auto names = cli::command_names();
  EXPECT_EQ(from_endpoints, std::set<std::string>(names.begin(), names.end()));
}

TEST_F(ServiceTest, CommandsEndpointListsParityTable) {
  const auto j = get("/api/v1/commands");
  EXPECT_EQ(j["endpoints"].size(), Service::endpoints().size());
  auto res = client->Get("/");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_NE(res->body.find("/api/v1"), std::string::npos);
}

TEST_F(ServiceTest, DeploymentLifecycle) {
  EXPECT_TRUE(get("/api/v1/deployments")["deployments"].empty());
  const auto created = post("/api/v1/deployments", json::object(), 201);
  EXPECT_EQ(created["id"], "hpcadvisortest1d1");
  EXPECT_EQ(created["state"], "active");
  const auto listed = get("/api/v1/deployments")["deployments"];
  ASSERT_EQ(listed.size(), 1u);
  EXPECT_EQ(listed[0]["resources"].size(), 7u);
  const auto down = post("/api/v1/deployments/hpcadvisortest1d1/shutdown", json::object(), 200);
  EXPECT_EQ(down["state"], "shutdown");
  post("/api/v1/deployments/nope/shutdown", json::object(), 404);
  post("/api/v1/deployments", {{"config", "ppr: 150\n"}}, 400);
}

TEST_F(ServiceTest, CollectionPollingAndConflict) {
  post("/api/v1/deployments", json::object(), 201);
  const auto started = post("/api/v1/collections", {{"seed", 7}, {"model", slow_model()}}, 202);
  const std::string handle = started["handle"];

  post("/api/v1/collections", {{"seed", 7}}, 409);

  std::uint64_t last_revision = 0;
  bool saw_partial = false;
  json status;
  for (int i = 0; i < 3000; ++i) {
    status = get("/api/v1/collections/" + handle);
    const auto& c = status["counts"];
    EXPECT_EQ(c["pending"].get<int>() + c["failed"].get<int>() + c["completed"].get<int>(), 36);
    EXPECT_EQ(status["tasks"].size(), 36u);
    EXPECT_GE(status["revision"].get<std::uint64_t>(), last_revision);
    last_revision = status["revision"];
    const int done = c["completed"];
    if (done > 0 && done < 36) saw_partial = true;
    if (status["state"] != "running") break;
    std::this_thread::sleep_for(5ms);
  }
  EXPECT_TRUE(saw_partial);
  EXPECT_EQ(status["state"], "finished");
  EXPECT_EQ(status["counts"]["completed"], 36);
  EXPECT_EQ(status["report"]["executed"], 36);
  EXPECT_EQ(status["report"]["pool_creations"], 3);

  const auto advice = get("/api/v1/advice?filter=mesh%3D80%2024%2024&sort=cost");
  EXPECT_FALSE(advice["rows"].empty());
  auto plot = client->Get("/api/v1/plot?kind=efficiency");
  ASSERT_TRUE(plot);
  EXPECT_EQ(plot->status, 200);
  EXPECT_NE(plot->body.find("<svg"), std::string::npos);

  // The finished collection no longer blocks a new one.
  const auto again = post("/api/v1/collections", {{"seed", 7}}, 202);
  const auto final_status = wait_finished(again["handle"]);
  EXPECT_EQ(final_status["report"]["previously_completed"], 36);
}

TEST_F(ServiceTest, UserErrorsAreClientErrors) {
  const auto advice = get("/api/v1/advice");
  EXPECT_TRUE(advice["rows"].empty());
  EXPECT_FALSE(advice["notices"].empty());
  get("/api/v1/plot?kind=pie", 400);
  get("/api/v1/plot?kind=speedup", 404);
  get("/api/v1/advice?sort=speed", 400);
  get("/api/v1/collections/c99", 404);
  post("/api/v1/collections", {{"seed", 7}}, 404);
  auto res = client->Post("/api/v1/collections", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}
