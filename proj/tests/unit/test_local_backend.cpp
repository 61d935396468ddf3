#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "hpcadvisor/config.hpp"
#include "hpcadvisor/errors.hpp"
#include "hpcadvisor/executor.hpp"
#include "hpcadvisor/scenario.hpp"

using namespace hpcadvisor;
using namespace std::chrono_literals;

namespace {

const std::filesystem::path kData = HPCADVISOR_TEST_DATA;

std::filesystem::path fresh_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hpca_local_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::filesystem::path write_script(const std::filesystem::path& dir, const std::string& body) {
  auto p = dir / "app.sh";
  std::ofstream(p) << body;
  return p;
}

TaskSpec toy_task(int nnodes) {
  TaskSpec t;
  t.sku = "hb120rs_v3";
  t.nnodes = nnodes;
  t.ppn = 2;
  t.appinputs = {{"BOXFACTOR", "30"}};
  t.id = make_task_id(t.sku, t.nnodes, t.ppn, t.appinputs, {});
  return t;
}

}  // namespace

TEST(LocalBackend, RunsSetupThenTasks) {
  const auto dir = fresh_dir("run");
  LocalBackendOptions opts;
  opts.workdir = dir;
  LocalBackend backend(validate_app_script(kData / "scripts/toy.sh"), opts);
  SweepConfig cfg;
  cfg.rgprefix = "toy";
  backend.create_deployment(cfg);
  ASSERT_TRUE(backend.has_deployment());
  EXPECT_EQ(backend.deployment_id(), "local-toy");

  const auto task = toy_task(3);
  EXPECT_THROW(backend.execute(task), StateError);
  const auto setup = backend.run_setup(task.sku);
  EXPECT_TRUE(setup.ok) << setup.output;
  EXPECT_TRUE(std::filesystem::exists(dir / "input.txt"));
  backend.resize_pool(task.sku, task.nnodes);

  const auto result = backend.execute(task);
  EXPECT_TRUE(result.exit_ok) << result.stdout_text;
  EXPECT_EQ(result.advisor_vars.at("APPEXECTIME"), "100");
  EXPECT_EQ(result.advisor_vars.at("NP"), "6");
  EXPECT_NE(result.stdout_text.find("localhost:2"), std::string::npos);
  EXPECT_DOUBLE_EQ(effective_exectime(result), 100.0);
  EXPECT_TRUE(std::filesystem::exists(dir / task.id / "input.txt"));
  EXPECT_TRUE(std::filesystem::exists(dir / task.id / "hostfile"));
  std::filesystem::remove_all(dir);
}

TEST(LocalBackend, Environment) {
  auto env = task_environment(toy_task(2), "/tmp/x");
  EXPECT_EQ(env.at("BOXFACTOR"), "30");
  EXPECT_EQ(env.at("NNODES"), "2");
  EXPECT_EQ(env.at("PPN"), "2");
  EXPECT_EQ(env.at("SKU"), "hb120rs_v3");
  EXPECT_EQ(env.at("TASKRUN_DIR"), "/tmp/x");
}

TEST(LocalBackend, FailingRunIsNotOk) {
  const auto dir = fresh_dir("fail");
  LocalBackendOptions opts;
  opts.workdir = dir;
  const auto result = local_execute(toy_task(1), validate_app_script(kData / "scripts/failing.sh"), opts);
  EXPECT_FALSE(result.exit_ok);
  EXPECT_NE(result.stdout_text.find("did not complete"), std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST(LocalBackend, TimeoutKillsProcessGroup) {
  const auto dir = fresh_dir("timeout");
  const auto script = write_script(dir, "hpcadvisor_setup() { :; }\nhpcadvisor_run() { sleep 30 & sleep 30; }\n");
  LocalBackendOptions opts;
  opts.workdir = dir;
  opts.timeout = 200ms;
  const auto started = std::chrono::steady_clock::now();
  const auto shell = run_script_function(script, "hpcadvisor_run", dir, {}, opts);
  EXPECT_TRUE(shell.timed_out);
  EXPECT_LT(std::chrono::steady_clock::now() - started, 5s);
  std::filesystem::remove_all(dir);
}

TEST(LocalBackend, MissingFunctionFails) {
  const auto dir = fresh_dir("missing");
  const auto script = write_script(dir, "hpcadvisor_setup() { :; }\n");
  LocalBackendOptions opts;
  opts.workdir = dir;
  const auto shell = run_script_function(script, "hpcadvisor_run", dir, {}, opts);
  EXPECT_NE(shell.exit_status, 0);
  std::filesystem::remove_all(dir);
}
