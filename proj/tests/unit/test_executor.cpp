#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "hpcadvisor/errors.hpp"
#include "hpcadvisor/executor.hpp"
#include "hpcadvisor/scenario.hpp"

using namespace hpcadvisor;

namespace {

// Records every backend call as a short string.
class FakeBackend final : public ExecutorBackend {
 public:
  std::vector<std::string> calls;
  std::set<std::string> failing_setup;
  std::set<std::string> failing_tasks;
  bool deployed = true;

  void create_deployment(const SweepConfig&) override { deployed = true; }
  bool has_deployment() const override { return deployed; }
  std::string deployment_id() const override { return "dep"; }
  SetupResult run_setup(const std::string& sku) override {
    calls.push_back("setup " + sku);
    return {!failing_setup.count(sku), 5.0, ""};
  }
  void resize_pool(const std::string& sku, int nnodes) override {
    calls.push_back("resize " + sku + " " + std::to_string(nnodes));
  }
  RawRunResult execute(const TaskSpec& task) override {
    calls.push_back("exec " + task.sku + " " + std::to_string(task.nnodes));
    RawRunResult r;
    r.wallclock_seconds = 1000.0;
    r.exit_ok = !failing_tasks.count(task.id);
    r.stdout_text = "HPCADVISORVAR APPEXECTIME=" + std::to_string(100 / task.nnodes) + "\n";
    return r;
  }
  void teardown_pool(TeardownMode mode) override {
    calls.push_back(mode == TeardownMode::remove ? "delete" : "zero");
  }
  void shutdown_deployment() override { deployed = false; }
};

TaskList make_list(std::initializer_list<std::pair<const char*, int>> rows) {
  TaskList list;
  for (auto [sku, n] : rows) {
    TaskSpec t;
    t.sku = sku;
    t.nnodes = n;
    t.ppn = 4;
    t.id = make_task_id(sku, n, 4, {}, {});
    list.tasks.push_back(t);
  }
  return list;
}

PricingCatalog prices() {
  PricingCatalog p;
  p.add("a", {4, 3.6});
  p.add("b", {4, 7.2});
  return p;
}

class SkipEvery final : public SamplingStrategy {
 public:
  std::set<std::string> skip;
  bool should_skip(const TaskSpec& task, std::span<const RunRecord>) override { return skip.count(task.id) > 0; }
};

}  // namespace

TEST(ProcessTasks, FollowsPoolLifecycle) {
  auto list = make_list({{"a", 1}, {"a", 2}, {"b", 1}, {"b", 4}});
  FakeBackend backend;
  DatasetStore store;
  const auto report = process_tasks(list, backend, store, prices());
  const std::vector<std::string> expected = {"setup a", "resize a 1", "exec a 1", "resize a 2", "exec a 2", "zero",
                                             "setup b", "resize b 1", "exec b 1", "resize b 4", "exec b 4", "zero"};
  EXPECT_EQ(backend.calls, expected);
  EXPECT_EQ(report.executed, 4u);
  EXPECT_EQ(report.pool_creations, 2u);
  EXPECT_EQ(report.setups, 2u);
  EXPECT_EQ(report.accounted(), 4u);
  EXPECT_EQ(list.counts().completed, 4u);
  ASSERT_EQ(store.size(), 4u);
  EXPECT_EQ(store.setups().size(), 2u);
}

TEST(ProcessTasks, RecordsUseAdvisorTimeAndCatalogCost) {
  auto list = make_list({{"b", 4}});
  FakeBackend backend;
  DatasetStore store;
  process_tasks(list, backend, store, prices());
  const auto rec = store.current().at(0);
  EXPECT_DOUBLE_EQ(rec.exectime_seconds, 25.0);
  EXPECT_DOUBLE_EQ(rec.wallclock_seconds, 1000.0);
  EXPECT_DOUBLE_EQ(rec.cost, 25.0 / 3600.0 * 4 * 7.2);
  EXPECT_EQ(rec.deployment_id, "dep");
  EXPECT_EQ(rec.advisor_vars.at("APPEXECTIME"), "25");
}

TEST(ProcessTasks, DeleteTeardownMode) {
  auto list = make_list({{"a", 1}, {"b", 1}});
  FakeBackend backend;
  DatasetStore store;
  CollectOptions opts;
  opts.teardown = TeardownMode::remove;
  process_tasks(list, backend, store, prices(), opts);
  EXPECT_EQ(std::count(backend.calls.begin(), backend.calls.end(), "delete"), 2);
}

TEST(ProcessTasks, FailedSetupFailsItsSku) {
  auto list = make_list({{"a", 1}, {"a", 2}, {"b", 1}});
  FakeBackend backend;
  backend.failing_setup = {"a"};
  DatasetStore store;
  const auto report = process_tasks(list, backend, store, prices());
  EXPECT_EQ(report.failed, 2u);
  EXPECT_EQ(report.executed, 1u);
  EXPECT_EQ(report.accounted(), 3u);
  EXPECT_EQ(list.tasks[0].status, TaskStatus::failed);
  EXPECT_EQ(list.tasks[2].status, TaskStatus::completed);
  EXPECT_EQ(backend.calls.front(), "setup a");
  EXPECT_EQ(backend.calls[1], "setup b");
}

TEST(ProcessTasks, FailedTaskThenRetry) {
  auto list = make_list({{"a", 1}, {"a", 2}});
  FakeBackend backend;
  backend.failing_tasks = {list.tasks[1].id};
  DatasetStore store;
  auto report = process_tasks(list, backend, store, prices());
  EXPECT_EQ(report.failed, 1u);
  EXPECT_EQ(store.size(), 1u);

  backend.failing_tasks.clear();
  backend.calls.clear();
  report = process_tasks(list, backend, store, prices());
  EXPECT_EQ(report.executed, 0u);
  EXPECT_EQ(report.failed, 1u);
  EXPECT_TRUE(backend.calls.empty());

  CollectOptions opts;
  opts.retry_failed = true;
  report = process_tasks(list, backend, store, prices(), opts);
  EXPECT_EQ(report.executed, 1u);
  EXPECT_EQ(report.previously_completed, 1u);
  EXPECT_EQ(report.failed, 0u);
  EXPECT_EQ(store.size(), 2u);
}

TEST(ProcessTasks, SkippedTasksStayPending) {
  auto list = make_list({{"a", 1}, {"a", 2}, {"a", 4}});
  FakeBackend backend;
  DatasetStore store;
  SkipEvery sampler;
  sampler.skip = {list.tasks[1].id};
  CollectOptions opts;
  opts.sampler = &sampler;
  const auto report = process_tasks(list, backend, store, prices(), opts);
  EXPECT_EQ(report.skipped_by_sampler, 1u);
  EXPECT_EQ(report.skipped_ids, std::vector<std::string>{list.tasks[1].id});
  EXPECT_EQ(report.remaining_pending, 0u);
  EXPECT_EQ(report.accounted(), 3u);
  EXPECT_EQ(list.tasks[1].status, TaskStatus::pending);
}

TEST(ProcessTasks, StopRequestStillTearsDown) {
  auto list = make_list({{"a", 1}, {"a", 2}, {"a", 4}});
  FakeBackend backend;
  DatasetStore store;
  int polls = 0;
  CollectOptions opts;
  opts.stop_requested = [&] { return ++polls > 1; };
  const auto report = process_tasks(list, backend, store, prices(), opts);
  EXPECT_TRUE(report.interrupted);
  EXPECT_EQ(report.executed, 1u);
  EXPECT_EQ(report.remaining_pending, 2u);
  EXPECT_EQ(backend.calls.back(), "zero");
}

TEST(ProcessTasks, NeedsDeployment) {
  auto list = make_list({{"a", 1}});
  FakeBackend backend;
  backend.deployed = false;
  DatasetStore store;
  EXPECT_THROW(process_tasks(list, backend, store, prices()), StateError);
}

TEST(AdvisorVars, Basics) {
  const auto scan = scan_advisor_vars(
      "noise\n  HPCADVISORVAR A=1\nHPCADVISORVAR B=x=y\r\nHPCADVISORVAR\nHPCADVISORVAR =3\nHPCADVISORVAR A=2\n"
      "prefix HPCADVISORVAR C=9\nHPCADVISORVARD=4");
  EXPECT_EQ(scan.vars, (std::map<std::string, std::string>{{"A", "2"}, {"B", "x=y"}}));
  EXPECT_EQ(scan.malformed, 2u);
}

TEST(AdvisorVars, EffectiveExectime) {
  RawRunResult r;
  r.wallclock_seconds = 12.5;
  EXPECT_DOUBLE_EQ(effective_exectime(r), 12.5);
  r.advisor_vars["APPEXECTIME"] = "34";
  EXPECT_DOUBLE_EQ(effective_exectime(r), 34.0);
  r.advisor_vars["APPEXECTIME"] = "";
  EXPECT_DOUBLE_EQ(effective_exectime(r), 12.5);
  r.advisor_vars["APPEXECTIME"] = "-3";
  EXPECT_DOUBLE_EQ(effective_exectime(r), 12.5);
  r.advisor_vars["APPEXECTIME"] = "7s";
  EXPECT_DOUBLE_EQ(effective_exectime(r), 12.5);
}

TEST(AdvisorVars, RandomEmbeddingKeepsLastValue) {
  std::mt19937_64 rng(11);
  const std::string filler_chars = "abc xyz=0123\t_-HPCADVISOR";
  for (int iter = 0; iter < 300; ++iter) {
    std::map<std::string, std::string> expected;
    std::string text;
    const int lines = std::uniform_int_distribution<int>(0, 40)(rng);
    for (int l = 0; l < lines; ++l) {
      if (rng() % 3 == 0) {
        const std::string key = std::string(1, static_cast<char>('A' + rng() % 5)) + std::to_string(rng() % 3);
        std::string value;
        for (int k = rng() % 6; k > 0; --k) value += filler_chars[rng() % filler_chars.size()];
        while (!value.empty() && (value.back() == ' ' || value.back() == '\t')) value.pop_back();
        text += std::string(rng() % 3, ' ') + "HPCADVISORVAR " + key + "=" + value + "\n";
        expected[key] = value;
      } else {
        std::string line = "x";
        for (int k = rng() % 30; k > 0; --k) line += filler_chars[rng() % filler_chars.size()];
        text += line + "\n";
      }
    }
    EXPECT_EQ(parse_advisor_vars(text), expected) << text;
  }
}

TEST(Teardown, Names) {
  EXPECT_EQ(parse_teardown_mode("delete"), TeardownMode::remove);
  EXPECT_EQ(parse_teardown_mode("resize-to-zero"), TeardownMode::resize_to_zero);
  EXPECT_EQ(to_string(TeardownMode::remove), "delete");
  EXPECT_THROW(parse_teardown_mode("keep"), Error);
}
