#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "hpcadvisor/errors.hpp"
#include "hpcadvisor/scenario.hpp"

using namespace hpcadvisor;

namespace {

const std::filesystem::path kData = HPCADVISOR_TEST_DATA;

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("hpca_scen_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

TaskList sweep_tasks() {
  return generate_tasks(load_sweep_config_file(kData / "openfoam_sweep.yaml"), load_pricing_file(kData / "pricing.csv"));
}

}  // namespace

TEST(Scenario, ThreeSkusSixCountsTwoMeshes) {
  const auto list = sweep_tasks();
  ASSERT_EQ(list.tasks.size(), 36u);
  EXPECT_EQ(sku_run_count(list), 3u);
  std::set<std::string> ids;
  for (const auto& t : list.tasks) {
    EXPECT_EQ(t.status, TaskStatus::pending);
    ids.insert(t.id);
  }
  EXPECT_EQ(ids.size(), 36u);
  EXPECT_EQ(list.counts().pending, 36u);
  EXPECT_EQ(list.tasks.front().sku, "Standard_HC44rs");
  EXPECT_EQ(list.tasks.front().ppn, 44);
  EXPECT_EQ(list.tasks.back().sku, "Standard_HB120rs_v3");
  EXPECT_EQ(list.tasks.back().ppn, 120);
  EXPECT_EQ(list.tasks.back().nnodes, 16);
}

TEST(Scenario, SkuRunCount) {
  TaskList list;
  for (const char* s : {"a", "a", "b", "a", "c", "c"}) list.tasks.push_back({.sku = s});
  EXPECT_EQ(sku_run_count(list), 4u);
  EXPECT_EQ(sku_run_count(TaskList{}), 0u);
}

TEST(Scenario, DeterministicIds) {
  EXPECT_EQ(sweep_tasks(), sweep_tasks());
  const auto a = make_task_id("hc44rs", 2, 44, {{"mesh", "1"}}, {});
  EXPECT_EQ(a.size(), 16u);
  EXPECT_NE(a, make_task_id("hc44rs", 2, 44, {{"mesh", "2"}}, {}));
  EXPECT_NE(a, make_task_id("hc44rs", 3, 44, {{"mesh", "1"}}, {}));
  // Field boundaries must not alias.
  EXPECT_NE(make_task_id("ab", 1, 1, {{"c", "d"}}, {}), make_task_id("a", 1, 1, {{"bc", "d"}}, {}));
}

TEST(Scenario, TransitionRules) {
  auto list = sweep_tasks();
  const auto id = list.tasks[0].id;
  update_status(list, id, TaskStatus::completed);
  EXPECT_EQ(list.find(id)->status, TaskStatus::completed);
  EXPECT_THROW(update_status(list, id, TaskStatus::pending), StateError);
  EXPECT_THROW(update_status(list, id, TaskStatus::failed), StateError);

  const auto id2 = list.tasks[1].id;
  update_status(list, id2, TaskStatus::failed);
  EXPECT_THROW(update_status(list, id2, TaskStatus::pending), StateError);
  update_status(list, id2, TaskStatus::pending, true);
  EXPECT_EQ(list.find(id2)->status, TaskStatus::pending);
  EXPECT_THROW(update_status(list, "nope", TaskStatus::completed), NotFoundError);
  EXPECT_EQ(list.counts().total(), 36u);
}

TEST(Scenario, JsonRoundTrip) {
  auto list = sweep_tasks();
  update_status(list, list.tasks[3].id, TaskStatus::completed);
  update_status(list, list.tasks[4].id, TaskStatus::failed);
  EXPECT_EQ(tasklist_from_json(tasklist_to_json(list)), list);
  EXPECT_EQ(tasklist_to_json(list), tasklist_to_json(tasklist_from_json(tasklist_to_json(list))));
}

TEST(Scenario, CorruptFileReportsPosition) {
  TempDir dir;
  const auto path = dir.path / "tasks.json";
  auto text = tasklist_to_json(sweep_tasks());
  text.resize(text.size() / 2);
  { std::ofstream(path) << text; }
  try {
    load_tasklist(path);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_GT(e.position(), 0u);
  }
}

TEST(Scenario, StaleFingerprintRejected) {
  TempDir dir;
  const auto path = dir.path / "tasks.json";
  const auto list = sweep_tasks();
  save_tasklist(list, path);
  EXPECT_EQ(load_tasklist(path, list.config_fingerprint), list);
  EXPECT_THROW(load_tasklist(path, std::string_view("0000000000000000")), StateError);
}

TEST(Scenario, TaskFileLockIsExclusive) {
  TempDir dir;
  const auto path = dir.path / "tasks.json";
  const auto fresh = sweep_tasks();
  {
    auto file = TaskFile::open_or_create(path, fresh);
    EXPECT_THROW(TaskFile::open(path), StateError);
    file.update_status(fresh.tasks[0].id, TaskStatus::completed);
    EXPECT_EQ(load_tasklist(path).find(fresh.tasks[0].id)->status, TaskStatus::completed);
  }
  auto reopened = TaskFile::open_or_create(path, fresh);
  EXPECT_EQ(reopened.list().counts().completed, 1u);
}
