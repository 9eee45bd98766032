// Copyright 2026 The scalefuse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

namespace fs = std::filesystem;

int run(const std::string& args) {
  const std::string cmd = std::string(SCALEFUSE_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("scalefuse_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string config(const std::string& extra = "") {
    const auto path = dir_ / ("run" + std::to_string(configs_++) + ".cfg");
    std::ofstream(path) << "task.patients_per_class=5\ntask.om.raw_dim=6\ntask.im.raw_dim=6\n"
                           "task.tem.raw_dim=6\ntask.om.tokens=2\ntask.im.tokens=2\n"
                           "task.bag_min=2\ntask.bag_max=3\nmodel.dim=8\nmodel.heads=2\n"
                           "train.epochs=2\ncv.folds=3\n"
                        << extra;
    return path.string();
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
  int configs_ = 0;
};

TEST_F(Cli, SuccessfulCommandsExitZero) {
  const auto cfg = config();
  EXPECT_EQ(run("generate --config " + cfg + " --out " + path("data")), 0);
  EXPECT_TRUE(fs::exists(path("data/manifest.json")));
  EXPECT_EQ(run("train --config " + cfg + " --out " + path("train") + " --jobs 2"), 0);
  EXPECT_TRUE(fs::exists(path("train/model.json")));
  EXPECT_EQ(run("evaluate --config " + cfg + " --checkpoint " + path("train/model.json") +
                " --manifest " + path("data") + " --out " + path("eval")),
            0);
  EXPECT_EQ(run("report --summary " + path("train/summary.json")), 0);
}

TEST_F(Cli, ConfigErrorsExitOne) {
  EXPECT_EQ(run("train --config " + config("model.heads=3\n") + " --out " + path("o")), 1);
  EXPECT_EQ(run("train --config " + config("bogus.key=1\n") + " --out " + path("o")), 1);
  EXPECT_EQ(run("train --config " + path("absent.cfg")), 1);
  EXPECT_EQ(run("ablate --suite nonsense --config " + config()), 1);
  EXPECT_EQ(run("train --jobs 0 --config " + config()), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run(""), 1);
}

TEST_F(Cli, DataErrorsExitTwo) {
  const auto cfg = config();
  EXPECT_EQ(run("train --config " + config("task.source=manifest\ntask.manifest=" + path("nowhere") + "\n")), 2);
  EXPECT_EQ(run("report --summary " + path("nowhere.json")), 2);
  std::ofstream(path("bad.json")) << "{ not json";
  EXPECT_EQ(run("report --summary " + path("bad.json")), 2);
  // Four-class data against a three-class checkpoint.
  ASSERT_EQ(run("train --config " + cfg + " --out " + path("train")), 0);
  ASSERT_EQ(run("generate --config " + config("task.classes=a,b,c,d\n") + " --out " + path("four")), 0);
  EXPECT_EQ(run("evaluate --config " + cfg + " --checkpoint " + path("train/model.json") +
                " --manifest " + path("four")),
            2);
}

TEST_F(Cli, DivergenceExitsThree) {
  EXPECT_EQ(run("train --config " + config("train.lr=1e300\n") + " --out " + path("o")), 3);
}

}  // namespace
