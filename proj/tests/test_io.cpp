/*
 * Copyright 2026 The filtopt Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "filtopt/io/equiv.hpp"
#include "filtopt/io/experiment.hpp"

using namespace filtopt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("filtopt_test_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("dataset round trip reproduces identical in-memory records") {
  for (ModelKind kind : {ModelKind::planar2d, ModelKind::stereo3d}) {
    TempDir dir;
    SimConfig cfg;
    cfg.model = kind;
    cfg.steps = 25;
    cfg.landmarks = 15;
    const auto data = gen_dataset(cfg);
    io::save_dataset(dir.str(), data);
    const auto loaded = io::load_dataset(dir.str());

    REQUIRE(loaded.world.trajectory.size() == data.world.trajectory.size());
    for (size_t t = 0; t < data.world.trajectory.size(); ++t) {
      CHECK(loaded.world.trajectory[t].t == data.world.trajectory[t].t);
      CHECK((loaded.world.trajectory[t].state - data.world.trajectory[t].state)
                .cwiseAbs()
                .maxCoeff() == 0.0);
    }
    REQUIRE(loaded.tracks.size() == data.tracks.size());
    for (size_t t = 0; t < data.tracks.size(); ++t) {
      REQUIRE(loaded.tracks[t].size() == data.tracks[t].size());
      for (size_t i = 0; i < data.tracks[t].size(); ++i) {
        CHECK(loaded.tracks[t][i].feature_id == data.tracks[t][i].feature_id);
        CHECK((loaded.tracks[t][i].z - data.tracks[t][i].z).cwiseAbs().maxCoeff() == 0.0);
      }
    }
    REQUIRE(loaded.imu.size() == data.imu.size());
    for (size_t i = 0; i < data.imu.size(); ++i) {
      CHECK(loaded.imu[i].t == data.imu[i].t);
      CHECK((loaded.imu[i].omega_meas - data.imu[i].omega_meas).cwiseAbs().maxCoeff() == 0.0);
      CHECK((loaded.imu[i].accel_meas - data.imu[i].accel_meas).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK((loaded.x0 - data.x0).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("same seed writes byte-identical files") {
  TempDir a, b;
  SimConfig cfg;
  cfg.steps = 30;
  cfg.landmarks = 10;
  io::save_dataset(a.str(), gen_dataset(cfg));
  io::save_dataset(b.str(), gen_dataset(cfg));
  for (const char* f : {"config", "ground_truth.csv", "tracks.csv"}) {
    CHECK(slurp(a.path / f) == slurp(b.path / f));
  }
}

TEST_CASE("malformed inputs are rejected with located errors") {
  TempDir dir;
  SimConfig cfg;
  cfg.steps = 10;
  cfg.landmarks = 5;
  io::save_dataset(dir.str(), gen_dataset(cfg));

  // Missing file.
  fs::remove(dir.path / "tracks.csv");
  CHECK_THROWS_AS(io::load_dataset(dir.str()), DataError);
  io::save_dataset(dir.str(), gen_dataset(cfg));

  // Schema mismatch.
  {
    std::ofstream out(dir.path / "tracks.csv");
    out << "# wrong:schema:v9\n";
  }
  CHECK_THROWS_AS(io::load_dataset(dir.str()), DataError);
  io::save_dataset(dir.str(), gen_dataset(cfg));

  // Decreasing timestamps: the error names the offending line.
  {
    std::ofstream out(dir.path / "ground_truth.csv");
    out << io::kGroundTruthSchema << "\n";
    out << "0.0,0,0,0\n0.2,0,0,0\n0.1,0,0,0\n";
  }
  try {
    io::load_dataset(dir.str());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("ground_truth.csv:4") != std::string::npos);
  }
  io::save_dataset(dir.str(), gen_dataset(cfg));

  // Malformed row reported with its line number.
  {
    std::ofstream out(dir.path / "tracks.csv", std::ios::app);
    out << "0.05,0,banana,1.0,2.0\n";
  }
  CHECK_THROWS_AS(io::load_dataset(dir.str()), DataError);
}

TEST_CASE("empty tracks file is a valid dead-reckoning dataset") {
  TempDir dir;
  SimConfig cfg;
  cfg.steps = 12;
  cfg.landmarks = 4;
  auto data = gen_dataset(cfg);
  for (auto& f : data.tracks) f.clear();
  io::save_dataset(dir.str(), data);
  const auto loaded = io::load_dataset(dir.str());
  for (const auto& f : loaded.tracks) CHECK(f.empty());

  io::ExperimentConfig ec;
  ec.schedule.kind = EstimatorSchedule::Kind::ekf;
  ec.dataset_dir = dir.str();
  ec.out_dir = (dir.path / "out").string();
  const auto res = io::run_experiment(ec);
  CHECK(!res.diverged);  // runs as pure dead reckoning
}

TEST_CASE("run_experiment writes the result bundle and is metrics-deterministic") {
  TempDir dir;
  SimConfig cfg;
  cfg.steps = 50;
  cfg.landmarks = 20;
  io::save_dataset((dir.path / "ds").string(), gen_dataset(cfg));

  io::ExperimentConfig ec;
  ec.schedule.kind = EstimatorSchedule::Kind::ekf;
  ec.dataset_dir = (dir.path / "ds").string();
  ec.out_dir = (dir.path / "o1").string();
  const auto r1 = io::run_experiment(ec);
  ec.out_dir = (dir.path / "o2").string();
  const auto r2 = io::run_experiment(ec);

  for (const char* f : {"estimate.csv", "metrics.json", "drift.csv", "run.log"}) {
    CHECK(fs::exists(dir.path / "o1" / f));
  }
  // Identical metrics modulo the runtime field.
  auto strip_runtime = [](std::string s) {
    const auto pos = s.find("\"runtime_seconds\"");
    if (pos != std::string::npos) {
      const auto end = s.find('\n', pos);
      s.erase(pos, end - pos);
    }
    return s;
  };
  CHECK(strip_runtime(r1.metrics_json) == strip_runtime(r2.metrics_json));
  CHECK(slurp(dir.path / "o1" / "estimate.csv") == slurp(dir.path / "o2" / "estimate.csv"));
  CHECK(r1.rmse.translation_m == r2.rmse.translation_m);

  // eval on the written files reproduces the run's metrics.
  const auto ev = io::evaluate_files((dir.path / "o1" / "estimate.csv").string(),
                                     (dir.path / "ds" / "ground_truth.csv").string(), "");
  CHECK(ev.rmse.translation_m == doctest::Approx(r1.rmse.translation_m).epsilon(1e-9));
}

TEST_CASE("equiv_check argument validation") {
  CHECK_THROWS_AS(io::equiv_check("ekf_update", 0, 1), StructureError);
  CHECK_THROWS_AS(io::equiv_check("nope", 5, 1), StructureError);
  CHECK(io::equiv_kinds().size() == 6);
}

TEST_CASE("trajectory serialization round trip") {
  TempDir dir;
  Trajectory t;
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    TrajectoryPose p;
    p.t = 0.1 * i;
    p.p = Vec3(rng.gaussian_vec(3));
    p.q = quat_exp(0.5 * Vec3(rng.gaussian_vec(3)));
    t.push_back(p);
  }
  const auto path = (dir.path / "traj.csv").string();
  io::save_trajectory(path, t, false);
  const auto back = io::load_trajectory(path);
  REQUIRE(back.size() == t.size());
  for (size_t i = 0; i < t.size(); ++i) {
    CHECK((back[i].p - t[i].p).norm() == 0.0);
    CHECK(quat_log(back[i].q.conjugate() * t[i].q).norm() < 1e-15);
  }
}
