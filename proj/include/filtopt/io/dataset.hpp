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
#pragma once

#include <string>

#include "filtopt/metrics.hpp"
#include "filtopt/sim.hpp"

namespace filtopt::io {

// Dataset directory layout (all files UTF-8, comma separated, with a
// '#'-prefixed schema header):
//   config            key=value experiment/simulation parameters
//   ground_truth.csv  t_sec,px,py,theta        (planar)
//                     t_sec,px,py,pz,qw,qx,qy,qz (stereo)
//   tracks.csv        t_sec,frame_idx,feature_id,z1,z2[,z3]
//   imu.csv           t_sec,wx,wy,wz,ax,ay,az  (stereo only)
inline constexpr const char* kConfigSchema = "# filtopt:config:v1";
inline constexpr const char* kGroundTruthSchema = "# filtopt:ground_truth:v1";
inline constexpr const char* kTracksSchema = "# filtopt:tracks:v1";
inline constexpr const char* kImuSchema = "# filtopt:imu:v1";
inline constexpr const char* kEstimateSchema = "# filtopt:estimate:v1";
inline constexpr const char* kDriftSchema = "# filtopt:drift:v1";

// Writes config, ground_truth.csv, tracks.csv (and imu.csv for stereo).
void save_dataset(const std::string& dir, const SimDataset& data);

// Parses and validates a dataset directory.  Throws DataError naming the
// file and line for malformed rows, non-increasing timestamps, or schema
// mismatches.
SimDataset load_dataset(const std::string& dir);

// Trajectory serialization (estimates share the ground-truth schema).
void save_trajectory(const std::string& path, const Trajectory& traj, bool planar,
                     const char* schema = kEstimateSchema);
Trajectory load_trajectory(const std::string& path);

// Round-trip exact double formatting (%.17g).
std::string format_double(double v);

}  // namespace filtopt::io
