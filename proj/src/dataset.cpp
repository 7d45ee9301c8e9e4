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
#include "filtopt/io/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace filtopt::io {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

double parse_double(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": malformed number '" + s + "'");
  }
}

long parse_long(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": malformed integer '" + s + "'");
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  return out;
}

class CsvReader {
 public:
  CsvReader(const std::string& path, const char* schema) : path_(path), in_(path) {
    if (!in_) throw DataError("missing file: " + path);
    std::string header;
    if (!std::getline(in_, header) || header != schema) {
      throw DataError(path + ": schema mismatch (expected '" + std::string(schema) + "')");
    }
    line_no_ = 1;
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.empty() || line[0] == '#') continue;
      fields = split(line, ',');
      return true;
    }
    return false;
  }

  std::string where() const { return path_ + ":" + std::to_string(line_no_); }

 private:
  std::string path_;
  std::ifstream in_;
  int line_no_ = 0;
};

void require_fields(const std::vector<std::string>& f, size_t n, const std::string& where) {
  if (f.size() != n) {
    throw DataError(where + ": expected " + std::to_string(n) + " fields, got " +
                    std::to_string(f.size()));
  }
}

std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file: " + path);
  std::string header;
  if (!std::getline(in, header) || header != kConfigSchema) {
    throw DataError(path + ": schema mismatch");
  }
  std::map<std::string, std::string> kv;
  std::string line;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(path + ":" + std::to_string(n) + ": expected key=value");
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::string get(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw DataError("config: missing key '" + key + "'");
  return it->second;
}

}  // namespace

void save_dataset(const std::string& dir, const SimDataset& data) {
  fs::create_directories(dir);
  const SimConfig& c = data.config;
  const bool planar = c.model == ModelKind::planar2d;

  {
    std::ofstream out(fs::path(dir) / "config");
    out << kConfigSchema << "\n";
    out << "model=" << (planar ? "planar2d" : "stereo3d") << "\n";
    out << "seed=" << c.seed << "\n";
    out << "steps=" << c.steps << "\n";
    out << "landmarks=" << c.landmarks << "\n";
    if (planar) {
      out << "dt=" << format_double(c.dt) << "\n";
      out << "speed=" << format_double(c.speed) << "\n";
      out << "lap_fraction=" << format_double(c.lap_fraction) << "\n";
      out << "max_range=" << format_double(c.max_range) << "\n";
      out << "sigma_w_diag=" << format_double(c.sigma_w_diag[0]) << ","
          << format_double(c.sigma_w_diag[1]) << "," << format_double(c.sigma_w_diag[2]) << "\n";
      out << "sigma_v_std=" << format_double(c.sigma_v_std) << "\n";
    } else {
      out << "frame_dt=" << format_double(c.frame_dt) << "\n";
      out << "imu_per_frame=" << c.imu_per_frame << "\n";
      out << "circle_radius=" << format_double(c.circle_radius) << "\n";
      out << "lap_fraction=" << format_double(c.lap_fraction) << "\n";
      out << "height_amp=" << format_double(c.height_amp) << "\n";
      out << "height_freq=" << format_double(c.height_freq) << "\n";
      out << "landmark_depth=" << format_double(c.landmark_depth) << "\n";
      out << "max_depth=" << format_double(c.max_depth) << "\n";
      out << "pixel_sigma=" << format_double(c.pixel_sigma) << "\n";
      out << "fx=" << format_double(c.intrinsics.fx) << "\n";
      out << "fy=" << format_double(c.intrinsics.fy) << "\n";
      out << "cx=" << format_double(c.intrinsics.cx) << "\n";
      out << "cy=" << format_double(c.intrinsics.cy) << "\n";
      out << "baseline=" << format_double(c.intrinsics.baseline) << "\n";
      out << "gyro_density=" << format_double(c.imu_noise.gyro_density) << "\n";
      out << "accel_density=" << format_double(c.imu_noise.accel_density) << "\n";
      out << "gyro_bias_walk=" << format_double(c.imu_noise.gyro_bias_walk) << "\n";
      out << "accel_bias_walk=" << format_double(c.imu_noise.accel_bias_walk) << "\n";
    }
    out << "x0=";
    for (int i = 0; i < data.x0.size(); ++i) out << (i ? "," : "") << format_double(data.x0[i]);
    out << "\n";
    out << "p0_diag=";
    for (int i = 0; i < data.p0.rows(); ++i) {
      out << (i ? "," : "") << format_double(data.p0(i, i));
    }
    out << "\n";
  }

  {
    std::ofstream out(fs::path(dir) / "ground_truth.csv");
    out << kGroundTruthSchema << "\n";
    out << (planar ? "# t_sec,px,py,theta" : "# t_sec,px,py,pz,qw,qx,qy,qz") << "\n";
    for (const auto& g : data.world.trajectory) {
      out << format_double(g.t);
      for (int i = 0; i < g.state.size(); ++i) out << "," << format_double(g.state[i]);
      out << "\n";
    }
  }

  {
    std::ofstream out(fs::path(dir) / "tracks.csv");
    out << kTracksSchema << "\n";
    out << (planar ? "# t_sec,frame_idx,feature_id,z1,z2" : "# t_sec,frame_idx,feature_id,uL,uR,v")
        << "\n";
    for (size_t t = 0; t < data.tracks.size(); ++t) {
      const double ts = data.world.trajectory[t].t;
      for (const auto& o : data.tracks[t]) {
        out << format_double(ts) << "," << t << "," << o.feature_id;
        for (int i = 0; i < o.z.size(); ++i) out << "," << format_double(o.z[i]);
        out << "\n";
      }
    }
  }

  if (!planar) {
    std::ofstream out(fs::path(dir) / "imu.csv");
    out << kImuSchema << "\n";
    out << "# t_sec,wx,wy,wz,ax,ay,az\n";
    for (const auto& s : data.imu) {
      out << format_double(s.t);
      for (int i = 0; i < 3; ++i) out << "," << format_double(s.omega_meas[i]);
      for (int i = 0; i < 3; ++i) out << "," << format_double(s.accel_meas[i]);
      out << "\n";
    }
  }
}

SimDataset load_dataset(const std::string& dir) {
  SimDataset data;
  const auto kv = read_config((fs::path(dir) / "config").string());
  SimConfig& c = data.config;

  const std::string model = get(kv, "model");
  if (model == "planar2d") {
    c.model = ModelKind::planar2d;
  } else if (model == "stereo3d") {
    c.model = ModelKind::stereo3d;
  } else {
    throw DataError("config: unknown model '" + model + "'");
  }
  const bool planar = c.model == ModelKind::planar2d;
  c.seed = static_cast<std::uint64_t>(parse_long(get(kv, "seed"), "config:seed"));
  c.steps = static_cast<int>(parse_long(get(kv, "steps"), "config:steps"));
  c.landmarks = static_cast<int>(parse_long(get(kv, "landmarks"), "config:landmarks"));
  if (planar) {
    c.dt = parse_double(get(kv, "dt"), "config:dt");
    c.speed = parse_double(get(kv, "speed"), "config:speed");
    c.lap_fraction = parse_double(get(kv, "lap_fraction"), "config:lap_fraction");
    c.max_range = parse_double(get(kv, "max_range"), "config:max_range");
    const auto sw = split(get(kv, "sigma_w_diag"), ',');
    require_fields(sw, 3, "config:sigma_w_diag");
    for (int i = 0; i < 3; ++i) c.sigma_w_diag[i] = parse_double(sw[i], "config:sigma_w_diag");
    c.sigma_v_std = parse_double(get(kv, "sigma_v_std"), "config:sigma_v_std");
  } else {
    c.frame_dt = parse_double(get(kv, "frame_dt"), "config:frame_dt");
    c.imu_per_frame = static_cast<int>(parse_long(get(kv, "imu_per_frame"), "config"));
    c.circle_radius = parse_double(get(kv, "circle_radius"), "config");
    c.lap_fraction = parse_double(get(kv, "lap_fraction"), "config");
    c.height_amp = parse_double(get(kv, "height_amp"), "config");
    c.height_freq = parse_double(get(kv, "height_freq"), "config");
    c.landmark_depth = parse_double(get(kv, "landmark_depth"), "config");
    c.max_depth = parse_double(get(kv, "max_depth"), "config");
    c.pixel_sigma = parse_double(get(kv, "pixel_sigma"), "config");
    c.intrinsics.fx = parse_double(get(kv, "fx"), "config");
    c.intrinsics.fy = parse_double(get(kv, "fy"), "config");
    c.intrinsics.cx = parse_double(get(kv, "cx"), "config");
    c.intrinsics.cy = parse_double(get(kv, "cy"), "config");
    c.intrinsics.baseline = parse_double(get(kv, "baseline"), "config");
    c.imu_noise.gyro_density = parse_double(get(kv, "gyro_density"), "config");
    c.imu_noise.accel_density = parse_double(get(kv, "accel_density"), "config");
    c.imu_noise.gyro_bias_walk = parse_double(get(kv, "gyro_bias_walk"), "config");
    c.imu_noise.accel_bias_walk = parse_double(get(kv, "accel_bias_walk"), "config");
  }
  {
    const auto xs = split(get(kv, "x0"), ',');
    data.x0 = VecX(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) data.x0[i] = parse_double(xs[i], "config:x0");
    const auto ps = split(get(kv, "p0_diag"), ',');
    data.p0 = MatX::Zero(ps.size(), ps.size());
    for (size_t i = 0; i < ps.size(); ++i) data.p0(i, i) = parse_double(ps[i], "config:p0_diag");
  }

  data.world.model = c.model;
  const int state_fields = planar ? 3 : 7;
  {
    CsvReader gt((fs::path(dir) / "ground_truth.csv").string(), kGroundTruthSchema);
    std::vector<std::string> f;
    double prev_t = -1e300;
    while (gt.next(f)) {
      require_fields(f, 1 + state_fields, gt.where());
      GroundTruthPose g;
      g.t = parse_double(f[0], gt.where());
      if (g.t <= prev_t) {
        throw DataError(gt.where() + ": timestamps not strictly increasing");
      }
      prev_t = g.t;
      g.state = VecX(state_fields);
      for (int i = 0; i < state_fields; ++i) g.state[i] = parse_double(f[1 + i], gt.where());
      data.world.trajectory.push_back(g);
    }
    if (data.world.trajectory.empty()) {
      throw DataError(dir + "/ground_truth.csv: no rows");
    }
  }

  const int zdim = planar ? 2 : 3;
  data.tracks.assign(data.world.trajectory.size(), {});
  {
    CsvReader tr((fs::path(dir) / "tracks.csv").string(), kTracksSchema);
    std::vector<std::string> f;
    long prev_frame = -1;
    while (tr.next(f)) {
      require_fields(f, 3 + zdim, tr.where());
      const long frame = parse_long(f[1], tr.where());
      if (frame < prev_frame) {
        throw DataError(tr.where() + ": frame indices not non-decreasing");
      }
      prev_frame = frame;
      if (frame < 0 || frame >= static_cast<long>(data.tracks.size())) {
        throw DataError(tr.where() + ": frame index out of range");
      }
      Observation o;
      o.feature_id = parse_long(f[2], tr.where());
      o.z = VecX(zdim);
      for (int i = 0; i < zdim; ++i) o.z[i] = parse_double(f[3 + i], tr.where());
      data.tracks[frame].push_back(o);
    }
  }

  if (!planar) {
    CsvReader imu((fs::path(dir) / "imu.csv").string(), kImuSchema);
    std::vector<std::string> f;
    double prev_t = -1e300;
    while (imu.next(f)) {
      require_fields(f, 7, imu.where());
      ImuSample s;
      s.t = parse_double(f[0], imu.where());
      if (s.t <= prev_t) throw DataError(imu.where() + ": timestamps not strictly increasing");
      prev_t = s.t;
      for (int i = 0; i < 3; ++i) s.omega_meas[i] = parse_double(f[1 + i], imu.where());
      for (int i = 0; i < 3; ++i) s.accel_meas[i] = parse_double(f[4 + i], imu.where());
      data.imu.push_back(s);
    }
    if (data.imu.empty()) throw DataError(dir + "/imu.csv: no rows");
  }
  return data;
}

void save_trajectory(const std::string& path, const Trajectory& traj, bool planar,
                     const char* schema) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << schema << "\n";
  out << (planar ? "# t_sec,px,py,theta" : "# t_sec,px,py,pz,qw,qx,qy,qz") << "\n";
  for (const auto& p : traj) {
    out << format_double(p.t);
    if (planar) {
      const double yaw = 2.0 * std::atan2(p.q.vec.z(), p.q.w);
      out << "," << format_double(p.p.x()) << "," << format_double(p.p.y()) << ","
          << format_double(yaw);
    } else {
      out << "," << format_double(p.p.x()) << "," << format_double(p.p.y()) << ","
          << format_double(p.p.z()) << "," << format_double(p.q.w) << ","
          << format_double(p.q.vec.x()) << "," << format_double(p.q.vec.y()) << ","
          << format_double(p.q.vec.z());
    }
    out << "\n";
  }
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream probe(path);
  if (!probe) throw DataError("missing file: " + path);
  std::string header;
  std::getline(probe, header);
  probe.close();
  const char* schema = header == kGroundTruthSchema ? kGroundTruthSchema : kEstimateSchema;

  CsvReader in(path, schema);
  Trajectory out;
  std::vector<std::string> f;
  double prev_t = -1e300;
  while (in.next(f)) {
    TrajectoryPose p;
    if (f.size() == 4) {
      p.t = parse_double(f[0], in.where());
      p.p = Vec3(parse_double(f[1], in.where()), parse_double(f[2], in.where()), 0.0);
      const double yaw = parse_double(f[3], in.where());
      p.q = UnitQuaternion(std::cos(0.5 * yaw), Vec3(0, 0, std::sin(0.5 * yaw)));
    } else if (f.size() == 8) {
      p.t = parse_double(f[0], in.where());
      p.p = Vec3(parse_double(f[1], in.where()), parse_double(f[2], in.where()),
                 parse_double(f[3], in.where()));
      p.q = UnitQuaternion(parse_double(f[4], in.where()),
                           Vec3(parse_double(f[5], in.where()), parse_double(f[6], in.where()),
                                parse_double(f[7], in.where())))
                .normalized();
    } else {
      throw DataError(in.where() + ": expected 4 or 8 fields");
    }
    if (p.t <= prev_t) throw DataError(in.where() + ": timestamps not strictly increasing");
    prev_t = p.t;
    out.push_back(p);
  }
  return out;
}

}  // namespace filtopt::io
