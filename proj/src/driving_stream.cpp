// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#include <json.hpp>

#include <fstream>
#include <sstream>

#include "splatar/avatar_asset.hpp"

namespace splatar {

namespace {

using nlohmann::json;

Vector<float> float_array(const json& j, const char* key) {
  const auto values = j.at(key).get<std::vector<double>>();
  Vector<float> v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Eigen::Index>(i)) = static_cast<float>(values[i]);
  return v;
}

}  // namespace

DrivingFrame parse_driving_frame(const std::string& line, std::size_t line_number) {
  DrivingFrame frame;
  try {
    const json j = json::parse(line);
    frame.theta = float_array(j, "theta");
    frame.phi = float_array(j, "phi");
    const json& cam = j.at("camera");
    frame.camera.fx = cam.at("fx").get<double>();
    frame.camera.fy = cam.at("fy").get<double>();
    frame.camera.cx = cam.at("cx").get<double>();
    frame.camera.cy = cam.at("cy").get<double>();
    frame.camera.width = cam.value("width", 0);
    frame.camera.height = cam.value("height", 0);
    const auto w2c = cam.at("w2c").get<std::vector<double>>();
    if (w2c.size() != 16) throw StreamError(line_number, "camera.w2c must hold 16 numbers");
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) frame.camera.world_to_camera(r, c) = w2c[static_cast<std::size_t>(4 * r + c)];
  } catch (const json::exception& e) {
    throw StreamError(line_number, e.what());
  }
  return frame;
}

std::string format_driving_frame(const DrivingFrame& frame) {
  json j;
  j["theta"] = std::vector<float>(frame.theta.data(), frame.theta.data() + frame.theta.size());
  j["phi"] = std::vector<float>(frame.phi.data(), frame.phi.data() + frame.phi.size());
  std::vector<double> w2c(16);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) w2c[static_cast<std::size_t>(4 * r + c)] = frame.camera.world_to_camera(r, c);
  json cam = {{"fx", frame.camera.fx}, {"fy", frame.camera.fy}, {"cx", frame.camera.cx},
              {"cy", frame.camera.cy}, {"w2c", w2c}};
  if (frame.camera.width > 0) cam["width"] = frame.camera.width;
  if (frame.camera.height > 0) cam["height"] = frame.camera.height;
  j["camera"] = cam;
  return j.dump();
}

std::vector<DrivingFrame> read_driving_stream(std::istream& in) {
  std::vector<DrivingFrame> frames;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    frames.push_back(parse_driving_frame(line, number));
  }
  return frames;
}

std::vector<DrivingFrame> read_driving_stream(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open driving stream: " + path.string());
  return read_driving_stream(f);
}

}  // namespace splatar
