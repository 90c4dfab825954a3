// Regenerates the JSON documents under fixtures/ from the built-in fixtures.
#include <fstream>
#include <iostream>
#include <string>

#include "coopgait/fixtures.hpp"

namespace {

void write(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << text << '\n';
  std::cout << path << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  using namespace coopgait;
  const std::string dir = argc > 1 ? argv[1] : "fixtures";
  try {
    const RobotModel planar = fixtures::planar_quadruped();
    write(dir + "/planar_quadruped.json", fixtures::planar_quadruped_json());
    write(dir + "/planar_gait.json", save_gait(fixtures::planar_gait(planar), planar));
    write(dir + "/params_tuned.json", save_params(fixtures::tuned_params()));
    ControllerParams half;
    half.xi = {0.5, 0.5, 0.5};
    write(dir + "/params_half.json", save_params(half));
    write(dir + "/quadruped_arm.json", fixtures::quadruped_arm_json());
    for (int k = 2; k <= 3; ++k) write(dir + "/pendulum" + std::to_string(k) + ".json", fixtures::pendulum_json(k));
  } catch (const std::exception& e) {
    std::cerr << "make_fixtures: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
