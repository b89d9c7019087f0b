#include "mpcrrl/envsim/route.hpp"

#include <cmath>
#include <fstream>

namespace mpcrrl::sim {

namespace {

struct FamilyProfile {
  double amplitude;       // curvature scale [1/m]
  double min_wavelength;  // [m]
  double max_wavelength;  // [m]
};

// Family 0 is the training analog; the rest perturb curvature statistics.
constexpr FamilyProfile kFamilies[kRouteFamilies] = {
    {0.020, 30.0, 60.0},
    {0.030, 25.0, 50.0},
    {0.050, 15.0, 40.0},
    {0.070, 10.0, 30.0},
};

constexpr double kCurvatureCap = 0.08;  // min turn radius 12.5 m
constexpr double kSpacing = 1.0;        // [m]

}  // namespace

Route generate_route(std::uint64_t seed, int family, double length_m, double target_speed) {
  if (family < 0 || family >= kRouteFamilies)
    throw ConfigError("generate_route: family must be in [0, " +
                      std::to_string(kRouteFamilies - 1) + "]");
  if (length_m < 2.0) throw ConfigError("generate_route: length must be >= 2 m");

  const FamilyProfile& prof = kFamilies[family];
  // Salt the stream with the family id so equal seeds in different families
  // produce unrelated routes.
  Rng rng = Rng(seed).fork(0x526f757465ULL + static_cast<std::uint64_t>(family));

  // Curvature as a short sum of sinusoids in arc length.
  struct Wave {
    double amp, wavelength, phase;
  };
  std::vector<Wave> waves;
  for (int j = 0; j < 3; ++j) {
    waves.push_back({rng.uniform(0.3, 1.0) * prof.amplitude,
                     rng.uniform(prof.min_wavelength, prof.max_wavelength),
                     rng.uniform(0.0, 2.0 * M_PI)});
  }

  Route route;
  route.target_speed = target_speed;
  const int n = static_cast<int>(std::round(length_m / kSpacing));
  route.waypoints.reserve(static_cast<std::size_t>(n) + 1);

  Eigen::Vector2d pos(0.0, 0.0);
  double heading = 0.0;
  route.waypoints.push_back(pos);
  for (int k = 0; k < n; ++k) {
    const double s = k * kSpacing;
    double curvature = 0.0;
    for (const Wave& w : waves) curvature += w.amp * std::sin(2.0 * M_PI * s / w.wavelength + w.phase);
    curvature = std::clamp(curvature, -kCurvatureCap, kCurvatureCap);
    heading += curvature * kSpacing;
    pos += kSpacing * Eigen::Vector2d(std::cos(heading), std::sin(heading));
    route.waypoints.push_back(pos);
  }
  return route;
}

void write_route_csv(const Route& route, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("write_route_csv: cannot open " + path);
  out << "x,y\n";
  for (const auto& wp : route.waypoints) out << wp.x() << "," << wp.y() << "\n";
}

}  // namespace mpcrrl::sim
