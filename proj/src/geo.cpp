#include "prcorr/geo.hpp"

#include <cmath>

namespace prcorr {

EcefPoint geodetic_to_ecef(const GeodeticPoint& p) {
  const double lat = deg2rad(p.lat_deg);
  const double lon = deg2rad(p.lon_deg);
  const double slat = std::sin(lat);
  const double clat = std::cos(lat);
  const double n = wgs84::kSemiMajorM / std::sqrt(1.0 - wgs84::kEccSq * slat * slat);
  EcefPoint out;
  out.x = (n + p.alt_m) * clat * std::cos(lon);
  out.y = (n + p.alt_m) * clat * std::sin(lon);
  out.z = (n * (1.0 - wgs84::kEccSq) + p.alt_m) * slat;
  return out;
}

GeodeticPoint ecef_to_geodetic(const EcefPoint& p) {
  const double rho = std::hypot(p.x, p.y);
  if (rho == 0.0 && p.z == 0.0) {
    throw GeoError("ecef_to_geodetic: undefined latitude at origin");
  }
  GeodeticPoint out;
  out.lon_deg = rad2deg(std::atan2(p.y, p.x));
  if (out.lon_deg <= -180.0) out.lon_deg += 360.0;

  if (rho < 1e-9) {  // polar axis
    out.lat_deg = (p.z > 0.0) ? 90.0 : -90.0;
    out.alt_m = std::abs(p.z) - wgs84::kSemiMinorM;
    return out;
  }

  // Bowring-style fixed point iteration on latitude, 1e-12 rad tolerance.
  double lat = std::atan2(p.z, rho * (1.0 - wgs84::kEccSq));
  for (int i = 0; i < 100; ++i) {
    const double slat = std::sin(lat);
    const double n = wgs84::kSemiMajorM / std::sqrt(1.0 - wgs84::kEccSq * slat * slat);
    const double h = rho / std::cos(lat) - n;
    const double next = std::atan2(p.z, rho * (1.0 - wgs84::kEccSq * n / (n + h)));
    const double delta = std::abs(next - lat);
    lat = next;
    if (delta < 1e-12) break;
  }
  const double slat = std::sin(lat);
  const double clat = std::cos(lat);
  out.lat_deg = rad2deg(lat);
  // Well-conditioned at all latitudes.
  out.alt_m = rho * clat + p.z * slat -
              wgs84::kSemiMajorM * std::sqrt(1.0 - wgs84::kEccSq * slat * slat);
  return out;
}

Eigen::Matrix3d ecef_to_ned_matrix(const GeodeticPoint& origin) {
  const double lat = deg2rad(origin.lat_deg);
  const double lon = deg2rad(origin.lon_deg);
  const double sp = std::sin(lat), cp = std::cos(lat);
  const double sl = std::sin(lon), cl = std::cos(lon);
  Eigen::Matrix3d r;
  r << -sp * cl, -sp * sl, cp,
       -sl,      cl,       0.0,
       -cp * cl, -cp * sl, -sp;
  return r;
}

NedVector ecef_vector_to_ned(const Eigen::Vector3d& v, const GeodeticPoint& origin) {
  const Eigen::Vector3d n = ecef_to_ned_matrix(origin) * v;
  return {n.x(), n.y(), n.z()};
}

ElAz elevation_azimuth(const EcefPoint& user, const EcefPoint& sat) {
  const Eigen::Vector3d los = sat.vec() - user.vec();
  const double range = los.norm();
  if (range < 1e-9) {
    throw GeoError("elevation_azimuth: coincident points");
  }
  const GeodeticPoint origin = ecef_to_geodetic(user);
  const Eigen::Vector3d ned = ecef_to_ned_matrix(origin) * (los / range);
  ElAz out;
  out.elevation_deg = rad2deg(std::asin(std::clamp(-ned.z(), -1.0, 1.0)));
  double az = rad2deg(std::atan2(ned.y(), ned.x()));
  if (az < 0.0) az += 360.0;
  if (az >= 360.0) az -= 360.0;
  out.azimuth_deg = az;
  return out;
}

double vincenty_distance(const GeodeticPoint& a, const GeodeticPoint& b) {
  const double f = wgs84::kFlattening;
  const double aa = wgs84::kSemiMajorM;
  const double bb = wgs84::kSemiMinorM;

  const double u1 = std::atan((1.0 - f) * std::tan(deg2rad(a.lat_deg)));
  const double u2 = std::atan((1.0 - f) * std::tan(deg2rad(b.lat_deg)));
  const double ell = deg2rad(b.lon_deg - a.lon_deg);
  const double su1 = std::sin(u1), cu1 = std::cos(u1);
  const double su2 = std::sin(u2), cu2 = std::cos(u2);

  double lambda = ell;
  double sin_sigma = 0.0, cos_sigma = 0.0, sigma = 0.0;
  double cos_sq_alpha = 0.0, cos_2sigma_m = 0.0;
  bool converged = false;
  for (int i = 0; i < 200; ++i) {
    const double sl = std::sin(lambda), cl = std::cos(lambda);
    sin_sigma = std::sqrt(std::pow(cu2 * sl, 2) +
                          std::pow(cu1 * su2 - su1 * cu2 * cl, 2));
    if (sin_sigma == 0.0) return 0.0;  // coincident
    cos_sigma = su1 * su2 + cu1 * cu2 * cl;
    sigma = std::atan2(sin_sigma, cos_sigma);
    const double sin_alpha = cu1 * cu2 * sl / sin_sigma;
    cos_sq_alpha = 1.0 - sin_alpha * sin_alpha;
    cos_2sigma_m = (cos_sq_alpha != 0.0)
                       ? cos_sigma - 2.0 * su1 * su2 / cos_sq_alpha
                       : 0.0;  // equatorial line
    const double c = f / 16.0 * cos_sq_alpha * (4.0 + f * (4.0 - 3.0 * cos_sq_alpha));
    const double prev = lambda;
    lambda = ell + (1.0 - c) * f * sin_alpha *
                       (sigma + c * sin_sigma *
                                    (cos_2sigma_m +
                                     c * cos_sigma * (-1.0 + 2.0 * cos_2sigma_m * cos_2sigma_m)));
    if (std::abs(lambda - prev) < 1e-12) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw GeoError("vincenty did not converge");
  }

  const double u_sq = cos_sq_alpha * (aa * aa - bb * bb) / (bb * bb);
  const double big_a = 1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)));
  const double big_b = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)));
  const double delta_sigma =
      big_b * sin_sigma *
      (cos_2sigma_m + big_b / 4.0 *
                          (cos_sigma * (-1.0 + 2.0 * cos_2sigma_m * cos_2sigma_m) -
                           big_b / 6.0 * cos_2sigma_m * (-3.0 + 4.0 * sin_sigma * sin_sigma) *
                               (-3.0 + 4.0 * cos_2sigma_m * cos_2sigma_m)));
  return bb * big_a * (sigma - delta_sigma);
}

Dms degrees_to_dms(double angle_deg) {
  Dms out;
  out.deg = static_cast<int>(std::trunc(angle_deg));
  double rem = (std::abs(angle_deg) - std::abs(static_cast<double>(out.deg))) * 60.0;
  out.min = std::floor(rem);
  out.sec = (rem - out.min) * 60.0;
  if (out.sec >= 60.0) {
    out.sec -= 60.0;
    out.min += 1.0;
  }
  if (out.min >= 60.0) {
    out.min -= 60.0;
    out.deg += (angle_deg < 0.0) ? -1 : 1;
  }
  return out;
}

}  // namespace prcorr
