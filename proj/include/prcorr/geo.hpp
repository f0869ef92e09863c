#ifndef PRCORR_GEO_HPP
#define PRCORR_GEO_HPP

#include <Eigen/Dense>
#include <stdexcept>

namespace prcorr {

// WGS-84 ellipsoid
namespace wgs84 {
constexpr double kSemiMajorM = 6378137.0;
constexpr double kFlattening = 1.0 / 298.257223563;
constexpr double kSemiMinorM = kSemiMajorM * (1.0 - kFlattening);
constexpr double kEccSq = kFlattening * (2.0 - kFlattening);
}  // namespace wgs84

struct EcefPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Eigen::Vector3d vec() const { return {x, y, z}; }
  static EcefPoint from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
};

struct GeodeticPoint {
  double lat_deg = 0.0;   // [-90, 90]
  double lon_deg = 0.0;   // (-180, 180]
  double alt_m = 0.0;     // height above ellipsoid
};

struct NedVector {
  double north = 0.0;
  double east = 0.0;
  double down = 0.0;

  Eigen::Vector3d vec() const { return {north, east, down}; }
};

struct Dms {
  int deg = 0;        // carries the sign of the angle
  double min = 0.0;   // [0, 60)
  double sec = 0.0;   // [0, 60)
};

class GeoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

EcefPoint geodetic_to_ecef(const GeodeticPoint& p);
GeodeticPoint ecef_to_geodetic(const EcefPoint& p);

// Rotation matrix taking ECEF vectors into the NED frame at `origin`.
Eigen::Matrix3d ecef_to_ned_matrix(const GeodeticPoint& origin);
NedVector ecef_vector_to_ned(const Eigen::Vector3d& v, const GeodeticPoint& origin);

// Elevation above the local horizontal at `user` and azimuth clockwise from
// north, both in degrees. Azimuth in [0, 360).
struct ElAz {
  double elevation_deg = 0.0;
  double azimuth_deg = 0.0;
};
ElAz elevation_azimuth(const EcefPoint& user, const EcefPoint& sat);

// Inverse geodesic distance on the WGS-84 ellipsoid (altitude ignored).
// Throws GeoError on non-convergence (near-antipodal points).
double vincenty_distance(const GeodeticPoint& a, const GeodeticPoint& b);

// Sign goes on the degrees component; minutes/seconds are magnitudes.
Dms degrees_to_dms(double angle_deg);

inline double deg2rad(double d) { return d * M_PI / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / M_PI; }

}  // namespace prcorr

#endif
