#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ofdmtoa/alloc.hpp"
#include "ofdmtoa/channel.hpp"
#include "ofdmtoa/mode.hpp"
#include "ofdmtoa/zzb.hpp"

namespace ofdmtoa {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

constexpr double kEarthRadius = 6378137.0;      // m, equatorial
constexpr double kEarthMu = 3.986004418e14;     // m^3/s^2
constexpr double kEarthRotation = 7.2921150e-5; // rad/s

/// Walker-Delta shell i:T/P/F with circular orbits.
struct WalkerDelta {
  double altitude_m = 550e3;
  double inclination_deg = 53.0;
  int total = 1584;
  int planes = 22;
  int phasing = 39;

  void validate() const;
  int per_plane() const { return total / planes; }
};

/// Circular-orbit period from Kepler's third law.
double orbital_period(double altitude_m);

/// Earth-fixed positions of every satellite `t_s` seconds after epoch, plane-major order.
std::vector<Vec3> walker_positions(const WalkerDelta& w, double t_s);

/// Receiver site on a spherical Earth; ENU frame anchored at the site.
struct Site {
  double lat_deg = 40.0;
  double lon_deg = -105.0;
  double height_m = 0.0;

  Vec3 ecef() const;
  Vec3 to_enu(const Vec3& ecef_point) const;
};

double elevation_deg(const Vec3& enu);

/// Indices of the `count` highest-elevation satellites above `mask_deg`, highest first.
/// Throws GeometryError when fewer are visible.
std::vector<int> select_satellites(const std::vector<Vec3>& ecef, const Site& site,
                                   double mask_deg, int count = 4);

struct SatGeometry {
  std::vector<Vec3> sats;          ///< ENU [m]
  Vec3 receiver = Vec3::Zero();    ///< ENU [m]
  double clock_offset_s = 0.0;
};

/// rho_i = c ||r_i - r|| + c dt + c toa_error_i.
Eigen::VectorXd simulate_pseudoranges(const SatGeometry& geom,
                                      const std::vector<double>& toa_error_s);

/// h_i(theta) = ||r_i - p|| + b for theta = (p, b = c dt).
Eigen::VectorXd pseudorange_model(const std::vector<Vec3>& sats, const Vec4& theta);

/// Rows [-u_i^T, 1] with u_i the unit vector from the receiver to satellite i.
Eigen::MatrixXd geometry_matrix(const std::vector<Vec3>& sats, const Vec3& receiver);

/// (A^T Sigma^-1 A)^-1 for a diagonal Sigma given by its variances.
Mat4 position_covariance(const std::vector<Vec3>& sats, const Vec3& receiver,
                         const Eigen::VectorXd& variances);

struct PositionSolution {
  Vec4 theta = Vec4::Zero();  ///< E, N, U [m] and c dt [m]
  Mat4 Q = Mat4::Zero();
  Vec4 sigmas = Vec4::Zero();
  int iterations = 0;
  bool converged = false;
};

/// Gauss-Newton on the Sigma^-1 weighted residuals. Throws GeometryError when the normal
/// matrix is singular; non-convergence is flagged and the last iterate returned.
PositionSolution wnls_solve(const Eigen::VectorXd& rho, const std::vector<Vec3>& sats,
                            const Eigen::VectorXd& variances, const Vec4& initial,
                            double tol = 1e-6, int max_iter = 20);

struct Ellipse {
  double semi_major_m = 0.0;
  double semi_minor_m = 0.0;
  double orientation_rad = 0.0;  ///< major axis angle from East toward North, in (-pi/2, pi/2]
};

/// Chebyshev confidence ellipse of the horizontal (E, N) block: k = sqrt(2 / (1 - confidence)).
/// Accepts a 2x2 or larger covariance.
Ellipse chebyshev_ellipse(const Eigen::MatrixXd& Q, double confidence = 0.95);

/// Substitute propagation model for one campaign.
struct LeoChannel {
  LinkBudget link;
  double shadowing_db = 0.0;  ///< log-normal SNR spread per satellite and realization
  MultipathProfile multipath;
};

struct LeoCampaignSpec {
  WalkerDelta walker;
  Site site;
  double epoch_s = 0.0;
  double mask_deg = 30.0;
  int n_sats = 4;
  double burst_interval_s = 1e-3;  ///< satellite i transmits at epoch + i * interval
  double clock_offset_s = 1e-6;
  OfdmParams ofdm{240, 4, 240e3, 156.25e-9};
  BlockLayout layout{20, 12, 4, 1, {0, 9, 19}};
  std::uint64_t pilot_seed = 1;
  Constellation constellation = Constellation::qpsk();
  LeoChannel channel;
  std::vector<Mode> modes{Mode::PilotOnly, Mode::DataOnly, Mode::PilotPlusData,
                          Mode::DecisionDirected};
  double delta_z = 1.0 / 8.0;
  double delta_phi = kPi / 12.0;
  int n_channel = 100;
  int n_noise = 200;
  std::uint64_t seed = 1;
  int workers = 1;
  ZzbSettings zzb;

  void validate() const;
};

struct LeoModeResult {
  Mode mode = Mode::PilotOnly;
  // Per channel realization.
  std::vector<double> horizontal_rmse_m;
  std::vector<double> vertical_rmse_m;
  std::vector<double> zzb_horizontal_m;
  std::vector<double> zzb_vertical_m;
  /// Pooled horizontal error mean and Chebyshev ellipses (empirical and ZZB-predicted mean Q).
  double center_e_m = 0.0;
  double center_n_m = 0.0;
  Ellipse empirical;
  Ellipse predicted;
  std::size_t failures = 0;  ///< trials dropped for estimator or geometry failures
};

struct LeoResult {
  std::vector<int> satellites;
  std::vector<double> elevation_deg;
  std::vector<double> mean_snr_db;  ///< link-budget SNR per satellite before shadowing
  std::vector<LeoModeResult> modes;
};

LeoResult leo_campaign(const LeoCampaignSpec& spec);

}  // namespace ofdmtoa
