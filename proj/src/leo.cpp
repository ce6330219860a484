#include "ofdmtoa/leo.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <random>

#include "ofdmtoa/errors.hpp"
#include "ofdmtoa/estimators.hpp"
#include "ofdmtoa/parallel.hpp"

namespace ofdmtoa {

namespace {

constexpr double kDeg = kPi / 180.0;
constexpr std::uint64_t kShadowStream = 10, kTapStream = 11, kTrialStream = 12;

}  // namespace

void WalkerDelta::validate() const {
  if (!(altitude_m > 0.0)) throw ParameterError("altitude_m must be > 0");
  if (!(inclination_deg >= 0.0 && inclination_deg <= 180.0))
    throw ParameterError("inclination_deg must be in [0, 180]");
  if (total < 1 || planes < 1 || total % planes != 0)
    throw ParameterError("planes must divide total satellites");
  if (phasing < 0 || phasing >= total) throw ParameterError("phasing must be in [0, total)");
}

double orbital_period(double altitude_m) {
  const double a = kEarthRadius + altitude_m;
  return kTwoPi * std::sqrt(a * a * a / kEarthMu);
}

std::vector<Vec3> walker_positions(const WalkerDelta& w, double t_s) {
  w.validate();
  const double a = kEarthRadius + w.altitude_m;
  const double n = std::sqrt(kEarthMu / (a * a * a));
  const double inc = w.inclination_deg * kDeg;
  const int s = w.per_plane();
  const double earth = -kEarthRotation * t_s;
  const Eigen::Matrix3d to_ecef = Eigen::AngleAxisd(earth, Vec3::UnitZ()).toRotationMatrix();
  std::vector<Vec3> out;
  out.reserve(w.total);
  for (int p = 0; p < w.planes; ++p) {
    const double raan = kTwoPi * p / w.planes;
    const Eigen::Matrix3d orient = (Eigen::AngleAxisd(raan, Vec3::UnitZ()) *
                                    Eigen::AngleAxisd(inc, Vec3::UnitX()))
                                       .toRotationMatrix();
    for (int j = 0; j < s; ++j) {
      const double u = kTwoPi * j / s + kTwoPi * w.phasing * p / w.total + n * t_s;
      out.push_back(to_ecef * orient * Vec3(a * std::cos(u), a * std::sin(u), 0.0));
    }
  }
  return out;
}

Vec3 Site::ecef() const {
  const double lat = lat_deg * kDeg, lon = lon_deg * kDeg;
  const double r = kEarthRadius + height_m;
  return {r * std::cos(lat) * std::cos(lon), r * std::cos(lat) * std::sin(lon), r * std::sin(lat)};
}

Vec3 Site::to_enu(const Vec3& p) const {
  const double lat = lat_deg * kDeg, lon = lon_deg * kDeg;
  const Vec3 d = p - ecef();
  const Vec3 e(-std::sin(lon), std::cos(lon), 0.0);
  const Vec3 n(-std::sin(lat) * std::cos(lon), -std::sin(lat) * std::sin(lon), std::cos(lat));
  const Vec3 u(std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat));
  return {e.dot(d), n.dot(d), u.dot(d)};
}

double elevation_deg(const Vec3& enu) {
  return std::atan2(enu.z(), std::hypot(enu.x(), enu.y())) / kDeg;
}

std::vector<int> select_satellites(const std::vector<Vec3>& ecef, const Site& site,
                                   double mask_deg, int count) {
  std::vector<std::pair<double, int>> visible;
  for (std::size_t i = 0; i < ecef.size(); ++i) {
    const double el = elevation_deg(site.to_enu(ecef[i]));
    if (el >= mask_deg) visible.emplace_back(el, static_cast<int>(i));
  }
  if (static_cast<int>(visible.size()) < count)
    throw GeometryError("only " + std::to_string(visible.size()) + " satellites above the mask");
  std::sort(visible.begin(), visible.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<int> out;
  for (int i = 0; i < count; ++i) out.push_back(visible[i].second);
  return out;
}

Eigen::VectorXd simulate_pseudoranges(const SatGeometry& geom,
                                      const std::vector<double>& toa_error_s) {
  if (toa_error_s.size() != geom.sats.size())
    throw ParameterError("one TOA error per satellite is required");
  Eigen::VectorXd rho(geom.sats.size());
  for (std::size_t i = 0; i < geom.sats.size(); ++i)
    rho[i] = (geom.sats[i] - geom.receiver).norm() + kSpeedOfLight * geom.clock_offset_s +
             kSpeedOfLight * toa_error_s[i];
  return rho;
}

Eigen::VectorXd pseudorange_model(const std::vector<Vec3>& sats, const Vec4& theta) {
  Eigen::VectorXd h(sats.size());
  const Vec3 p = theta.head<3>();
  for (std::size_t i = 0; i < sats.size(); ++i) h[i] = (sats[i] - p).norm() + theta[3];
  return h;
}

Eigen::MatrixXd geometry_matrix(const std::vector<Vec3>& sats, const Vec3& receiver) {
  Eigen::MatrixXd A(sats.size(), 4);
  for (std::size_t i = 0; i < sats.size(); ++i) {
    const Vec3 u = (sats[i] - receiver).normalized();
    A.row(i) << -u.x(), -u.y(), -u.z(), 1.0;
  }
  return A;
}

namespace {

Mat4 invert_normal(const Mat4& N) {
  const Eigen::SelfAdjointEigenSolver<Mat4> es(N);
  const auto& ev = es.eigenvalues();
  if (!(ev.minCoeff() > 1e-12 * ev.maxCoeff()) || !(ev.minCoeff() > 0.0))
    throw GeometryError("normal matrix is singular or not positive definite");
  return es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

Mat4 normal_matrix(const Eigen::MatrixXd& A, const Eigen::VectorXd& variances) {
  if (variances.size() != A.rows()) throw ParameterError("one variance per pseudorange is required");
  for (Eigen::Index i = 0; i < variances.size(); ++i)
    if (!(variances[i] > 0.0) || !std::isfinite(variances[i]))
      throw ParameterError("pseudorange variances must be positive and finite");
  return A.transpose() * variances.cwiseInverse().asDiagonal() * A;
}

}  // namespace

Mat4 position_covariance(const std::vector<Vec3>& sats, const Vec3& receiver,
                         const Eigen::VectorXd& variances) {
  return invert_normal(normal_matrix(geometry_matrix(sats, receiver), variances));
}

PositionSolution wnls_solve(const Eigen::VectorXd& rho, const std::vector<Vec3>& sats,
                            const Eigen::VectorXd& variances, const Vec4& initial, double tol,
                            int max_iter) {
  if (sats.size() < 4 || static_cast<std::size_t>(rho.size()) != sats.size())
    throw ParameterError("WNLS needs one pseudorange per satellite and at least 4 satellites");
  if (!(tol > 0.0) || max_iter < 1) throw ParameterError("tol must be > 0 and max_iter >= 1");
  const Eigen::VectorXd w = variances.cwiseInverse();
  PositionSolution sol;
  sol.theta = initial;
  double prev_cost = INFINITY;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::MatrixXd A = geometry_matrix(sats, sol.theta.head<3>());
    const Eigen::VectorXd r = rho - pseudorange_model(sats, sol.theta);
    const Mat4 N = normal_matrix(A, variances);
    const Vec4 step = invert_normal(N) * (A.transpose() * w.asDiagonal() * r);
    sol.theta += step;
    sol.iterations = it + 1;
    const Eigen::VectorXd r_new = rho - pseudorange_model(sats, sol.theta);
    const double cost = r_new.dot(w.asDiagonal() * r_new);
    if (step.norm() < tol || (cost >= prev_cost * (1.0 - 1e-15) && step.norm() < 1e3 * tol)) {
      sol.converged = true;
      break;
    }
    prev_cost = cost;
  }
  sol.Q = position_covariance(sats, sol.theta.head<3>(), variances);
  sol.sigmas = sol.Q.diagonal().cwiseSqrt();
  return sol;
}

Ellipse chebyshev_ellipse(const Eigen::MatrixXd& Q, double confidence) {
  if (Q.rows() < 2 || Q.cols() < 2) throw ParameterError("covariance must be at least 2x2");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ParameterError("confidence must be in (0, 1)");
  Eigen::Matrix2d H = Q.topLeftCorner<2, 2>();
  H = 0.5 * (H + H.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(H);
  if (!(es.eigenvalues()[0] > 0.0)) throw GeometryError("horizontal covariance is not positive definite");
  const double k = std::sqrt(2.0 / (1.0 - confidence));
  Ellipse e;
  e.semi_major_m = k * std::sqrt(es.eigenvalues()[1]);
  e.semi_minor_m = k * std::sqrt(es.eigenvalues()[0]);
  const Eigen::Vector2d v = es.eigenvectors().col(1);
  double ang = std::atan2(v.y(), v.x());
  if (ang <= -kPi / 2.0) ang += kPi;
  if (ang > kPi / 2.0) ang -= kPi;
  e.orientation_rad = ang;
  return e;
}

void LeoCampaignSpec::validate() const {
  walker.validate();
  ofdm.validate();
  layout.validate();
  channel.multipath.validate();
  if (!(mask_deg >= 0.0 && mask_deg < 90.0)) throw ParameterError("mask_deg must be in [0, 90)");
  if (n_sats < 4) throw ParameterError("n_sats must be >= 4");
  if (!(burst_interval_s >= 0.0)) throw ParameterError("burst_interval_s must be >= 0");
  if (!std::isfinite(clock_offset_s)) throw ParameterError("clock_offset_s must be finite");
  if (!(channel.shadowing_db >= 0.0)) throw ParameterError("shadowing_db must be >= 0");
  if (modes.empty()) throw ParameterError("at least one estimator mode is required");
  if (n_channel < 1 || n_noise < 1) throw ParameterError("trial counts must be >= 1");
  if (workers < 1) throw ParameterError("workers must be >= 1");
  EstimatorConfig{delta_z, delta_phi, Mode::PilotOnly}.validate(ofdm.window_samples());
  zzb.validate();
  if (layout.prs_blocks.empty())
    for (Mode m : modes)
      if (m == Mode::PilotOnly || m == Mode::DecisionDirected)
        throw ParameterError("mode " + to_string(m) + " needs PRS blocks");
}

LeoResult leo_campaign(const LeoCampaignSpec& spec) {
  spec.validate();
  const auto grid = layout_to_grid(spec.layout, spec.ofdm, spec.pilot_seed);
  const std::size_t n_sats = static_cast<std::size_t>(spec.n_sats);
  const std::size_t n_modes = spec.modes.size();
  const double n_a = spec.ofdm.window_samples();
  const double ts = spec.ofdm.sample_period();

  LeoResult result;
  result.satellites = select_satellites(walker_positions(spec.walker, spec.epoch_s),
                                        spec.site, spec.mask_deg, spec.n_sats);
  std::vector<Vec3> sats;
  for (std::size_t i = 0; i < n_sats; ++i) {
    const double t = spec.epoch_s + static_cast<double>(i) * spec.burst_interval_s;
    const Vec3 enu = spec.site.to_enu(walker_positions(spec.walker, t)[result.satellites[i]]);
    sats.push_back(enu);
    result.elevation_deg.push_back(elevation_deg(enu));
    result.mean_snr_db.push_back(link_budget_snr_db(spec.channel.link, spec.ofdm.delta_f, enu.norm()));
  }
  SatGeometry geom{sats, Vec3::Zero(), spec.clock_offset_s};

  const GridSearch search(grid, spec.constellation, spec.delta_z, spec.delta_phi);
  const bool needs_table = grid.count(CellState::Data) > 0;
  std::shared_ptr<const MomentTable> table;
  if (needs_table) table = std::make_shared<MomentTable>(spec.constellation, spec.zzb.gh_order);

  struct RealizationOut {
    std::vector<double> h_rmse, v_rmse, zzb_h, zzb_v;  // per mode
    std::vector<Mat4> q;                               // per mode
    // Per mode: count, sum e, sum n, sum ee, sum en, sum nn.
    std::vector<std::array<double, 6>> moments;
    std::vector<std::size_t> failures;
  };
  std::vector<RealizationOut> reals(static_cast<std::size_t>(spec.n_channel));

  parallel_for(reals.size(), spec.workers, [&](std::size_t r) {
    RealizationOut& out = reals[r];
    out.h_rmse.assign(n_modes, NAN);
    out.v_rmse.assign(n_modes, NAN);
    out.zzb_h.assign(n_modes, NAN);
    out.zzb_v.assign(n_modes, NAN);
    out.q.assign(n_modes, Mat4::Zero());
    out.moments.assign(n_modes, {});
    out.failures.assign(n_modes, 0);

    std::mt19937_64 shadow_rng(derive_seed(spec.seed, kShadowStream, r));
    std::normal_distribution<double> shadow(0.0, 1.0);
    std::vector<double> sigma2(n_sats);
    std::vector<std::vector<Tap>> taps(n_sats);
    std::vector<ChannelRealization> base(n_sats);
    for (std::size_t i = 0; i < n_sats; ++i) {
      const double db = result.mean_snr_db[i] + spec.channel.shadowing_db * shadow(shadow_rng);
      sigma2[i] = 1.0 / db_to_linear(db);
      taps[i] = draw_taps(spec.channel.multipath, derive_seed(spec.seed, kTapStream, r, i));
      base[i] = make_tapped_channel(grid, taps[i], {0.0, 0.0}, sigma2[i],
                                    spec.channel.multipath.drift_rad);
    }

    // Pseudorange variances from the per-satellite ZZB of each mode.
    std::vector<Eigen::VectorXd> var(n_modes, Eigen::VectorXd(n_sats));
    for (std::size_t m = 0; m < n_modes; ++m) {
      const Mode eff = spec.modes[m] == Mode::DecisionDirected ? Mode::PilotPlusData : spec.modes[m];
      std::size_t prior = m;
      for (std::size_t j = 0; j < m; ++j) {
        const Mode ej = spec.modes[j] == Mode::DecisionDirected ? Mode::PilotPlusData : spec.modes[j];
        if (ej == eff) {
          prior = j;
          break;
        }
      }
      if (prior < m) {
        var[m] = var[prior];
      } else {
        for (std::size_t i = 0; i < n_sats; ++i) {
          const double v =
              zzb_variance(grid, base[i], spec.constellation, eff, spec.zzb, table).variance;
          var[m][i] = v * kSpeedOfLight * kSpeedOfLight;
        }
      }
      out.q[m] = position_covariance(sats, Vec3::Zero(), var[m]);
      out.zzb_h[m] = std::sqrt(out.q[m](0, 0) + out.q[m](1, 1));
      out.zzb_v[m] = std::sqrt(out.q[m](2, 2));
    }

    std::vector<double> sum_h(n_modes, 0.0), sum_v(n_modes, 0.0);
    std::vector<std::vector<double>> err(n_modes, std::vector<double>(n_sats));
    for (int t = 0; t < spec.n_noise; ++t) {
      std::vector<bool> ok(n_modes, true);
      for (std::size_t i = 0; i < n_sats; ++i) {
        std::mt19937_64 rng(derive_seed(spec.seed, kTrialStream, r, static_cast<std::uint64_t>(t), i));
        std::uniform_real_distribution<double> uz(0.0, n_a), uphi(0.0, kTwoPi);
        const double z = uz(rng);
        const double phi = uphi(rng);
        const std::uint64_t payload_seed = rng();
        const std::uint64_t noise_seed = rng();
        const auto chan = make_tapped_channel(grid, taps[i], {z, phi}, sigma2[i],
                                              spec.channel.multipath.drift_rad);
        const auto payload = generate_payload(grid, spec.constellation, payload_seed);
        const auto y = apply_channel(grid, payload, chan, noise_seed);
        try {
          const auto est = search.estimate_all(y, {chan.mean_gain(), sigma2[i]}, spec.modes);
          for (std::size_t m = 0; m < n_modes; ++m) err[m][i] = (est[m].theta_hat.z - z) * ts;
        } catch (const ParameterError&) {
          throw;
        } catch (const std::runtime_error&) {
          std::fill(ok.begin(), ok.end(), false);
        }
      }
      for (std::size_t m = 0; m < n_modes; ++m) {
        if (!ok[m]) {
          ++out.failures[m];
          continue;
        }
        try {
          const auto rho = simulate_pseudoranges(geom, err[m]);
          const auto sol = wnls_solve(rho, sats, var[m], Vec4::Zero());
          if (!sol.converged || !sol.theta.allFinite()) {
            ++out.failures[m];
            continue;
          }
          const double e = sol.theta[0], n = sol.theta[1], u = sol.theta[2];
          sum_h[m] += e * e + n * n;
          sum_v[m] += u * u;
          auto& mo = out.moments[m];
          mo[0] += 1.0;
          mo[1] += e;
          mo[2] += n;
          mo[3] += e * e;
          mo[4] += e * n;
          mo[5] += n * n;
        } catch (const GeometryError&) {
          ++out.failures[m];
        }
      }
    }
    for (std::size_t m = 0; m < n_modes; ++m) {
      const double cnt = out.moments[m][0];
      if (cnt > 0.0) {
        out.h_rmse[m] = std::sqrt(sum_h[m] / cnt);
        out.v_rmse[m] = std::sqrt(sum_v[m] / cnt);
      }
    }
  });

  for (std::size_t m = 0; m < n_modes; ++m) {
    LeoModeResult mr;
    mr.mode = spec.modes[m];
    std::array<double, 6> tot{};
    Mat4 q_mean = Mat4::Zero();
    for (const auto& ro : reals) {
      mr.horizontal_rmse_m.push_back(ro.h_rmse[m]);
      mr.vertical_rmse_m.push_back(ro.v_rmse[m]);
      mr.zzb_horizontal_m.push_back(ro.zzb_h[m]);
      mr.zzb_vertical_m.push_back(ro.zzb_v[m]);
      for (int j = 0; j < 6; ++j) tot[j] += ro.moments[m][j];
      q_mean += ro.q[m];
      mr.failures += ro.failures[m];
    }
    q_mean /= static_cast<double>(reals.size());
    mr.predicted = chebyshev_ellipse(q_mean);
    if (tot[0] >= 3.0) {
      mr.center_e_m = tot[1] / tot[0];
      mr.center_n_m = tot[2] / tot[0];
      Eigen::Matrix2d c;
      c(0, 0) = tot[3] / tot[0] - mr.center_e_m * mr.center_e_m;
      c(0, 1) = c(1, 0) = tot[4] / tot[0] - mr.center_e_m * mr.center_n_m;
      c(1, 1) = tot[5] / tot[0] - mr.center_n_m * mr.center_n_m;
      try {
        mr.empirical = chebyshev_ellipse(c);
      } catch (const GeometryError&) {
        // Degenerate spread (e.g. noiseless runs); leave the ellipse at zero.
      }
    }
    result.modes.push_back(std::move(mr));
  }
  return result;
}

}  // namespace ofdmtoa
