#include "ofdmtoa/zzb.hpp"

#include <algorithm>
#include <map>

#include "ofdmtoa/errors.hpp"

namespace ofdmtoa {

void ZzbSettings::validate() const {
  if (!(z_step > 0.0) || !std::isfinite(z_step)) throw ParameterError("z_step must be > 0");
  if (!(phi_step > 0.0) || phi_step > kTwoPi) throw ParameterError("phi_step must be in (0, 2pi]");
  if (gh_order < 2) throw ParameterError("gh_order must be >= 2");
  if (!(pmin_jump > 0.0)) throw ParameterError("pmin_jump must be > 0");
  if (!(integral_tol > 0.0)) throw ParameterError("integral_tol must be > 0");
  if (max_bisect_depth < 0) throw ParameterError("max_bisect_depth must be >= 0");
}

double pmin_from_moments(const LlrMoments& total) {
  if (!(total.var > 0.0)) return 0.5;
  return q_function(total.mean / std::sqrt(total.var));
}

std::vector<double> valley_fill(std::span<const double> samples) {
  if (samples.empty()) throw ParameterError("valley_fill needs at least one sample");
  std::vector<double> out(samples.begin(), samples.end());
  for (std::size_t i = out.size() - 1; i-- > 0;) out[i] = std::max(out[i], out[i + 1]);
  return out;
}

PminModel::PminModel(const ResourceGrid& grid, const ChannelRealization& chan, Mode mode,
                     std::shared_ptr<const MomentTable> table, const ZzbSettings& settings)
    : K_(grid.K()), settings_(settings) {
  std::map<std::pair<int, double>, double> data_cells;
  for (std::size_t f = 0; f < grid.params().cell_count(); ++f) {
    const Cell& c = grid.at(f);
    const int d = freq_index_map(static_cast<int>(f % K_), K_);
    if (c.state == CellState::Pilot && uses_pilots(mode)) {
      pilots_.push_back({cell_snr(grid, chan, f) * std::norm(c.pilot), d});
    } else if (c.state == CellState::Data && uses_data(mode)) {
      data_cells[{d, cell_snr(grid, chan, f)}] += 1.0;
    }
  }
  if (pilots_.empty() && data_cells.empty())
    throw ParameterError("no occupied cells for mode " + to_string(mode));
  for (const auto& p : pilots_) pilot_total_ += p.a;

  if (!data_cells.empty()) {
    if (!table) throw ParameterError("data cells need a moment table");
    std::map<double, std::shared_ptr<const MomentRow>> rows;
    for (const auto& [key, n] : data_cells) rows.emplace(key.second, nullptr);
    const bool exact = static_cast<int>(rows.size()) <= settings.max_exact_rows;
    for (auto& [snr, row] : rows) row = exact ? table->exact(snr) : table->interpolated(snr);
    for (const auto& [key, n] : data_cells) groups_.push_back({key.first, n, rows.at(key.second)});
    if (pilots_.empty()) phi_period_ = groups_.front().row->period();
  }
}

LlrMoments PminModel::moments(double z1, double phi1) const {
  LlrMoments acc;
  const double scale = kTwoPi * z1 / K_;
  double pm = 0.0;
  for (const auto& p : pilots_) pm += p.a * (1.0 - std::cos(phi1 - scale * p.d));
  acc.mean = 2.0 * pm;
  acc.var = 4.0 * pm;
  for (const auto& g : groups_) {
    const LlrMoments m = (*g.row)(phi1 - scale * g.d);
    acc.mean += g.multiplicity * m.mean;
    acc.var += g.multiplicity * m.var;
  }
  return acc;
}

double PminModel::max_phi(double z1) const {
  const double scale = kTwoPi * z1 / K_;
  if (groups_.empty()) {
    // Pilot-only: sum a (1 - cos(phi - t)) is minimized in closed form over phi.
    cdouble b{0.0, 0.0};
    for (const auto& p : pilots_) b += p.a * std::polar(1.0, -scale * p.d);
    const double m = std::max(pilot_total_ - std::abs(b), 0.0);
    return m > 0.0 ? q_function(std::sqrt(m)) : 0.5;
  }

  std::vector<cdouble> pilot_rot(pilots_.size());
  for (std::size_t i = 0; i < pilots_.size(); ++i)
    pilot_rot[i] = std::polar(1.0, -scale * pilots_[i].d);
  std::vector<double> offsets(groups_.size());
  for (std::size_t i = 0; i < groups_.size(); ++i) offsets[i] = scale * groups_[i].d;

  auto eval = [&](double phi) {
    LlrMoments acc;
    if (!pilots_.empty()) {
      const cdouble e = std::polar(1.0, phi);
      double pm = 0.0;
      for (std::size_t i = 0; i < pilots_.size(); ++i)
        pm += pilots_[i].a * (1.0 - (e * pilot_rot[i]).real());
      acc.mean = 2.0 * pm;
      acc.var = 4.0 * pm;
    }
    for (std::size_t i = 0; i < groups_.size(); ++i) {
      const LlrMoments m = (*groups_[i].row)(phi - offsets[i]);
      acc.mean += groups_[i].multiplicity * m.mean;
      acc.var += groups_[i].multiplicity * m.var;
    }
    return pmin_from_moments(acc);
  };

  const int n = std::max(1, static_cast<int>(std::ceil(phi_period_ / settings_.phi_step - 1e-9)));
  const double step = phi_period_ / n;
  double best = -1.0, best_phi = 0.0;
  for (int j = 0; j < n; ++j) {
    const double v = eval(j * step);
    if (v > best) {
      best = v;
      best_phi = j * step;
    }
  }
  if (!settings_.refine_phi || best >= 0.5) return best;

  constexpr double kInvPhi = 0.6180339887498949;
  double lo = best_phi - step, hi = best_phi + step;
  double x1 = hi - kInvPhi * (hi - lo), x2 = lo + kInvPhi * (hi - lo);
  double f1 = eval(x1), f2 = eval(x2);
  for (int it = 0; it < 28; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = eval(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = eval(x1);
    }
  }
  return std::max({best, f1, f2});
}

double pmin(const ResourceGrid& grid, const ChannelRealization& chan,
            const Constellation& constellation, const ThetaParams& theta1,
            const GaussHermiteRule& rule, Mode mode) {
  LlrMoments total;
  bool any = false;
  for (int m = 0; m < grid.n_sym(); ++m) {
    for (int k = 0; k < grid.K(); ++k) {
      const CellState s = grid.at(m, k).state;
      if (s == CellState::Pilot && uses_pilots(mode)) {
        total += llr_moments_pilot(grid, chan, {m, k}, theta1);
        any = true;
      } else if (s == CellState::Data && uses_data(mode)) {
        total += llr_moments_data(grid, chan, {m, k}, constellation, theta1, rule);
        any = true;
      }
    }
  }
  if (!any) throw ParameterError("no occupied cells for mode " + to_string(mode));
  return pmin_from_moments(total);
}

double zzb_integral(std::span<const double> z, std::span<const double> pmin, double n_a,
                    double sample_period) {
  if (z.size() != pmin.size() || z.size() < 2) throw ParameterError("profile needs >= 2 samples");
  std::vector<double> f(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) f[i] = (n_a - z[i]) * pmin[i];
  const auto v = valley_fill(f);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < z.size(); ++i)
    acc += 0.5 * (z[i + 1] - z[i]) * (z[i] * v[i] + z[i + 1] * v[i + 1]);
  return acc * sample_period * sample_period / n_a;
}

ZzbResult zzb_variance(const ResourceGrid& grid, const ChannelRealization& chan,
                       const Constellation& constellation, Mode mode, const ZzbSettings& settings,
                       std::shared_ptr<const MomentTable> table) {
  settings.validate();
  if (mode == Mode::DecisionDirected) mode = Mode::PilotPlusData;
  const double n_a = grid.params().window_samples();
  const double ts = grid.params().sample_period();
  const double h = settings.z_step;

  if (uses_data(mode) && grid.count(CellState::Data) > 0) {
    if (!table) {
      table = std::make_shared<MomentTable>(constellation, settings.gh_order);
    } else if (table->rule().order() != settings.gh_order ||
               table->constellation().size() != constellation.size() ||
               !std::equal(constellation.symbols().begin(), constellation.symbols().end(),
                           table->constellation().symbols().begin())) {
      throw ParameterError("moment table does not match constellation or gh_order");
    }
  }
  const PminModel model(grid, chan, mode, table, settings);

  std::map<double, double> profile;
  auto sample = [&](double z) {
    auto it = profile.find(z);
    if (it != profile.end()) return it->second;
    const double p = model.max_phi(z);
    profile.emplace(z, p);
    return p;
  };

  for (long i = 0;; ++i) {
    const double z = static_cast<double>(i) * h;
    if (z >= n_a * (1.0 - 1e-12)) break;
    sample(z);
  }
  sample(n_a);

  if (settings.refine_z) {
    for (int j = 1; j <= 8 * 24; ++j) {
      const double z = h * std::exp2(-j / 8.0);
      if (z >= n_a) continue;
      if (sample(z) >= 0.49) break;
    }
    for (int depth = 0; depth < settings.max_bisect_depth; ++depth) {
      // Integrand z (N_a - z) P before valley filling, as a refinement proxy.
      double total = 0.0;
      for (auto it = profile.begin(); std::next(it) != profile.end(); ++it) {
        const auto nx = std::next(it);
        total += 0.5 * (nx->first - it->first) *
                 (it->first * (n_a - it->first) * it->second + nx->first * (n_a - nx->first) * nx->second);
      }
      std::vector<double> mids;
      for (auto it = profile.begin(); std::next(it) != profile.end(); ++it) {
        const auto nx = std::next(it);
        const double width = nx->first - it->first;
        if (width <= 1e-9 * h) continue;
        const double ga = it->first * (n_a - it->first) * it->second;
        const double gb = nx->first * (n_a - nx->first) * nx->second;
        if (std::abs(nx->second - it->second) > settings.pmin_jump ||
            0.5 * width * std::abs(gb - ga) > settings.integral_tol * total)
          mids.push_back(0.5 * (it->first + nx->first));
      }
      if (mids.empty()) break;
      for (double z : mids) sample(z);
    }
  }

  ZzbResult r;
  r.z.reserve(profile.size());
  r.pmin.reserve(profile.size());
  for (const auto& [z, p] : profile) {
    r.z.push_back(z);
    r.pmin.push_back(p);
  }
  r.variance = zzb_integral(r.z, r.pmin, n_a, ts);
  r.rmse_s = std::sqrt(r.variance);
  r.rmse_m = r.rmse_s * kSpeedOfLight;
  r.z_step = h;
  r.phi_step = settings.phi_step;
  return r;
}

}  // namespace ofdmtoa
