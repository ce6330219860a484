#include "ofdmtoa/estimators.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <map>
#include <set>

#include "ofdmtoa/errors.hpp"

namespace ofdmtoa {

void EstimatorConfig::validate(double n_a) const {
  if (!(delta_z > 0.0) || delta_z > n_a) throw ParameterError("delta_z must be in (0, N_a]");
  if (!(delta_phi > 0.0) || delta_phi > kTwoPi) throw ParameterError("delta_phi must be in (0, 2pi]");
}

double loglik_cell(cdouble y, const Cell& cell, int k, int K, const ChannelModel& model,
                   const Constellation& constellation, const ThetaParams& theta) {
  const cdouble nu = phase_ramp(theta, k, K);
  const double amp = std::sqrt(model.g) * cell.weight;
  switch (cell.state) {
    case CellState::Empty:
      return 0.0;
    case CellState::Pilot:
      return 2.0 * (std::conj(y) * amp * cell.pilot * nu).real() / model.sigma2;
    case CellState::Data: {
      std::vector<double> terms(constellation.size());
      for (std::size_t c = 0; c < constellation.size(); ++c) {
        const cdouble s = constellation[c];
        terms[c] = (2.0 * (std::conj(y) * amp * s * nu).real() - amp * amp * std::norm(s)) /
                   model.sigma2;
      }
      return log_sum_exp(terms);
    }
  }
  return 0.0;
}

namespace {

bool near_integer(double x) { return std::abs(x - std::round(x)) <= 1e-9 * std::max(1.0, std::abs(x)); }

long pos_mod(long a, long m) {
  const long r = a % m;
  return r < 0 ? r + m : r;
}

// Distinct real and imaginary levels when the alphabet is their Cartesian product.
bool product_levels(const Constellation& c, std::vector<double>& re, std::vector<double>& im) {
  auto add = [](std::vector<double>& v, double x) {
    for (double u : v)
      if (std::abs(u - x) < 1e-12) return;
    v.push_back(x);
  };
  re.clear();
  im.clear();
  for (cdouble s : c.symbols()) {
    add(re, s.real());
    add(im, s.imag());
  }
  if (re.size() * im.size() != c.size()) return false;
  for (double r : re)
    for (double i : im) {
      bool found = false;
      for (cdouble s : c.symbols())
        if (std::abs(s - cdouble{r, i}) < 1e-12) found = true;
      if (!found) return false;
    }
  return true;
}

}  // namespace

GridSearch::GridSearch(const ResourceGrid& grid, Constellation constellation, double delta_z,
                       double delta_phi)
    : grid_(grid), constellation_(std::move(constellation)), dz_(delta_z), dphi_(delta_phi) {
  const double n_a = grid.params().window_samples();
  EstimatorConfig{delta_z, delta_phi, Mode::PilotOnly}.validate(n_a);
  K_ = grid.K();
  nz_ = static_cast<std::size_t>(std::floor(n_a / dz_ + 1e-9)) + 1;
  nphi_ = static_cast<std::size_t>(std::ceil(kTwoPi / dphi_ - 1e-9));

  for (std::size_t f = 0; f < grid.params().cell_count(); ++f) {
    const Cell& c = grid.at(f);
    const int d = freq_index_map(static_cast<int>(f % K_), K_);
    if (c.state == CellState::Pilot) pilots_.push_back({f, d, c.pilot, c.weight});
    if (c.state == CellState::Data) {
      data_.push_back(f);
      data_d_.push_back(d);
    }
  }

  separable_ = product_levels(constellation_, levels_re_, levels_im_);

  const int r = constellation_.rotational_order();
  if (near_integer(nphi_ * dphi_ / kTwoPi) && std::abs(nphi_ * dphi_ - kTwoPi) < 1e-9) {
    for (long L = static_cast<long>(nphi_); L <= (1L << 16); L += static_cast<long>(nphi_)) {
      const double x = static_cast<double>(L) * dz_ / K_;
      if (near_integer(x) && L % r == 0) {
        lattice_ = L;
        period_ = L / r;
        phi_step_ = L / static_cast<long>(nphi_);
        z_step_ = std::lround(x);
        break;
      }
    }
  }
  if (lattice_ > 0) {
    cos_.resize(lattice_);
    sin_.resize(lattice_);
    for (long n = 0; n < lattice_; ++n) {
      const double a = kTwoPi * static_cast<double>(n) / static_cast<double>(lattice_);
      cos_[n] = std::cos(a);
      sin_[n] = std::sin(a);
    }
    std::map<int, int> index;
    for (int d : data_d_) {
      auto [it, inserted] = index.emplace(d, static_cast<int>(group_d_.size()));
      if (inserted) group_d_.push_back(d);
      data_groups_.push_back(it->second);
    }
  }
}

void GridSearch::check_input(std::span<const cdouble> y) const {
  if (y.size() != grid_.params().cell_count())
    throw ParameterError("received grid size does not match the resource grid");
}

std::vector<double> GridSearch::pilot_surface(std::span<const cdouble> y,
                                              const ChannelModel& model,
                                              std::span<const KnownCell> cells) const {
  std::vector<double> out(nz_ * nphi_, 0.0);
  std::map<int, cdouble> by_d;
  for (const auto& c : cells)
    by_d[c.d] += std::conj(y[c.flat]) * (std::sqrt(model.g) * c.weight) * c.symbol;
  const double scale = 2.0 / model.sigma2;
  for (std::size_t i = 0; i < nz_; ++i) {
    cdouble corr{0.0, 0.0};
    for (const auto& [d, s] : by_d) {
      if (lattice_ > 0) {
        const long n = pos_mod(-static_cast<long>(i) * z_step_ * d, lattice_);
        corr += s * cdouble{cos_[n], sin_[n]};
      } else {
        corr += s * std::polar(1.0, -kTwoPi * static_cast<double>(i) * dz_ * d / K_);
      }
    }
    for (std::size_t j = 0; j < nphi_; ++j) {
      cdouble e;
      if (lattice_ > 0) {
        const long n = pos_mod(static_cast<long>(j) * phi_step_, lattice_);
        e = {cos_[n], sin_[n]};
      } else {
        e = std::polar(1.0, static_cast<double>(j) * dphi_);
      }
      out[i * nphi_ + j] = scale * (e * corr).real();
    }
  }
  return out;
}

void GridSearch::data_table(cdouble y, double weight, const ChannelModel& model,
                            double* out) const {
  using Eigen::ArrayXd;
  const Eigen::Index p = period_;
  const Eigen::Map<const ArrayXd> cs(cos_.data(), p), sn(sin_.data(), p);
  const double amp = std::sqrt(model.g) * weight;
  const double kappa = 2.0 * amp / model.sigma2;
  const double lambda = amp * amp / model.sigma2;
  // conj(y) e^{j psi} = a + j b
  const ArrayXd a = y.real() * cs + y.imag() * sn;
  const ArrayXd b = y.real() * sn - y.imag() * cs;
  Eigen::Map<ArrayXd> res(out, p);

  auto lse_levels = [&](const ArrayXd& slope, const std::vector<double>& levels) {
    if (levels.size() == 2 && std::abs(levels[0] + levels[1]) < 1e-12) {
      const double l = std::abs(levels[0]);
      const ArrayXd x = (slope * l).abs();
      return ArrayXd(x + (1.0 + (-2.0 * x).exp()).log() - lambda * l * l);
    }
    ArrayXd mx = slope * levels[0] - lambda * levels[0] * levels[0];
    for (std::size_t l = 1; l < levels.size(); ++l)
      mx = mx.max(slope * levels[l] - lambda * levels[l] * levels[l]);
    ArrayXd acc = ArrayXd::Zero(p);
    for (double x : levels) acc += (slope * x - lambda * x * x - mx).exp();
    return ArrayXd(mx + acc.log());
  };

  if (separable_) {
    res = lse_levels(kappa * a, levels_re_) + lse_levels(-kappa * b, levels_im_);
    return;
  }
  std::vector<ArrayXd> terms;
  terms.reserve(constellation_.size());
  for (cdouble s : constellation_.symbols())
    terms.push_back(kappa * (a * s.real() - b * s.imag()) - lambda * std::norm(s));
  ArrayXd mx = terms[0];
  for (std::size_t c = 1; c < terms.size(); ++c) mx = mx.max(terms[c]);
  ArrayXd acc = ArrayXd::Zero(p);
  for (const auto& t : terms) acc += (t - mx).exp();
  res = mx + acc.log();
}

std::vector<double> GridSearch::data_surface(std::span<const cdouble> y,
                                             const ChannelModel& model) const {
  std::vector<double> out(nz_ * nphi_, 0.0);
  if (lattice_ == 0) {
    for (std::size_t i = 0; i < nz_; ++i)
      for (std::size_t j = 0; j < nphi_; ++j) {
        const ThetaParams th(static_cast<double>(i) * dz_, static_cast<double>(j) * dphi_);
        double acc = 0.0;
        for (std::size_t f : data_)
          acc += loglik_cell(y[f], grid_.at(f), static_cast<int>(f % K_), K_, model,
                             constellation_, th);
        out[i * nphi_ + j] = acc;
      }
    return out;
  }

  const std::size_t p = static_cast<std::size_t>(period_);
  std::vector<double> tables(group_d_.size() * p, 0.0);
  std::vector<double> cell(p);
  for (std::size_t c = 0; c < data_.size(); ++c) {
    const std::size_t f = data_[c];
    data_table(y[f], grid_.at(f).weight, model, cell.data());
    double* dst = tables.data() + static_cast<std::size_t>(data_groups_[c]) * p;
    for (std::size_t n = 0; n < p; ++n) dst[n] += cell[n];
  }
  std::vector<long> joff(nphi_);
  for (std::size_t j = 0; j < nphi_; ++j) joff[j] = pos_mod(static_cast<long>(j) * phi_step_, period_);
  for (std::size_t i = 0; i < nz_; ++i) {
    double* row = out.data() + i * nphi_;
    for (std::size_t g = 0; g < group_d_.size(); ++g) {
      const double* t = tables.data() + g * p;
      const long base = pos_mod(-static_cast<long>(i) * z_step_ * group_d_[g], period_);
      for (std::size_t j = 0; j < nphi_; ++j) {
        long n = base + joff[j];
        if (n >= period_) n -= period_;
        row[j] += t[n];
      }
    }
  }
  return out;
}

std::vector<double> GridSearch::objective(std::span<const cdouble> y, const ChannelModel& model,
                                          Mode mode) const {
  check_input(y);
  if (mode == Mode::DecisionDirected)
    throw ParameterError("decision-directed mode has no single objective surface");
  if (uses_pilots(mode) && !uses_data(mode) && pilots_.empty())
    throw ParameterError("no pilot cells for pilot-only estimation");
  if (uses_data(mode) && !uses_pilots(mode) && data_.empty())
    throw ParameterError("no data cells for data-only estimation");
  if (pilots_.empty() && data_.empty()) throw ParameterError("grid has no occupied cells");
  std::vector<double> out(nz_ * nphi_, 0.0);
  if (uses_pilots(mode) && !pilots_.empty()) out = pilot_surface(y, model, pilots_);
  if (uses_data(mode) && !data_.empty()) {
    const auto d = data_surface(y, model);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += d[i];
  }
  return out;
}

std::vector<double> GridSearch::objective_direct(std::span<const cdouble> y,
                                                 const ChannelModel& model, Mode mode) const {
  check_input(y);
  if (mode == Mode::DecisionDirected)
    throw ParameterError("decision-directed mode has no single objective surface");
  std::vector<double> out(nz_ * nphi_, 0.0);
  for (std::size_t i = 0; i < nz_; ++i)
    for (std::size_t j = 0; j < nphi_; ++j) {
      const ThetaParams th(static_cast<double>(i) * dz_, static_cast<double>(j) * dphi_);
      double acc = 0.0;
      for (std::size_t f = 0; f < y.size(); ++f) {
        const Cell& c = grid_.at(f);
        if ((c.state == CellState::Pilot && uses_pilots(mode)) ||
            (c.state == CellState::Data && uses_data(mode)))
          acc += loglik_cell(y[f], c, static_cast<int>(f % K_), K_, model, constellation_, th);
      }
      out[i * nphi_ + j] = acc;
    }
  return out;
}

Estimate GridSearch::pick_peak(std::span<const double> surface) const {
  if (surface.size() != nz_ * nphi_) throw ParameterError("surface size mismatch");
  std::size_t bi = 0, bj = 0;
  double best = surface[0];
  for (std::size_t i = 0; i < nz_; ++i)
    for (std::size_t j = 0; j < nphi_; ++j)
      if (surface[i * nphi_ + j] > best) {
        best = surface[i * nphi_ + j];
        bi = i;
        bj = j;
      }
  if (!std::isfinite(best)) throw std::runtime_error("non-finite likelihood surface");
  Estimate e;
  e.loglik_at_peak = best;
  e.z_index = bi;
  e.phi_index = bj;
  double z = static_cast<double>(bi) * dz_;
  if (bi > 0 && bi + 1 < nz_) {
    const double lm = surface[(bi - 1) * nphi_ + bj];
    const double lp = surface[(bi + 1) * nphi_ + bj];
    const double denom = lm - 2.0 * best + lp;
    if (denom < 0.0) {
      z += std::clamp(0.5 * (lm - lp) / denom, -0.5, 0.5) * dz_;
      e.interpolated = true;
    }
  }
  e.theta_hat = ThetaParams(z, static_cast<double>(bj) * dphi_);
  return e;
}

std::vector<cdouble> GridSearch::decode(std::span<const cdouble> y, const ChannelModel& model,
                                        const ThetaParams& theta) const {
  check_input(y);
  std::vector<cdouble> out;
  out.reserve(data_.size());
  for (std::size_t f : data_) {
    const int k = static_cast<int>(f % K_);
    const cdouble ref = std::sqrt(model.g) * grid_.at(f).weight * phase_ramp(theta, k, K_);
    out.push_back(constellation_[constellation_.nearest(y[f] / ref)]);
  }
  return out;
}

Estimate GridSearch::decision_directed(std::span<const cdouble> y, const ChannelModel& model,
                                       const Estimate& pilot_estimate) const {
  auto decoded = decode(y, model, pilot_estimate.theta_hat);
  std::vector<KnownCell> known = pilots_;
  for (std::size_t c = 0; c < data_.size(); ++c)
    known.push_back({data_[c], data_d_[c], decoded[c], grid_.at(data_[c]).weight});
  Estimate e = pick_peak(pilot_surface(y, model, known));
  e.decoded = std::move(decoded);
  return e;
}

Estimate GridSearch::estimate(std::span<const cdouble> y, const ChannelModel& model,
                              Mode mode) const {
  const Mode m = mode;
  return estimate_all(y, model, std::span<const Mode>(&m, 1)).front();
}

std::vector<Estimate> GridSearch::estimate_all(std::span<const cdouble> y,
                                               const ChannelModel& model,
                                               std::span<const Mode> modes) const {
  check_input(y);
  bool need_pilot = false, need_data = false;
  for (Mode m : modes) {
    if (m == Mode::DecisionDirected) {
      if (pilots_.empty()) throw ParameterError("decision-directed estimation needs pilot cells");
      need_pilot = true;
    } else {
      if (m == Mode::PilotOnly && pilots_.empty())
        throw ParameterError("no pilot cells for pilot-only estimation");
      if (m == Mode::DataOnly && data_.empty())
        throw ParameterError("no data cells for data-only estimation");
      if (pilots_.empty() && data_.empty()) throw ParameterError("grid has no occupied cells");
      need_pilot = need_pilot || (uses_pilots(m) && !pilots_.empty());
      need_data = need_data || (uses_data(m) && !data_.empty());
    }
  }
  std::vector<double> ps, ds;
  if (need_pilot) ps = pilot_surface(y, model, pilots_);
  if (need_data) ds = data_surface(y, model);

  std::vector<Estimate> out;
  std::optional<Estimate> pilot_est;
  for (Mode m : modes) {
    switch (m) {
      case Mode::PilotOnly:
        out.push_back(pick_peak(ps));
        break;
      case Mode::DataOnly:
        out.push_back(pick_peak(ds));
        break;
      case Mode::PilotPlusData: {
        if (ps.empty()) {
          out.push_back(pick_peak(ds));
        } else if (ds.empty()) {
          out.push_back(pick_peak(ps));
        } else {
          std::vector<double> sum(ps.size());
          for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = ps[i] + ds[i];
          out.push_back(pick_peak(sum));
        }
        break;
      }
      case Mode::DecisionDirected:
        if (!pilot_est) pilot_est = pick_peak(ps);
        out.push_back(decision_directed(y, model, *pilot_est));
        break;
    }
  }
  return out;
}

Estimate ml_estimate(std::span<const cdouble> y, const ResourceGrid& grid,
                     const ChannelModel& model, const Constellation& constellation,
                     const EstimatorConfig& cfg) {
  cfg.validate(grid.params().window_samples());
  const GridSearch search(grid, constellation, cfg.delta_z, cfg.delta_phi);
  return search.estimate(y, model, cfg.mode);
}

Estimate dd_estimate(std::span<const cdouble> y, const ResourceGrid& grid,
                     const ChannelModel& model, const Constellation& constellation,
                     const EstimatorConfig& cfg) {
  cfg.validate(grid.params().window_samples());
  const GridSearch search(grid, constellation, cfg.delta_z, cfg.delta_phi);
  return search.estimate(y, model, Mode::DecisionDirected);
}

}  // namespace ofdmtoa
