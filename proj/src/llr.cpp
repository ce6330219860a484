#include "ofdmtoa/llr.hpp"

#include <algorithm>

#include "ofdmtoa/errors.hpp"

namespace ofdmtoa {

namespace {

struct OrbitRep {
  cdouble symbol;
  double weight;  // orbit size / |C|
};

// One representative per orbit of the rotation group the alphabet is invariant under.
// Averaging over true symbols reduces to these because CN(0,1) noise and the
// Gauss-Hermite tensor grid are both invariant under quarter-turn rotations.
std::vector<OrbitRep> orbit_representatives(const Constellation& c) {
  const int r = c.rotational_order();
  const cdouble rot = std::polar(1.0, kTwoPi / r);
  std::vector<OrbitRep> reps;
  std::vector<bool> covered(c.size(), false);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (covered[i]) continue;
    cdouble s = c[i];
    for (int j = 0; j < r; ++j) {
      for (std::size_t q = 0; q < c.size(); ++q)
        if (!covered[q] && std::abs(c[q] - s) < 1e-9) covered[q] = true;
      s *= rot;
    }
    reps.push_back({c[i], 0.0});
  }
  const double w = static_cast<double>(r) / static_cast<double>(c.size());
  for (auto& rep : reps) rep.weight = w;
  return reps;
}

// Null-hypothesis quantities at one (true symbol, noise node) pair.
struct NodeState {
  double weight;
  double lse0;
  cdouble b;  // s * conj(y)
};

struct NullSide {
  std::vector<NodeState> nodes;
  std::vector<double> energy;  // s^2 |c|^2 per symbol
};

NullSide build_null_side(double snr, const Constellation& constellation,
                         const GaussHermiteRule& rule) {
  const double s = std::sqrt(snr);
  const auto reps = orbit_representatives(constellation);
  const auto x = rule.nodes();
  const auto w = rule.weights();
  const std::size_t n = x.size();
  NullSide out;
  out.energy.resize(constellation.size());
  for (std::size_t c = 0; c < constellation.size(); ++c)
    out.energy[c] = snr * std::norm(constellation[c]);
  out.nodes.reserve(reps.size() * n * n);
  std::vector<double> terms(constellation.size());
  for (const auto& rep : reps) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t q = 0; q < n; ++q) {
        const cdouble y = s * rep.symbol + cdouble{x[i], x[q]};
        const cdouble b = s * std::conj(y);
        for (std::size_t c = 0; c < constellation.size(); ++c)
          terms[c] = 2.0 * (b * constellation[c]).real() - out.energy[c];
        out.nodes.push_back({rep.weight * w[i] * w[q], log_sum_exp(terms), b});
      }
    }
  }
  return out;
}

// Two-pass mean and variance of lse0 - lse1 over the node set for rotated symbols.
LlrMoments moments_at(const NullSide& null, std::span<const cdouble> rotated,
                      std::vector<double>& llr, std::vector<double>& terms) {
  const std::size_t nc = rotated.size();
  llr.resize(null.nodes.size());
  terms.resize(nc);
  double m1 = 0.0;
  for (std::size_t j = 0; j < null.nodes.size(); ++j) {
    const auto& nd = null.nodes[j];
    for (std::size_t c = 0; c < nc; ++c)
      terms[c] = 2.0 * (nd.b * rotated[c]).real() - null.energy[c];
    llr[j] = nd.lse0 - log_sum_exp(terms);
    m1 += nd.weight * llr[j];
  }
  double v = 0.0;
  for (std::size_t j = 0; j < null.nodes.size(); ++j) {
    const double e = llr[j] - m1;
    v += null.nodes[j].weight * e * e;
  }
  return {m1, v};
}

}  // namespace

LlrMoments pilot_llr_moments(double snr, double pilot_power, double psi) {
  const double mean = 2.0 * snr * pilot_power * (1.0 - std::cos(psi));
  return {mean, 2.0 * mean};
}

LlrMoments data_llr_moments(double snr, double psi, const Constellation& constellation,
                            const GaussHermiteRule& rule) {
  if (!(snr > 0.0)) return {};
  const NullSide null = build_null_side(snr, constellation, rule);
  const cdouble rot = std::polar(1.0, psi);
  std::vector<cdouble> rotated(constellation.size());
  for (std::size_t c = 0; c < rotated.size(); ++c) rotated[c] = constellation[c] * rot;
  std::vector<double> llr, terms;
  return moments_at(null, rotated, llr, terms);
}

double cell_snr(const ResourceGrid& grid, const ChannelRealization& chan, std::size_t flat) {
  const double w = grid.at(flat).weight;
  return chan.snr(flat) * w * w;
}

namespace {

double cell_psi(const ThetaParams& theta1, int k, int K) {
  return theta1.phi - kTwoPi * theta1.z * freq_index_map(k, K) / static_cast<double>(K);
}

}  // namespace

LlrMoments llr_moments_pilot(const ResourceGrid& grid, const ChannelRealization& chan,
                             CellIndex cell, const ThetaParams& theta1) {
  const std::size_t f = grid.flat(cell.m, cell.k);
  const Cell& c = grid.at(f);
  if (c.state != CellState::Pilot) throw ParameterError("cell is not a pilot");
  return pilot_llr_moments(cell_snr(grid, chan, f), std::norm(c.pilot),
                           cell_psi(theta1, cell.k, grid.K()));
}

LlrMoments llr_moments_data(const ResourceGrid& grid, const ChannelRealization& chan,
                            CellIndex cell, const Constellation& constellation,
                            const ThetaParams& theta1, const GaussHermiteRule& rule) {
  const std::size_t f = grid.flat(cell.m, cell.k);
  if (grid.at(f).state != CellState::Data) throw ParameterError("cell is not a data cell");
  return data_llr_moments(cell_snr(grid, chan, f), cell_psi(theta1, cell.k, grid.K()),
                          constellation, rule);
}

MomentRow::MomentRow(double snr, double period, std::vector<double> mean, std::vector<double> var)
    : snr_(snr), period_(period), mean_(std::move(mean)), var_(std::move(var)) {
  if (mean_.size() != var_.size() || mean_.size() < 4)
    throw ParameterError("moment row needs at least 4 samples");
  inv_step_ = static_cast<double>(mean_.size()) / period_;
}

LlrMoments MomentRow::operator()(double psi) const {
  const auto n = static_cast<long>(mean_.size());
  double x = std::fmod(psi, period_);
  if (x < 0.0) x += period_;
  x *= inv_step_;
  long i0 = static_cast<long>(x);
  const double t = x - static_cast<double>(i0);
  if (i0 >= n) i0 -= n;
  const double wm = -t * (t - 1.0) * (t - 2.0) / 6.0;
  const double w0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
  const double w1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
  const double w2 = (t + 1.0) * t * (t - 1.0) / 6.0;
  const long im = i0 == 0 ? n - 1 : i0 - 1;
  const long i1 = i0 + 1 >= n ? i0 + 1 - n : i0 + 1;
  const long i2 = i0 + 2 >= n ? i0 + 2 - n : i0 + 2;
  const double m = wm * mean_[im] + w0 * mean_[i0] + w1 * mean_[i1] + w2 * mean_[i2];
  const double v = wm * var_[im] + w0 * var_[i0] + w1 * var_[i1] + w2 * var_[i2];
  return {std::max(m, 0.0), std::max(v, 0.0)};
}

MomentRow compute_moment_row(double snr, const Constellation& constellation,
                             const GaussHermiteRule& rule, int samples) {
  const double period = kTwoPi / constellation.rotational_order();
  std::vector<double> mean(samples, 0.0), var(samples, 0.0);
  if (snr > 0.0) {
    const NullSide null = build_null_side(snr, constellation, rule);
    std::vector<cdouble> rotated(constellation.size());
    std::vector<double> llr, terms;
    for (int i = 0; i < samples; ++i) {
      const cdouble rot = std::polar(1.0, period * i / samples);
      for (std::size_t c = 0; c < rotated.size(); ++c) rotated[c] = constellation[c] * rot;
      const LlrMoments mm = moments_at(null, rotated, llr, terms);
      mean[i] = mm.mean;
      var[i] = mm.var;
    }
  }
  return MomentRow(snr, period, std::move(mean), std::move(var));
}

MomentTable::MomentTable(Constellation constellation, int gh_order, int samples, double lattice_db)
    : constellation_(std::move(constellation)),
      rule_(gh_order),
      samples_(samples),
      lattice_db_(lattice_db) {
  if (samples_ < 16) throw ParameterError("moment table needs at least 16 psi samples");
  if (!(lattice_db_ > 0.0)) throw ParameterError("lattice spacing must be > 0");
}

std::shared_ptr<const MomentRow> MomentTable::exact(double snr) const {
  {
    std::lock_guard lock(mu_);
    auto it = exact_.find(snr);
    if (it != exact_.end()) return it->second;
  }
  auto row = std::make_shared<const MomentRow>(
      compute_moment_row(snr, constellation_, rule_, samples_));
  std::lock_guard lock(mu_);
  return exact_.emplace(snr, std::move(row)).first->second;
}

std::shared_ptr<const MomentRow> MomentTable::lattice(int index) const {
  {
    std::lock_guard lock(mu_);
    auto it = lattice_.find(index);
    if (it != lattice_.end()) return it->second;
  }
  const double snr = db_to_linear(index * lattice_db_);
  auto row = std::make_shared<const MomentRow>(
      compute_moment_row(snr, constellation_, rule_, samples_));
  std::lock_guard lock(mu_);
  return lattice_.emplace(index, std::move(row)).first->second;
}

std::shared_ptr<const MomentRow> MomentTable::interpolated(double snr) const {
  if (!(snr > 0.0)) return exact(0.0);
  const double x = linear_to_db(snr) / lattice_db_;
  const int i0 = static_cast<int>(std::floor(x));
  const double t = x - i0;
  const double lw[4] = {-t * (t - 1.0) * (t - 2.0) / 6.0, (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
                        -(t + 1.0) * t * (t - 2.0) / 2.0, (t + 1.0) * t * (t - 1.0) / 6.0};
  std::vector<double> mean(samples_, 0.0), var(samples_, 0.0);
  for (int j = 0; j < 4; ++j) {
    const auto row = lattice(i0 - 1 + j);
    const double scale = lw[j] * snr / row->snr();
    for (int i = 0; i < samples_; ++i) {
      mean[i] += scale * row->means()[i];
      var[i] += scale * row->vars()[i];
    }
  }
  const double period = kTwoPi / constellation_.rotational_order();
  return std::make_shared<const MomentRow>(snr, period, std::move(mean), std::move(var));
}

}  // namespace ofdmtoa
