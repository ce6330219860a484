#include "ofdmtoa/bounds.hpp"

#include <map>

#include "ofdmtoa/errors.hpp"
#include "ofdmtoa/llr.hpp"

namespace ofdmtoa {

namespace {

CrlbResult finish(double fisher, CrlbKind kind, const char* what) {
  if (!(fisher > 0.0)) throw UnboundedVarianceError(std::string(what) + ": zero Fisher information");
  CrlbResult r;
  r.fisher = fisher;
  r.variance = 1.0 / fisher;
  r.rmse_m = std::sqrt(r.variance) * kSpeedOfLight;
  r.kind = kind;
  return r;
}

double lever_arm_sum(const ResourceGrid& grid, const ChannelRealization& chan, CellState state) {
  double acc = 0.0;
  for (std::size_t f = 0; f < grid.params().cell_count(); ++f) {
    const Cell& c = grid.at(f);
    if (c.state != state) continue;
    const double d = freq_index_map(static_cast<int>(f % grid.K()), grid.K());
    const double power = state == CellState::Pilot ? std::norm(c.pilot) : 1.0;
    acc += d * d * cell_snr(grid, chan, f) * power;
  }
  return acc;
}

double fisher_scale(const ResourceGrid& grid) {
  const double df = grid.params().delta_f;
  return 8.0 * kPi * kPi * df * df;
}

}  // namespace

CrlbResult crlb_pilot(const ResourceGrid& grid, const ChannelRealization& chan) {
  return finish(fisher_scale(grid) * lever_arm_sum(grid, chan, CellState::Pilot), CrlbKind::Pilot,
                "pilot CRLB");
}

CrlbResult crlb_mcrlb(const ResourceGrid& grid, const ChannelRealization& chan) {
  return finish(fisher_scale(grid) * lever_arm_sum(grid, chan, CellState::Data), CrlbKind::Mcrlb,
                "MCRLB");
}

double data_fisher_factor(double snr, const Constellation& constellation,
                          const GaussHermiteRule& rule) {
  if (!(snr > 0.0)) return 0.0;
  const double s = std::sqrt(snr);
  const auto x = rule.nodes();
  const auto w = rule.weights();
  const std::size_t nc = constellation.size();
  std::vector<double> terms(nc);
  double acc = 0.0;
  for (std::size_t c0 = 0; c0 < nc; ++c0) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t q = 0; q < x.size(); ++q) {
        const cdouble y = s * constellation[c0] + cdouble{x[i], x[q]};
        const cdouble b = std::conj(y);
        double mx = -INFINITY;
        for (std::size_t c = 0; c < nc; ++c) {
          terms[c] = 2.0 * s * (b * constellation[c]).real() - snr * std::norm(constellation[c]);
          mx = std::max(mx, terms[c]);
        }
        double z = 0.0, num = 0.0;
        for (std::size_t c = 0; c < nc; ++c) {
          const double p = std::exp(terms[c] - mx);
          z += p;
          num += p * (b * constellation[c]).imag();
        }
        const double score = num / z;
        acc += w[i] * w[q] * score * score;
      }
    }
  }
  return 2.0 * acc / static_cast<double>(nc);
}

CrlbResult crlb_data_exact(const ResourceGrid& grid, const ChannelRealization& chan,
                           const Constellation& constellation, int gh_order) {
  if (gh_order < 10) throw ParameterError("gh_order must be >= 10 for the data CRLB");
  const GaussHermiteRule rule(gh_order);
  const GaussHermiteRule check(gh_order + 10);
  std::map<double, double> factor;
  double worst = 0.0;
  double acc = 0.0;
  for (std::size_t f = 0; f < grid.params().cell_count(); ++f) {
    if (grid.at(f).state != CellState::Data) continue;
    const double d = freq_index_map(static_cast<int>(f % grid.K()), grid.K());
    if (d == 0.0) continue;
    const double snr = cell_snr(grid, chan, f);
    auto it = factor.find(snr);
    if (it == factor.end()) {
      const double j = data_fisher_factor(snr, constellation, rule);
      const double j2 = data_fisher_factor(snr, constellation, check);
      if (j2 > 0.0) worst = std::max(worst, std::abs(j - j2) / j2);
      it = factor.emplace(snr, j).first;
    }
    acc += d * d * snr * it->second;
  }
  CrlbResult r = finish(fisher_scale(grid) * acc, CrlbKind::DataExact, "data CRLB");
  if (worst > 1e-3)
    r.warnings.push_back("Gauss-Hermite order " + std::to_string(gh_order) +
                         " differs from order " + std::to_string(gh_order + 10) + " by " +
                         std::to_string(worst) + " relative");
  return r;
}

}  // namespace ofdmtoa
