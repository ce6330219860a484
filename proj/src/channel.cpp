#include "ofdmtoa/channel.hpp"

#include <random>

#include "ofdmtoa/errors.hpp"

namespace ofdmtoa {

double ChannelRealization::mean_gain() const {
  double acc = 0.0;
  for (cdouble a : alpha) acc += std::norm(a);
  return alpha.empty() ? 0.0 : acc / static_cast<double>(alpha.size());
}

ChannelRealization make_flat_channel(const ResourceGrid& grid, double g, const ThetaParams& theta,
                                     double sigma2) {
  if (!(g > 0.0) || !std::isfinite(g)) throw ParameterError("channel gain g must be > 0");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ParameterError("sigma2 must be > 0");
  const int K = grid.K();
  ChannelRealization ch;
  ch.K = K;
  ch.n_sym = grid.n_sym();
  ch.sigma2 = sigma2;
  ch.truth = theta;
  ch.profile = GainProfile::Flat;
  ch.alpha.resize(grid.params().cell_count());
  const double amp = std::sqrt(g);
  for (int m = 0; m < ch.n_sym; ++m)
    for (int k = 0; k < K; ++k) ch.alpha[grid.flat(m, k)] = amp * phase_ramp(theta, k, K);
  return ch;
}

ChannelRealization make_tapped_channel(const ResourceGrid& grid, std::span<const Tap> taps,
                                       const ThetaParams& theta, double sigma2,
                                       double per_symbol_drift) {
  if (taps.empty()) throw ParameterError("tapped channel needs at least one tap");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ParameterError("sigma2 must be > 0");
  const int K = grid.K();
  const double df = grid.params().delta_f;
  ChannelRealization ch;
  ch.K = K;
  ch.n_sym = grid.n_sym();
  ch.sigma2 = sigma2;
  ch.truth = theta;
  ch.profile = GainProfile::Tapped;
  ch.taps.assign(taps.begin(), taps.end());
  ch.drift = per_symbol_drift;
  ch.alpha.resize(grid.params().cell_count());
  for (int m = 0; m < ch.n_sym; ++m) {
    const cdouble rot = per_symbol_drift == 0.0 ? cdouble{1.0, 0.0}
                                                : std::polar(1.0, per_symbol_drift * m);
    for (int k = 0; k < K; ++k) {
      const double d = freq_index_map(k, K);
      cdouble h{0.0, 0.0};
      for (const Tap& t : taps) {
        if (t.delay_s == 0.0)
          h += t.amp;
        else
          h += t.amp * std::polar(1.0, -kTwoPi * d * df * t.delay_s);
      }
      ch.alpha[grid.flat(m, k)] = h * rot * phase_ramp(theta, k, K);
    }
  }
  return ch;
}

void MultipathProfile::validate() const {
  if (n_taps < 0) throw ParameterError("n_taps must be >= 0");
  if (!std::isfinite(rician_k_db)) throw ParameterError("rician_k_db must be finite");
  if (n_taps > 0 && !(rms_delay_s > 0.0)) throw ParameterError("rms_delay_s must be > 0");
  if (!std::isfinite(drift_rad)) throw ParameterError("drift_rad must be finite");
}

std::vector<Tap> draw_taps(const MultipathProfile& profile, std::uint64_t seed) {
  profile.validate();
  if (profile.n_taps == 0) return {Tap{0.0, {1.0, 0.0}}};
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> delay(1.0 / profile.rms_delay_s);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  const double k = db_to_linear(profile.rician_k_db);
  std::vector<Tap> taps{Tap{0.0, {std::sqrt(k / (k + 1.0)), 0.0}}};
  const double nlos = 1.0 / ((k + 1.0) * profile.n_taps);
  for (int i = 0; i < profile.n_taps; ++i) {
    const double tau = delay(rng);
    const double re = gauss(rng), im = gauss(rng);
    taps.push_back({tau, std::sqrt(nlos) * cdouble{re, im}});
  }
  return taps;
}

std::vector<cdouble> apply_channel(const ResourceGrid& grid, const Payload& payload,
                                   const ChannelRealization& chan, std::uint64_t noise_seed) {
  const auto n = grid.params().cell_count();
  if (payload.symbols.size() != n || chan.alpha.size() != n || chan.K != grid.K() ||
      chan.n_sym != grid.n_sym())
    throw ParameterError("payload, channel and grid dimensions differ");
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> noise(0.0, std::sqrt(chan.sigma2 / 2.0));
  std::vector<cdouble> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double re = noise(rng);
    const double im = noise(rng);
    y[i] = chan.alpha[i] * grid.at(i).weight * payload.symbols[i] + cdouble{re, im};
  }
  return y;
}

double link_budget_snr_db(const LinkBudget& lb, double delta_f, double range_m) {
  if (!(range_m > 0.0) || !(delta_f > 0.0)) throw ParameterError("range and delta_f must be > 0");
  const double eirp_dbm = lb.eirp_dbw_per_4khz + 30.0 + 10.0 * std::log10(delta_f / 4e3);
  const double lambda = kSpeedOfLight / lb.carrier_hz;
  const double fspl_db = 20.0 * std::log10(4.0 * kPi * range_m / lambda);
  const double noise_dbm = lb.noise_dbm_per_hz + 10.0 * std::log10(delta_f);
  return eirp_dbm - fspl_db + lb.rx_gain_db - lb.extra_loss_db - noise_dbm;
}

}  // namespace ofdmtoa
