#include "ofdmtoa/montecarlo.hpp"

#include <algorithm>
#include <random>

#include "ofdmtoa/bounds.hpp"
#include "ofdmtoa/errors.hpp"
#include "ofdmtoa/parallel.hpp"

namespace ofdmtoa {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags for derive_seed.
constexpr std::uint64_t kTapStream = 1, kTrialStream = 2;

ChannelRealization realize(const ExperimentSpec& spec, const std::vector<Tap>& taps,
                           const ThetaParams& theta, double sigma2) {
  if (spec.channel.n_taps == 0 && spec.channel.drift_rad == 0.0)
    return make_flat_channel(spec.grid, 1.0, theta, sigma2);
  return make_tapped_channel(spec.grid, taps, theta, sigma2, spec.channel.drift_rad);
}

double rms_m(const std::vector<double>& variances) {
  double acc = 0.0;
  for (double v : variances) {
    if (!std::isfinite(v)) return kNaN;
    acc += v;
  }
  return std::sqrt(acc / static_cast<double>(variances.size())) * kSpeedOfLight;
}

}  // namespace

void ExperimentSpec::validate() const {
  grid.params().validate();
  channel.validate();
  if (snr_db.empty()) throw ParameterError("snr_db must not be empty");
  for (double s : snr_db)
    if (!std::isfinite(s)) throw ParameterError("snr_db values must be finite");
  if (modes.empty()) throw ParameterError("at least one estimator mode is required");
  if (n_channel < 1 || n_noise < 1) throw ParameterError("trial counts must be >= 1");
  if (workers < 1) throw ParameterError("workers must be >= 1");
  EstimatorConfig{delta_z, delta_phi, Mode::PilotOnly}.validate(grid.params().window_samples());
  zzb.validate();
  const bool pilots = grid.count(CellState::Pilot) > 0;
  const bool data = grid.count(CellState::Data) > 0;
  for (Mode m : modes) {
    if ((m == Mode::PilotOnly || m == Mode::DecisionDirected) && !pilots)
      throw ParameterError("mode " + to_string(m) + " needs pilot cells");
    if (m == Mode::DataOnly && !data) throw ParameterError("mode data needs data cells");
    if (m == Mode::PilotPlusData && !pilots && !data)
      throw ParameterError("grid has no occupied cells");
  }
}

ModeStats summarize_errors(Mode mode, const std::vector<double>& errors_m) {
  ModeStats s;
  s.mode = mode;
  double sum = 0.0, sum2 = 0.0, sum4 = 0.0;
  for (double e : errors_m) {
    if (!std::isfinite(e)) {
      ++s.failures;
      continue;
    }
    ++s.trials;
    sum += e;
    sum2 += e * e;
    sum4 += e * e * e * e;
  }
  if (s.trials == 0) {
    s.rmse_m = s.rmse_se_m = s.bias_m = kNaN;
    return s;
  }
  const double n = static_cast<double>(s.trials);
  const double mse = sum2 / n;
  s.rmse_m = std::sqrt(mse);
  s.bias_m = sum / n;
  // Unbiased sample variance of the squared errors.
  const double var_sq = n > 1.0 ? std::max(sum4 - n * mse * mse, 0.0) / (n - 1.0) : 0.0;
  s.rmse_se_m = s.rmse_m > 0.0 ? std::sqrt(var_sq / n) / (2.0 * s.rmse_m) : 0.0;
  return s;
}

SweepResult run_sweep(const ExperimentSpec& spec) {
  spec.validate();
  const auto& params = spec.grid.params();
  const double n_a = params.window_samples();
  const double ts = params.sample_period();
  const std::size_t n_snr = spec.snr_db.size();
  const std::size_t n_ch = static_cast<std::size_t>(spec.n_channel);
  const std::size_t n_tr = static_cast<std::size_t>(spec.n_noise);
  const std::size_t n_modes = spec.modes.size();

  std::vector<std::vector<Tap>> taps(n_snr * n_ch);
  for (std::size_t s = 0; s < n_snr; ++s)
    for (std::size_t r = 0; r < n_ch; ++r)
      taps[s * n_ch + r] = draw_taps(spec.channel, derive_seed(spec.seed, kTapStream, s, r));

  const GridSearch search(spec.grid, spec.constellation, spec.delta_z, spec.delta_phi);

  std::vector<double> errors(n_snr * n_ch * n_tr * n_modes, kNaN);
  parallel_for(n_snr * n_ch * n_tr, spec.workers, [&](std::size_t task) {
    const std::size_t t = task % n_tr;
    const std::size_t r = (task / n_tr) % n_ch;
    const std::size_t s = task / (n_tr * n_ch);
    std::mt19937_64 rng(derive_seed(spec.seed, kTrialStream, s, r, t));
    std::uniform_real_distribution<double> uz(0.0, n_a), uphi(0.0, kTwoPi);
    const double z = uz(rng);
    const double phi = uphi(rng);
    const std::uint64_t payload_seed = rng();
    const std::uint64_t noise_seed = rng();
    const double sigma2 = 1.0 / db_to_linear(spec.snr_db[s]);
    const auto chan = realize(spec, taps[s * n_ch + r], {z, phi}, sigma2);
    const auto payload = generate_payload(spec.grid, spec.constellation, payload_seed);
    const auto y = apply_channel(spec.grid, payload, chan, noise_seed);
    const ChannelModel model{chan.mean_gain(), sigma2};
    double* out = errors.data() + task * n_modes;
    try {
      const auto est = search.estimate_all(y, model, spec.modes);
      for (std::size_t m = 0; m < n_modes; ++m) {
        const double e = (est[m].theta_hat.z - z) * ts * kSpeedOfLight;
        out[m] = std::isfinite(e) ? e : kNaN;
      }
    } catch (const ParameterError&) {
      throw;
    } catch (const std::runtime_error&) {
      // Counted as failures by summarize_errors.
    }
  });

  // Bounds per (snr, realization); channel truth does not enter them.
  struct BoundSet {
    std::vector<double> zzb;  // per mode
    double crlb_pilot = kNaN, mcrlb = kNaN, crlb_data = kNaN;
  };
  std::vector<BoundSet> bounds(n_snr * n_ch);
  if (spec.compute_bounds) {
    const bool any_data =
        spec.grid.count(CellState::Data) > 0 &&
        std::any_of(spec.modes.begin(), spec.modes.end(), [](Mode m) { return uses_data(m); });
    std::shared_ptr<const MomentTable> table;
    if (any_data) table = std::make_shared<MomentTable>(spec.constellation, spec.zzb.gh_order);
    parallel_for(n_snr * n_ch, spec.workers, [&](std::size_t task) {
      const std::size_t s = task / n_ch;
      const double sigma2 = 1.0 / db_to_linear(spec.snr_db[s]);
      const auto chan = realize(spec, taps[task], {0.0, 0.0}, sigma2);
      BoundSet& b = bounds[task];
      b.zzb.assign(n_modes, kNaN);
      std::vector<std::pair<Mode, double>> done;
      for (std::size_t m = 0; m < n_modes; ++m) {
        const Mode eff = spec.modes[m] == Mode::DecisionDirected ? Mode::PilotPlusData : spec.modes[m];
        auto it = std::find_if(done.begin(), done.end(), [&](const auto& p) { return p.first == eff; });
        if (it == done.end()) {
          done.emplace_back(eff, zzb_variance(spec.grid, chan, spec.constellation, eff, spec.zzb, table).variance);
          it = std::prev(done.end());
        }
        b.zzb[m] = it->second;
      }
      auto guarded = [](auto&& f) {
        try {
          return f().variance;
        } catch (const UnboundedVarianceError&) {
          return kNaN;
        }
      };
      b.crlb_pilot = guarded([&] { return crlb_pilot(spec.grid, chan); });
      b.mcrlb = guarded([&] { return crlb_mcrlb(spec.grid, chan); });
      b.crlb_data = guarded(
          [&] { return crlb_data_exact(spec.grid, chan, spec.constellation, spec.crlb_gh_order); });
    });
  }

  SweepResult out;
  for (std::size_t s = 0; s < n_snr; ++s) {
    SnrPoint pt;
    pt.snr_db = spec.snr_db[s];
    for (std::size_t m = 0; m < n_modes; ++m) {
      std::vector<double> pooled;
      pooled.reserve(n_ch * n_tr);
      std::vector<double> zzb_var;
      for (std::size_t r = 0; r < n_ch; ++r) {
        std::vector<double> own;
        own.reserve(n_tr);
        for (std::size_t t = 0; t < n_tr; ++t)
          own.push_back(errors[((s * n_ch + r) * n_tr + t) * n_modes + m]);
        pooled.insert(pooled.end(), own.begin(), own.end());
        RealizationStats rs;
        rs.snr_db = pt.snr_db;
        rs.realization = static_cast<int>(r);
        rs.mode = spec.modes[m];
        rs.rmse_m = summarize_errors(spec.modes[m], own).rmse_m;
        if (spec.compute_bounds) {
          const double v = bounds[s * n_ch + r].zzb[m];
          rs.zzb_m = std::sqrt(v) * kSpeedOfLight;
          zzb_var.push_back(v);
        }
        out.realizations.push_back(rs);
      }
      ModeStats ms = summarize_errors(spec.modes[m], pooled);
      if (spec.compute_bounds) ms.zzb_m = rms_m(zzb_var);
      pt.modes.push_back(ms);
    }
    if (spec.compute_bounds) {
      std::vector<double> cp, mc, cd;
      for (std::size_t r = 0; r < n_ch; ++r) {
        cp.push_back(bounds[s * n_ch + r].crlb_pilot);
        mc.push_back(bounds[s * n_ch + r].mcrlb);
        cd.push_back(bounds[s * n_ch + r].crlb_data);
      }
      pt.crlb_pilot_m = rms_m(cp);
      pt.mcrlb_m = rms_m(mc);
      pt.crlb_data_m = rms_m(cd);
    }
    out.points.push_back(std::move(pt));
  }
  return out;
}

double Ccdf::at(double v) const {
  if (x.empty()) return 0.0;
  const auto it = std::upper_bound(x.begin(), x.end(), v);
  return static_cast<double>(x.end() - it) / static_cast<double>(x.size());
}

Ccdf ccdf(std::vector<double> values) {
  if (values.empty()) throw ParameterError("ccdf needs at least one value");
  for (double v : values)
    if (std::isnan(v)) throw ParameterError("ccdf input contains NaN");
  std::sort(values.begin(), values.end());
  Ccdf c;
  c.x = std::move(values);
  const double n = static_cast<double>(c.x.size());
  c.exceed.resize(c.x.size());
  for (std::size_t i = 0; i < c.x.size(); ++i) {
    const auto it = std::upper_bound(c.x.begin(), c.x.end(), c.x[i]);
    c.exceed[i] = static_cast<double>(c.x.end() - it) / n;
  }
  return c;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ParameterError("percentile needs at least one value");
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("percentile p must be in [0, 1]");
  for (double v : values)
    if (std::isnan(v)) throw ParameterError("percentile input contains NaN");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace ofdmtoa
