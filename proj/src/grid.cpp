#include "ofdmtoa/grid.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <stdexcept>

#include "ofdmtoa/errors.hpp"

namespace ofdmtoa {

void OfdmParams::validate() const {
  if (K < 2 || K % 2 != 0) throw ParameterError("K must be even and >= 2");
  if (n_sym < 1) throw ParameterError("n_sym must be >= 1");
  if (!(delta_f > 0.0) || !std::isfinite(delta_f)) throw ParameterError("delta_f must be > 0");
  if (!(t_a > 0.0) || !std::isfinite(t_a)) throw ParameterError("t_a must be > 0");
}

namespace {

bool contains(const std::vector<cdouble>& set, cdouble v) {
  return std::any_of(set.begin(), set.end(),
                     [&](cdouble s) { return std::abs(s - v) < 1e-9; });
}

bool invariant_under(const std::vector<cdouble>& set, cdouble rotation) {
  return std::all_of(set.begin(), set.end(),
                     [&](cdouble s) { return contains(set, s * rotation); });
}

}  // namespace

Constellation::Constellation(std::string name, std::vector<cdouble> symbols)
    : name_(std::move(name)), symbols_(std::move(symbols)) {
  if (symbols_.empty()) throw ParameterError("constellation must be nonempty");
  double power = 0.0;
  for (cdouble s : symbols_) power += std::norm(s);
  power /= static_cast<double>(symbols_.size());
  if (std::abs(power - 1.0) > 1e-12)
    throw ParameterError("constellation '" + name_ + "' does not have unit average power");
  if (invariant_under(symbols_, {0.0, 1.0}))
    rotational_order_ = 4;
  else if (invariant_under(symbols_, {-1.0, 0.0}))
    rotational_order_ = 2;
}

Constellation Constellation::qpsk() {
  const double a = 1.0 / std::sqrt(2.0);
  std::vector<cdouble> s;
  for (int b = 0; b < 4; ++b) {
    const double i = 1.0 - 2.0 * (b >> 1 & 1);
    const double q = 1.0 - 2.0 * (b & 1);
    s.emplace_back(a * i, a * q);
  }
  return Constellation("qpsk", std::move(s));
}

Constellation Constellation::qam16() {
  // Gray mapping with bit order (b0 b1 b2 b3), b0/b2 on I and b1/b3 on Q.
  const double a = 1.0 / std::sqrt(10.0);
  std::vector<cdouble> s;
  for (int b = 0; b < 16; ++b) {
    const int b0 = b >> 3 & 1, b1 = b >> 2 & 1, b2 = b >> 1 & 1, b3 = b & 1;
    const double i = (1.0 - 2.0 * b0) * (2.0 - (1.0 - 2.0 * b2));
    const double q = (1.0 - 2.0 * b1) * (2.0 - (1.0 - 2.0 * b3));
    s.emplace_back(a * i, a * q);
  }
  return Constellation("16qam", std::move(s));
}

Constellation Constellation::single(cdouble symbol) {
  return Constellation("single", {symbol});
}

Constellation Constellation::by_name(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "qpsk") return qpsk();
  if (lower == "16qam" || lower == "qam16") return qam16();
  throw ParameterError("unknown constellation '" + std::string(name) + "'");
}

std::size_t Constellation::nearest(cdouble v) const {
  std::size_t best = 0;
  double best_d = std::norm(v - symbols_[0]);
  for (std::size_t i = 1; i < symbols_.size(); ++i) {
    const double d = std::norm(v - symbols_[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

ResourceGrid::ResourceGrid(OfdmParams params) : params_(params) {
  params_.validate();
  cells_.resize(params_.cell_count());
}

std::size_t ResourceGrid::flat(int m, int k) const {
  if (m < 0 || m >= params_.n_sym || k < 0 || k >= params_.K)
    throw std::out_of_range("cell (" + std::to_string(m) + "," + std::to_string(k) +
                            ") outside grid");
  return static_cast<std::size_t>(m) * params_.K + k;
}

void ResourceGrid::set_empty(int m, int k) { cells_[flat(m, k)] = Cell{}; }

void ResourceGrid::set_pilot(int m, int k, cdouble symbol, double weight) {
  if (!(weight > 0.0)) throw ParameterError("cell weight must be > 0");
  cells_[flat(m, k)] = Cell{CellState::Pilot, symbol, weight};
}

void ResourceGrid::set_data(int m, int k, double weight) {
  if (!(weight > 0.0)) throw ParameterError("cell weight must be > 0");
  cells_[flat(m, k)] = Cell{CellState::Data, {0.0, 0.0}, weight};
}

std::vector<CellIndex> ResourceGrid::cells(CellState state) const {
  std::vector<CellIndex> out;
  for (int m = 0; m < params_.n_sym; ++m)
    for (int k = 0; k < params_.K; ++k)
      if (at(m, k).state == state) out.push_back({m, k});
  return out;
}

std::size_t ResourceGrid::count(CellState state) const {
  return static_cast<std::size_t>(std::count_if(
      cells_.begin(), cells_.end(), [&](const Cell& c) { return c.state == state; }));
}

ResourceGrid ResourceGrid::with_data_as_pilots(std::span<const cdouble> symbols) const {
  if (symbols.size() != count(CellState::Data))
    throw ParameterError("symbol count does not match data cell count");
  ResourceGrid out = *this;
  std::size_t i = 0;
  for (auto& c : out.cells_) {
    if (c.state != CellState::Data) continue;
    c.state = CellState::Pilot;
    c.pilot = symbols[i++];
  }
  return out;
}

int freq_index_map(int k, int K) {
  if (k < 0 || k >= K) throw std::out_of_range("subcarrier index out of range");
  return k < K / 2 ? k : k - K;
}

cdouble phase_ramp(const ThetaParams& theta, int k, int K) {
  const double d = freq_index_map(k, K);
  const double arg = -kTwoPi * theta.z * d / static_cast<double>(K) + theta.phi;
  return {std::cos(arg), std::sin(arg)};
}

Payload generate_payload(const ResourceGrid& grid, const Constellation& constellation,
                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, constellation.size() - 1);
  const auto n = grid.params().cell_count();
  Payload p;
  p.symbols.assign(n, cdouble{0.0, 0.0});
  p.data_index.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const Cell& c = grid.at(i);
    if (c.state == CellState::Pilot) {
      p.symbols[i] = c.pilot;
    } else if (c.state == CellState::Data) {
      const auto idx = pick(rng);
      p.symbols[i] = constellation[idx];
      p.data_index[i] = static_cast<int>(idx);
    }
  }
  return p;
}

std::vector<cdouble> qpsk_pilot_sequence(std::size_t n, std::uint64_t seed) {
  const auto q = Constellation::qpsk();
  std::mt19937_64 rng(mix64(seed ^ 0x5052535f51505348ULL));
  std::uniform_int_distribution<std::size_t> pick(0, 3);
  std::vector<cdouble> out(n);
  for (auto& v : out) v = q[pick(rng)];
  return out;
}

}  // namespace ofdmtoa
