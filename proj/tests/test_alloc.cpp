#include <doctest.h>

#include <algorithm>
#include <set>

#include "ofdmtoa/alloc.hpp"
#include "ofdmtoa/channel.hpp"
#include "ofdmtoa/errors.hpp"

using namespace ofdmtoa;

namespace {

OfdmParams leo_params() { return {240, 4, 240e3, 156.25e-9}; }

OfdmParams small_params() {
  OfdmParams p;
  p.K = 60;
  p.n_sym = 1;
  p.delta_f = 15e3;
  p.t_a = 6.0 / (p.K * p.delta_f);
  return p;
}

double pilot_zzb(const BlockLayout& layout, const OfdmParams& p, double snr_db) {
  const auto g = layout_to_grid(layout, p);
  const auto chan = make_flat_channel(g, 1.0, {0.0, 0.0}, 1.0 / db_to_linear(snr_db));
  return zzb_variance(g, chan, Constellation::qpsk(), Mode::PilotOnly).rmse_m;
}

}  // namespace

TEST_CASE("layout_to_grid") {
  const auto p = leo_params();
  BlockLayout l;
  l.prs_blocks = {0, 9, 19};
  const auto g = layout_to_grid(l, p);
  CHECK(g.count(CellState::Pilot) == 36);
  CHECK(g.count(CellState::Data) == 960 - 36);
  CHECK(g.count(CellState::Empty) == 0);
  for (int m = 0; m < 4; ++m)
    for (int k = 0; k < 240; ++k) {
      const bool prs_block = k / 12 == 0 || k / 12 == 9 || k / 12 == 19;
      const bool pilot = prs_block && (k % 12) % 4 == m % 4;
      CHECK((g.at(m, k).state == CellState::Pilot) == pilot);
    }

  l.prs_blocks.clear();
  for (int b = 0; b < 20; ++b) l.prs_blocks.push_back(b);
  CHECK(layout_to_grid(l, p).count(CellState::Pilot) == 4 * 240 / 4);
  l.prs_blocks.clear();
  CHECK(layout_to_grid(l, p).count(CellState::Data) == 960);

  // Same seed gives the same pilot values; a pilot shared by two layouts has one value.
  BlockLayout a, b;
  a.prs_blocks = {3};
  b.prs_blocks = {3, 7};
  const auto ga = layout_to_grid(a, p, 5), gb = layout_to_grid(b, p, 5);
  for (std::size_t f = 0; f < p.cell_count(); ++f)
    if (ga.at(f).state == CellState::Pilot) CHECK(ga.at(f).pilot == gb.at(f).pilot);
}

TEST_CASE("layout validation") {
  BlockLayout l;
  l.prs_blocks = {3, 2};
  CHECK_THROWS_AS(l.validate(), ParameterError);
  l.prs_blocks = {20};
  CHECK_THROWS_AS(l.validate(), ParameterError);
  l.prs_blocks = {1, 1};
  CHECK_THROWS_AS(l.validate(), ParameterError);
  l.prs_blocks = {0, 5};
  l.comb = 5;
  CHECK_THROWS_AS(l.validate(), ParameterError);
  l.comb = 4;
  CHECK(l.bitmask() == ((1u << 0) | (1u << 5)));
  OfdmParams p = leo_params();
  p.K = 256;
  p.t_a = 9.0 / (p.K * p.delta_f);
  CHECK_THROWS_AS(layout_to_grid(l, p), ParameterError);
}

TEST_CASE("allocation_count") {
  CHECK(allocation_count(20, 0) == 1);
  CHECK(allocation_count(20, 2) == 190);
  CHECK(allocation_count(20, 3) == 1140);
  CHECK(allocation_count(20, 4) == 4845);
  CHECK(allocation_count(20, 21) == 0);
}

TEST_CASE("more PRS blocks never raise the pilot-only bound") {
  const auto p = small_params();
  BlockLayout base;
  base.n_blocks = 5;
  base.prs_blocks = {1};
  double prev = pilot_zzb(base, p, 0.0);
  for (int b : {3, 4, 0}) {
    base.prs_blocks.push_back(b);
    std::sort(base.prs_blocks.begin(), base.prs_blocks.end());
    const double z = pilot_zzb(base, p, 0.0);
    CHECK(z <= prev * (1.0 + 1e-9));
    prev = z;
  }
}

TEST_CASE("search_allocations") {
  const auto p = small_params();
  AllocationSearch s;
  s.base.n_blocks = 5;
  s.n_prs = 2;
  s.snr_db = 0.0;
  s.top = 3;
  const auto res = search_allocations(p, s);
  REQUIRE(res.size() == 10);
  std::set<std::vector<int>> seen;
  for (std::size_t i = 0; i < res.size(); ++i) {
    seen.insert(res[i].layout.prs_blocks);
    CHECK(res[i].layout.prs_blocks.size() == 2);
    CHECK(res[i].pilot_zzb_m == doctest::Approx(pilot_zzb(res[i].layout, p, 0.0)).epsilon(1e-12));
    if (i > 0) CHECK(res[i - 1].pilot_zzb_m <= res[i].pilot_zzb_m);
    if (i < 3) {
      CHECK(res[i].pilot_plus_data_zzb_m <= res[i].pilot_zzb_m);
    } else {
      CHECK(std::isnan(res[i].pilot_plus_data_zzb_m));
    }
  }
  CHECK(seen.size() == 10);

  s.workers = 3;
  const auto again = search_allocations(p, s);
  for (std::size_t i = 0; i < res.size(); ++i) {
    CHECK(again[i].layout.prs_blocks == res[i].layout.prs_blocks);
    CHECK(again[i].pilot_zzb_m == res[i].pilot_zzb_m);
    if (i < 3) CHECK(again[i].pilot_plus_data_zzb_m == res[i].pilot_plus_data_zzb_m);
  }

  s.n_prs = 0;
  CHECK_THROWS_AS(search_allocations(p, s), ParameterError);
  s.n_prs = 6;
  CHECK_THROWS_AS(search_allocations(p, s), ParameterError);
}

TEST_CASE("optimize_pilot_positions") {
  OfdmParams p;
  p.K = 16;
  p.t_a = 4.0 / (p.K * p.delta_f);
  ZzbSettings fast;
  fast.z_step = 1.0 / 8.0;
  const auto pos = optimize_pilot_positions(p, 3, 0.0, fast, 3, 9);
  REQUIRE(pos.size() == 3);
  CHECK(std::is_sorted(pos.begin(), pos.end()));
  CHECK(std::set<int>(pos.begin(), pos.end()).size() == 3);

  auto cost = [&](const std::vector<int>& v) {
    ResourceGrid g(p);
    for (int k = 0; k < p.K; ++k) g.set_data(0, k);
    for (int k : v) g.set_pilot(0, k, {1.0, 0.0});
    const auto chan = make_flat_channel(g, 1.0, {0.0, 0.0}, 1.0);
    return zzb_variance(g, chan, Constellation::qpsk(), Mode::PilotOnly, fast).variance;
  };
  const double best = cost(pos);
  CHECK(best <= cost({0, 5, 10}) * (1.0 + 1e-12));
  // Local optimality under single exchanges.
  for (std::size_t i = 0; i < pos.size(); ++i)
    for (int k = 0; k < p.K; ++k) {
      if (std::find(pos.begin(), pos.end(), k) != pos.end()) continue;
      auto t = pos;
      t[i] = k;
      CHECK(cost(t) >= best * (1.0 - 1e-9));
    }
  CHECK(optimize_pilot_positions(p, 3, 0.0, fast, 3, 9, 2) == pos);
  CHECK_THROWS_AS(optimize_pilot_positions(p, 0, 0.0), ParameterError);
  CHECK_THROWS_AS(optimize_pilot_positions(p, 3, 0.0, fast, 0), ParameterError);
}
