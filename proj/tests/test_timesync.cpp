#include <doctest.h>

#include <cmath>
#include <random>

#include "wsense/timesync.hpp"

using namespace wsense::timesync;

TEST_CASE("frequency deviation and drift") {
  CHECK(peak_freq_deviation(160e6, 2.5e-6) == doctest::Approx(400).epsilon(1e-12));
  CHECK(peak_freq_deviation(160e6, 0) == 0);
  CHECK(peak_freq_deviation(320e6, 2.5e-6) == doctest::Approx(2 * peak_freq_deviation(160e6, 2.5e-6)));
  CHECK_THROWS_AS(peak_freq_deviation(0, 1e-6), DomainError);

  CHECK(drift_per_second(160e6, 2.5e-6) == doctest::Approx(5e-6).epsilon(1e-12));
  CHECK(drift_per_second(160e6, 0) == 0);
  CHECK_THROWS_AS(drift_per_second(100, 1.0), DomainError);
}

TEST_CASE("drift matches a stepped two-clock simulation") {
  // Two oscillators at f + d_f and f - d_f, each counting cycles; the local
  // time is cycles / f. Step 1 ms for 1 s.
  const double f = 160e6, nu = 2.5e-6, df = f * nu;
  double fast_cycles = 0, slow_cycles = 0;
  for (int step = 0; step < 1000; ++step) {
    fast_cycles += (f + df) * 1e-3;
    slow_cycles += (f - df) * 1e-3;
  }
  const double divergence = (fast_cycles - slow_cycles) / f;
  CHECK(divergence == doctest::Approx(drift_per_second(f, nu) * 1.0).epsilon(1e-9));
}

TEST_CASE("sync periods") {
  CHECK(max_sync_period(500000, 250, 160e6, 2.5e-6, 1000) == doctest::Approx(0.15).epsilon(1e-9));
  CHECK(max_sync_period(100000, 250, 160e6, 2.5e-6) == doctest::Approx(1.95).epsilon(1e-9));
  CHECK(max_sync_period(500000, 250, 160e6, 2.5e-6) == doctest::Approx(0.35).epsilon(1e-9));
  CHECK(max_sync_period(100000, 10000, 160e6, 2.5e-6) == 0);
  CHECK_THROWS_AS(max_sync_period(100000, 10001, 160e6, 2.5e-6), DomainError);
  CHECK_THROWS_AS(max_sync_period(0, 0, 160e6, 2.5e-6), DomainError);

  double prev = INFINITY;
  for (double rate : {1e4, 5e4, 1e5, 2e5, 5e5, 1e6}) {
    const double p = max_sync_period(rate, 250, 160e6, 2.5e-6);
    CHECK(p < prev);
    prev = p;
  }
  prev = INFINITY;
  for (double e : {0.0, 100.0, 250.0, 1000.0, 5000.0}) {
    const double p = max_sync_period(100000, e, 160e6, 2.5e-6);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("layer error bounds") {
  CHECK(sync_error_bound_ns("firmware") == 250);
  CHECK(sync_error_bound_ns("driver") == 30000);
  CHECK(sync_error_bound_ns("dual-stack") == 120000);
  CHECK_THROWS_AS(sync_error_bound_ns("gps"), DomainError);
  CHECK(sync_layers().size() == 3);
  CHECK(kSyncPayloadBytes == 9);
}

TEST_CASE("clock model and apply_sync") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const auto c = make_clock(160e6, 2.5e-6, 250, rng);
    REQUIRE(std::abs(c.skew) <= 2.5e-6);
  }

  auto c = make_clock(160e6, 2.5e-6, 0, rng);
  c = apply_sync(c, 123456789, rng);
  CHECK(c.local_ns(123456789) == 123456789.0);

  for (int i = 0; i < 1000; ++i) {
    auto k = make_clock(160e6, 2.5e-6, 250, rng);
    const auto skew = k.skew;
    k = apply_sync(k, 5'000'000'000ull, rng);
    REQUIRE(k.skew == skew);
    REQUIRE(std::abs(k.offset_ns(5'000'000'000ull)) <= 125.0);
    const std::uint64_t later = 5'000'000'000ull + 300'000'000ull;
    REQUIRE(std::abs(k.local_ns(later) - static_cast<double>(later)) <= 250.0 + 0.3 * 2 * 2.5e-6 * 1e9);
  }
}

TEST_CASE("divergence table grows linearly from the initial error") {
  const auto rows = divergence_table(250, 160e6, 2.5e-6, 0.15, 4);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].t_s == 0);
  CHECK(rows[0].divergence_ns == 250);
  CHECK(rows[3].t_s == doctest::Approx(0.15));
  CHECK(rows[3].divergence_ns == doctest::Approx(1000));
  CHECK(rows[1].divergence_ns == doctest::Approx(500));
}

TEST_CASE("pairwise error stays within the budget at the planned period") {
  PairwiseConfig cfg;
  cfg.duration_s = 1e5;
  cfg.period_s = max_sync_period(500000, cfg.bound_ns, cfg.f, cfg.nu, 1000);
  const auto r = simulate_pairwise_error(cfg);
  CHECK(r.max_pairwise_ns <= 1000.0 + 1e-6);
  CHECK(r.max_pairwise_ns > 900.0);
  CHECK(r.syncs > 600000);

  cfg.period_s *= 2;
  CHECK(simulate_pairwise_error(cfg).max_pairwise_ns > 1000.0);

  cfg.nodes = 1;
  CHECK_THROWS_AS(simulate_pairwise_error(cfg), DomainError);
}
