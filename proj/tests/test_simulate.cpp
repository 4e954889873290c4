#include <gtest/gtest.h>

#include <array>

#include "cellfree/errors.hpp"
#include "cellfree/simulate.hpp"
#include "oracles.hpp"

using namespace cellfree;
using sim::Scenario;
using sim::Series;

namespace {

Scenario small_scenario() {
  Scenario s;
  s.m_aps = 16;
  s.u_users = 4;
  s.n_csi = {0.95};
  s.snr_grid_db = {0.0, 10.0, 20.0};
  s.trials = 12;
  s.packet_symbols = 50;
  s.seed = 5;
  s.series = {{sim::PrecoderKind::RMMSE, power::Scheme::OPA},
              {sim::PrecoderKind::MMSE, power::Scheme::UPA},
              {sim::PrecoderKind::ZF, power::Scheme::UPA}};
  return s;
}

}  // namespace

TEST(SnrCalibration, UnitCaseAndInverse) {
  CMatrix g = CMatrix::Ones(2, 2);  // |G|_F^2 = 4 = U sigma^2 with sigma^2 = 2
  EXPECT_DOUBLE_EQ(sim::snr_to_rho_f(1.0, g, 2.0, 2), 1.0);
  EXPECT_DOUBLE_EQ(sim::snr_to_rho_f(2.0, g, 2.0, 2), 2.0);
  const double rho = sim::snr_to_rho_f(37.5, g, 0.3, 2);
  EXPECT_NEAR(rho * g.squaredNorm() / (2 * 0.3), 37.5, 1e-12 * 37.5);
  EXPECT_THROW(sim::snr_to_rho_f(1.0, CMatrix::Zero(2, 2), 1.0, 2), ZeroChannel);
}

TEST(Qpsk, ConstellationAndRoundTrip) {
  const std::array<std::uint8_t, 8> bits{0, 0, 0, 1, 1, 1, 1, 0};
  const auto sym = sim::modulate_qpsk(bits);
  ASSERT_EQ(sym.size(), 4u);
  for (const auto& s : sym) EXPECT_NEAR(std::norm(s), 1.0, 1e-15);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) EXPECT_GT(std::abs(sym[i] - sym[j]), 1.0);
  const auto back = sim::demodulate_qpsk(sym);
  EXPECT_TRUE(std::equal(back.begin(), back.end(), bits.begin()));
  // Gray labelling: nearest neighbours differ in exactly one bit.
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t next = (i + 1) % 4;
    EXPECT_NEAR(std::abs(sym[i] - sym[next]), std::sqrt(2.0), 1e-15);
    EXPECT_EQ((bits[2 * i] != bits[2 * next]) + (bits[2 * i + 1] != bits[2 * next + 1]), 1);
  }
  const std::array<std::uint8_t, 3> odd{0, 1, 0};
  EXPECT_THROW(sim::modulate_qpsk(odd), OddBitCount);
}

TEST(Transmit, NoiselessSingleUserZf) {
  const auto r = oracle::draw(8, 1, 1.0, 20.0, 2, 0);
  const auto zf = precoding::zero_forcing(r.ch.g_hat, r.params);
  const RVector eta = RVector::Ones(1);
  CVector s(1);
  s[0] = {0.6, -0.8};
  Rng rng(1);
  const CVector y = sim::transmit_receive(r.ch, zf.p, eta, s, r.params.rho_f, 0.0, zf.f, rng);
  // sqrt(rho) G^T P~ f / sqrt(rho) / f = 1 with the identities that define f and P.
  EXPECT_NEAR(std::abs(y[0] - s[0]), 0.0, 1e-12);
  EXPECT_THROW(sim::transmit_receive(r.ch, zf.p, RVector::Zero(1), s, r.params.rho_f, 0.0, zf.f, rng),
               std::invalid_argument);
}

TEST(Transmit, NoisePassesThrough) {
  const auto r = oracle::draw(8, 2, 0.9, 20.0, 3, 0);
  const auto pr = precoding::mmse_precoder(r.ch.g_hat, r.params);
  Rng rng(4);
  const CVector s = CVector::Zero(2);
  double power = 0.0;
  const int reps = 20000;
  for (int k = 0; k < reps; ++k)
    power += sim::transmit_receive(r.ch, pr.p, RVector::Ones(2), s, r.params.rho_f, 2.0, 1.0, rng).squaredNorm();
  EXPECT_NEAR(power / (2.0 * reps), 2.0, 0.05);
}

TEST(Validation, RejectsBadScenarios) {
  auto expect_field = [](Scenario s, const std::string& field) {
    try {
      sim::validate(s);
      ADD_FAILURE() << "accepted invalid " << field;
    } catch (const ValidationError& e) {
      EXPECT_EQ(std::string(e.what()).rfind(field + ":", 0), 0u) << e.what();
    }
  };
  auto base = small_scenario();
  EXPECT_NO_THROW(sim::validate(base));
  auto s = base;
  s.trials = 0;
  expect_field(s, "trials");
  s = base;
  s.packet_symbols = 0;
  expect_field(s, "packet_symbols");
  s = base;
  s.snr_grid_db.clear();
  expect_field(s, "snr_grid_db");
  s = base;
  s.n_csi = {1.5};
  expect_field(s, "n_csi");
  s = base;
  s.n_csi = {0.0};
  expect_field(s, "n_csi");
  s = base;
  s.m_aps = 0;
  expect_field(s, "m_aps");
  s = base;
  s.eps_bisect = 0.0;
  expect_field(s, "eps_bisect");
  s = base;
  s.write_cdf = true;
  s.cdf_snr_db = 5.0;
  expect_field(s, "cdf_snr_db");
  s = base;
  s.write_rates = true;
  s.n_csi = {0.9, 0.99};
  expect_field(s, "n_csi");
}

TEST(Experiment, InvariantsOfTheResult) {
  auto sc = small_scenario();
  sc.write_cdf = true;
  sc.cdf_snr_db = 10.0;
  const auto res = sim::run_experiment(sc);
  ASSERT_EQ(res.ber_points.size(), 9u);
  ASSERT_EQ(res.rate_points.size(), 9u);
  ASSERT_EQ(res.cdf_samples.size(), 3u);
  for (const auto& bp : res.ber_points) {
    EXPECT_GE(bp.ber, 0.0);
    EXPECT_LE(bp.ber, 0.5);
    EXPECT_EQ(bp.bits, 2u * 4u * 50u * 12u);
  }
  for (const auto& rp : res.rate_points) {
    double sum = 0.0;
    for (double r : rp.per_user_rates) sum += r;
    EXPECT_NEAR(rp.sum_rate, sum, 1e-12 * std::max(1.0, sum));
  }
  for (const auto& c : res.cdf_samples) {
    EXPECT_EQ(c.samples.size(), 12u * 4u);
    for (double v : c.samples) EXPECT_GE(v, 0.0);
  }
  EXPECT_LE(res.events.max_ap_load, 1.0 + 1e-9);
  EXPECT_LE(res.events.max_upa_binding_error, 1e-12);
  EXPECT_EQ(res.events.non_monotone_traces, 0u);
}

TEST(Experiment, IndependentOfThreadCount) {
  const auto sc = small_scenario();
  const auto a = sim::run_experiment(sc, {1, false, false, 20});
  const auto b = sim::run_experiment(sc, {3, false, false, 20});
  ASSERT_EQ(a.ber_points.size(), b.ber_points.size());
  for (std::size_t i = 0; i < a.ber_points.size(); ++i) {
    EXPECT_EQ(a.ber_points[i].errors, b.ber_points[i].errors);
    EXPECT_EQ(a.rate_points[i].per_user_rates, b.rate_points[i].per_user_rates);
  }
}

TEST(Experiment, PerfectCsiRmmseMatchesMmse) {
  auto sc = small_scenario();
  sc.n_csi = {1.0};
  sc.series = {{sim::PrecoderKind::RMMSE, power::Scheme::UPA}, {sim::PrecoderKind::MMSE, power::Scheme::UPA}};
  sc.write_cdf = true;
  sc.cdf_snr_db = 20.0;
  const auto res = sim::run_experiment(sc);
  for (std::size_t si = 0; si < 3; ++si) EXPECT_EQ(res.ber_points[2 * si].errors, res.ber_points[2 * si + 1].errors);
  ASSERT_EQ(res.cdf_samples.size(), 2u);
  for (std::size_t k = 0; k < res.cdf_samples[0].samples.size(); ++k)
    EXPECT_NEAR(res.cdf_samples[0].samples[k], res.cdf_samples[1].samples[k], 1e-9);
}

TEST(Experiment, ErrorFreeAtHighSnrWithPerfectCsi) {
  auto sc = small_scenario();
  sc.n_csi = {1.0};
  sc.snr_grid_db = {60.0};
  sc.series = {{sim::PrecoderKind::ZF, power::Scheme::UPA}, {sim::PrecoderKind::MMSE, power::Scheme::UPA}};
  for (const auto& bp : sim::run_experiment(sc).ber_points) EXPECT_EQ(bp.errors, 0u);
}

TEST(Experiment, BerDoesNotRiseWithSnr) {
  auto sc = small_scenario();
  sc.snr_grid_db = {-5.0, 0.0, 5.0, 10.0};
  const auto res = sim::run_experiment(sc);
  for (std::size_t k = 0; k < sc.series.size(); ++k)
    for (std::size_t si = 1; si < sc.snr_grid_db.size(); ++si) {
      const auto& lo = res.ber_points[(si - 1) * sc.series.size() + k];
      const auto& hi = res.ber_points[si * sc.series.size() + k];
      EXPECT_LE(hi.ber, lo.ber + 2.0 * std::max(lo.stderr_, hi.stderr_)) << k << " " << si;
    }
}

TEST(Experiment, SingleUserRateGainsOneBitPerThreeDb) {
  Scenario sc;
  sc.m_aps = 8;
  sc.u_users = 1;
  sc.n_csi = {1.0};
  sc.snr_grid_db = {40.0, 10.0 * std::log10(2.0) + 40.0};
  sc.trials = 4;
  sc.series = {{sim::PrecoderKind::ZF, power::Scheme::UPA}};
  const auto res = sim::run_experiment(sc);
  EXPECT_NEAR(res.rate_points[1].sum_rate - res.rate_points[0].sum_rate, 1.0, 1e-3);
}

TEST(Experiment, SinglePointHelpers) {
  auto sc = small_scenario();
  const auto bp = sim::run_ber_point(sc, 10.0);
  const auto full = sim::run_experiment(sc);
  EXPECT_EQ(bp.errors, full.ber_points[3].errors);
  const auto rp = sim::run_rate_point(sc, 10.0);
  EXPECT_EQ(rp.per_user_rates, full.rate_points[3].per_user_rates);
  EXPECT_EQ(sim::run_cdf(sc, 10.0).size(), sc.trials * sc.u_users);
}
