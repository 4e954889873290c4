#ifndef CELLFREE_SIMULATE_HPP
#define CELLFREE_SIMULATE_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cellfree/channel.hpp"
#include "cellfree/errors.hpp"
#include "cellfree/numerics.hpp"
#include "cellfree/power_alloc.hpp"
#include "cellfree/precoding.hpp"
#include "cellfree/rng.hpp"

namespace cellfree::sim {

using precoding::PrecoderKind;
using power::Scheme;

/// One precoder / power-allocation combination evaluated in a run.
struct Series {
  PrecoderKind precoder = PrecoderKind::RMMSE;
  Scheme pa = Scheme::UPA;

  friend bool operator==(const Series&, const Series&) = default;
};

struct NoiseParams {
  double t0_kelvin = 290.0;
  double k_boltzmann = 1.381e-23;
  double bandwidth_hz = 20e6;
  double noise_figure_db = 9.0;

  /// sigma_w^2 = T0 kB B NF, with NF converted to linear scale.
  double variance() const { return t0_kelvin * k_boltzmann * bandwidth_hz * std::pow(10.0, noise_figure_db / 10.0); }

  friend bool operator==(const NoiseParams&, const NoiseParams&) = default;
};

enum class Modulation { QPSK };

struct Scenario {
  std::size_t m_aps = 0;
  std::size_t u_users = 0;
  double area_side = 1000.0;
  std::vector<double> n_csi{0.99};
  std::vector<double> snr_grid_db{25.0};
  std::size_t trials = 500;
  std::uint64_t seed = 1;
  std::size_t packet_symbols = 100;
  Modulation modulation = Modulation::QPSK;
  std::vector<Series> series{{PrecoderKind::RMMSE, Scheme::UPA}};
  std::size_t iters_prec = 2;
  std::size_t iters_pa = 2;
  std::vector<double> gamma_grid{0.0, -0.25, -0.5, -0.625, -0.75, -0.875};
  double theta = -1.0;
  double eps_bisect = 1e-3;
  NoiseParams noise;
  channel::PropagationParams propagation;
  double cdf_snr_db = 20.0;
  bool write_ber = true;
  bool write_rates = false;
  bool write_cdf = false;

  double sigma_w2() const { return noise.variance(); }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Throws ValidationError naming the first offending field.
inline void validate(const Scenario& s) {
  auto fail = [](const std::string& field, const std::string& why) { throw ValidationError(field + ": " + why); };
  if (s.m_aps < 1) fail("m_aps", "must be >= 1");
  if (s.u_users < 1) fail("u_users", "must be >= 1");
  if (!(s.area_side > 0.0)) fail("area_side", "must be positive");
  if (s.n_csi.empty()) fail("n_csi", "needs at least one value");
  for (double n : s.n_csi) {
    if (!(n >= 0.0 && n <= 1.0)) fail("n_csi", "values must lie in [0, 1]");
    // With an all-zero estimate there is nothing to calibrate the SNR against.
    if (n == 0.0) fail("n_csi", "n = 0 leaves no channel estimate to precode with");
  }
  if (s.snr_grid_db.empty()) fail("snr_grid_db", "needs at least one value");
  for (double v : s.snr_grid_db)
    if (!std::isfinite(v)) fail("snr_grid_db", "values must be finite");
  if (s.trials < 1) fail("trials", "must be >= 1");
  if (s.packet_symbols < 1) fail("packet_symbols", "must be >= 1");
  if (s.series.empty()) fail("series", "needs at least one precoder:pa pair");
  if (s.iters_prec < 1) fail("iters_prec", "must be >= 1");
  if (s.iters_pa < 1) fail("iters_pa", "must be >= 1");
  if (s.gamma_grid.empty()) fail("gamma_grid", "needs at least one value");
  for (double g : s.gamma_grid)
    if (!std::isfinite(g)) fail("gamma_grid", "values must be finite");
  if (!std::isfinite(s.theta)) fail("theta", "must be finite");
  if (!(s.eps_bisect > 0.0)) fail("eps_bisect", "must be positive");
  if (!(s.noise.t0_kelvin > 0.0)) fail("noise_t0", "must be positive");
  if (!(s.noise.k_boltzmann > 0.0)) fail("noise_kb", "must be positive");
  if (!(s.noise.bandwidth_hz > 0.0)) fail("bandwidth_hz", "must be positive");
  if (!std::isfinite(s.noise.noise_figure_db)) fail("noise_figure_db", "must be finite");
  const auto& p = s.propagation;
  if (!(p.carrier_mhz > 0.0)) fail("carrier_mhz", "must be positive");
  if (!(p.h_ap > 0.0)) fail("h_ap", "must be positive");
  if (!(p.h_user > 0.0)) fail("h_user", "must be positive");
  if (!(p.d0 > 0.0 && p.d0 < p.d1)) fail("d0", "need 0 < d0 < d1");
  if (!(p.sigma_sh_db >= 0.0)) fail("sigma_sh_db", "must be non-negative");
  if ((s.write_rates || s.write_cdf) && s.n_csi.size() != 1)
    fail("n_csi", "rate and CDF outputs need a single n value");
  if (s.write_cdf && std::find(s.snr_grid_db.begin(), s.snr_grid_db.end(), s.cdf_snr_db) == s.snr_grid_db.end())
    fail("cdf_snr_db", "must be one of snr_grid_db");
}

/// rho_f such that rho_f |G_hat|_F^2 / (U sigma_w^2) equals the target SNR.
inline double snr_to_rho_f(double snr_linear, const CMatrix& g_hat, double sigma_w2, std::size_t u_users) {
  const double energy = g_hat.squaredNorm();
  if (!(energy > 0.0)) throw ZeroChannel("snr_to_rho_f: channel estimate is zero");
  return snr_linear * static_cast<double>(u_users) * sigma_w2 / energy;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// Gray-mapped unit-energy QPSK: bit pair (b0, b1) -> ((1-2 b0) + j (1-2 b1)) / sqrt(2).
inline std::vector<cdouble> modulate_qpsk(std::span<const std::uint8_t> bits) {
  if (bits.size() % 2 != 0) throw OddBitCount("modulate_qpsk: bit count must be even");
  const double a = 1.0 / std::sqrt(2.0);
  std::vector<cdouble> out(bits.size() / 2);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = {bits[2 * k] ? -a : a, bits[2 * k + 1] ? -a : a};
  }
  return out;
}

inline std::vector<std::uint8_t> demodulate_qpsk(std::span<const cdouble> symbols) {
  std::vector<std::uint8_t> bits(2 * symbols.size());
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    bits[2 * k] = symbols[k].real() < 0.0 ? 1 : 0;
    bits[2 * k + 1] = symbols[k].imag() < 0.0 ? 1 : 0;
  }
  return bits;
}

/// Effective U x U downlink map sqrt(rho_f) G^T P N.
inline CMatrix effective_channel(const CMatrix& g_true, const CMatrix& p, const RVector& eta, double rho_f) {
  return std::sqrt(rho_f) * (g_true.transpose() * p) * eta.cwiseSqrt().cast<cdouble>().asDiagonal();
}

/// AGC output f^-1 (sqrt(rho_f) G^T P N s + w) for a block of symbol vectors
/// (one column per channel use) and pre-drawn noise of matching shape.
inline CMatrix receive_block(const CMatrix& g_true, const CMatrix& p, const RVector& eta, const CMatrix& symbols,
                             double rho_f, const CMatrix& noise, double f) {
  return (effective_channel(g_true, p, eta, rho_f) * symbols + noise) / f;
}

/// Single channel use with noise w_u ~ CN(0, sigma_w2) drawn from rng.
inline CVector transmit_receive(const channel::ChannelSet& ch, const CMatrix& p, const RVector& eta, const CVector& s,
                                double rho_f, double sigma_w2, double f, Rng& rng) {
  if ((eta.array() <= 0.0).any()) throw std::invalid_argument("transmit_receive: eta must be positive");
  CMatrix w(s.size(), 1);
  for (Eigen::Index u = 0; u < s.size(); ++u) w(u, 0) = draw_cn(rng, sigma_w2);
  return receive_block(ch.g_true, p, eta, s, rho_f, w, f).col(0);
}

/// Precoder and power coefficients actually used on the air for one series.
struct Transmission {
  CMatrix p;
  RVector eta;
  double f = 1.0;
  power::SinrModel model;
  double min_sinr = 0.0;
  std::size_t non_positive_loading = 0;
  bool gamma_fallback = false;
  double gamma_reg = 0.0;
};

inline Transmission run_pipeline(const Series& series, const channel::ChannelSet& ch, const precoding::PowerParams& params,
                                 const Scenario& sc, std::vector<power::BisectionTrace>* traces = nullptr) {
  Transmission tx;
  const power::AllocationConfig alloc{series.pa, sc.eps_bisect};
  if (series.precoder == PrecoderKind::RMMSE) {
    power::Algorithm1Config cfg;
    cfg.allocation = alloc;
    cfg.iters_pa = sc.iters_pa;
    cfg.precoder.iters_prec = sc.iters_prec;
    cfg.precoder.gamma_grid = sc.gamma_grid;
    cfg.precoder.theta = sc.theta;
    auto res = power::algorithm1(ch.g_hat, ch.beta, ch.n, params, cfg);
    if (traces) traces->insert(traces->end(), res.traces.begin(), res.traces.end());
    tx.p = std::move(res.p_final);
    tx.eta = std::move(res.eta_final);
    tx.f = res.precoder.f;
    tx.non_positive_loading = res.precoder.non_positive_loading;
    tx.gamma_fallback = res.precoder.gamma_fallback;
    tx.gamma_reg = res.precoder.gamma_reg;
  } else {
    precoding::PrecoderResult pr;
    switch (series.precoder) {
      case PrecoderKind::CB: pr = precoding::conjugate_beamforming(ch.g_hat, params); break;
      case PrecoderKind::ZF: pr = precoding::zero_forcing(ch.g_hat, params); break;
      default: pr = precoding::mmse_precoder(ch.g_hat, params); break;
    }
    const auto model = power::sinr_model(ch.g_hat, pr.p, ch.beta, ch.n, params.rho_f, params.sigma_w2);
    tx.eta = power::allocate(model, alloc, traces).eta;
    tx.p = std::move(pr.p);
    tx.f = pr.f;
  }
  tx.model = power::sinr_model(ch.g_hat, tx.p, ch.beta, ch.n, params.rho_f, params.sigma_w2);
  tx.min_sinr = power::min_sinr(tx.eta, tx.model);
  return tx;
}

struct BerPoint {
  double n = 0.0;
  double snr_db = 0.0;
  Series series;
  double ber = 0.0;
  double stderr_ = 0.0;  // binomial standard error
  std::uint64_t bits = 0;
  std::uint64_t errors = 0;
};

struct RatePoint {
  double n = 0.0;
  double snr_db = 0.0;
  Series series;
  double sum_rate = 0.0;
  std::vector<double> per_user_rates;
};

struct CdfSeries {
  double n = 0.0;
  double snr_db = 0.0;
  Series series;
  std::vector<double> samples;  // trial-major, U per trial
};

struct EventCounters {
  std::uint64_t redraws = 0;
  std::uint64_t gamma_fallbacks = 0;
  std::uint64_t non_positive_loading = 0;
  std::uint64_t non_monotone_traces = 0;
  std::uint64_t bisection_calls = 0;
  double max_ap_load = 0.0;            // max over emitted eta of max_m sum_i eta_i delta_{m,i}
  double max_upa_binding_error = 0.0;  // max over UPA allocations of |max load - 1|
};

struct TraceRow {
  std::size_t trial = 0;
  double n = 0.0;
  double snr_db = 0.0;
  Series series;
  std::size_t call = 0;
  std::size_t step = 0;
  power::BisectionStep bisection;
};

struct GeometryDump {
  channel::Geometry geometry;
  RMatrix beta;
};

struct ExperimentResult {
  std::vector<BerPoint> ber_points;
  std::vector<RatePoint> rate_points;
  std::vector<CdfSeries> cdf_samples;
  EventCounters events;
  std::vector<TraceRow> traces;
  std::optional<GeometryDump> geometry;
  std::uint64_t seed = 0;
};

struct RunOptions {
  std::size_t threads = 1;
  bool collect_traces = false;
  bool dump_geometry = false;
  std::uint32_t max_attempts = 20;
};

namespace detail {

struct CellOutput {
  std::uint64_t errors = 0;
  std::vector<double> rates;  // per user
};

struct TrialOutput {
  std::vector<CellOutput> cells;  // [n][snr][series]
  EventCounters events;
  std::vector<TraceRow> traces;
  std::optional<GeometryDump> geometry;
};

inline std::size_t cell_index(const Scenario& sc, std::size_t ni, std::size_t si, std::size_t ki) {
  return (ni * sc.snr_grid_db.size() + si) * sc.series.size() + ki;
}

inline TrialOutput run_trial_attempt(const Scenario& sc, std::size_t trial, std::uint32_t attempt,
                                     const RunOptions& opt) {
  const auto m = static_cast<Eigen::Index>(sc.m_aps);
  const auto u = static_cast<Eigen::Index>(sc.u_users);
  const auto t_len = static_cast<Eigen::Index>(sc.packet_symbols);
  const double sigma_w2 = sc.sigma_w2();

  auto geo_rng = make_stream(sc.seed, trial, attempt, StreamTag::Geometry);
  auto sh_rng = make_stream(sc.seed, trial, attempt, StreamTag::Shadowing);
  auto ss_rng = make_stream(sc.seed, trial, attempt, StreamTag::SmallScale);
  auto bit_rng = make_stream(sc.seed, trial, attempt, StreamTag::Bits);
  auto noise_rng = make_stream(sc.seed, trial, attempt, StreamTag::Noise);

  const auto geom = channel::place_nodes(sc.m_aps, sc.u_users, sc.area_side, geo_rng);
  const auto ls = channel::large_scale_fading(geom, sc.propagation, sh_rng);
  const auto small = channel::draw_small_scale(m, u, ss_rng);

  // Packet: user-major bit stream, symbols column k = channel use k.
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(2 * u * t_len));
  std::bernoulli_distribution coin(0.5);
  for (auto& b : bits) b = coin(bit_rng) ? 1 : 0;
  CMatrix symbols(u, t_len);
  for (Eigen::Index k = 0; k < u; ++k) {
    const auto sym = modulate_qpsk(std::span<const std::uint8_t>(bits).subspan(
        static_cast<std::size_t>(2 * k * t_len), static_cast<std::size_t>(2 * t_len)));
    for (Eigen::Index c = 0; c < t_len; ++c) symbols(k, c) = sym[static_cast<std::size_t>(c)];
  }
  CMatrix noise(u, t_len);
  for (Eigen::Index c = 0; c < t_len; ++c)
    for (Eigen::Index k = 0; k < u; ++k) noise(k, c) = draw_cn(noise_rng, sigma_w2);

  TrialOutput out;
  out.cells.resize(sc.n_csi.size() * sc.snr_grid_db.size() * sc.series.size());
  if (opt.dump_geometry && trial == 0) out.geometry = GeometryDump{geom, ls.beta};

  for (std::size_t ni = 0; ni < sc.n_csi.size(); ++ni) {
    const auto ch = channel::make_channel_set(ls.beta, small, sc.n_csi[ni]);
    for (std::size_t si = 0; si < sc.snr_grid_db.size(); ++si) {
      const double rho_f = snr_to_rho_f(db_to_linear(sc.snr_grid_db[si]), ch.g_hat, sigma_w2, sc.u_users);
      const auto params = precoding::PowerParams::network(rho_f, m, u, sigma_w2);
      for (std::size_t ki = 0; ki < sc.series.size(); ++ki) {
        const auto& series = sc.series[ki];
        std::vector<power::BisectionTrace> traces;
        const auto tx = run_pipeline(series, ch, params, sc, &traces);
        if (!tx.p.allFinite() || !tx.eta.allFinite()) throw DegeneratePrecoder("non-finite transmission");

        auto& ev = out.events;
        ev.non_positive_loading += tx.non_positive_loading;
        ev.gamma_fallbacks += tx.gamma_fallback ? 1 : 0;
        const double load = power::ap_load(tx.eta, tx.model).maxCoeff();
        ev.max_ap_load = std::max(ev.max_ap_load, load);
        if (series.pa == Scheme::UPA) ev.max_upa_binding_error = std::max(ev.max_upa_binding_error, std::abs(load - 1.0));
        for (std::size_t c = 0; c < traces.size(); ++c) {
          ++ev.bisection_calls;
          if (!power::trace_is_monotone(traces[c])) ++ev.non_monotone_traces;
          if (opt.collect_traces) {
            for (std::size_t s = 0; s < traces[c].size(); ++s)
              out.traces.push_back({trial, sc.n_csi[ni], sc.snr_grid_db[si], series, c, s, traces[c][s]});
          }
        }

        auto& cell = out.cells[cell_index(sc, ni, si, ki)];
        const RVector sinr = power::sinr(tx.eta, tx.model);
        cell.rates.resize(sc.u_users);
        for (Eigen::Index k = 0; k < u; ++k) cell.rates[static_cast<std::size_t>(k)] = std::log2(1.0 + sinr[k]);

        const CMatrix rx = receive_block(ch.g_true, tx.p, tx.eta, symbols, rho_f, noise, tx.f);
        std::uint64_t errors = 0;
        for (Eigen::Index k = 0; k < u; ++k) {
          for (Eigen::Index c = 0; c < t_len; ++c) {
            const auto idx = static_cast<std::size_t>(2 * (k * t_len + c));
            const cdouble y = rx(k, c);
            errors += static_cast<std::uint64_t>((y.real() < 0.0 ? 1 : 0) != bits[idx]);
            errors += static_cast<std::uint64_t>((y.imag() < 0.0 ? 1 : 0) != bits[idx + 1]);
          }
        }
        cell.errors = errors;
      }
    }
  }
  return out;
}

inline TrialOutput run_trial(const Scenario& sc, std::size_t trial, const RunOptions& opt) {
  for (std::uint32_t attempt = 0;; ++attempt) {
    try {
      auto out = run_trial_attempt(sc, trial, attempt, opt);
      out.events.redraws = attempt;
      return out;
    } catch (const RealizationError&) {
      if (attempt + 1 >= opt.max_attempts) throw;
    }
  }
}

}  // namespace detail

/// Monte Carlo experiment over every (n, SNR, series) cell of the scenario.
///
/// Each trial draws geometry, shadowing, small-scale fading, a packet of bits
/// and the receiver noise from its own sub-streams; all cells of the trial
/// share them. Trials run on `threads` workers and are reduced in trial order,
/// so results do not depend on the degree of parallelism.
inline ExperimentResult run_experiment(const Scenario& sc, const RunOptions& opt = {}) {
  validate(sc);
  std::vector<detail::TrialOutput> outputs(sc.trials);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (true) {
      const std::size_t t = next.fetch_add(1);
      if (t >= sc.trials) return;
      try {
        outputs[t] = detail::run_trial(sc, t, opt);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(sc.trials);
        return;
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(opt.threads, sc.trials));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentResult res;
  res.seed = sc.seed;
  auto& ev = res.events;
  for (const auto& o : outputs) {
    ev.redraws += o.events.redraws;
    ev.gamma_fallbacks += o.events.gamma_fallbacks;
    ev.non_positive_loading += o.events.non_positive_loading;
    ev.non_monotone_traces += o.events.non_monotone_traces;
    ev.bisection_calls += o.events.bisection_calls;
    ev.max_ap_load = std::max(ev.max_ap_load, o.events.max_ap_load);
    ev.max_upa_binding_error = std::max(ev.max_upa_binding_error, o.events.max_upa_binding_error);
    res.traces.insert(res.traces.end(), o.traces.begin(), o.traces.end());
    if (o.geometry) res.geometry = o.geometry;
  }
  if (static_cast<double>(ev.redraws) > 0.01 * static_cast<double>(sc.trials)) {
    throw RunFailure("run_experiment: " + std::to_string(ev.redraws) + " redrawn realizations in " +
                     std::to_string(sc.trials) + " trials exceeds 1%");
  }

  const std::uint64_t bits_per_cell = 2ull * sc.u_users * sc.packet_symbols * sc.trials;
  for (std::size_t ni = 0; ni < sc.n_csi.size(); ++ni) {
    for (std::size_t si = 0; si < sc.snr_grid_db.size(); ++si) {
      for (std::size_t ki = 0; ki < sc.series.size(); ++ki) {
        const std::size_t idx = detail::cell_index(sc, ni, si, ki);
        BerPoint bp{sc.n_csi[ni], sc.snr_grid_db[si], sc.series[ki], 0.0, 0.0, 0, 0};
        RatePoint rp{sc.n_csi[ni], sc.snr_grid_db[si], sc.series[ki], 0.0, {}};
        rp.per_user_rates.assign(sc.u_users, 0.0);
        const bool want_cdf = sc.write_cdf && sc.snr_grid_db[si] == sc.cdf_snr_db;
        CdfSeries cdf{sc.n_csi[ni], sc.snr_grid_db[si], sc.series[ki], {}};
        for (const auto& o : outputs) {
          const auto& cell = o.cells[idx];
          bp.errors += cell.errors;
          for (std::size_t k = 0; k < sc.u_users; ++k) rp.per_user_rates[k] += cell.rates[k];
          if (want_cdf) cdf.samples.insert(cdf.samples.end(), cell.rates.begin(), cell.rates.end());
        }
        bp.bits = bits_per_cell;
        bp.ber = static_cast<double>(bp.errors) / static_cast<double>(bp.bits);
        bp.stderr_ = std::sqrt(bp.ber * (1.0 - bp.ber) / static_cast<double>(bp.bits));
        for (auto& r : rp.per_user_rates) r /= static_cast<double>(sc.trials);
        rp.sum_rate = 0.0;
        for (double r : rp.per_user_rates) rp.sum_rate += r;
        res.ber_points.push_back(bp);
        res.rate_points.push_back(std::move(rp));
        if (want_cdf) res.cdf_samples.push_back(std::move(cdf));
      }
    }
  }
  return res;
}

/// Scenario restricted to its first n value, first series and one SNR.
inline Scenario single_point(Scenario sc, double snr_db) {
  sc.snr_grid_db = {snr_db};
  sc.n_csi = {sc.n_csi.front()};
  sc.series = {sc.series.front()};
  sc.cdf_snr_db = snr_db;
  return sc;
}

inline BerPoint run_ber_point(const Scenario& sc, double snr_db, const RunOptions& opt = {}) {
  return run_experiment(single_point(sc, snr_db), opt).ber_points.front();
}

inline RatePoint run_rate_point(const Scenario& sc, double snr_db, const RunOptions& opt = {}) {
  return run_experiment(single_point(sc, snr_db), opt).rate_points.front();
}

inline std::vector<double> run_cdf(const Scenario& sc, double snr_db, const RunOptions& opt = {}) {
  auto point = single_point(sc, snr_db);
  point.write_cdf = true;
  return run_experiment(point, opt).cdf_samples.front().samples;
}

}  // namespace cellfree::sim

#endif  // CELLFREE_SIMULATE_HPP
