#ifndef CELLFREE_CHANNEL_HPP
#define CELLFREE_CHANNEL_HPP

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

#include "cellfree/numerics.hpp"
#include "cellfree/rng.hpp"

namespace cellfree::channel {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Geometry {
  std::vector<Point> ap_positions;
  std::vector<Point> user_positions;
  double area_side = 0.0;
};

/// Propagation constants. Defaults are the urban macro values used for the
/// 1 km^2 deployments (1.9 GHz carrier, 15 m AP and 1.65 m user antennas).
struct PropagationParams {
  double carrier_mhz = 1900.0;
  double h_ap = 15.0;
  double h_user = 1.65;
  double d0 = 10.0;
  double d1 = 50.0;
  double sigma_sh_db = 8.0;

  friend bool operator==(const PropagationParams&, const PropagationParams&) = default;
};

struct LargeScale {
  RMatrix beta;          // M x U, linear
  RMatrix distances;     // M x U, meters
  RMatrix path_loss_db;  // M x U, deterministic part of beta in dB
};

/// Imperfect-CSI split of one small-scale realization: g_true = g_hat + g_err.
struct ChannelSet {
  CMatrix g_true;
  CMatrix g_hat;
  CMatrix g_err;
  RMatrix beta;
  double n = 1.0;
};

/// Standard-normal quantities from which a ChannelSet is built for any n.
struct SmallScale {
  CMatrix h_est;  // CN(0,1) entries
  CMatrix h_err;  // CN(0,1) entries, independent of h_est
};

inline Geometry place_nodes(std::size_t m_aps, std::size_t u_users, double area_side, Rng& rng) {
  if (m_aps == 0 || u_users == 0) throw std::invalid_argument("place_nodes: need at least one AP and one user");
  if (!(area_side > 0.0)) throw std::invalid_argument("place_nodes: area side must be positive");
  std::uniform_real_distribution<double> coord(0.0, area_side);
  Geometry g;
  g.area_side = area_side;
  g.ap_positions.resize(m_aps);
  g.user_positions.resize(u_users);
  for (auto& p : g.ap_positions) {
    p.x = coord(rng);
    p.y = coord(rng);
  }
  for (auto& p : g.user_positions) {
    p.x = coord(rng);
    p.y = coord(rng);
  }
  return g;
}

/// Hata-style constant L (dB) of the three-slope model.
inline double path_loss_constant(double carrier_mhz, double h_ap, double h_user) {
  const double lf = std::log10(carrier_mhz);
  return 46.3 + 33.9 * lf - 13.82 * std::log10(h_ap) - (1.1 * lf - 0.7) * h_user + (1.56 * lf - 0.8);
}

/// Three-slope path loss in dB (a negative number). Distances at or below d0,
/// including zero, sit on the constant floor.
inline double path_loss_db(double d, double l_db, double d0, double d1) {
  if (!(d0 > 0.0 && d0 < d1)) throw std::invalid_argument("path_loss_db: need 0 < d0 < d1");
  if (d > d1) return -l_db - 35.0 * std::log10(d);
  if (d > d0) return -l_db - 15.0 * std::log10(d1) - 20.0 * std::log10(d);
  return -l_db - 15.0 * std::log10(d1) - 20.0 * std::log10(d0);
}

/// beta = 10^((PL + sigma_sh z)/10), z ~ N(0,1) i.i.d. per link. Links with
/// d <= d1 carry no shadowing; their z is still consumed so the stream stays
/// aligned across geometries.
inline LargeScale large_scale_fading(const Geometry& geom, const PropagationParams& prop, Rng& rng) {
  const auto m = static_cast<Eigen::Index>(geom.ap_positions.size());
  const auto u = static_cast<Eigen::Index>(geom.user_positions.size());
  const double l_db = path_loss_constant(prop.carrier_mhz, prop.h_ap, prop.h_user);
  std::normal_distribution<double> normal(0.0, 1.0);

  LargeScale ls;
  ls.beta.resize(m, u);
  ls.distances.resize(m, u);
  ls.path_loss_db.resize(m, u);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index k = 0; k < u; ++k) {
      const auto& ap = geom.ap_positions[static_cast<std::size_t>(i)];
      const auto& ue = geom.user_positions[static_cast<std::size_t>(k)];
      const double d = std::hypot(ap.x - ue.x, ap.y - ue.y);
      const double pl = path_loss_db(d, l_db, prop.d0, prop.d1);
      const double z = normal(rng);
      const double shadow_db = d > prop.d1 ? prop.sigma_sh_db * z : 0.0;
      ls.distances(i, k) = d;
      ls.path_loss_db(i, k) = pl;
      ls.beta(i, k) = std::pow(10.0, (pl + shadow_db) / 10.0);
    }
  }
  return ls;
}

inline SmallScale draw_small_scale(Eigen::Index m, Eigen::Index u, Rng& rng) {
  SmallScale s;
  s.h_est.resize(m, u);
  s.h_err.resize(m, u);
  for (Eigen::Index k = 0; k < u; ++k)
    for (Eigen::Index i = 0; i < m; ++i) s.h_est(i, k) = draw_cn(rng, 1.0);
  for (Eigen::Index k = 0; k < u; ++k)
    for (Eigen::Index i = 0; i < m; ++i) s.h_err(i, k) = draw_cn(rng, 1.0);
  return s;
}

/// g_hat ~ CN(0, n beta), g_err ~ CN(0, (1-n) beta) independently, and the
/// true channel is their sum. n = 1 gives an exactly zero error matrix.
inline ChannelSet make_channel_set(const RMatrix& beta, const SmallScale& small, double n) {
  if (!(n >= 0.0 && n <= 1.0)) throw std::invalid_argument("make_channel_set: n must lie in [0, 1]");
  ChannelSet cs;
  cs.beta = beta;
  cs.n = n;
  const RMatrix est_sd = (n * beta.array()).sqrt().matrix();
  const RMatrix err_sd = ((1.0 - n) * beta.array()).sqrt().matrix();
  cs.g_hat = small.h_est.cwiseProduct(est_sd.cast<cdouble>());
  cs.g_err = small.h_err.cwiseProduct(err_sd.cast<cdouble>());
  cs.g_true = cs.g_hat + cs.g_err;
  return cs;
}

inline ChannelSet draw_channel_set(const LargeScale& ls, double n, Rng& rng) {
  if (!(n >= 0.0 && n <= 1.0)) throw std::invalid_argument("draw_channel_set: n must lie in [0, 1]");
  return make_channel_set(ls.beta, draw_small_scale(ls.beta.rows(), ls.beta.cols(), rng), n);
}

}  // namespace cellfree::channel

#endif  // CELLFREE_CHANNEL_HPP
