#ifndef CELLFREE_PRECODING_HPP
#define CELLFREE_PRECODING_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "cellfree/errors.hpp"
#include "cellfree/numerics.hpp"
#include "cellfree/sinr_model.hpp"

namespace cellfree::precoding {

enum class PrecoderKind { CB, ZF, MMSE, RMMSE };

inline const char* to_string(PrecoderKind k) {
  switch (k) {
    case PrecoderKind::CB: return "CB";
    case PrecoderKind::ZF: return "ZF";
    case PrecoderKind::MMSE: return "MMSE";
    case PrecoderKind::RMMSE: return "RMMSE";
  }
  return "?";
}

/// Power-related scalars of one realization. Symbols are white with
/// covariance sigma_s2 * I and the noise covariance trace is U * sigma_w2.
struct PowerParams {
  double rho_f = 1.0;
  double e_tr = 1.0;
  double sigma_w2 = 1.0;
  double sigma_s2 = 1.0;
  double c_w_trace = 1.0;

  /// The usual setting E_tr = M rho_f.
  static PowerParams network(double rho_f, Eigen::Index m_aps, Eigen::Index u_users, double sigma_w2,
                             double sigma_s2 = 1.0) {
    PowerParams p;
    p.rho_f = rho_f;
    p.e_tr = static_cast<double>(m_aps) * rho_f;
    p.sigma_w2 = sigma_w2;
    p.sigma_s2 = sigma_s2;
    p.c_w_trace = static_cast<double>(u_users) * sigma_w2;
    return p;
  }
};

struct LoadingMatrix {
  RVector m_diag;
};

struct PrecoderResult {
  CMatrix p;        // final precoder (f / sqrt(rho_f)) * p_tilde * N^-1, with N = I unless assembled otherwise
  CMatrix p_tilde;  // inner precoder
  double f = 1.0;
  double gamma_reg = 0.0;
  double theta = 0.0;
  PrecoderKind kind = PrecoderKind::MMSE;

  // Iteration diagnostics (RMMSE only).
  std::vector<double> gamma_history;
  std::vector<double> step_change;  // |P~[i+1] - P~[i]|_F
  std::size_t non_positive_loading = 0;
  bool gamma_fallback = false;
};

/// Receiver normalization f = sqrt(E_tr / (sigma_s2 |P~|_F^2)).
inline double normalization_f(const CMatrix& p_tilde, double sigma_s2, double e_tr) {
  const double energy = sigma_s2 * p_tilde.squaredNorm();
  if (!(energy > 0.0)) throw ZeroPrecoder("normalization_f: precoder has zero energy");
  return std::sqrt(e_tr / energy);
}

inline PrecoderResult finish(CMatrix p_tilde, PrecoderKind kind, const PowerParams& params) {
  PrecoderResult r;
  r.kind = kind;
  r.f = normalization_f(p_tilde, params.sigma_s2, params.e_tr);
  r.p = (r.f / std::sqrt(params.rho_f)) * p_tilde;
  r.p_tilde = std::move(p_tilde);
  if (!r.p.allFinite()) throw ZeroPrecoder(std::string("non-finite ") + to_string(kind) + " precoder");
  return r;
}

inline PrecoderResult conjugate_beamforming(const CMatrix& g_hat, const PowerParams& params) {
  return finish(g_hat.conjugate(), PrecoderKind::CB, params);
}

/// P~ = G^* (G^T G^*)^-1, so that G^T P~ = I.
inline PrecoderResult zero_forcing(const CMatrix& g_hat, const PowerParams& params) {
  const Eigen::Index u = g_hat.cols();
  numerics::HermitianSystem sys{g_hat.transpose() * g_hat.conjugate(), CMatrix::Identity(u, u)};
  CMatrix gram_inv;
  try {
    gram_inv = numerics::hermitian_solve(sys);
  } catch (const IllConditioned& e) {
    throw SingularChannel(std::string("zero_forcing: ") + e.what());
  }
  return finish(g_hat.conjugate() * gram_inv, PrecoderKind::ZF, params);
}

/// Diagonal of theta * E[G~^* G~^T]: theta * sum_u (1-n) beta_{m,u}.
inline LoadingMatrix loading_matrix(const RMatrix& beta, double n, double theta) {
  if (!(n >= 0.0 && n <= 1.0)) throw std::invalid_argument("loading_matrix: n must lie in [0, 1]");
  return LoadingMatrix{theta * (1.0 - n) * beta.rowwise().sum()};
}

/// Diagonal of the generalized-loading correction
/// F = Gamma f^2 (E_tr M - f^2 tr(M P~ C_s P~^H) I) / (rho_f E_tr).
inline RVector loading_correction(const LoadingMatrix& loading, double gamma_reg, double f_prev,
                                  const CMatrix& p_tilde_prev, const PowerParams& params) {
  const RVector row_energy = p_tilde_prev.rowwise().squaredNorm();
  const double weighted = params.sigma_s2 * loading.m_diag.dot(row_energy);
  const double f2 = f_prev * f_prev;
  return (gamma_reg * f2 / (params.rho_f * params.e_tr)) *
         (params.e_tr * loading.m_diag.array() - f2 * weighted).matrix();
}

struct RmmseStep {
  CMatrix p_tilde;
  RVector f_diag;
  std::size_t non_positive_diagonal = 0;
};

/// One fixed-point update P~ = (G^* G^T + tr(C_w)/E_tr I + F)^-1 G^*, where F
/// is evaluated at the previous iterate (f_prev, P~_prev).
inline RmmseStep rmmse_step(const CMatrix& g_hat, const LoadingMatrix& loading, double gamma_reg, double f_prev,
                            const CMatrix& p_tilde_prev, const PowerParams& params) {
  if (!(f_prev > 0.0)) throw std::invalid_argument("rmmse_step: f_prev must be positive");
  const Eigen::Index m = g_hat.rows();
  if (loading.m_diag.size() != m) throw std::invalid_argument("rmmse_step: loading size mismatch");

  RmmseStep step;
  step.f_diag = gamma_reg == 0.0 ? RVector::Zero(m)
                                 : loading_correction(loading, gamma_reg, f_prev, p_tilde_prev, params);
  numerics::HermitianSystem sys{g_hat.conjugate() * g_hat.transpose(), g_hat.conjugate()};
  const double scalar_loading = params.c_w_trace / params.e_tr;
  for (Eigen::Index i = 0; i < m; ++i) {
    sys.a(i, i) = cdouble(sys.a(i, i).real() + scalar_loading + step.f_diag[i], 0.0);
    if (!(sys.a(i, i).real() > 0.0)) ++step.non_positive_diagonal;
  }
  try {
    step.p_tilde = numerics::hermitian_solve(sys);
  } catch (const IllConditioned& e) {
    throw SingularSystem(std::string("rmmse_step: ") + e.what());
  }
  return step;
}

inline PrecoderResult mmse_precoder(const CMatrix& g_hat, const PowerParams& params) {
  const LoadingMatrix none{RVector::Zero(g_hat.rows())};
  auto step = rmmse_step(g_hat, none, 0.0, 1.0, CMatrix(), params);
  return finish(std::move(step.p_tilde), PrecoderKind::MMSE, params);
}

struct RmmseConfig {
  std::size_t iters_prec = 2;
  /// Candidate multipliers of the reference loading level (see gamma_reference).
  std::vector<double> gamma_grid{0.0, -0.25, -0.5, -0.625, -0.75, -0.875};
  double theta = -1.0;
  /// Figure of merit of a candidate; empty means the UPA minimum SINR.
  std::function<double(const power::SinrModel&)> score;
};

/// Unit of the Gamma grid. With theta = -1 write M = -D, D >= 0, and let
/// d_avg = f^2 tr(D P~ C_s P~^H) / E_tr be the power-weighted mean of D. At
/// Gamma = c * gamma_reference the loaded diagonal becomes
///   tr(C_w)/E_tr * (1 + |c| (D_m / d_avg - 1))   for c <= 0,
/// i.e. c = 0 is plain MMSE and c = -1 reshapes the noise loading entirely
/// along the CSI-error profile while keeping its power-weighted mean.
/// Zero when the loading matrix vanishes (n = 1 or theta = 0).
inline double gamma_reference(const LoadingMatrix& loading, double f_prev, const CMatrix& p_tilde_prev,
                              const PowerParams& params) {
  const double weighted = params.sigma_s2 * loading.m_diag.cwiseAbs().dot(p_tilde_prev.rowwise().squaredNorm());
  if (!(weighted > 0.0)) return 0.0;
  const double f2 = f_prev * f_prev;
  return params.rho_f * params.c_w_trace / (f2 * f2 * weighted);
}

/// Scores the candidate P = (f / sqrt(rho_f)) P~ through cfg.score.
inline double candidate_score(const CMatrix& g_hat, const CMatrix& p_tilde, double f, const RMatrix& beta, double n,
                              const PowerParams& params, const RmmseConfig& cfg) {
  const CMatrix p = (f / std::sqrt(params.rho_f)) * p_tilde;
  const auto model = power::sinr_model(g_hat, p, beta, n, params.rho_f, params.sigma_w2);
  return cfg.score ? cfg.score(model) : power::upa(model).achieved_min_sinr;
}

/// Iterative RMMSE precoder: starts from MMSE and, per iteration, picks the
/// loading Gamma from the candidate grid with the best score (by default the
/// UPA minimum SINR), then refreshes P~ and f. Ties keep the earlier entry.
inline PrecoderResult rmmse_iterate(const CMatrix& g_hat, const RMatrix& beta, double n, const PowerParams& params,
                                    const RmmseConfig& cfg) {
  if (cfg.iters_prec < 1) throw std::invalid_argument("rmmse_iterate: iters_prec must be >= 1");
  PrecoderResult cur = mmse_precoder(g_hat, params);
  cur.kind = PrecoderKind::RMMSE;
  cur.theta = cfg.theta;
  const LoadingMatrix loading = loading_matrix(beta, n, cfg.theta);

  for (std::size_t it = 0; it < cfg.iters_prec; ++it) {
    const double gamma_ref = gamma_reference(loading, cur.f, cur.p_tilde, params);
    bool have = false;
    double best_score = -std::numeric_limits<double>::infinity();
    double best_gamma = 0.0;
    double best_f = cur.f;
    CMatrix best_p;
    std::size_t best_violations = 0;

    for (double c : cfg.gamma_grid) {
      const double gamma = c * gamma_ref;
      if (have && gamma == best_gamma) continue;
      try {
        auto step = rmmse_step(g_hat, loading, gamma, cur.f, cur.p_tilde, params);
        const double f = normalization_f(step.p_tilde, params.sigma_s2, params.e_tr);
        const double score = candidate_score(g_hat, step.p_tilde, f, beta, n, params, cfg);
        if (!std::isfinite(score)) continue;
        if (!have || score > best_score) {
          have = true;
          best_score = score;
          best_gamma = gamma;
          best_f = f;
          best_p = std::move(step.p_tilde);
          best_violations = step.non_positive_diagonal;
        }
      } catch (const RealizationError&) {
        // candidate rejected
      }
    }
    if (!have) {
      auto step = rmmse_step(g_hat, loading, 0.0, cur.f, cur.p_tilde, params);
      best_gamma = 0.0;
      best_f = normalization_f(step.p_tilde, params.sigma_s2, params.e_tr);
      best_p = std::move(step.p_tilde);
      best_violations = step.non_positive_diagonal;
      cur.gamma_fallback = true;
    }
    cur.step_change.push_back((best_p - cur.p_tilde).norm());
    cur.gamma_history.push_back(best_gamma);
    cur.non_positive_loading += best_violations;
    cur.p_tilde = std::move(best_p);
    cur.f = best_f;
    cur.gamma_reg = best_gamma;
  }
  cur.p = (cur.f / std::sqrt(params.rho_f)) * cur.p_tilde;
  return cur;
}

/// P = (f / sqrt(rho_f)) P~ N^-1 with N = diag(sqrt(eta)).
inline CMatrix assemble_precoder(const CMatrix& p_tilde, double f, const PowerParams& params, const RVector& eta) {
  if (eta.size() != p_tilde.cols()) throw std::invalid_argument("assemble_precoder: eta has wrong length");
  if ((eta.array() <= 0.0).any()) throw ZeroPowerEntry("assemble_precoder: power coefficient is zero");
  const RVector inv_sqrt = eta.cwiseSqrt().cwiseInverse();
  return (f / std::sqrt(params.rho_f)) * p_tilde * inv_sqrt.cast<cdouble>().asDiagonal();
}

}  // namespace cellfree::precoding

#endif  // CELLFREE_PRECODING_HPP
