#ifndef CELLFREE_POWER_ALLOC_HPP
#define CELLFREE_POWER_ALLOC_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cellfree/errors.hpp"
#include "cellfree/numerics.hpp"
#include "cellfree/precoding.hpp"
#include "cellfree/sinr_model.hpp"

namespace cellfree::power {

inline const char* to_string(Scheme s) { return s == Scheme::UPA ? "UPA" : "OPA"; }

struct FeasibilityOutcome {
  bool feasible = false;
  std::optional<RVector> eta;
};

/// Linear form of { eta >= 0 : SINR_u(eta) >= t for all u, delta eta <= 1 }.
///
/// Each user's variable is expressed in units of its single-user ceiling
/// 1 / max_m delta_{m,u}, and SINR rows are divided by the noise power, so all
/// coefficients are O(1)..O(SNR). Returns the problem and the column scaling.
inline std::pair<numerics::LinearFeasibilityProblem, RVector> feasibility_problem(double t, const SinrModel& model) {
  const Eigen::Index u = model.users();
  const Eigen::Index m = model.delta.rows();
  RVector scale(u);
  for (Eigen::Index i = 0; i < u; ++i) {
    const double peak = model.delta.col(i).maxCoeff();
    scale[i] = peak > 0.0 ? 1.0 / peak : 1.0;
  }
  numerics::LinearFeasibilityProblem prob;
  prob.a_ub.resize(u + m, u);
  prob.b_ub.resize(u + m);
  const double g = model.rho_f / model.sigma_w2;
  for (Eigen::Index r = 0; r < u; ++r) {
    for (Eigen::Index i = 0; i < u; ++i) {
      const double leak = (i == r ? 0.0 : model.phi(r, i)) + model.gamma_err(r, i);
      double coef = t * g * leak;
      if (i == r) coef -= g * model.psi[r];
      prob.a_ub(r, i) = coef * scale[i];
    }
    prob.b_ub[r] = -t;
  }
  prob.a_ub.bottomRows(m) = model.delta * scale.asDiagonal();
  prob.b_ub.tail(m).setOnes();
  return {std::move(prob), std::move(scale)};
}

/// Decides whether the common SINR target t is reachable under the per-AP
/// constraints. SolverFailure propagates; it is never reported as infeasible.
///
/// With `fill` the witness additionally maximizes the summed surplus of the
/// SINR rows, sum_u (rho_f eta_u psi_u - t (sigma_w2 + rho_f I_u(eta))) / sigma_w2.
inline FeasibilityOutcome feasibility(double t, const SinrModel& model, bool fill = false) {
  if (!(t >= 0.0)) throw std::invalid_argument("feasibility: target must be non-negative");
  FeasibilityOutcome out;
  if (t == 0.0 && !fill) {
    out.feasible = true;
    out.eta = RVector::Zero(model.users());
    return out;
  }
  auto [prob, scale] = feasibility_problem(t, model);
  std::optional<RVector> objective;
  if (fill) objective = RVector(-prob.a_ub.topRows(model.users()).colwise().sum().transpose());
  const auto res = numerics::lp_feasible(prob, objective);
  out.feasible = res.feasible;
  if (res.feasible) out.eta = scale.cwiseProduct(*res.witness);
  return out;
}

/// Upper bound on the max-min SINR: every user alone at its single-user
/// ceiling eta_u^max = 1 / max_m delta_{m,u}, free of any interference.
inline double single_user_bound(const SinrModel& model) {
  double bound = std::numeric_limits<double>::infinity();
  for (Eigen::Index u = 0; u < model.users(); ++u) {
    const double peak = model.delta.col(u).maxCoeff();
    if (!(peak > 0.0)) return 0.0;
    bound = std::min(bound, model.rho_f * model.psi[u] / (peak * model.sigma_w2));
  }
  return bound;
}

struct BisectionStep {
  double t_b = 0.0;
  double t_e = 0.0;
  double t = 0.0;
  bool feasible = false;
};

struct OpaResult {
  PowerCoefficients coefficients;
  std::vector<BisectionStep> trace;
  double t_b = 0.0;  // final bracket
  double t_e = 0.0;
  double tolerance = 0.0;
};

/// Number of halvings needed to shrink a bracket of width `width` below `tol`.
inline std::size_t bisection_steps(double width, double tol) {
  if (!(width >= tol)) return 0;
  return static_cast<std::size_t>(std::ceil(std::log2(width / tol)));
}

/// Max-min power allocation by bisection on the common SINR target.
///
/// The bracket starts at [0, t_hi] where t_hi defaults to single_user_bound()
/// when t_hi_init <= 0 and is doubled while it is still feasible. Bisection
/// runs until t_e - t_b < eps * t_hi. Among the points reaching the final t_b
/// the returned eta maximizes the total SINR surplus over that target, so users
/// that are not the bottleneck keep what the APs can still give them.
inline OpaResult opa_bisection(const SinrModel& model, double t_hi_init, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("opa_bisection: eps must be positive");
  OpaResult out;
  double t_b = 0.0;
  double t_e = t_hi_init > 0.0 ? t_hi_init : single_user_bound(model);
  if (!(t_e > 0.0)) throw DegeneratePrecoder("opa_bisection: no user receives any signal");
  std::optional<RVector> witness;

  for (int guard = 0; guard < 64; ++guard) {
    const auto at_top = feasibility(t_e, model);
    if (!at_top.feasible) break;
    out.trace.push_back({t_b, t_e, t_e, true});
    t_b = t_e;
    witness = at_top.eta;
    t_e *= 2.0;
  }

  out.tolerance = eps * t_e;
  const std::size_t steps = bisection_steps(t_e - t_b, out.tolerance);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = 0.5 * (t_b + t_e);
    const auto res = feasibility(t, model);
    out.trace.push_back({t_b, t_e, t, res.feasible});
    if (res.feasible) {
      t_b = t;
      witness = res.eta;
    } else {
      t_e = t;
    }
  }

  if (t_b > 0.0) {
    const auto filled = feasibility(t_b, model, true);
    if (filled.feasible) witness = filled.eta;
  }
  RVector eta = witness ? *witness : upa(model).eta;
  const double load = ap_load(eta, model).maxCoeff();
  if (load > 0.0) eta /= load;
  out.t_b = t_b;
  out.t_e = t_e;
  out.coefficients.scheme = Scheme::OPA;
  out.coefficients.eta = std::move(eta);
  out.coefficients.achieved_min_sinr = min_sinr(out.coefficients.eta, model);
  return out;
}

struct AllocationConfig {
  Scheme scheme = Scheme::UPA;
  double eps = 1e-3;
};

using BisectionTrace = std::vector<BisectionStep>;

/// True when every feasible target of the trace lies below every infeasible one.
inline bool trace_is_monotone(const BisectionTrace& trace) {
  double max_feasible = -std::numeric_limits<double>::infinity();
  double min_infeasible = std::numeric_limits<double>::infinity();
  for (const auto& s : trace) {
    if (s.feasible) max_feasible = std::max(max_feasible, s.t);
    else min_infeasible = std::min(min_infeasible, s.t);
  }
  return max_feasible < min_infeasible;
}

inline PowerCoefficients allocate(const SinrModel& model, const AllocationConfig& cfg,
                                  std::vector<BisectionTrace>* traces = nullptr) {
  if (cfg.scheme == Scheme::UPA) return upa(model);
  auto res = opa_bisection(model, 0.0, cfg.eps);
  if (traces) traces->push_back(std::move(res.trace));
  return std::move(res.coefficients);
}

struct Algorithm1Config {
  AllocationConfig allocation;
  precoding::RmmseConfig precoder;
  std::size_t iters_pa = 2;
};

struct Algorithm1Result {
  CMatrix p_final;     // P_RMMSE[j] of the last power-allocation iteration
  RVector eta_final;   // diagonal of N_RMMSE^2 = N[j+1]
  precoding::PrecoderResult precoder;
  SinrModel final_model;
  double final_min_sinr = 0.0;
  std::vector<double> min_sinr_history;  // one entry per power-allocation iteration
  std::vector<BisectionTrace> traces;  // one per OPA call, MMSE initialization first
};

/// Iterative RMMSE precoding with alternating power allocation. The MMSE
/// precoder with the same allocation scheme provides N[1]; the returned
/// precoder and power matrix come from different iterations and do not cancel.
inline Algorithm1Result algorithm1(const CMatrix& g_hat, const RMatrix& beta, double n,
                                   const precoding::PowerParams& params, const Algorithm1Config& cfg) {
  if (cfg.iters_pa < 1) throw std::invalid_argument("algorithm1: iters_pa must be >= 1");
  Algorithm1Result out;

  const auto mmse = precoding::mmse_precoder(g_hat, params);
  const auto mmse_model = sinr_model(g_hat, mmse.p, beta, n, params.rho_f, params.sigma_w2);
  RVector eta = allocate(mmse_model, cfg.allocation, &out.traces).eta;

  out.precoder = precoding::rmmse_iterate(g_hat, beta, n, params, cfg.precoder);
  for (std::size_t j = 0; j < cfg.iters_pa; ++j) {
    if ((eta.array() <= 0.0).any()) throw DegeneratePrecoder("algorithm1: zero power coefficient");
    out.p_final = precoding::assemble_precoder(out.precoder.p_tilde, out.precoder.f, params, eta);
    out.final_model = sinr_model(g_hat, out.p_final, beta, n, params.rho_f, params.sigma_w2);
    const auto pc = allocate(out.final_model, cfg.allocation, &out.traces);
    eta = pc.eta;
    out.min_sinr_history.push_back(pc.achieved_min_sinr);
  }
  out.eta_final = std::move(eta);
  out.final_min_sinr = out.min_sinr_history.back();
  return out;
}

}  // namespace cellfree::power

#endif  // CELLFREE_POWER_ALLOC_HPP
