#ifndef CELLFREE_SINR_MODEL_HPP
#define CELLFREE_SINR_MODEL_HPP

#include <algorithm>
#include <stdexcept>

#include "cellfree/errors.hpp"
#include "cellfree/numerics.hpp"

namespace cellfree::power {

enum class Scheme { UPA, OPA };

/// Per-realization coefficients of the downlink SINR. With these, SINR(eta)
/// is a ratio of two affine functions of eta and costs O(U^2) to evaluate.
struct SinrModel {
  RVector psi;        // desired-signal gains |g_hat_u^T p_u|^2
  RMatrix phi;        // U x U inter-user gains |g_hat_u^T p_i|^2, zero diagonal
  RMatrix gamma_err;  // U x U CSI-error leakage sum_m (1-n) beta_{m,u} |p_{m,i}|^2
  RMatrix delta;      // M x U entry powers |p_{m,i}|^2
  double rho_f = 0.0;
  double sigma_w2 = 0.0;

  Eigen::Index users() const { return psi.size(); }
};

struct PowerCoefficients {
  RVector eta;
  double achieved_min_sinr = 0.0;
  Scheme scheme = Scheme::UPA;
};

inline SinrModel sinr_model(const CMatrix& g_hat, const CMatrix& p, const RMatrix& beta, double n, double rho_f,
                            double sigma_w2) {
  if (g_hat.rows() != p.rows() || g_hat.cols() != p.cols() || beta.rows() != p.rows() || beta.cols() != p.cols()) {
    throw std::invalid_argument("sinr_model: dimension mismatch");
  }
  SinrModel model;
  const CMatrix h = g_hat.transpose() * p;  // h(u, i) = g_hat_u^T p_i
  const RMatrix gain = h.cwiseAbs2();
  model.psi = gain.diagonal();
  model.phi = gain;
  model.phi.diagonal().setZero();
  model.delta = p.cwiseAbs2();
  model.gamma_err = (1.0 - n) * beta.transpose() * model.delta;
  model.rho_f = rho_f;
  model.sigma_w2 = sigma_w2;
  return model;
}

inline RVector sinr(const RVector& eta, const SinrModel& model) {
  if (eta.size() != model.users()) throw std::invalid_argument("sinr: eta has wrong length");
  const RVector interference = model.phi * eta + model.gamma_err * eta;
  RVector out(eta.size());
  for (Eigen::Index u = 0; u < eta.size(); ++u) {
    const double num = model.rho_f * eta[u] * model.psi[u];
    const double den = model.sigma_w2 + model.rho_f * interference[u];
    out[u] = num / den;
  }
  return out;
}

inline double min_sinr(const RVector& eta, const SinrModel& model) { return sinr(eta, model).minCoeff(); }

/// Per-AP load sum_i eta_i delta_{m,i}.
inline RVector ap_load(const RVector& eta, const SinrModel& model) { return model.delta * eta; }

/// Equal coefficients scaled so the most loaded AP transmits at full power.
inline PowerCoefficients upa(const SinrModel& model) {
  const double worst = model.delta.rowwise().sum().maxCoeff();
  if (!(worst > 0.0)) throw DegeneratePrecoder("upa: precoder has no energy on any AP");
  PowerCoefficients pc;
  pc.scheme = Scheme::UPA;
  pc.eta = RVector::Constant(model.users(), 1.0 / worst);
  pc.achieved_min_sinr = min_sinr(pc.eta, model);
  return pc;
}

}  // namespace cellfree::power

#endif  // CELLFREE_SINR_MODEL_HPP
