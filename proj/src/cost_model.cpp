#include "hdsa/cost_model.hpp"

#include "hdsa/types.hpp"

namespace hdsa {

void CostParams::validate() const {
  for (double v : {f, f_tilde, a_tilde, e_u, e_z, n_iter, n_adjoint, n_data, samples, q, r, l_e, l_h})
    require(v >= 0.0, "cost model: parameters must be non-negative");
}

double cost_lofi_opt(const CostParams& p) {
  p.validate();
  return p.n_iter * p.f_tilde + p.n_iter * (1.0 + 2.0 * p.n_adjoint) * p.a_tilde;
}

double cost_posterior(const CostParams& p) {
  p.validate();
  return p.n_data * p.f + (p.samples + 1.0 + 4.0 * p.r + 4.0 * p.l_h) * p.a_tilde +
         2.0 * (p.q + p.l_e) * p.e_u + (p.samples + 4.0 * p.r + 4.0 * p.l_h + 2.0 * p.n_data) * p.e_z;
}

CostParams illustrative_cost_params() {
  CostParams p;
  p.f = 100.0;
  p.f_tilde = 15.0;
  p.a_tilde = 3.0;
  p.e_u = 1.0;
  p.e_z = 1.0;
  p.n_iter = 50.0;
  p.n_adjoint = 50.0;
  p.n_data = 2.0;
  p.samples = 100.0;
  p.q = 500.0;
  p.r = 50.0;
  p.l_e = 10.0;
  p.l_h = 10.0;
  return p;
}

}  // namespace hdsa
