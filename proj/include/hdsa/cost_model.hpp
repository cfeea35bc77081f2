#pragma once

namespace hdsa {

/// Solve-count cost model. Costs are in units of one PDE solve.
struct CostParams {
  double f = 0.0;        ///< high-fidelity forward solve
  double f_tilde = 0.0;  ///< low-fidelity forward solve
  double a_tilde = 0.0;  ///< low-fidelity adjoint solve
  double e_u = 0.0;      ///< elliptic solve in the state prior
  double e_z = 0.0;      ///< elliptic solve in the optimization-variable prior
  double n_iter = 0.0;
  double n_adjoint = 0.0;
  double n_data = 0.0;   ///< N
  double samples = 0.0;  ///< s
  double q = 0.0;
  double r = 0.0;
  double l_e = 0.0;      ///< GSVD oversampling
  double l_h = 0.0;      ///< Hessian GEVD oversampling

  void validate() const;
};

/// n_iter f~ + n_iter (1 + 2 n_adjoint) a~.
double cost_lofi_opt(const CostParams& p);

/// N f + (s + 1 + 4r + 4 l_H) a~ + 2 (q + l_E) e_u + (s + 4r + 4 l_H + 2N) e_z.
double cost_posterior(const CostParams& p);

/// The illustrative setting: f = 100, f~ = 15, a~ = 3, e_u = e_z = 1, 50 iterations with
/// 50 Hessian products each, N = 2, s = 100, q = 500, r = 50, l_E = l_H = 10.
CostParams illustrative_cost_params();

}  // namespace hdsa
