#pragma once

#include <Eigen/Core>

namespace saldist::transport {

/// Exact minimum cost of the balanced transportation problem
///   min sum_ij c_ij f_ij   s.t.   sum_j f_ij = supply_i,
///                                 sum_i f_ij = demand_j,  f >= 0.
/// Supplies and demands must be strictly positive and sum to the same total
/// (within 1e-6; the demands are rescaled to balance exactly).
/// Solved with the transportation (network) simplex.
double solve(const Eigen::MatrixXd& cost, Eigen::VectorXd supply, Eigen::VectorXd demand);

/// Same problem solved by an independent route: two-phase dense tableau
/// simplex with Bland's rule. Slow but provably terminating; serves as the
/// reference for `solve` on small instances.
double solve_dense_lp(const Eigen::MatrixXd& cost, Eigen::VectorXd supply,
                      Eigen::VectorXd demand);

}  // namespace saldist::transport
