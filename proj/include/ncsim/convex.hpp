#pragma once

#include <string>
#include <vector>

#include "ncsim/lp.hpp"

namespace ncsim::convex {

// Sparse affine expression over the subproblem variables.
struct AffineExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  void add(int var, double coef) { terms.emplace_back(var, coef); }
  double eval(const std::vector<double>& x) const {
    double v = constant;
    for (auto& [i, c] : terms) v += c * x[i];
    return v;
  }
};

// One weighted max-of-reciprocals term: weight * max_c block_c / q_c(x).
struct ObjectiveTerm {
  double weight = 1.0;
  std::vector<std::pair<AffineExpr, double>> components;  // (q expression, block size)
};

// minimize sum_k weight_k * max_c N_c / q_{k,c}(x)
// subject to the linear region and x >= 0. Every q must be nonnegative on
// the feasible region; a term whose q cannot be made positive renders the
// instance infinite.
struct ConvexSubproblem {
  int num_vars = 0;
  std::vector<lp::Row> region;  // LessEq / GreaterEq rows only
  std::vector<ObjectiveTerm> terms;
};

struct ConvexSolution {
  enum class Status { Optimal, Infinite, Infeasible };
  Status status = Status::Infeasible;
  double objective = 0.0;
  std::vector<double> x;
  double gap = 0.0;  // certified bound on objective suboptimality
};

// Epigraph reformulation with per-term decode-speed variables u_k
// (u_k <= q_{k,c}/N_c, objective sum w_k/u_k), solved by a log-barrier
// interior-point method. Presolve pins variables that zero-capacity rows
// force to vanish, a max-min LP screens out infinite instances, and a
// second LP produces the strictly interior starting point.
ConvexSolution solve_convex(const ConvexSubproblem& sp, double rel_tol = 1e-5);

// Objective value at a candidate point (+inf when some q is nonpositive).
double objective_at(const ConvexSubproblem& sp, const std::vector<double>& x);

// Plain-text listing for external cross-checking.
std::string dump(const ConvexSubproblem& sp);

}  // namespace ncsim::convex
