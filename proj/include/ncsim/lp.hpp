#pragma once

#include <string>
#include <vector>

namespace ncsim::lp {

enum class Relation { LessEq, GreaterEq, Equal };
enum class Sense { Minimize, Maximize };
enum class SolveStatus { Optimal, Infeasible, Unbounded };

struct Row {
  std::vector<double> a;  // dense over the structural variables
  Relation rel = Relation::LessEq;
  double b = 0.0;
};

// min/max c'x subject to the rows and x >= 0.
struct LinearProgram {
  int num_vars = 0;
  Sense sense = Sense::Maximize;
  std::vector<double> objective;
  std::vector<Row> rows;

  Row& add_row(Relation rel, double b);
};

struct LpSolution {
  SolveStatus status = SolveStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> x;
  // One multiplier per row. At an optimum: A'y >= c (max) / A'y <= c (min)
  // over the nonnegative orthant, y >= 0 on binding-side inequalities, and
  // b'y equals the objective. Useful as an independent optimality
  // certificate.
  std::vector<double> duals;
};

// Dense two-phase simplex. Deterministic: Dantzig pricing with Bland's rule
// as the anti-cycling fallback, smallest-index tie-breaks.
LpSolution solve_lp(const LinearProgram& lp, double tol = 1e-9);

// Max violation of rows and nonnegativity at x.
double feasibility_error(const LinearProgram& lp, const std::vector<double>& x);

// Plain-text standard-form listing for external cross-checking.
std::string dump(const LinearProgram& lp);

}  // namespace ncsim::lp
