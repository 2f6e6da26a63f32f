#include "ncsim/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace ncsim::lp {

Row& LinearProgram::add_row(Relation rel, double b) {
  rows.push_back(Row{std::vector<double>(num_vars, 0.0), rel, b});
  return rows.back();
}

namespace {

constexpr double kEps = 1e-9;

struct Tableau {
  int m = 0;            // rows
  int n = 0;            // structural vars
  int cols = 0;         // structural + slacks + artificials
  int slack_begin = 0;  // first slack column
  int art_begin = 0;    // first artificial column
  std::vector<double> t;  // (m+1) x (cols+1); last row = reduced costs, last col = rhs
  std::vector<int> basis;
  std::vector<bool> flipped;  // original row negated to make b >= 0

  double& at(int r, int c) { return t[static_cast<size_t>(r) * (cols + 1) + c]; }
  double at(int r, int c) const { return t[static_cast<size_t>(r) * (cols + 1) + c]; }
  double& rhs(int r) { return at(r, cols); }
  double& cost(int c) { return at(m, c); }

  void pivot(int pr, int pc) {
    const double pv = at(pr, pc);
    const double inv = 1.0 / pv;
    for (int c = 0; c <= cols; ++c) at(pr, c) *= inv;
    at(pr, pc) = 1.0;
    for (int r = 0; r <= m; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (int c = 0; c <= cols; ++c) at(r, c) -= f * at(pr, c);
      at(r, pc) = 0.0;
    }
    basis[pr] = pc;
  }

  // Returns false on unboundedness. Two-pass ratio test: the first pass
  // finds the tightest ratio, the second picks the numerically largest
  // pivot among the near-ties, so degenerate rows cannot force a pivot on a
  // noise-level element.
  bool iterate(const std::vector<bool>& barred, bool force_bland) {
    std::vector<bool> blocked(cols, false);
    long iter = 0;
    const long bland_after = force_bland ? 0 : 3L * (m + cols) + 50;
    const long max_iter = 1000L * (m + cols) + 50000;
    while (true) {
      if (++iter > max_iter) throw std::runtime_error("simplex: iteration limit");
      const bool bland = iter > bland_after;
      int pc = -1;
      double best = -kEps;
      for (int c = 0; c < cols; ++c) {
        if (barred[c] || blocked[c]) continue;
        const double rc = cost(c);
        if (rc < -kEps) {
          if (bland) {
            pc = c;
            break;
          }
          if (rc < best) {
            best = rc;
            pc = c;
          }
        }
      }
      if (pc < 0) return true;  // optimal
      // ratio test over pivots above the stability floor, with basic values
      // clamped at zero so degenerate drift cannot produce negative ratios
      constexpr double kPivotFloor = 1e-7;
      double theta = -1.0;
      for (int r = 0; r < m; ++r) {
        const double a = at(r, pc);
        if (a <= kPivotFloor) continue;
        const double ratio = std::max(rhs(r), 0.0) / a;
        if (theta < 0.0 || ratio < theta) theta = ratio;
      }
      if (theta < 0.0) {
        // no stable pivot: a genuine improving ray has no positive entry at
        // all; otherwise the column only offers noise-level pivots and must
        // sit out
        bool any_positive = false;
        for (int r = 0; r < m; ++r) any_positive |= at(r, pc) > kEps;
        if (!any_positive) return false;
        blocked[pc] = true;
        continue;
      }
      int pr = -1;
      const double bound = theta + 1e-9 * (1.0 + theta);
      for (int r = 0; r < m; ++r) {
        const double a = at(r, pc);
        if (a <= kPivotFloor) continue;
        if (std::max(rhs(r), 0.0) / a > bound) continue;
        if (pr < 0) {
          pr = r;
          continue;
        }
        const bool take = bland ? basis[r] < basis[pr] : a > at(pr, pc);
        if (take) pr = r;
      }
      pivot(pr, pc);
    }
  }
};

}  // namespace

namespace {
LpSolution solve_once(const LinearProgram& lp, double tol, bool force_bland);
}

LpSolution solve_lp(const LinearProgram& lp, double tol) {
  LpSolution sol = solve_once(lp, tol, false);
  if (sol.status == SolveStatus::Optimal && feasibility_error(lp, sol.x) > 1e-6) {
    // numerically degraded basis: retry with the conservative pivot rule
    sol = solve_once(lp, tol, true);
    if (feasibility_error(lp, sol.x) > 1e-5) {
      if (getenv("NCSIM_LP_VERBOSE")) {
        fprintf(stderr, "solve_lp: status=%d obj=%.9f err=%.3e\n", int(sol.status), sol.objective,
                feasibility_error(lp, sol.x));
        for (size_t r = 0; r < lp.rows.size(); ++r) {
          double lhs = 0.0;
          for (int c2 = 0; c2 < lp.num_vars; ++c2) lhs += lp.rows[r].a[c2] * sol.x[c2];
          const auto& row = lp.rows[r];
          double excess = row.rel == Relation::LessEq ? lhs - row.b
                          : row.rel == Relation::GreaterEq ? row.b - lhs : std::abs(lhs - row.b);
          if (excess > 1e-7) fprintf(stderr, "  row %zu violated by %.6e\n", r, excess);
        }
        for (int c2 = 0; c2 < lp.num_vars; ++c2)
          if (sol.x[c2] < -1e-9 || sol.x[c2] > 1e6) fprintf(stderr, "  x[%d] = %.6e\n", c2, sol.x[c2]);
      }
      if (getenv("NCSIM_DUMP_BAD_LP")) {
        FILE* f = fopen("/tmp/bad_lp2.txt", "w");
        fprintf(f, "%d %zu\n", lp.num_vars, lp.rows.size());
        fprintf(f, "%d\n", lp.sense == Sense::Maximize ? 1 : 0);
        for (double c : lp.objective) fprintf(f, "%.17g ", c);
        fprintf(f, "\n");
        for (auto& row : lp.rows) {
          fprintf(f, "%d %.17g", int(row.rel), row.b);
          for (double a : row.a) fprintf(f, " %.17g", a);
          fprintf(f, "\n");
        }
        fclose(f);
      }
      throw std::runtime_error("simplex: residual check failed");
    }
  }
  return sol;
}

namespace {
LpSolution solve_once(const LinearProgram& lp, double tol, bool force_bland) {
  const int m = static_cast<int>(lp.rows.size());
  const int n = lp.num_vars;
  if (static_cast<int>(lp.objective.size()) != n) throw std::invalid_argument("lp: objective size mismatch");
  for (const Row& row : lp.rows)
    if (static_cast<int>(row.a.size()) != n) throw std::invalid_argument("lp: row size mismatch");
  for (double c : lp.objective)
    if (!std::isfinite(c)) throw std::invalid_argument("lp: non-finite objective");

  Tableau tb;
  tb.m = m;
  tb.n = n;
  tb.slack_begin = n;
  tb.art_begin = n + m;
  tb.cols = n + 2 * m;
  tb.t.assign(static_cast<size_t>(m + 1) * (tb.cols + 1), 0.0);
  tb.basis.assign(m, -1);
  tb.flipped.assign(m, false);

  for (int r = 0; r < m; ++r) {
    const Row& row = lp.rows[r];
    if (!std::isfinite(row.b)) throw std::invalid_argument("lp: non-finite rhs");
    double sign = 1.0;
    Relation rel = row.rel;
    if (row.b < 0) {
      sign = -1.0;
      tb.flipped[r] = true;
      rel = (rel == Relation::LessEq) ? Relation::GreaterEq : (rel == Relation::GreaterEq ? Relation::LessEq : Relation::Equal);
    }
    for (int c = 0; c < n; ++c) {
      if (!std::isfinite(row.a[c])) throw std::invalid_argument("lp: non-finite coefficient");
      tb.at(r, c) = sign * row.a[c];
    }
    tb.rhs(r) = sign * row.b;
    if (rel == Relation::LessEq) tb.at(r, tb.slack_begin + r) = 1.0;
    else if (rel == Relation::GreaterEq) tb.at(r, tb.slack_begin + r) = -1.0;
    tb.at(r, tb.art_begin + r) = 1.0;
    tb.basis[r] = tb.art_begin + r;
  }

  std::vector<bool> barred(tb.cols, false);

  // Phase 1: drive the artificial variables to zero.
  for (int c = 0; c <= tb.cols; ++c) tb.cost(c) = 0.0;
  for (int r = 0; r < m; ++r) tb.cost(tb.art_begin + r) = 1.0;
  for (int r = 0; r < m; ++r)
    for (int c = 0; c <= tb.cols; ++c) tb.cost(c) -= tb.at(r, c);  // price out the basic artificials

  LpSolution sol;
  if (!tb.iterate(barred, force_bland)) throw std::runtime_error("simplex: phase 1 unbounded");
  const double phase1 = -tb.rhs(m);
  if (phase1 > 1e-7) {
    sol.status = SolveStatus::Infeasible;
    return sol;
  }

  // Pivot leftover basic artificials out where possible.
  for (int r = 0; r < m; ++r) {
    if (tb.basis[r] < tb.art_begin) continue;
    int pc = -1;
    for (int c = 0; c < tb.art_begin; ++c)
      if (std::abs(tb.at(r, c)) > 1e-7) {
        pc = c;
        break;
      }
    if (pc >= 0) tb.pivot(r, pc);
    // else: redundant row; the artificial stays basic at zero.
  }
  for (int c = tb.art_begin; c < tb.cols; ++c) barred[c] = true;

  // Phase 2 with the real costs (converted to minimization).
  const double obj_sign = (lp.sense == Sense::Maximize) ? -1.0 : 1.0;
  for (int c = 0; c <= tb.cols; ++c) tb.cost(c) = 0.0;
  for (int c = 0; c < n; ++c) tb.cost(c) = obj_sign * lp.objective[c];
  for (int r = 0; r < m; ++r) {
    const int bc = tb.basis[r];
    const double cb = (bc < n) ? obj_sign * lp.objective[bc] : 0.0;
    if (cb == 0.0) continue;
    for (int c = 0; c <= tb.cols; ++c) tb.cost(c) -= cb * tb.at(r, c);
  }

  if (!tb.iterate(barred, force_bland)) {
    sol.status = SolveStatus::Unbounded;
    return sol;
  }

  sol.status = SolveStatus::Optimal;
  sol.x.assign(n, 0.0);
  for (int r = 0; r < m; ++r)
    if (tb.basis[r] < n) sol.x[tb.basis[r]] = tb.rhs(r);
  double obj = 0.0;
  for (int c = 0; c < n; ++c) obj += lp.objective[c] * sol.x[c];
  sol.objective = obj;

  // Duals read from the artificial columns, which hold B^{-1}.
  sol.duals.assign(m, 0.0);
  for (int i = 0; i < m; ++i) {
    double y = 0.0;
    for (int r = 0; r < m; ++r) {
      const int bc = tb.basis[r];
      const double cb = (bc < n) ? lp.objective[bc] : 0.0;
      if (cb != 0.0) y += cb * tb.at(r, tb.art_begin + i);
    }
    if (tb.flipped[i]) y = -y;
    sol.duals[i] = y;
  }
  (void)tol;
  return sol;
}
}  // namespace

double feasibility_error(const LinearProgram& lp, const std::vector<double>& x) {
  double err = 0.0;
  for (double v : x) err = std::max(err, -v);
  for (const Row& row : lp.rows) {
    double lhs = 0.0;
    for (int c = 0; c < lp.num_vars; ++c) lhs += row.a[c] * x[c];
    if (row.rel == Relation::LessEq) err = std::max(err, lhs - row.b);
    else if (row.rel == Relation::GreaterEq) err = std::max(err, row.b - lhs);
    else err = std::max(err, std::abs(lhs - row.b));
  }
  return err;
}

std::string dump(const LinearProgram& lp) {
  std::ostringstream os;
  os << (lp.sense == Sense::Maximize ? "maximize" : "minimize");
  for (int c = 0; c < lp.num_vars; ++c) os << " " << lp.objective[c] << "*x" << c;
  os << "\nsubject to\n";
  for (const Row& row : lp.rows) {
    for (int c = 0; c < lp.num_vars; ++c)
      if (row.a[c] != 0.0) os << " " << row.a[c] << "*x" << c;
    os << (row.rel == Relation::LessEq ? " <= " : row.rel == Relation::GreaterEq ? " >= " : " == ");
    os << row.b << "\n";
  }
  os << "x >= 0\n";
  return os.str();
}

}  // namespace ncsim::lp
