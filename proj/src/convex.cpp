#include "ncsim/convex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ncsim::convex {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SparseRow {
  std::vector<std::pair<int, double>> a;
  double b = 0.0;
  double dot(const std::vector<double>& y) const {
    double v = 0.0;
    for (auto& [i, c] : a) v += c * y[i];
    return v;
  }
};

// Dense symmetric positive definite solve; adds a diagonal ridge and retries
// when the factorization stalls.
bool cholesky_solve(std::vector<double>& h, int n, std::vector<double>& rhs) {
  for (int attempt = 0; attempt < 4; ++attempt) {
    std::vector<double> l = h;
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      for (int j = 0; j <= i; ++j) {
        double sum = l[size_t(i) * n + j];
        for (int k = 0; k < j; ++k) sum -= l[size_t(i) * n + k] * l[size_t(j) * n + k];
        if (i == j) {
          if (sum <= 0.0 || !std::isfinite(sum)) {
            ok = false;
            break;
          }
          l[size_t(i) * n + i] = std::sqrt(sum);
        } else {
          l[size_t(i) * n + j] = sum / l[size_t(j) * n + j];
        }
      }
    }
    if (ok) {
      // forward/backward substitution in place
      std::vector<double> y(n);
      for (int i = 0; i < n; ++i) {
        double sum = rhs[i];
        for (int k = 0; k < i; ++k) sum -= l[size_t(i) * n + k] * y[k];
        y[i] = sum / l[size_t(i) * n + i];
      }
      for (int i = n - 1; i >= 0; --i) {
        double sum = y[i];
        for (int k = i + 1; k < n; ++k) sum -= l[size_t(k) * n + i] * rhs[k];
        rhs[i] = sum / l[size_t(i) * n + i];
      }
      return true;
    }
    const double ridge = std::pow(10.0, attempt - 10);
    for (int i = 0; i < n; ++i) h[size_t(i) * n + i] += ridge;
  }
  return false;
}

}  // namespace

double objective_at(const ConvexSubproblem& sp, const std::vector<double>& x) {
  double total = 0.0;
  for (const ObjectiveTerm& term : sp.terms) {
    double worst = 0.0;
    for (auto& [expr, block] : term.components) {
      if (block <= 0.0) continue;
      const double q = expr.eval(x);
      if (q <= 1e-12) return kInf;
      worst = std::max(worst, block / q);
    }
    total += term.weight * worst;
  }
  return total;
}

ConvexSolution solve_convex(const ConvexSubproblem& sp, double rel_tol) {
  ConvexSolution out;
  const int n_full = sp.num_vars;

  // --- normalize rows to a.x <= b over the full variable space
  std::vector<SparseRow> rows;
  rows.reserve(sp.region.size());
  for (const lp::Row& r : sp.region) {
    if (r.rel == lp::Relation::Equal) throw std::invalid_argument("solve_convex: equality rows unsupported");
    SparseRow sr;
    const double sign = (r.rel == lp::Relation::GreaterEq) ? -1.0 : 1.0;
    for (int i = 0; i < n_full; ++i)
      if (r.a[i] != 0.0) sr.a.emplace_back(i, sign * r.a[i]);
    sr.b = sign * r.b;
    rows.push_back(std::move(sr));
  }

  // --- presolve: rows with nonnegative coefficients and no slack pin their
  // variables at zero; repeat until stable so the zero cascade resolves.
  std::vector<bool> fixed(n_full, false);
  bool changed = true;
  while (changed) {
    changed = false;
    for (const SparseRow& r : rows) {
      double b = r.b;
      bool all_nonneg = true;
      bool any_free = false;
      for (auto& [i, c] : r.a) {
        if (fixed[i]) continue;
        any_free = true;
        if (c < -1e-15) {
          all_nonneg = false;
          break;
        }
      }
      if (!all_nonneg) continue;
      if (b <= 1e-12 && b >= -1e-9 && any_free) {
        for (auto& [i, c] : r.a)
          if (!fixed[i] && c > 1e-15) {
            fixed[i] = true;
            changed = true;
          }
      } else if (b < -1e-9 && !any_free) {
        out.status = ConvexSolution::Status::Infeasible;
        return out;
      }
    }
  }
  // drop rows with no free variables, checking for contradictions
  {
    std::vector<SparseRow> kept;
    for (SparseRow& r : rows) {
      SparseRow nr;
      nr.b = r.b;
      for (auto& [i, c] : r.a)
        if (!fixed[i]) nr.a.emplace_back(i, c);
      if (nr.a.empty()) {
        if (nr.b < -1e-9) {
          out.status = ConvexSolution::Status::Infeasible;
          return out;
        }
        continue;
      }
      kept.push_back(std::move(nr));
    }
    rows = std::move(kept);
  }

  std::vector<int> to_compact(n_full, -1);
  std::vector<int> to_full;
  for (int i = 0; i < n_full; ++i)
    if (!fixed[i]) {
      to_compact[i] = static_cast<int>(to_full.size());
      to_full.push_back(i);
    }
  const int n = static_cast<int>(to_full.size());
  for (SparseRow& r : rows)
    for (auto& [i, c] : r.a) i = to_compact[i];

  // q expressions in compact space (fixed vars contribute nothing)
  struct QExpr {
    std::vector<std::pair<int, double>> a;
    double constant = 0.0;
    int term = 0;
    double block = 0.0;
  };
  std::vector<QExpr> qs;
  const int K = static_cast<int>(sp.terms.size());
  for (int k = 0; k < K; ++k) {
    for (auto& [expr, block] : sp.terms[k].components) {
      if (block <= 0.0) continue;  // zero block: no delay contribution
      QExpr q;
      q.constant = expr.constant;
      q.term = k;
      q.block = block;
      for (auto& [i, c] : expr.terms)
        if (!fixed[i]) q.a.emplace_back(to_compact[i], c);
      qs.push_back(std::move(q));
    }
  }

  auto restore = [&](const std::vector<double>& xc) {
    std::vector<double> xf(n_full, 0.0);
    for (int i = 0; i < n; ++i) xf[to_full[i]] = xc[i];
    return xf;
  };

  // Terms with no positive-block components cost nothing; if every term is
  // empty the objective is identically zero.
  if (qs.empty()) {
    lp::LinearProgram feas;
    feas.num_vars = n;
    feas.sense = lp::Sense::Maximize;
    feas.objective.assign(n, 0.0);
    for (const SparseRow& r : rows) {
      auto& row = feas.add_row(lp::Relation::LessEq, r.b);
      for (auto& [i, c] : r.a) row.a[i] += c;
    }
    auto sol = lp::solve_lp(feas);
    if (sol.status != lp::SolveStatus::Optimal) {
      out.status = ConvexSolution::Status::Infeasible;
      return out;
    }
    out.status = ConvexSolution::Status::Optimal;
    out.objective = 0.0;
    out.x = restore(sol.x);
    return out;
  }

  // --- screening LP: maximize the worst q. Zero means some term can never
  // collect a component, i.e. the instance is infinite.
  {
    lp::LinearProgram screen;
    screen.num_vars = n + 1;  // + z
    screen.sense = lp::Sense::Maximize;
    screen.objective.assign(n + 1, 0.0);
    screen.objective[n] = 1.0;
    for (const SparseRow& r : rows) {
      auto& row = screen.add_row(lp::Relation::LessEq, r.b);
      for (auto& [i, c] : r.a) row.a[i] += c;
    }
    for (const QExpr& q : qs) {
      auto& row = screen.add_row(lp::Relation::GreaterEq, -q.constant);  // q(x) - z >= 0
      for (auto& [i, c] : q.a) row.a[i] += c;
      row.a[n] = -1.0;
    }
    auto sol = lp::solve_lp(screen);
    if (sol.status != lp::SolveStatus::Optimal) {
      out.status = ConvexSolution::Status::Infeasible;
      return out;
    }
    if (sol.x[n] <= 1e-9) {
      out.status = ConvexSolution::Status::Infinite;
      out.objective = kInf;
      out.x = restore(std::vector<double>(n, 0.0));
      return out;
    }
  }

  // --- interior LP: a strictly feasible start for the barrier.
  std::vector<double> x0(n, 0.0);
  {
    lp::LinearProgram inter;
    inter.num_vars = n + 1;  // + margin
    inter.sense = lp::Sense::Maximize;
    inter.objective.assign(n + 1, 0.0);
    inter.objective[n] = 1.0;
    for (const SparseRow& r : rows) {
      double scale = 1.0;
      for (auto& [i, c] : r.a) scale = std::max(scale, std::abs(c));
      auto& row = inter.add_row(lp::Relation::LessEq, r.b);
      for (auto& [i, c] : r.a) row.a[i] += c;
      row.a[n] = scale;
    }
    for (int i = 0; i < n; ++i) {
      auto& row = inter.add_row(lp::Relation::GreaterEq, 0.0);  // x_i - margin >= 0
      row.a[i] = 1.0;
      row.a[n] = -1.0;
    }
    for (const QExpr& q : qs) {
      auto& row = inter.add_row(lp::Relation::GreaterEq, -q.constant);  // q(x) - margin >= 0
      for (auto& [i, c] : q.a) row.a[i] += c;
      row.a[n] = -1.0;
    }
    inter.add_row(lp::Relation::LessEq, 1.0).a[n] = 1.0;
    auto sol = lp::solve_lp(inter);
    if (sol.status != lp::SolveStatus::Optimal || sol.x[n] <= 1e-11) {
      // no strict interior survived presolve: give up on the tuple
      out.status = ConvexSolution::Status::Infeasible;
      return out;
    }
    for (int i = 0; i < n; ++i) x0[i] = sol.x[i];
  }

  // --- barrier over y = (x, u), minimizing sum w_k / u_k.
  const int nv = n + K;
  std::vector<SparseRow> brows;  // slack rows: b - a.y > 0 maintained
  for (const SparseRow& r : rows) brows.push_back(r);
  for (int i = 0; i < n; ++i) {
    SparseRow r;
    r.a.emplace_back(i, -1.0);
    r.b = 0.0;
    brows.push_back(std::move(r));  // x_i >= 0
  }
  for (const QExpr& q : qs) {
    SparseRow r;  // block * u_k - q(x) <= q.constant
    for (auto& [i, c] : q.a) r.a.emplace_back(i, -c);
    r.a.emplace_back(n + q.term, q.block);
    r.b = q.constant;
    brows.push_back(std::move(r));
  }
  const int m = static_cast<int>(brows.size());

  // terms whose components all have zero block contribute nothing
  std::vector<double> weight(K, 0.0);
  for (const QExpr& q : qs) weight[q.term] = sp.terms[q.term].weight;

  std::vector<double> y(nv, 0.0);
  for (int i = 0; i < n; ++i) y[i] = x0[i];
  for (const QExpr& q : qs) {
    double val = q.constant;
    for (auto& [i, c] : q.a) val += c * x0[i];
    double& u = y[n + q.term];
    const double cap = 0.5 * val / q.block;
    u = (u == 0.0) ? cap : std::min(u, cap);
  }
  for (int k = 0; k < K; ++k)
    if (y[n + k] <= 0.0) y[n + k] = 1.0;  // inactive term: weight is zero, variable idles

  auto f0 = [&](const std::vector<double>& yy) {
    double v = 0.0;
    for (int k = 0; k < K; ++k) v += weight[k] / yy[n + k];
    return v;
  };
  auto barrier_value = [&](const std::vector<double>& yy, double t) {
    double v = t * f0(yy);
    for (const SparseRow& r : brows) {
      const double s = r.b - r.dot(yy);
      if (s <= 0.0) return kInf;
      v -= std::log(s);
    }
    for (int k = 0; k < K; ++k)
      if (yy[n + k] <= 0.0) return kInf;
    return v;
  };

  double t = 1.0;
  const int max_outer = 64;
  std::vector<double> h(size_t(nv) * nv);
  std::vector<double> grad(nv), slack(m), dir(nv), ytrial(nv);
  for (int outer = 0; outer < max_outer; ++outer) {
    for (int inner = 0; inner < 60; ++inner) {
      std::fill(h.begin(), h.end(), 0.0);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (int k = 0; k < K; ++k) {
        const double u = y[n + k];
        grad[n + k] += t * (-weight[k] / (u * u));
        h[size_t(n + k) * nv + (n + k)] += t * (2.0 * weight[k] / (u * u * u));
      }
      for (int ri = 0; ri < m; ++ri) {
        const SparseRow& r = brows[ri];
        const double s = r.b - r.dot(y);
        slack[ri] = s;
        const double inv_s = 1.0 / s;
        const double inv_s2 = inv_s * inv_s;
        for (auto& [i, ci] : r.a) {
          grad[i] += ci * inv_s;
          for (auto& [j, cj] : r.a)
            if (j <= i) h[size_t(i) * nv + j] += ci * cj * inv_s2;
        }
      }
      for (int i = 0; i < nv; ++i)
        for (int j = 0; j < i; ++j) h[size_t(j) * nv + i] = h[size_t(i) * nv + j];

      for (int i = 0; i < nv; ++i) dir[i] = -grad[i];
      if (!cholesky_solve(h, nv, dir)) break;

      double decrement = 0.0;
      for (int i = 0; i < nv; ++i) decrement += -grad[i] * dir[i];
      if (decrement * 0.5 < 1e-10) break;

      // largest step keeping every slack and u strictly positive
      double step = 1.0;
      for (int ri = 0; ri < m; ++ri) {
        const double advance = brows[ri].dot(dir);
        if (advance > 0.0) step = std::min(step, 0.99 * slack[ri] / advance);
      }
      for (int k = 0; k < K; ++k)
        if (dir[n + k] < 0.0) step = std::min(step, -0.99 * y[n + k] / dir[n + k]);

      const double base = barrier_value(y, t);
      double g_dot_d = 0.0;
      for (int i = 0; i < nv; ++i) g_dot_d += grad[i] * dir[i];
      int backtracks = 0;
      while (backtracks < 60) {
        for (int i = 0; i < nv; ++i) ytrial[i] = y[i] + step * dir[i];
        if (barrier_value(ytrial, t) <= base + 0.25 * step * g_dot_d) break;
        step *= 0.5;
        ++backtracks;
      }
      if (backtracks >= 60) break;
      y = ytrial;
    }
    const double obj = f0(y);
    if (double(m) / t <= rel_tol * std::max(std::abs(obj), 1e-9)) {
      out.gap = double(m) / t;
      break;
    }
    t *= 20.0;
    out.gap = double(m) / t;
  }

  out.status = ConvexSolution::Status::Optimal;
  out.objective = f0(y);
  out.x = restore(std::vector<double>(y.begin(), y.begin() + n));
  return out;
}

std::string dump(const ConvexSubproblem& sp) {
  std::ostringstream os;
  os << "minimize";
  for (size_t k = 0; k < sp.terms.size(); ++k) {
    os << (k ? " + " : " ") << sp.terms[k].weight << "*max(";
    for (size_t c = 0; c < sp.terms[k].components.size(); ++c) {
      if (c) os << ", ";
      os << sp.terms[k].components[c].second << "/q" << k << "_" << c;
    }
    os << ")";
  }
  os << "\nwhere\n";
  for (size_t k = 0; k < sp.terms.size(); ++k)
    for (size_t c = 0; c < sp.terms[k].components.size(); ++c) {
      os << "q" << k << "_" << c << " =";
      const AffineExpr& e = sp.terms[k].components[c].first;
      for (auto& [i, coef] : e.terms) os << " + " << coef << "*x" << i;
      if (e.constant != 0.0) os << " + " << e.constant;
      os << "\n";
    }
  os << "subject to\n";
  for (const lp::Row& r : sp.region) {
    for (int i = 0; i < sp.num_vars; ++i)
      if (r.a[i] != 0.0) os << " " << r.a[i] << "*x" << i;
    os << (r.rel == lp::Relation::LessEq ? " <= " : " >= ") << r.b << "\n";
  }
  os << "x >= 0\n";
  return os.str();
}

}  // namespace ncsim::convex
