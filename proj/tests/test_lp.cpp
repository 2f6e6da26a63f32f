#include "doctest.h"
#include "ncsim/lp.hpp"
#include "ncsim/rng.hpp"

#include <cmath>

using namespace ncsim;
using namespace ncsim::lp;

TEST_CASE("trivial bounds") {
  LinearProgram p;
  p.num_vars = 1;
  p.sense = Sense::Maximize;
  p.objective = {1.0};
  p.add_row(Relation::LessEq, 3.0).a[0] = 1.0;
  auto sol = solve_lp(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(3.0));
  CHECK(sol.x[0] == doctest::Approx(3.0));
  CHECK(sol.duals[0] == doctest::Approx(1.0));
}

TEST_CASE("infeasible pair") {
  LinearProgram p;
  p.num_vars = 1;
  p.sense = Sense::Maximize;
  p.objective = {1.0};
  p.add_row(Relation::LessEq, 0.0).a[0] = 1.0;
  p.add_row(Relation::GreaterEq, 1.0).a[0] = 1.0;
  CHECK(solve_lp(p).status == SolveStatus::Infeasible);
}

TEST_CASE("unbounded") {
  LinearProgram p;
  p.num_vars = 2;
  p.sense = Sense::Maximize;
  p.objective = {1.0, 0.0};
  p.add_row(Relation::LessEq, 5.0).a[1] = 1.0;
  CHECK(solve_lp(p).status == SolveStatus::Unbounded);
}

TEST_CASE("two-variable optimum with duals") {
  // max x0 + 2 x1 st x0 + x1 <= 4, x1 <= 2
  LinearProgram p;
  p.num_vars = 2;
  p.sense = Sense::Maximize;
  p.objective = {1.0, 2.0};
  {
    auto& r = p.add_row(Relation::LessEq, 4.0);
    r.a = {1.0, 1.0};
  }
  p.add_row(Relation::LessEq, 2.0).a[1] = 1.0;
  auto sol = solve_lp(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(6.0));
  CHECK(sol.x[0] == doctest::Approx(2.0));
  CHECK(sol.x[1] == doctest::Approx(2.0));
  // dual certificate: y >= 0, A'y >= c, b'y == objective
  REQUIRE(sol.duals.size() == 2);
  CHECK(sol.duals[0] >= -1e-9);
  CHECK(sol.duals[1] >= -1e-9);
  CHECK(sol.duals[0] * 1.0 >= 1.0 - 1e-9);
  CHECK(sol.duals[0] + sol.duals[1] >= 2.0 - 1e-9);
  CHECK(4.0 * sol.duals[0] + 2.0 * sol.duals[1] == doctest::Approx(6.0));
}

TEST_CASE("equality and greater-equal rows, minimization") {
  // min 2x0 + 3x1 st x0 + x1 == 10, x0 >= 4
  LinearProgram p;
  p.num_vars = 2;
  p.sense = Sense::Minimize;
  p.objective = {2.0, 3.0};
  {
    auto& r = p.add_row(Relation::Equal, 10.0);
    r.a = {1.0, 1.0};
  }
  p.add_row(Relation::GreaterEq, 4.0).a[0] = 1.0;
  auto sol = solve_lp(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(20.0));
  CHECK(sol.x[0] == doctest::Approx(10.0));
  CHECK(sol.x[1] == doctest::Approx(0.0));
}

TEST_CASE("weak duality on randomized feasible programs") {
  Rng rng(404);
  for (int inst = 0; inst < 50; ++inst) {
    const int n = 2 + int(rng.next_below(4));
    const int m = 2 + int(rng.next_below(5));
    LinearProgram p;
    p.num_vars = n;
    p.sense = Sense::Maximize;
    p.objective.resize(n);
    for (auto& c : p.objective) c = rng.next_double() * 4.0 - 1.0;
    // rows built around a known interior point keep the program feasible
    std::vector<double> x0(n);
    for (auto& v : x0) v = rng.next_double() * 2.0;
    for (int r = 0; r < m; ++r) {
      auto& row = p.add_row(Relation::LessEq, 0.0);
      double lhs = 0.0;
      for (int c = 0; c < n; ++c) {
        row.a[c] = rng.next_double();
        lhs += row.a[c] * x0[c];
      }
      row.b = lhs + rng.next_double() + 0.1;
    }
    // bounded: sum x <= const
    auto& cap = p.add_row(Relation::LessEq, 10.0);
    for (int c = 0; c < n; ++c) cap.a[c] = 1.0;

    auto sol = solve_lp(p);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(feasibility_error(p, sol.x) < 1e-7);

    // the returned duals form a certificate: primal objective never exceeds
    // the dual bound b'y, and here they coincide
    double by = 0.0;
    for (size_t r = 0; r < p.rows.size(); ++r) {
      CHECK(sol.duals[r] >= -1e-7);
      by += sol.duals[r] * p.rows[r].b;
    }
    for (int c = 0; c < n; ++c) {
      double aty = 0.0;
      for (size_t r = 0; r < p.rows.size(); ++r) aty += sol.duals[r] * p.rows[r].a[c];
      CHECK(aty >= p.objective[c] - 1e-7);
    }
    CHECK(sol.objective <= by + 1e-6);
    CHECK(by == doctest::Approx(sol.objective).epsilon(1e-6));
  }
}

TEST_CASE("dump lists the standard form") {
  LinearProgram p;
  p.num_vars = 2;
  p.sense = Sense::Minimize;
  p.objective = {1.0, -1.0};
  p.add_row(Relation::LessEq, 2.0).a = {1.0, 1.0};
  auto text = dump(p);
  CHECK(text.find("minimize") != std::string::npos);
  CHECK(text.find("<= 2") != std::string::npos);
}
