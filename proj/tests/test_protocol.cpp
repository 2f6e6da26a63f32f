#include "doctest.h"
#include "ncsim/protocol.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

using namespace ncsim;
using namespace ncsim::proto;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

LocalContext leaf_context(int id, int parent_id, double avail_cap = 30.0) {
  LocalContext ctx;
  ctx.node_id = id;
  ctx.subscription = 0;
  ctx.input_capacity = avail_cap;
  ctx.parents.push_back({parent_id, avail_cap, 0.0});
  ctx.sessions = {{30.0, 10}};
  ctx.universe = all_types(1);
  return ctx;
}

RoundInbox inbox_for(const LocalContext& ctx, uint32_t parent_round, double avail) {
  RoundInbox inbox;
  for (auto& link : ctx.parents) {
    inbox.parent_rounds[link.node_id] = parent_round;
    TypeVector tv(int(ctx.sessions.size()));
    tv.v[0b1] = avail;
    inbox.parent_reports[link.node_id] = tv;
  }
  for (auto& link : ctx.children) {
    ChildReportData data;
    data.side_supply = TypeVector(int(ctx.sessions.size()));
    data.subscription = 0;
    data.input_capacity = 30.0;
    inbox.child_reports[link.node_id] = data;
  }
  return inbox;
}

}  // namespace

TEST_CASE("delay_unchanged") {
  CHECK(delay_unchanged({0.5, 0.5, 0.5, 0.5}, 3, 1e-3));
  CHECK_FALSE(delay_unchanged({0.5, 0.5, 0.6, 0.5}, 3, 1e-3));
  CHECK_FALSE(delay_unchanged({0.5, 0.5, 0.5}, 3, 1e-3));  // insufficient evidence
  CHECK(delay_unchanged({9.0, 0.5, 0.5, 0.5, 0.5}, 3, 1e-3));  // only the window counts
  CHECK_FALSE(delay_unchanged({kInf, kInf, kInf, kInf}, 3, 1e-3));  // starvation is not convergence
  CHECK(delay_unchanged({0.5, 0.5 + 2e-4, 0.5, 0.5 - 2e-4}, 3, 1e-3));
}

TEST_CASE("gate defers until every parent has advanced") {
  auto ctx = leaf_context(1, 0);
  ProtocolState st;
  st.params.l_min = 1;

  auto same_round = inbox_for(ctx, 0, 20.0);
  auto out = try_round(st, same_round, ctx);
  CHECK_FALSE(out.optimized);
  CHECK(st.round == 0);

  RoundInbox missing;  // no reports at all
  missing.parent_rounds[0] = kRoundInf;
  CHECK_FALSE(try_round(st, missing, ctx).optimized);

  auto good = inbox_for(ctx, kRoundInf, 20.0);
  out = try_round(st, good, ctx);
  CHECK(out.optimized);
  CHECK(st.round == 1);
  REQUIRE(out.rate_requests.size() == 1);
  CHECK(out.rate_requests[0].first == 0);
  CHECK(out.rate_requests[0].second.total() > 19.0);  // wire-inflated request
}

TEST_CASE("converged and capped nodes are inert") {
  auto ctx = leaf_context(1, 0);
  ProtocolState st;
  st.round = kRoundInf;
  CHECK_FALSE(try_round(st, inbox_for(ctx, kRoundInf, 20.0), ctx).optimized);
  st.round = st.params.l_max;
  CHECK_FALSE(try_round(st, inbox_for(ctx, kRoundInf, 20.0), ctx).optimized);
}

TEST_CASE("a chain converges source-side first, all within the round budget") {
  // source (round inf) -> a -> b, driven with consistent fake reports
  auto ctx_a = leaf_context(1, 0);
  ctx_a.children.push_back({2, 30.0, 0.0});
  auto ctx_b = leaf_context(2, 1);

  ProtocolState a, b;
  a.params.l_min = 3;
  b.params.l_min = 3;

  int sequence = 0;
  int a_inf_seq = 0, b_inf_seq = 0;
  int b_rounds = 0;
  for (int round = 0; round < 60 && (a.round != kRoundInf || b.round != kRoundInf); ++round) {
    if (a.round != kRoundInf) {
      auto inbox = inbox_for(ctx_a, kRoundInf, 30.0);
      auto out = try_round(a, inbox, ctx_a);
      CHECK(out.optimized);
      ++sequence;
      if (out.reached_inf) a_inf_seq = sequence;
    }
    if (b.round != kRoundInf) {
      auto inbox = inbox_for(ctx_b, a.round, a.has_allocation ? a.current.rates.in[0].total() : 0.0);
      auto out = try_round(b, inbox, ctx_b);
      ++sequence;
      if (out.optimized) ++b_rounds;
      if (out.reached_inf) b_inf_seq = sequence;
    }
  }
  CHECK(a.round == kRoundInf);
  CHECK(b.round == kRoundInf);
  CHECK(a_inf_seq < b_inf_seq);  // the source side settles first
  CHECK(b_rounds < 30);
}

TEST_CASE("history stays within the stability window") {
  auto ctx = leaf_context(1, 0);
  ProtocolState st;
  for (int i = 0; i < 25 && st.round != kRoundInf; ++i) try_round(st, inbox_for(ctx, kRoundInf, 20.0), ctx);
  CHECK(st.delay_history.size() <= size_t(st.params.l_s) + 1);
  CHECK(st.round == kRoundInf);  // constant reports converge once past l_min
}

TEST_CASE("identical snapshots hit the memo") {
  auto ctx = leaf_context(1, 0);
  ProtocolState st;
  auto inbox = inbox_for(ctx, kRoundInf, 20.0);
  auto first = try_round(st, inbox, ctx);
  CHECK(first.optimized);
  CHECK_FALSE(first.memo_hit);
  auto second = try_round(st, inbox, ctx);
  CHECK(second.optimized);
  CHECK(second.memo_hit);
}
