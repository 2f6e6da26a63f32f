#include "ncsim/protocol.hpp"

#include <cmath>
#include <limits>

namespace ncsim::proto {

bool delay_unchanged(const std::deque<double>& history, uint32_t l_s, double tol) {
  if (history.size() < size_t(l_s) + 1) return false;
  const size_t start = history.size() - (size_t(l_s) + 1);
  for (size_t i = start; i < history.size(); ++i)
    for (size_t j = i + 1; j < history.size(); ++j) {
      const double a = history[i];
      const double b = history[j];
      // starved forecasts are never evidence of convergence
      if (std::isinf(a) || std::isinf(b)) return false;
      if (std::abs(a - b) > tol * std::max({std::abs(a), std::abs(b), 1e-12})) return false;
    }
  return true;
}

namespace {

alloc::NeighborhoodSnapshot make_snapshot(const RoundInbox& inbox, const LocalContext& ctx) {
  alloc::NeighborhoodSnapshot snap;
  snap.node_id = ctx.node_id;
  snap.subscription = ctx.subscription;
  snap.input_capacity = ctx.input_capacity;
  snap.sessions = ctx.sessions;
  snap.universe = ctx.universe;
  for (const auto& link : ctx.parents) {
    alloc::ParentEdge pe;
    pe.node_id = link.node_id;
    pe.capacity = link.capacity;
    pe.loss = link.loss;
    pe.available = inbox.parent_reports.at(link.node_id);
    snap.parents.push_back(std::move(pe));
  }
  for (const auto& link : ctx.children) {
    const ChildReportData& report = inbox.child_reports.at(link.node_id);
    alloc::ChildEdge ce;
    ce.node_id = link.node_id;
    ce.capacity = link.capacity;
    ce.loss = link.loss;
    ce.subscription = report.subscription;
    ce.input_capacity = report.input_capacity;
    ce.side_supply = report.side_supply;
    snap.children.push_back(std::move(ce));
  }
  return snap;
}

}  // namespace

RoundOutcome try_round(ProtocolState& st, const RoundInbox& inbox, const LocalContext& ctx) {
  RoundOutcome outcome;
  if (st.round == kRoundInf || st.round >= st.params.l_max) return outcome;

  // gate: every parent known, every parent strictly ahead
  uint32_t min_parent = kRoundInf;
  for (const auto& link : ctx.parents) {
    auto it = inbox.parent_rounds.find(link.node_id);
    if (it == inbox.parent_rounds.end()) return outcome;
    min_parent = std::min(min_parent, it->second);
    if (!(it->second > st.round)) return outcome;
    if (!inbox.parent_reports.count(link.node_id)) return outcome;
  }
  for (const auto& link : ctx.children)
    if (!inbox.child_reports.count(link.node_id)) return outcome;

  outcome.min_parent_round = min_parent;
  outcome.snapshot = make_snapshot(inbox, ctx);
  outcome.optimized = true;

  if (st.last_snapshot && *st.last_snapshot == outcome.snapshot && st.has_allocation) {
    outcome.memo_hit = true;
  } else {
    alloc::AllocationResult result = alloc::minimize_delay(outcome.snapshot);
    if (result.starved && st.has_allocation) {
      // starving now: hold the previous rates, remember the starved forecast
      st.current.avg_delay = result.avg_delay;
      st.current.self_delay = result.self_delay;
      st.current.starved = true;
    } else {
      if (!result.starved) {
        result.rates = alloc::maximize_throughput(outcome.snapshot, result.rates);
        result.wire_in = alloc::wire_rates(result.rates.in, outcome.snapshot.parents);
      }
      st.current = std::move(result);
      st.has_allocation = true;
    }
    st.last_snapshot = outcome.snapshot;
  }

  outcome.starved = st.current.starved;
  if (st.current.starved && !st.has_allocation) {
    // nothing reachable yet: a bootstrap deferral, not an optimization round
    outcome.optimized = false;
    return outcome;
  }
  if (st.has_allocation && !st.current.starved)
    for (size_t k = 0; k < ctx.parents.size(); ++k)
      outcome.rate_requests.emplace_back(ctx.parents[k].node_id, st.current.wire_in[k]);

  // the stability test tracks the full local objective; the node's own
  // delay alone can sit still while the children's allocation is evolving
  st.delay_history.push_back(st.current.avg_delay);
  while (st.delay_history.size() > size_t(st.params.l_s) + 1) st.delay_history.pop_front();

  const bool parents_converged = min_parent == kRoundInf;
  if (parents_converged && st.round > st.params.l_min &&
      delay_unchanged(st.delay_history, st.params.l_s, st.params.delay_tol)) {
    st.round = kRoundInf;
    outcome.reached_inf = true;
  } else {
    st.round += 1;
  }
  return outcome;
}

}  // namespace ncsim::proto
