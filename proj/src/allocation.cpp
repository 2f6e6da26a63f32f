#include "ncsim/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "ncsim/delay_model.hpp"

namespace ncsim::alloc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZeroMass = 1e-12;
}  // namespace

std::vector<int> NeighborhoodSnapshot::blocks() const {
  std::vector<int> b;
  for (const SessionInfo& s : sessions) b.push_back(s.block);
  return b;
}

VarIndex::VarIndex(int num_parents, int num_children, std::vector<PacketType> types)
    : types_(std::move(types)), num_parents_(num_parents), num_children_(num_children) {
  uint16_t max_mask = 0;
  for (PacketType t : types_) max_mask = std::max(max_mask, t.mask);
  mask_to_pos_.assign(size_t(max_mask) + 1, -1);
  for (size_t i = 0; i < types_.size(); ++i) mask_to_pos_[types_[i].mask] = static_cast<int>(i);
  count_ = (num_parents_ + num_children_) * static_cast<int>(types_.size());
}

int VarIndex::pos(PacketType t) const {
  if (t.mask >= mask_to_pos_.size() || mask_to_pos_[t.mask] < 0)
    throw std::out_of_range("var index: type not in the active set");
  return mask_to_pos_[t.mask];
}

int VarIndex::in(int parent, PacketType t) const { return parent * static_cast<int>(types_.size()) + pos(t); }

int VarIndex::out(int child, PacketType t) const {
  return (num_parents_ + child) * static_cast<int>(types_.size()) + pos(t);
}

namespace {

// Distinct availability index sets: for every (combination, component
// session) pair the set of its contributing subtypes within the universe.
// Identical sets produce identical constraint rows, so they are emitted once.
struct ContribSet {
  std::vector<PacketType> members;       // active types carrying variables
  std::vector<PacketType> full_members;  // all contributing types in the universe
  int session = 0;
};

std::vector<ContribSet> contributing_sets(const std::vector<PacketType>& active,
                                          const std::vector<PacketType>& universe) {
  std::set<std::pair<std::vector<uint16_t>, std::vector<uint16_t>>> seen;
  std::vector<ContribSet> out;
  for (PacketType t : universe) {
    for (int s : t.sessions()) {
      ContribSet cs;
      cs.session = s;
      std::vector<uint16_t> key, full_key;
      for (PacketType sub : universe)
        if (sub.subset_of(t) && sub.contains(s)) {
          cs.full_members.push_back(sub);
          full_key.push_back(sub.mask);
        }
      for (PacketType sub : active)
        if (sub.subset_of(t) && sub.contains(s)) {
          cs.members.push_back(sub);
          key.push_back(sub.mask);
        }
      if (cs.members.empty()) continue;
      if (seen.insert({key, full_key}).second) out.push_back(std::move(cs));
    }
  }
  return out;
}

// Joint source budgets: for every combination, its subtype lattice within
// the universe and the summed source rates of its component sessions. A
// coded packet consumes novelty from the joint space of its combination, so
// the per-session caps compose additively rather than binding each component
// alone.
struct BudgetSet {
  std::vector<PacketType> members;       // active types carrying variables
  std::vector<PacketType> full_members;  // every subtype in the universe
  double budget = 0.0;
};

std::vector<BudgetSet> joint_budget_sets(const std::vector<PacketType>& active,
                                         const NeighborhoodSnapshot& snap) {
  std::map<std::vector<uint16_t>, BudgetSet> tightest;  // keyed by the full subtype set
  for (PacketType t : snap.universe) {
    BudgetSet bs;
    std::vector<uint16_t> full_key;
    for (PacketType sub : snap.universe)
      if (sub.subset_of(t)) {
        bs.full_members.push_back(sub);
        full_key.push_back(sub.mask);
      }
    for (PacketType sub : active)
      if (sub.subset_of(t)) bs.members.push_back(sub);
    if (bs.members.empty()) continue;
    for (int sess : t.sessions()) bs.budget += snap.sessions[sess].source_rate;
    auto it = tightest.find(full_key);
    if (it == tightest.end() || bs.budget < it->second.budget) tightest[full_key] = std::move(bs);
  }
  std::vector<BudgetSet> out;
  for (auto& [key, bs] : tightest) out.push_back(bs);
  return out;
}

}  // namespace

std::vector<lp::Row> build_min_constraints(const NeighborhoodSnapshot& snap, const VarIndex& index) {
  std::vector<lp::Row> rows;
  const auto& types = index.types();
  const int P = static_cast<int>(snap.parents.size());
  const int C = static_cast<int>(snap.children.size());
  const auto sets = contributing_sets(types, snap.universe);

  // input link capacities
  for (int k = 0; k < P; ++k) {
    lp::Row r{std::vector<double>(index.count(), 0.0), lp::Relation::LessEq,
              snap.parents[k].capacity * (1.0 - snap.parents[k].loss)};
    for (PacketType t : types) r.a[index.in(k, t)] = 1.0;
    rows.push_back(std::move(r));
  }
  // output link capacities
  for (int j = 0; j < C; ++j) {
    lp::Row r{std::vector<double>(index.count(), 0.0), lp::Relation::LessEq,
              snap.children[j].capacity * (1.0 - snap.children[j].loss)};
    for (PacketType t : types) r.a[index.out(j, t)] = 1.0;
    rows.push_back(std::move(r));
  }
  // parent availability: the whole contributing set funds the active types
  for (int k = 0; k < P; ++k)
    for (const ContribSet& cs : sets) {
      double avail = 0.0;
      for (PacketType t : cs.full_members) avail += snap.parents[k].available.at(t);
      lp::Row r{std::vector<double>(index.count(), 0.0), lp::Relation::LessEq, std::max(0.0, avail)};
      for (PacketType t : cs.members) r.a[index.in(k, t)] = 1.0;
      rows.push_back(std::move(r));
    }
  // relay bound: per child, forwarded session content within what the node takes in
  for (int j = 0; j < C; ++j)
    for (const ContribSet& cs : sets) {
      lp::Row r{std::vector<double>(index.count(), 0.0), lp::Relation::LessEq, 0.0};
      for (PacketType t : cs.members) {
        r.a[index.out(j, t)] = 1.0;
        for (int k = 0; k < P; ++k) r.a[index.in(k, t)] -= 1.0;
      }
      rows.push_back(std::move(r));
    }
  // source-rate caps: the innovative rate of content supported inside a
  // combination cannot exceed what the combination's sources inject jointly
  const auto budgets = joint_budget_sets(types, snap);
  for (const BudgetSet& bs : budgets) {
    lp::Row r{std::vector<double>(index.count(), 0.0), lp::Relation::LessEq, bs.budget};
    for (PacketType t : bs.members)
      for (int k = 0; k < P; ++k) r.a[index.in(k, t)] = 1.0;
    rows.push_back(std::move(r));
  }
  for (int j = 0; j < C; ++j)
    for (const BudgetSet& bs : budgets) {
      double side = 0.0;
      for (PacketType t : bs.full_members) side += snap.children[j].side_supply.at(t);
      lp::Row r{std::vector<double>(index.count(), 0.0), lp::Relation::LessEq, std::max(0.0, bs.budget - side)};
      for (PacketType t : bs.members) r.a[index.out(j, t)] = 1.0;
      rows.push_back(std::move(r));
    }
  return rows;
}

std::vector<lp::Row> build_max_constraints(const NeighborhoodSnapshot& snap, const VarIndex& index) {
  std::vector<lp::Row> rows;
  const auto& types = index.types();
  const int P = static_cast<int>(snap.parents.size());
  const auto sets = contributing_sets(types, snap.universe);

  for (int k = 0; k < P; ++k) {
    lp::Row r{std::vector<double>(index.count(), 0.0), lp::Relation::LessEq,
              snap.parents[k].capacity * (1.0 - snap.parents[k].loss)};
    for (PacketType t : types) r.a[index.in(k, t)] = 1.0;
    rows.push_back(std::move(r));
  }
  for (int k = 0; k < P; ++k)
    for (const ContribSet& cs : sets) {
      double avail = 0.0;
      for (PacketType t : cs.full_members) avail += snap.parents[k].available.at(t);
      lp::Row r{std::vector<double>(index.count(), 0.0), lp::Relation::LessEq, std::max(0.0, avail)};
      for (PacketType t : cs.members) r.a[index.in(k, t)] = 1.0;
      rows.push_back(std::move(r));
    }
  for (const BudgetSet& bs : joint_budget_sets(types, snap)) {
    lp::Row r{std::vector<double>(index.count(), 0.0), lp::Relation::LessEq, bs.budget};
    for (PacketType t : bs.members)
      for (int k = 0; k < P; ++k) r.a[index.in(k, t)] = 1.0;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<TupleChoice> enumerate_tuples(const NeighborhoodSnapshot& snap) {
  std::vector<PacketType> self_candidates;
  if (snap.subscription) self_candidates = types_with_session(*snap.subscription, snap.universe);
  else self_candidates.push_back(PacketType{});  // relay-only node: no own term

  std::vector<std::vector<PacketType>> child_candidates;
  for (const ChildEdge& c : snap.children)
    child_candidates.push_back(types_with_session(c.subscription, snap.universe));

  std::vector<TupleChoice> tuples;
  const size_t D = child_candidates.size();
  for (PacketType self : self_candidates) {
    std::vector<size_t> idx(D, 0);
    while (true) {
      TupleChoice tc;
      tc.self = self;
      for (size_t j = 0; j < D; ++j) tc.children.push_back(child_candidates[j][idx[j]]);
      tuples.push_back(std::move(tc));
      if (D == 0) break;
      size_t j = D;
      while (j > 0) {
        if (++idx[j - 1] < child_candidates[j - 1].size()) break;
        idx[j - 1] = 0;
        --j;
      }
      if (j == 0) break;
    }
  }
  return tuples;
}

namespace {

// Mass of contributing subtypes of (t, s) in a per-type rate table.
double contributing_mass(const TypeVector& rates, PacketType t, int s, const std::vector<PacketType>& universe) {
  double m = 0.0;
  for (PacketType sub : universe)
    if (sub.subset_of(t) && sub.contains(s)) m += rates.at(sub);
  return m;
}

double subtype_mass(const TypeVector& rates, PacketType t, const std::vector<PacketType>& universe) {
  double m = 0.0;
  for (PacketType sub : universe)
    if (sub.subset_of(t)) m += rates.at(sub);
  return m;
}

struct NodeView {
  bool is_self = false;
  int child = -1;           // index into snap.children when !is_self
  PacketType combination;
  double input_capacity = 0.0;
};

// Optimistic per-node delay: ignores competition between nodes, so it lower
// bounds the achievable term and is safe for pruning.
double node_delay_lower_bound(const NeighborhoodSnapshot& snap, const NodeView& node) {
  if (!node.combination.valid()) return 0.0;
  const auto blocks = snap.blocks();
  double worst = 0.0;
  double block_sum = 0.0;
  double total_supply = 0.0;
  for (int s : node.combination.sessions()) {
    double mass = 0.0;
    if (node.is_self) {
      for (const ParentEdge& p : snap.parents) mass += contributing_mass(p.available, node.combination, s, snap.universe);
    } else {
      const ChildEdge& c = snap.children[node.child];
      mass += contributing_mass(c.side_supply, node.combination, s, snap.universe);
      for (const ParentEdge& p : snap.parents) mass += contributing_mass(p.available, node.combination, s, snap.universe);
    }
    mass = std::min(mass, node.input_capacity);
    if (mass <= kZeroMass) return kInf;
    worst = std::max(worst, double(blocks[s]) / mass);
    block_sum += blocks[s];
  }
  if (node.is_self) {
    for (const ParentEdge& p : snap.parents) total_supply += subtype_mass(p.available, node.combination, snap.universe);
  } else {
    const ChildEdge& c = snap.children[node.child];
    total_supply += subtype_mass(c.side_supply, node.combination, snap.universe);
    for (const ParentEdge& p : snap.parents) total_supply += subtype_mass(p.available, node.combination, snap.universe);
  }
  total_supply = std::min(total_supply, node.input_capacity);
  if (total_supply <= kZeroMass) return kInf;
  worst = std::max(worst, block_sum / total_supply);
  return worst;
}

// Types that participate in a tuple: the union of the subtype lattices of
// every chosen combination. Rates outside this set can be zero without loss.
std::vector<PacketType> involved_types(const NeighborhoodSnapshot& snap, const TupleChoice& tuple) {
  std::set<uint16_t> masks;
  auto add = [&](PacketType t) {
    if (!t.valid()) return;
    for (PacketType sub : subtypes(t)) masks.insert(sub.mask);
  };
  add(tuple.self);
  for (PacketType t : tuple.children) add(t);
  std::vector<PacketType> out;
  for (PacketType t : snap.universe)
    if (masks.count(t.mask)) out.push_back(t);
  return out;
}

struct TupleProblem {
  VarIndex index;
  convex::ConvexSubproblem sp;
};

TupleProblem build_tuple_problem(const NeighborhoodSnapshot& snap, const TupleChoice& tuple) {
  const int P = static_cast<int>(snap.parents.size());
  const int C = static_cast<int>(snap.children.size());
  const auto blocks = snap.blocks();
  const double share = 1.0 / double(C + 1);

  TupleProblem tp{VarIndex(P, C, involved_types(snap, tuple)), {}};
  const VarIndex& index = tp.index;
  convex::ConvexSubproblem& sp = tp.sp;

  // rate variables first, then one split-mass variable per
  // (node, contributing subtype, component session)
  int next_var = index.count();
  std::map<std::tuple<int, uint16_t, int>, int> split;  // (node slot, subtype, session)

  std::vector<NodeView> nodes;
  if (snap.subscription && tuple.self.valid())
    nodes.push_back(NodeView{true, -1, tuple.self, snap.input_capacity});
  for (int j = 0; j < C; ++j) nodes.push_back(NodeView{false, j, tuple.children[j], snap.children[j].input_capacity});

  for (size_t ni = 0; ni < nodes.size(); ++ni)
    for (PacketType sub : subtypes(nodes[ni].combination))
      if (std::count(index.types().begin(), index.types().end(), sub))
        for (int s : sub.sessions()) split[{int(ni), sub.mask, s}] = next_var++;

  sp.num_vars = next_var;
  for (lp::Row row : build_min_constraints(snap, index)) {
    row.a.resize(next_var, 0.0);
    sp.region.push_back(std::move(row));
  }

  // per-flow split budgets: the mass routed out of a subtype cannot exceed
  // the probability of receiving it
  for (size_t ni = 0; ni < nodes.size(); ++ni) {
    const NodeView& node = nodes[ni];
    const double cap = node.input_capacity;
    for (PacketType sub : subtypes(node.combination)) {
      if (!std::count(index.types().begin(), index.types().end(), sub)) continue;
      lp::Row row{std::vector<double>(next_var, 0.0), lp::Relation::LessEq, 0.0};
      for (int s : sub.sessions()) row.a[split.at({int(ni), sub.mask, s})] = 1.0;
      if (node.is_self) {
        for (int k = 0; k < P; ++k) row.a[index.in(k, sub)] -= 1.0 / cap;
      } else {
        row.a[index.out(node.child, sub)] -= 1.0 / cap;
        row.b = snap.children[node.child].side_supply.at(sub) / cap;
      }
      sp.region.push_back(std::move(row));
    }
  }

  // objective: one weighted max-of-reciprocals term per node
  for (size_t ni = 0; ni < nodes.size(); ++ni) {
    const NodeView& node = nodes[ni];
    convex::ObjectiveTerm term;
    term.weight = share / node.input_capacity;
    for (int s : node.combination.sessions()) {
      convex::AffineExpr q;
      for (PacketType sub : subtypes(node.combination)) {
        if (!sub.contains(s)) continue;
        auto it = split.find({int(ni), sub.mask, s});
        if (it != split.end()) q.add(it->second, 1.0);
      }
      term.components.emplace_back(std::move(q), double(blocks[s]));
    }
    sp.terms.push_back(std::move(term));
  }
  return tp;
}

RateVector extract_rates(const NeighborhoodSnapshot& snap, const VarIndex& index, const std::vector<double>& x) {
  RateVector rv;
  const int n = snap.num_sessions();
  for (size_t k = 0; k < snap.parents.size(); ++k) {
    TypeVector tv(n);
    for (PacketType t : index.types()) tv.at(t) = std::max(0.0, x[index.in(int(k), t)]);
    rv.in.push_back(std::move(tv));
  }
  for (size_t j = 0; j < snap.children.size(); ++j) {
    TypeVector tv(n);
    for (PacketType t : index.types()) tv.at(t) = std::max(0.0, x[index.out(int(j), t)]);
    rv.out.push_back(std::move(tv));
  }
  return rv;
}

// Deterministic re-evaluation of the predicted delays from the chosen rates,
// through the same equivalent-flow model the solver approximates.
std::pair<double, double> recompute_delays(const NeighborhoodSnapshot& snap, const TupleChoice& tuple,
                                           const RateVector& rates) {
  const auto blocks = snap.blocks();
  const int n = snap.num_sessions();
  const double share = 1.0 / double(snap.children.size() + 1);
  double total = 0.0;
  double self_delay = kInf;

  if (snap.subscription && tuple.self.valid()) {
    TypeVector in_total(n);
    for (const TypeVector& tv : rates.in)
      for (size_t m = 1; m < tv.v.size(); ++m) in_total.v[m] += tv.v[m];
    auto p = delay::probabilities_from_rates(in_total, snap.input_capacity);
    auto [coeff, q] = delay::split_equivalent_flows(p, tuple.self, blocks);
    auto cd = delay::combination_delay(q, blocks, 1.0 / snap.input_capacity);
    self_delay = cd.delay_seconds;
    total += share * cd.delay_seconds;
  }
  for (size_t j = 0; j < snap.children.size(); ++j) {
    TypeVector supply = snap.children[j].side_supply;
    for (size_t m = 1; m < supply.v.size(); ++m) supply.v[m] += rates.out[j].v[m];
    auto p = delay::probabilities_from_rates(supply, snap.children[j].input_capacity);
    auto [coeff, q] = delay::split_equivalent_flows(p, tuple.children[j], blocks);
    auto cd = delay::combination_delay(q, blocks, 1.0 / snap.children[j].input_capacity);
    total += share * cd.delay_seconds;
  }
  return {total, self_delay};
}

}  // namespace

namespace {

// Pre-rank each node's candidate combinations by the optimistic bound and
// keep a short list (the singleton always included as the safe fallback);
// the exact solve then runs over the reduced Cartesian product. Keeps the
// per-round cost affordable when several children multiply the tuple space.
std::vector<TupleChoice> shortlist_tuples(const NeighborhoodSnapshot& snap, size_t per_node_keep) {
  auto rank = [&](const std::vector<PacketType>& candidates, const NodeView& base) {
    std::vector<std::pair<double, PacketType>> scored;
    for (PacketType t : candidates) {
      NodeView view = base;
      view.combination = t;
      scored.emplace_back(node_delay_lower_bound(snap, view), t);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<PacketType> keep;
    for (auto& [score, t] : scored) {
      if (keep.size() >= per_node_keep) break;
      if (!std::isinf(score)) keep.push_back(t);
    }
    // singleton fallback stays available
    for (auto& [score, t] : scored)
      if (t.session_count() == 1 && !std::count(keep.begin(), keep.end(), t) && !std::isinf(score))
        keep.push_back(t);
    if (keep.empty() && !scored.empty()) keep.push_back(scored.front().second);
    return keep;
  };

  std::vector<PacketType> self_candidates;
  if (snap.subscription)
    self_candidates = rank(types_with_session(*snap.subscription, snap.universe),
                           NodeView{true, -1, PacketType{}, snap.input_capacity});
  else
    self_candidates.push_back(PacketType{});

  std::vector<std::vector<PacketType>> child_candidates;
  for (size_t j = 0; j < snap.children.size(); ++j)
    child_candidates.push_back(rank(types_with_session(snap.children[j].subscription, snap.universe),
                                    NodeView{false, int(j), PacketType{}, snap.children[j].input_capacity}));

  std::vector<TupleChoice> tuples;
  const size_t D = child_candidates.size();
  for (PacketType self : self_candidates) {
    std::vector<size_t> idx(D, 0);
    while (true) {
      TupleChoice tc;
      tc.self = self;
      for (size_t j = 0; j < D; ++j) tc.children.push_back(child_candidates[j][idx[j]]);
      tuples.push_back(std::move(tc));
      if (D == 0) break;
      size_t j = D;
      while (j > 0) {
        if (++idx[j - 1] < child_candidates[j - 1].size()) break;
        idx[j - 1] = 0;
        --j;
      }
      if (j == 0) break;
    }
  }
  return tuples;
}

}  // namespace

AllocationResult minimize_delay(const NeighborhoodSnapshot& snap, const MinimizeOptions& opts) {
  AllocationResult result;
  const int n = snap.num_sessions();

  const size_t full_count =
      (snap.subscription ? types_with_session(*snap.subscription, snap.universe).size() : 1) *
      [&] {
        size_t prod = 1;
        for (const ChildEdge& c : snap.children)
          prod *= std::max<size_t>(1, types_with_session(c.subscription, snap.universe).size());
        return prod;
      }();
  auto tuples = full_count <= opts.max_tuples ? enumerate_tuples(snap) : shortlist_tuples(snap, 2);

  // provably-infinite screening plus optimistic bounds for ordering
  std::vector<double> bounds(tuples.size(), 0.0);
  for (size_t i = 0; i < tuples.size(); ++i) {
    const TupleChoice& tc = tuples[i];
    double lb = 0.0;
    const double share = 1.0 / double(snap.children.size() + 1);
    if (snap.subscription && tc.self.valid())
      lb += share * node_delay_lower_bound(snap, NodeView{true, -1, tc.self, snap.input_capacity});
    for (size_t j = 0; j < tc.children.size(); ++j)
      lb += share *
            node_delay_lower_bound(snap, NodeView{false, int(j), tc.children[j], snap.children[j].input_capacity});
    bounds[i] = lb;
  }

  std::vector<size_t> order(tuples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return bounds[a] < bounds[b]; });

  double best_obj = kInf;
  size_t best_tuple = SIZE_MAX;
  std::vector<double> best_x;
  std::optional<VarIndex> best_index;

  for (size_t oi = 0; oi < order.size(); ++oi) {
    const size_t ti = order[oi];
    if (std::isinf(bounds[ti])) {
      if (opts.keep_reports) result.reports.push_back({tuples[ti], kInf, "pruned:unreachable"});
      continue;
    }
    if (bounds[ti] >= best_obj) {
      if (opts.keep_reports)
        for (size_t rest = oi; rest < order.size(); ++rest)
          result.reports.push_back({tuples[order[rest]], bounds[order[rest]], "pruned:bound"});
      break;
    }
    auto tp = build_tuple_problem(snap, tuples[ti]);
    auto sol = convex::solve_convex(tp.sp, opts.rel_tol);
    if (sol.status == convex::ConvexSolution::Status::Optimal) {
      if (opts.keep_reports) result.reports.push_back({tuples[ti], sol.objective, "optimal"});
      if (sol.objective < best_obj) {
        best_obj = sol.objective;
        best_tuple = ti;
        best_x = sol.x;
        best_index.emplace(tp.index);
      }
    } else if (opts.keep_reports) {
      result.reports.push_back(
          {tuples[ti], kInf, sol.status == convex::ConvexSolution::Status::Infinite ? "infinite" : "infeasible"});
    }
  }

  if (best_tuple == SIZE_MAX) {
    result.starved = true;
    result.avg_delay = kInf;
    result.self_delay = kInf;
    for (size_t k = 0; k < snap.parents.size(); ++k) result.rates.in.emplace_back(n);
    for (size_t j = 0; j < snap.children.size(); ++j) result.rates.out.emplace_back(n);
    result.wire_in = result.rates.in;
    return result;
  }

  result.best = tuples[best_tuple];
  result.rates = extract_rates(snap, *best_index, best_x);
  auto [avg, self] = recompute_delays(snap, result.best, result.rates);
  result.avg_delay = avg;
  result.self_delay = self;
  result.wire_in = wire_rates(result.rates.in, snap.parents);
  return result;
}

RateVector maximize_throughput(const NeighborhoodSnapshot& snap, const RateVector& floor) {
  const int P = static_cast<int>(snap.parents.size());
  VarIndex index(P, 0, snap.universe);
  auto rows = build_max_constraints(snap, index);

  // shift variables so the floor becomes the origin
  std::vector<double> base(index.count(), 0.0);
  for (int k = 0; k < P; ++k)
    for (PacketType t : snap.universe) base[index.in(k, t)] = floor.in[k].at(t);

  lp::LinearProgram prog;
  prog.num_vars = index.count();
  prog.sense = lp::Sense::Maximize;
  prog.objective.assign(index.count(), 1.0);
  size_t row_index = 0;
  for (lp::Row& row : rows) {
    double used = 0.0;
    for (int c = 0; c < index.count(); ++c) used += row.a[c] * base[c];
    row.b -= used;
    if (row.b < 0) {
      if (row.b < -1e-6)
        throw std::invalid_argument("maximize_throughput: floor outside the feasible region (row " +
                                    std::to_string(row_index) + ", excess " + std::to_string(-row.b) + ")");
      row.b = 0.0;  // floor numerically on the boundary
    }
    prog.rows.push_back(std::move(row));
    ++row_index;
  }
  auto sol = lp::solve_lp(prog);
  if (sol.status != lp::SolveStatus::Optimal)
    throw std::runtime_error("maximize_throughput: throughput stage not optimal");

  RateVector out = floor;
  for (int k = 0; k < P; ++k)
    for (PacketType t : snap.universe) out.in[k].at(t) = base[index.in(k, t)] + std::max(0.0, sol.x[index.in(k, t)]);
  return out;
}

std::vector<TypeVector> wire_rates(const std::vector<TypeVector>& in_rates, const std::vector<ParentEdge>& parents) {
  if (in_rates.size() != parents.size()) throw std::invalid_argument("wire_rates: one rate table per parent");
  std::vector<TypeVector> out;
  for (size_t k = 0; k < parents.size(); ++k) {
    if (parents[k].loss >= 1.0) throw std::domain_error("wire_rates: loss probability must be below 1");
    TypeVector tv = in_rates[k];
    for (double& v : tv.v) v /= (1.0 - parents[k].loss);
    out.push_back(std::move(tv));
  }
  return out;
}

std::string tuple_report_csv(const std::vector<TupleReport>& reports) {
  std::string out = "self,children,objective,status\n";
  for (const TupleReport& rep : reports) {
    out += rep.tuple.self.valid() ? rep.tuple.self.name() : "none";
    out += ",";
    for (size_t j = 0; j < rep.tuple.children.size(); ++j) {
      if (j) out += "+";
      out += rep.tuple.children[j].name();
    }
    out += "," + std::to_string(rep.objective) + "," + rep.status + "\n";
  }
  return out;
}

AuditReport audit_constraints(const NeighborhoodSnapshot& snap, const RateVector& rates, double tol) {
  AuditReport report;
  auto note = [&](double lhs, double rhs, const std::string& what) {
    const double excess = lhs - rhs;
    report.worst_residual = std::max(report.worst_residual, excess);
    if (excess > tol) report.violations.push_back(what + ": " + std::to_string(lhs) + " > " + std::to_string(rhs));
  };

  const int P = static_cast<int>(snap.parents.size());
  const int C = static_cast<int>(snap.children.size());

  for (int k = 0; k < P; ++k)
    for (double v : rates.in[k].v) note(-v, 0.0, "negative input rate");
  for (int j = 0; j < C; ++j)
    for (double v : rates.out[j].v) note(-v, 0.0, "negative output rate");

  for (int k = 0; k < P; ++k) {
    double sum = 0.0;
    for (PacketType t : snap.universe) sum += rates.in[k].at(t);
    note(sum, snap.parents[k].capacity * (1.0 - snap.parents[k].loss),
         "input capacity, parent " + std::to_string(snap.parents[k].node_id));
  }
  for (int j = 0; j < C; ++j) {
    double sum = 0.0;
    for (PacketType t : snap.universe) sum += rates.out[j].at(t);
    note(sum, snap.children[j].capacity * (1.0 - snap.children[j].loss),
         "output capacity, child " + std::to_string(snap.children[j].node_id));
  }

  for (PacketType t : snap.universe) {
    for (int s : t.sessions()) {
      std::vector<PacketType> contrib;
      for (PacketType sub : snap.universe)
        if (sub.subset_of(t) && sub.contains(s)) contrib.push_back(sub);

      for (int k = 0; k < P; ++k) {
        double lhs = 0.0, avail = 0.0;
        for (PacketType sub : contrib) {
          lhs += rates.in[k].at(sub);
          avail += snap.parents[k].available.at(sub);
        }
        note(lhs, avail, "availability, parent " + std::to_string(snap.parents[k].node_id) + ", " + t.name() + "/s" +
                             std::to_string(s));
      }
      double in_total = 0.0;
      for (PacketType sub : contrib)
        for (int k = 0; k < P; ++k) in_total += rates.in[k].at(sub);

      for (int j = 0; j < C; ++j) {
        double out_sum = 0.0;
        for (PacketType sub : contrib) out_sum += rates.out[j].at(sub);
        note(out_sum, in_total, "relay bound, child " + std::to_string(snap.children[j].node_id) + ", " + t.name() +
                                    "/s" + std::to_string(s));
      }
    }
  }
  // joint source budgets per combination
  for (PacketType t : snap.universe) {
    double budget = 0.0;
    for (int s : t.sessions()) budget += snap.sessions[s].source_rate;
    double in_total = 0.0;
    std::vector<PacketType> subs;
    for (PacketType sub : snap.universe)
      if (sub.subset_of(t)) {
        subs.push_back(sub);
        for (int k = 0; k < P; ++k) in_total += rates.in[k].at(sub);
      }
    note(in_total, budget, "input source budget, " + t.name());
    for (int j = 0; j < C; ++j) {
      double out_sum = 0.0, side = 0.0;
      for (PacketType sub : subs) {
        out_sum += rates.out[j].at(sub);
        side += snap.children[j].side_supply.at(sub);
      }
      // measured side supply may itself brush the budget; that is not the
      // allocation's doing
      note(out_sum, std::max(0.0, budget - side),
           "output source budget, child " + std::to_string(snap.children[j].node_id) + ", " + t.name());
    }
  }
  return report;
}

}  // namespace ncsim::alloc
