#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ncsim/convex.hpp"
#include "ncsim/lp.hpp"
#include "ncsim/types.hpp"

namespace ncsim::alloc {

struct SessionInfo {
  double source_rate = 0.0;  // packets/sec injected network-wide
  int block = 0;
  bool operator==(const SessionInfo&) const = default;
};

// What a parent reported: its total innovative input rate per type.
struct ParentEdge {
  int node_id = 0;
  double capacity = 0.0;
  double loss = 0.0;
  TypeVector available;
  bool operator==(const ParentEdge&) const = default;
};

// What a child reported: its subscription, input capacity, and the
// innovative rates it already collects from its other parents.
struct ChildEdge {
  int node_id = 0;
  double capacity = 0.0;
  double loss = 0.0;
  int subscription = 0;
  double input_capacity = 0.0;
  TypeVector side_supply;
  bool operator==(const ChildEdge&) const = default;
};

// Everything one optimization round knows about the local neighborhood.
struct NeighborhoodSnapshot {
  int node_id = 0;
  std::optional<int> subscription;
  double input_capacity = 0.0;
  std::vector<ParentEdge> parents;
  std::vector<ChildEdge> children;
  std::vector<SessionInfo> sessions;
  std::vector<PacketType> universe;  // canonical ascending order
  bool operator==(const NeighborhoodSnapshot&) const = default;

  int num_sessions() const { return static_cast<int>(sessions.size()); }
  std::vector<int> blocks() const;
};

// Requested innovative rates per (link, type).
struct RateVector {
  std::vector<TypeVector> in;   // one per parent
  std::vector<TypeVector> out;  // one per child
  bool operator==(const RateVector&) const = default;
};

struct TupleChoice {
  PacketType self;                  // invalid when the node has no subscription
  std::vector<PacketType> children;
  bool operator==(const TupleChoice&) const = default;
};

struct TupleReport {
  TupleChoice tuple;
  double objective = 0.0;
  std::string status;
};

struct AllocationResult {
  bool starved = false;
  RateVector rates;
  TupleChoice best;
  double avg_delay = 0.0;   // predicted average over the node and its children
  double self_delay = 0.0;  // the node's own predicted delay
  std::vector<TypeVector> wire_in;  // loss-inflated requests per parent
  std::vector<TupleReport> reports;
};

// Column layout of the rate variables over a chosen type set.
class VarIndex {
 public:
  VarIndex(int num_parents, int num_children, std::vector<PacketType> types);
  int in(int parent, PacketType t) const;
  int out(int child, PacketType t) const;
  int count() const { return count_; }
  const std::vector<PacketType>& types() const { return types_; }

 private:
  int pos(PacketType t) const;
  std::vector<PacketType> types_;
  std::vector<int> mask_to_pos_;
  int num_parents_ = 0;
  int num_children_ = 0;
  int count_ = 0;
};

// The delay-minimization feasible region: per-link capacities, parent
// availability, relay bounds (a child cannot receive more of a session's
// content than the node takes in), and source-rate caps on both sides.
std::vector<lp::Row> build_min_constraints(const NeighborhoodSnapshot& snap, const VarIndex& index);

// The throughput-maximization region: input capacities, parent availability
// and source caps only.
std::vector<lp::Row> build_max_constraints(const NeighborhoodSnapshot& snap, const VarIndex& index);

// Full Cartesian product of the candidate decode combinations of the node
// and each child, in canonical order (self ascending, then children
// lexicographic).
std::vector<TupleChoice> enumerate_tuples(const NeighborhoodSnapshot& snap);

struct MinimizeOptions {
  double rel_tol = 1e-5;
  bool keep_reports = false;
  // above this tuple count, each node's combination candidates are
  // pre-ranked by the optimistic bound and only a short list enters the
  // Cartesian product
  size_t max_tuples = 64;
};

// Solves one convex subproblem per feasible tuple and keeps the best.
// Tuples whose combination has a component session with zero reachable mass
// are provably infinite and skipped; a bound-and-prune pass on the rest
// keeps the enumeration affordable.
AllocationResult minimize_delay(const NeighborhoodSnapshot& snap, const MinimizeOptions& opts = {});

// Grows the input rates above `floor` to soak up leftover bandwidth with
// types that may serve nodes beyond the local horizon. Output rates pass
// through unchanged.
RateVector maximize_throughput(const NeighborhoodSnapshot& snap, const RateVector& floor);

// f = r / (1 - loss) per parent link and type.
std::vector<TypeVector> wire_rates(const std::vector<TypeVector>& in_rates, const std::vector<ParentEdge>& parents);

// One row per examined tuple: combination names, objective, solve status.
std::string tuple_report_csv(const std::vector<TupleReport>& reports);

struct AuditReport {
  std::vector<std::string> violations;
  double worst_residual = 0.0;
  bool ok() const { return violations.empty(); }
};

// Re-checks every constraint family directly from the snapshot, independent
// of the solver path.
AuditReport audit_constraints(const NeighborhoodSnapshot& snap, const RateVector& rates, double tol = 1e-7);

}  // namespace ncsim::alloc
