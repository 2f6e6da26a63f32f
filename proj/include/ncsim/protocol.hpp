#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "ncsim/allocation.hpp"

namespace ncsim::proto {

// Optimization-round counter value of converged and source nodes.
constexpr uint32_t kRoundInf = 0xffffffffu;

struct Params {
  uint32_t l_max = 30;  // hard stop on optimization rounds
  uint32_t l_min = 10;  // rounds before convergence may be declared
  uint32_t l_s = 3;     // rounds of unchanged predicted delay required
  double delay_tol = 1e-3;  // relative change treated as unchanged
  double period_s = 0.5;    // round timer period
  double jitter_frac = 0.1;
  bool operator==(const Params&) const = default;
};

enum class MessageKind {
  RoundQuery,
  RoundReply,
  ParentReport,
  ChildReport,
  RateRequest,
  GenerationAdvance,
  GenerationFeedback,
};

// One control-plane message. Only the fields relevant to `kind` are set.
struct ControlMessage {
  MessageKind kind = MessageKind::RoundQuery;
  int from = 0;
  int to = 0;
  uint32_t round = 0;        // RoundReply
  TypeVector rates;          // ParentReport / ChildReport / RateRequest
  int subscription = -1;     // ChildReport
  double input_capacity = 0; // ChildReport
  uint32_t generation = 0;   // GenerationAdvance / GenerationFeedback
  bool decoded = false;      // GenerationFeedback
};

struct ChildReportData {
  TypeVector side_supply;
  int subscription = 0;
  double input_capacity = 0.0;
};

// Replies collected for one optimization attempt.
struct RoundInbox {
  std::map<int, uint32_t> parent_rounds;
  std::map<int, TypeVector> parent_reports;
  std::map<int, ChildReportData> child_reports;
};

// Static local knowledge: the node's own links and the session table.
struct LocalContext {
  int node_id = 0;
  std::optional<int> subscription;
  double input_capacity = 0.0;
  struct PeerLink {
    int node_id = 0;
    double capacity = 0.0;
    double loss = 0.0;
  };
  std::vector<PeerLink> parents;
  std::vector<PeerLink> children;
  std::vector<alloc::SessionInfo> sessions;
  std::vector<PacketType> universe;
};

struct ProtocolState {
  Params params;
  uint32_t round = 0;  // kRoundInf for sources and converged nodes
  std::deque<double> delay_history;
  bool has_allocation = false;
  alloc::AllocationResult current;
  // memo: identical snapshots skip the solver and repeat the result
  std::optional<alloc::NeighborhoodSnapshot> last_snapshot;
};

// True iff the last l_s + 1 predicted delays pairwise differ by less than
// tol (relative). Shorter histories are insufficient evidence.
bool delay_unchanged(const std::deque<double>& history, uint32_t l_s, double tol);

struct RoundOutcome {
  bool optimized = false;    // gate passed and the allocation pipeline ran
  bool reached_inf = false;
  bool starved = false;
  bool memo_hit = false;
  uint32_t min_parent_round = 0;
  alloc::NeighborhoodSnapshot snapshot;  // what the optimization saw (when optimized)
  std::vector<std::pair<int, TypeVector>> rate_requests;  // wire rates per parent id
};

// One attempt at Algorithm rounds 4-19: requires a complete inbox whose
// parents have all advanced beyond this node's round; otherwise a no-op
// retry. On success runs delay minimization, throughput maximization and
// the wire-rate conversion, then either advances the round counter or
// declares convergence.
RoundOutcome try_round(ProtocolState& st, const RoundInbox& inbox, const LocalContext& ctx);

}  // namespace ncsim::proto
