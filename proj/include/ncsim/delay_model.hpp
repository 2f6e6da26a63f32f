#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "ncsim/rng.hpp"
#include "ncsim/types.hpp"

namespace ncsim::delay {

// Absolute tolerance for probability comparisons.
constexpr double kProbEps = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

// p^t = (sum of innovative input rates of type t) / input capacity.
TypeVector probabilities_from_rates(const TypeVector& input_rates, double input_capacity);

// How each contributing flow's probability mass is routed onto the component
// sessions of a combination.
struct SplitCoefficients {
  PacketType combination;
  struct Entry {
    int session = 0;     // component session receiving the mass
    PacketType from;     // contributing subtype
    double mass = 0.0;   // x: probability mass routed to the session
    double gamma = 0.0;  // share of that flow (mass / p[from]); 0 when p is 0
  };
  std::vector<Entry> entries;
  double mass(int session, PacketType from) const;
};

// Per-component-session probability of collecting an innovative packet when
// decoding through a fixed combination.
struct EquivalentRates {
  PacketType combination;
  std::vector<std::pair<int, double>> q;  // (session, probability), ascending session
  double q_of(int session) const;
};

// Balances the contributing flows of combination t across its component
// sessions: lexicographic max-min on q_s / N_s, realized as a sequence of
// linear programs with water-filling refinement. The max-min objective is
// what minimizes the slowest component's expected collection time.
std::pair<SplitCoefficients, EquivalentRates> split_equivalent_flows(const TypeVector& p, PacketType t,
                                                                     const std::vector<int>& blocks);

struct CombinationDelay {
  double expected_packets = kInf;  // slots to collect every component block
  double delay_seconds = kInf;
};

// E = max_s N_s / q_s (negative-binomial mean per component, slowest wins);
// delay = slot_seconds * E. Infinite when any component has zero rate.
CombinationDelay combination_delay(const EquivalentRates& q, const std::vector<int>& blocks, double slot_seconds);

struct DelayEstimate {
  std::vector<std::pair<PacketType, double>> per_combination;  // expected packets per candidate
  PacketType best;
  double expected_packets = kInf;
  double delay_seconds = kInf;
};

// Evaluates every combination containing the session and keeps the minimum;
// ties go to the smallest bitmask. May be infinite when the node is starved.
DelayEstimate node_delay(const TypeVector& p, int session, const std::vector<int>& blocks, double slot_seconds);

// Simulation oracle for the expected slot count: draws packet types i.i.d.
// from p (residual mass = nothing innovative arrives), materializes uniform
// random coefficient rows, and runs the real rank machinery until the
// session decodes. Returns the mean over the trials.
double monte_carlo_expected_packets(const TypeVector& p, int session, const std::vector<int>& blocks, int trials,
                                    Rng& rng);

}  // namespace ncsim::delay
