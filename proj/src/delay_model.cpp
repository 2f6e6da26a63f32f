#include "ncsim/delay_model.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "ncsim/coding.hpp"
#include "ncsim/lp.hpp"

namespace ncsim::delay {

TypeVector probabilities_from_rates(const TypeVector& input_rates, double input_capacity) {
  if (input_capacity <= 0) throw std::invalid_argument("probabilities_from_rates: input capacity must be positive");
  TypeVector p(input_rates.num_sessions);
  for (size_t m = 1; m < input_rates.v.size(); ++m) {
    if (input_rates.v[m] < -kProbEps) throw std::invalid_argument("probabilities_from_rates: negative rate");
    p.v[m] = std::max(0.0, input_rates.v[m]) / input_capacity;
  }
  return p;
}

double SplitCoefficients::mass(int session, PacketType from) const {
  for (const Entry& e : entries)
    if (e.session == session && e.from == from) return e.mass;
  return 0.0;
}

double EquivalentRates::q_of(int session) const {
  for (auto& [s, v] : q)
    if (s == session) return v;
  return 0.0;
}

namespace {

// LP variable layout for one split problem: one mass variable per
// (subtype, component session of the subtype) pair, plus the max-min level z.
struct SplitVars {
  std::vector<PacketType> subs;
  std::vector<int> comps;
  std::map<std::pair<uint16_t, int>, int> var;  // (subtype mask, session) -> column
  int z = 0;
  int count = 0;

  explicit SplitVars(PacketType t) {
    subs = subtypes(t);
    comps = t.sessions();
    for (PacketType sub : subs)
      for (int s : sub.sessions()) var[{sub.mask, s}] = count++;
    z = count++;
  }

  void add_mass_rows(lp::LinearProgram& prog, const TypeVector& p) const {
    for (PacketType sub : subs) {
      auto& row = prog.add_row(lp::Relation::LessEq, std::max(0.0, p.at(sub)));
      for (int s : sub.sessions()) row.a[var.at({sub.mask, s})] = 1.0;
    }
  }

  // q_s as coefficients: the mass variables of subtypes containing s.
  void fill_q_coeffs(std::vector<double>& a, int s) const {
    for (PacketType sub : subs)
      if (sub.contains(s)) a[var.at({sub.mask, s})] = 1.0;
  }
};

}  // namespace

std::pair<SplitCoefficients, EquivalentRates> split_equivalent_flows(const TypeVector& p, PacketType t,
                                                                     const std::vector<int>& blocks) {
  if (!t.valid()) throw std::domain_error("split_equivalent_flows: empty combination");
  SplitVars sv(t);
  std::map<int, double> level;  // session -> frozen q value

  auto make_lp = [&](bool maximize_z, int focus_session, double z_star) {
    lp::LinearProgram prog;
    prog.num_vars = sv.count;
    prog.sense = lp::Sense::Maximize;
    prog.objective.assign(sv.count, 0.0);
    if (maximize_z) prog.objective[sv.z] = 1.0;
    sv.add_mass_rows(prog, p);
    for (int s : sv.comps) {
      auto it = level.find(s);
      if (it != level.end()) {
        auto& row = prog.add_row(lp::Relation::GreaterEq, it->second);
        sv.fill_q_coeffs(row.a, s);
      } else if (maximize_z) {
        auto& row = prog.add_row(lp::Relation::GreaterEq, 0.0);
        sv.fill_q_coeffs(row.a, s);
        row.a[sv.z] = -double(blocks[s]);
      } else {
        auto& row = prog.add_row(lp::Relation::GreaterEq, double(blocks[s]) * z_star);
        sv.fill_q_coeffs(row.a, s);
      }
    }
    if (!maximize_z) {
      std::vector<double> probe(sv.count, 0.0);
      sv.fill_q_coeffs(probe, focus_session);
      prog.objective = probe;
    }
    return prog;
  };

  // Water-filling: find the max-min level, freeze the sessions that cannot
  // rise above it, re-optimize the rest until everything is pinned.
  while (level.size() < sv.comps.size()) {
    auto sol = lp::solve_lp(make_lp(true, -1, 0.0));
    if (sol.status != lp::SolveStatus::Optimal)
      throw std::runtime_error("split_equivalent_flows: max-min stage not optimal");
    const double z_star = sol.x[sv.z];
    bool fixed_any = false;
    for (int s : sv.comps) {
      if (level.count(s)) continue;
      auto probe = lp::solve_lp(make_lp(false, s, z_star));
      if (probe.status != lp::SolveStatus::Optimal)
        throw std::runtime_error("split_equivalent_flows: probe stage not optimal");
      if (probe.objective <= double(blocks[s]) * z_star + 1e-9) {
        level[s] = double(blocks[s]) * z_star;
        fixed_any = true;
      }
    }
    if (!fixed_any) {
      // numerically flat: pin every remaining session at the current level
      for (int s : sv.comps)
        if (!level.count(s)) level[s] = double(blocks[s]) * z_star;
    }
  }

  // Minimal-mass coefficients realizing the levels exactly.
  lp::LinearProgram fin;
  fin.num_vars = sv.count;
  fin.sense = lp::Sense::Minimize;
  fin.objective.assign(sv.count, 0.0);
  for (auto& [key, idx] : sv.var) fin.objective[idx] = 1.0;
  sv.add_mass_rows(fin, p);
  for (int s : sv.comps) {
    auto& row = fin.add_row(lp::Relation::GreaterEq, level[s]);
    sv.fill_q_coeffs(row.a, s);
  }
  auto fsol = lp::solve_lp(fin);
  if (fsol.status != lp::SolveStatus::Optimal)
    throw std::runtime_error("split_equivalent_flows: coefficient stage not optimal");

  SplitCoefficients coeffs;
  coeffs.combination = t;
  for (PacketType sub : sv.subs)
    for (int s : sub.sessions()) {
      SplitCoefficients::Entry e;
      e.session = s;
      e.from = sub;
      e.mass = std::max(0.0, fsol.x[sv.var.at({sub.mask, s})]);
      const double supply = p.at(sub);
      e.gamma = supply > kProbEps ? std::min(1.0, e.mass / supply) : 0.0;
      coeffs.entries.push_back(e);
    }

  EquivalentRates rates;
  rates.combination = t;
  for (int s : sv.comps) rates.q.emplace_back(s, level[s]);
  return {std::move(coeffs), std::move(rates)};
}

CombinationDelay combination_delay(const EquivalentRates& q, const std::vector<int>& blocks, double slot_seconds) {
  if (slot_seconds <= 0) throw std::invalid_argument("combination_delay: slot duration must be positive");
  CombinationDelay out;
  double worst = 0.0;
  for (auto& [s, qs] : q.q) {
    if (blocks[s] == 0) continue;  // degenerate block contributes no delay
    if (qs <= 1e-12) return out;   // unreachable component: infinite
    worst = std::max(worst, double(blocks[s]) / qs);
  }
  out.expected_packets = worst;
  out.delay_seconds = slot_seconds * worst;
  return out;
}

DelayEstimate node_delay(const TypeVector& p, int session, const std::vector<int>& blocks, double slot_seconds) {
  DelayEstimate est;
  for (PacketType t : types_with_session(session, all_types(p.num_sessions))) {
    auto [coeffs, q] = split_equivalent_flows(p, t, blocks);
    auto cd = combination_delay(q, blocks, slot_seconds);
    est.per_combination.emplace_back(t, cd.expected_packets);
    if (cd.expected_packets < est.expected_packets) {
      est.expected_packets = cd.expected_packets;
      est.delay_seconds = cd.delay_seconds;
      est.best = t;
    }
  }
  return est;
}

double monte_carlo_expected_packets(const TypeVector& p, int session, const std::vector<int>& blocks, int trials,
                                    Rng& rng) {
  if (trials < 1) throw std::invalid_argument("monte_carlo: trials must be >= 1");
  if (p.total() > 1.0 + kProbEps) throw std::invalid_argument("monte_carlo: probabilities sum above 1");

  GenerationLayout layout(blocks);
  const auto watch = types_with_session(session, all_types(p.num_sessions));

  // cumulative thresholds over the canonical type order
  std::vector<std::pair<double, PacketType>> cumulative;
  double acc = 0.0;
  for (PacketType t : all_types(p.num_sessions)) {
    if (p.at(t) <= 0.0) continue;
    acc += p.at(t);
    cumulative.emplace_back(acc, t);
  }

  constexpr long kMaxSlots = 1000000;
  long long total_slots = 0;
  CodedPacket pkt;
  pkt.coeffs.assign(layout.columns(), 0);
  for (int trial = 0; trial < trials; ++trial) {
    DecoderState dec(layout, 0, watch);
    long slots = 0;
    while (!dec.decodable_watched(session)) {
      if (++slots > kMaxSlots) throw std::runtime_error("monte_carlo: session unreachable under p");
      const double u = rng.next_double();
      PacketType drawn;
      for (auto& [threshold, t] : cumulative)
        if (u < threshold) {
          drawn = t;
          break;
        }
      if (!drawn.valid()) continue;  // residual: nothing innovative this slot
      std::fill(pkt.coeffs.begin(), pkt.coeffs.end(), 0);
      for (int s : drawn.sessions())
        for (int i = 0; i < layout.block_size(s); ++i) pkt.coeffs[layout.column(s, i)] = rng.next_byte();
      pkt.ptype = drawn;
      dec.insert(pkt);
    }
    total_slots += slots;
  }
  return double(total_slots) / double(trials);
}

}  // namespace ncsim::delay
