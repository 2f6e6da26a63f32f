#include "ncsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ncsim::metrics {

RunSummary MetricsSink::summarize(double warmup_time, double horizon, const std::map<int, int>& node_groups) const {
  RunSummary out;

  std::map<int, std::pair<double, long>> delay_acc;   // node -> (sum, count)
  std::map<int, std::pair<long, long>> decode_acc;    // node -> (decoded, judged)
  for (const GenerationRow& row : generations) {
    if (row.status == "decoded" && row.request_time >= warmup_time && row.first_packet_time >= 0.0) {
      auto& [sum, cnt] = delay_acc[row.node];
      sum += row.decode_time - row.first_packet_time;
      cnt += 1;
    }
    if (row.request_time >= warmup_time && row.deadline <= horizon) {
      auto& [dec, tot] = decode_acc[row.node];
      tot += 1;
      if (row.status == "decoded") dec += 1;
    }
  }

  for (auto& [node, acc] : delay_acc)
    if (acc.second > 0) {
      out.avg_delay += acc.first / double(acc.second);
      out.delay_nodes += 1;
    }
  if (out.delay_nodes > 0) out.avg_delay /= out.delay_nodes;

  std::map<int, std::pair<double, int>> group_acc;
  for (auto& [node, acc] : decode_acc) {
    if (acc.second == 0) continue;
    const double pct = 100.0 * double(acc.first) / double(acc.second);
    out.avg_decoded_pct += pct;
    out.pct_nodes += 1;
    auto git = node_groups.find(node);
    if (git != node_groups.end()) {
      auto& [sum, cnt] = group_acc[git->second];
      sum += pct;
      cnt += 1;
    }
  }
  if (out.pct_nodes > 0) out.avg_decoded_pct /= out.pct_nodes;
  for (auto& [group, acc] : group_acc) out.group_decoded_pct[group] = acc.first / acc.second;

  for (const LinkTypeRow& row : link_rates) out.rate_per_type[row.type_mask] += row.measured_rate;
  return out;
}

void write_generation_csv(std::ostream& os, const MetricsSink& sink) {
  os << "node,generation,first_packet_time,decode_time,status\n";
  for (const GenerationRow& row : sink.generations) {
    os << row.node << "," << row.generation << ",";
    if (row.first_packet_time >= 0.0) os << row.first_packet_time;
    os << ",";
    if (row.decode_time >= 0.0) os << row.decode_time;
    os << "," << row.status << "\n";
  }
}

void write_link_rate_csv(std::ostream& os, const MetricsSink& sink) {
  os << "from,to,type_mask,requested_wire_rate,measured_rate\n";
  for (const LinkTypeRow& row : sink.link_rates)
    os << row.from << "," << row.to << "," << row.type_mask << "," << row.requested_wire_rate << ","
       << row.measured_rate << "\n";
}

}  // namespace ncsim::metrics
