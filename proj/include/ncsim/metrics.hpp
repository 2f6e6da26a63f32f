#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace ncsim::metrics {

struct GenerationRow {
  int node = 0;
  uint32_t generation = 0;
  double request_time = -1.0;
  double first_packet_time = -1.0;
  double decode_time = -1.0;
  double deadline = 0.0;
  std::string status;  // decoded | skipped | undecoded
};

struct LinkTypeRow {
  int from = 0;
  int to = 0;
  uint16_t type_mask = 0;
  double requested_wire_rate = 0.0;  // latest request on the link
  double measured_rate = 0.0;        // receiver-side innovative rate
};

struct ProtocolEvent {
  double time = 0.0;
  int node = 0;
  std::string event;  // optimized | converged | starved
  uint32_t round = 0;
  uint32_t min_parent_round = 0;
};

struct SchedulerEvent {
  double time = 0.0;
  int node = 0;
  std::string event;  // advance | skip | decode
  uint32_t generation = 0;
};

struct RunSummary {
  double avg_delay = 0.0;        // mean over nodes of mean per-generation decode delay
  int delay_nodes = 0;           // nodes contributing to avg_delay
  double avg_decoded_pct = 0.0;  // mean over nodes of decoded percentage
  int pct_nodes = 0;
  std::map<int, double> group_decoded_pct;  // topology group -> mean decoded pct
  std::map<uint16_t, double> rate_per_type;  // network innovative input rate
};

struct MetricsSink {
  std::vector<GenerationRow> generations;
  std::vector<LinkTypeRow> link_rates;
  std::vector<ProtocolEvent> protocol_events;
  std::vector<SchedulerEvent> scheduler_events;
  long audit_violations = 0;
  double worst_audit_residual = 0.0;
  bool all_converged = false;

  // Delay rows need request_time >= warmup; decoded percentages judge only
  // generations whose deadline fell inside the run.
  RunSummary summarize(double warmup_time, double horizon, const std::map<int, int>& node_groups) const;
};

void write_generation_csv(std::ostream& os, const MetricsSink& sink);
void write_link_rate_csv(std::ostream& os, const MetricsSink& sink);

}  // namespace ncsim::metrics
