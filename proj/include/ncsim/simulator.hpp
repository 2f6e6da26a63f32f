#pragma once

#include <cstdint>
#include <optional>
#include <ostream>

#include "ncsim/metrics.hpp"
#include "ncsim/protocol.hpp"
#include "ncsim/scheduler.hpp"
#include "ncsim/topology.hpp"

namespace ncsim::sim {

enum class Mode { Inter, Intra };

struct TraceSinks {
  std::ostream* control = nullptr;    // one line per control message
  std::ostream* scheduler = nullptr;  // one line per generation event
};

struct SimConfig {
  double duration_s = 30.0;
  uint64_t seed = 1;
  Mode mode = Mode::Inter;
  proto::Params protocol;
  double alpha = 1.5;                 // undecoded-generation penalty
  double playback_delay_s = 1.4;
  uint32_t total_generations = 0xffffffffu;
  double measure_window_s = 2.0;      // innovative-rate measurement window
  int measure_subticks = 4;           // sliding sub-windows per window
  double measure_smoothing = 0.3;     // weight of history in the smoothed rate
  double report_hysteresis = 0.10;    // relative latch threshold for reports
  double report_hysteresis_up_frac = 0.4;  // upward threshold as a fraction of it
  double report_hysteresis_abs = 0.3; // packets/sec latch floor
  double warmup_frac = 0.4;           // head fraction excluded from averages
  int payload_bytes = 4;
  bool poisson_departures = false;    // exponential instead of even packet spacing
  bool pipelined_generations = false; // advance on self-decode, overlap generations
  bool audit = true;                  // re-check every optimization result
  bool verify_decode = false;         // extract and compare payloads on decode
  int debug_node = -1;                // dump this node's optimization inputs
  TraceSinks trace;
};

// Deterministic discrete-event run: identical (topology, config) pairs
// produce identical metrics.
metrics::MetricsSink run(const Topology& topo, const SimConfig& cfg);

// Deterministic content of one source packet's payload.
std::vector<uint8_t> source_payload(int session, uint32_t generation, int index, int payload_bytes);

}  // namespace ncsim::sim
