#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ncsim/rng.hpp"
#include "ncsim/simulator.hpp"
#include "ncsim/topology.hpp"

namespace ncsim::exp {

// Layered-cluster topology generator: per cluster a regular directed layered
// graph whose links are randomly pruned and shifted, the first and last
// clusters fed straight from the sources, middle clusters reached through
// capacity-limited cross links plus thin direct source links.
struct ClusterSpec {
  std::vector<int> sizes = {9, 12, 9};
  int layers = 3;
  int out_degree = 3;
  double prune = 0.4;
  double shift = 0.2;
  double intra_bw = 133.0;  // packets/sec inside a cluster
  double src_bw = 39.0;     // source-to-cluster links
  double cross_bw = 40.0;   // links between clusters
  double loss = 0.05;
  int num_sessions = 3;
  double source_rate = 20.0;
  int block = 10;
};

// key=value pairs separated by ';', e.g. "sizes=9,12,9;cross_bw=40;block=20".
ClusterSpec parse_cluster_spec(const std::string& text);

// Throws std::runtime_error when no valid draw exists within 100 attempts.
Topology generate_cluster_topology(const ClusterSpec& spec, Rng& rng);

struct ExperimentConfig {
  std::string topology_path;  // file-based topology...
  std::optional<ClusterSpec> cluster;  // ...or a generated one
  std::vector<sim::Mode> modes = {sim::Mode::Inter, sim::Mode::Intra};
  std::vector<uint64_t> seeds = {1};
  std::string sweep_name;             // topology param or ClusterSpec field
  std::vector<double> sweep_values;   // empty: single unswept run
  double duration_s = 30.0;
  double playback_delay_ms = 1400.0;
  double alpha = 1.5;
  double warmup_frac = 0.4;
  double round_period_s = 0.5;
  bool pipelined_generations = false;  // continuous-collection regime for delay studies
  double report_hysteresis_up_frac = 0.4;
  std::string out_dir;  // empty: keep results in memory only
  bool trace = false;
  int parallel_runs = 2;
};

struct RunKey {
  sim::Mode mode = sim::Mode::Inter;
  double sweep_value = 0.0;
  uint64_t seed = 0;
};

struct RunResult {
  RunKey key;
  metrics::MetricsSink sink;
  metrics::RunSummary summary;
};

struct AggregateRow {
  sim::Mode mode = sim::Mode::Inter;
  double sweep_value = 0.0;
  int runs = 0;
  double mean_delay = 0.0;
  double std_delay = 0.0;
  double mean_decoded_pct = 0.0;
  double std_decoded_pct = 0.0;
};

struct ExperimentResults {
  std::vector<RunResult> runs;
  std::vector<AggregateRow> aggregate;
};

// Expands sweep x seeds x modes, executes the runs (a few in parallel), and
// emits per-run metrics plus the aggregate table when out_dir is set.
// Rerunning an identical config reproduces identical files.
ExperimentResults run_experiment(const ExperimentConfig& cfg);

const char* mode_name(sim::Mode mode);

}  // namespace ncsim::exp
