#include "ncsim/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <stdexcept>

namespace ncsim::exp {

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& tok) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw std::invalid_argument("bad number '" + tok + "'");
  return v;
}

}  // namespace

ClusterSpec parse_cluster_spec(const std::string& text) {
  ClusterSpec spec;
  if (text.empty()) return spec;
  for (const std::string& item : split(text, ';')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("cluster spec entries must be key=value: " + item);
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    if (key == "sizes") {
      spec.sizes.clear();
      for (auto& s : split(val, ',')) spec.sizes.push_back(int(parse_double(s)));
    } else if (key == "layers") spec.layers = int(parse_double(val));
    else if (key == "out_degree") spec.out_degree = int(parse_double(val));
    else if (key == "prune") spec.prune = parse_double(val);
    else if (key == "shift") spec.shift = parse_double(val);
    else if (key == "intra_bw") spec.intra_bw = parse_double(val);
    else if (key == "src_bw") spec.src_bw = parse_double(val);
    else if (key == "cross_bw") spec.cross_bw = parse_double(val);
    else if (key == "loss") spec.loss = parse_double(val);
    else if (key == "sessions") spec.num_sessions = int(parse_double(val));
    else if (key == "rate") spec.source_rate = parse_double(val);
    else if (key == "block") spec.block = int(parse_double(val));
    else throw std::invalid_argument("unknown cluster spec key: " + key);
  }
  return spec;
}

namespace {

bool apply_sweep_to_spec(ClusterSpec& spec, const std::string& name, double value) {
  if (name == "cross_bw") spec.cross_bw = value;
  else if (name == "intra_bw") spec.intra_bw = value;
  else if (name == "src_bw") spec.src_bw = value;
  else if (name == "prune") spec.prune = value;
  else if (name == "shift") spec.shift = value;
  else return false;
  return true;
}

}  // namespace

Topology generate_cluster_topology(const ClusterSpec& spec, Rng& rng) {
  if (spec.sizes.empty() || spec.layers < 2) throw std::invalid_argument("cluster spec: need sizes and >= 2 layers");
  std::string last_diagnostic = "no attempt made";
  for (int attempt = 0; attempt < 100; ++attempt) {
    Topology topo;
    for (int s = 0; s < spec.num_sessions; ++s) topo.sessions.push_back({s, spec.source_rate, spec.block});

    int next_id = 0;
    for (int s = 0; s < spec.num_sessions; ++s) {
      Node src;
      src.id = next_id++;
      src.source_session = s;
      topo.nodes.push_back(src);
    }

    const int num_clusters = static_cast<int>(spec.sizes.size());
    std::vector<std::vector<std::vector<int>>> layer_nodes(num_clusters);  // cluster -> layer -> ids
    for (int c = 0; c < num_clusters; ++c) {
      layer_nodes[c].resize(spec.layers);
      const int base = spec.sizes[c] / spec.layers;
      int extra = spec.sizes[c] % spec.layers;
      for (int l = 0; l < spec.layers; ++l) {
        int count = base + (extra > 0 ? 1 : 0);
        if (extra > 0) --extra;
        for (int i = 0; i < count; ++i) {
          Node user;
          user.id = next_id++;
          user.subscription = int(rng.next_below(uint32_t(spec.num_sessions)));
          user.group = c + 1;
          topo.nodes.push_back(user);
          layer_nodes[c][l].push_back(user.id);
        }
      }
    }

    auto add_link = [&](int from, int to, double cap) {
      for (const Link& l : topo.links)
        if (l.from == from && l.to == to) return;
      Link l;
      l.from = from;
      l.to = to;
      l.capacity = cap;
      l.loss = spec.loss;
      topo.links.push_back(l);
    };

    // regular layered core, then prune and shift
    for (int c = 0; c < num_clusters; ++c) {
      for (int l = 0; l + 1 < spec.layers; ++l) {
        const auto& cur = layer_nodes[c][l];
        const auto& next = layer_nodes[c][l + 1];
        if (next.empty()) continue;
        for (size_t iu = 0; iu < cur.size(); ++iu) {
          for (int o = 0; o < spec.out_degree && o < int(next.size()); ++o) {
            int target = next[(iu + size_t(o)) % next.size()];
            if (rng.next_double() < spec.prune) continue;
            if (rng.next_double() < spec.shift) {
              // same layer (only forward, to stay acyclic) or next layer
              std::vector<int> pool;
              for (size_t iv = iu + 1; iv < cur.size(); ++iv) pool.push_back(cur[iv]);
              for (int v : next) pool.push_back(v);
              if (!pool.empty()) target = pool[rng.next_below(uint32_t(pool.size()))];
            }
            if (target != cur[iu]) add_link(cur[iu], target, spec.intra_bw);
          }
        }
      }
    }

    // first and last clusters hang straight off the sources
    for (int c : {0, num_clusters - 1})
      for (int u : layer_nodes[c][0])
        for (int s = 0; s < spec.num_sessions; ++s) add_link(s, u, spec.src_bw);

    // middle clusters: cross links from the neighbours' last layers plus one
    // thin direct source link each
    for (int c = 1; c + 1 < num_clusters; ++c) {
      for (int u : layer_nodes[c][0]) {
        const auto& left = layer_nodes[c - 1][spec.layers - 1];
        const auto& right = layer_nodes[c + 1][spec.layers - 1];
        if (!left.empty()) add_link(left[rng.next_below(uint32_t(left.size()))], u, spec.cross_bw);
        if (!right.empty()) add_link(right[rng.next_below(uint32_t(right.size()))], u, spec.cross_bw);
      }
      for (int s = 0; s < spec.num_sessions; ++s) {
        const auto& first = layer_nodes[c][0];
        if (!first.empty()) add_link(s, first[rng.next_below(uint32_t(first.size()))], spec.src_bw);
      }
    }

    topo.build();
    auto issues = topo.validate();
    if (issues.empty()) return topo;
    last_diagnostic = issues.front();
  }
  throw std::runtime_error("cluster generation failed after 100 attempts: " + last_diagnostic);
}

const char* mode_name(sim::Mode mode) { return mode == sim::Mode::Inter ? "inter" : "intra"; }

namespace {

Topology topology_for_run(const ExperimentConfig& cfg, const std::string& sweep_name, double sweep_value,
                          uint64_t seed) {
  if (cfg.cluster) {
    ClusterSpec spec = *cfg.cluster;
    if (!sweep_name.empty() && !apply_sweep_to_spec(spec, sweep_name, sweep_value))
      throw std::invalid_argument("sweep parameter not recognized by the cluster generator: " + sweep_name);
    Rng rng = Rng::derive(seed, {0xc1u});
    return generate_cluster_topology(spec, rng);
  }
  std::map<std::string, double> overrides;
  if (!sweep_name.empty()) overrides[sweep_name] = sweep_value;
  return load_topology_file(cfg.topology_path, overrides);
}

std::string run_tag(const ExperimentConfig& cfg, const RunKey& key) {
  std::ostringstream os;
  os << mode_name(key.mode);
  if (!cfg.sweep_name.empty()) os << "_" << cfg.sweep_name << key.sweep_value;
  os << "_seed" << key.seed;
  return os.str();
}

}  // namespace

ExperimentResults run_experiment(const ExperimentConfig& cfg) {
  if (cfg.topology_path.empty() == !cfg.cluster.has_value())
    throw std::invalid_argument("exactly one of topology path or cluster spec required");
  if (cfg.seeds.empty()) throw std::invalid_argument("at least one seed required");
  for (double v : cfg.sweep_values)
    if (v <= 0) throw std::invalid_argument("sweep values must be positive");
  if (cfg.playback_delay_ms < 0) throw std::invalid_argument("playback delay must be nonnegative");

  std::vector<double> sweep = cfg.sweep_values;
  if (sweep.empty()) sweep.push_back(0.0);

  std::vector<RunKey> keys;
  for (double value : sweep)
    for (sim::Mode mode : cfg.modes)
      for (uint64_t seed : cfg.seeds) keys.push_back({mode, value, seed});

  auto execute = [&](const RunKey& key) {
    Topology topo = topology_for_run(cfg, cfg.sweep_name, key.sweep_value, key.seed);
    sim::SimConfig sc;
    sc.duration_s = cfg.duration_s;
    sc.seed = key.seed;
    sc.mode = key.mode;
    sc.alpha = cfg.alpha;
    sc.playback_delay_s = cfg.playback_delay_ms / 1000.0;
    sc.warmup_frac = cfg.warmup_frac;
    sc.protocol.period_s = cfg.round_period_s;
    sc.pipelined_generations = cfg.pipelined_generations;
    sc.report_hysteresis_up_frac = cfg.report_hysteresis_up_frac;
    RunResult result;
    result.key = key;
    result.sink = sim::run(topo, sc);
    std::map<int, int> groups;
    for (const Node& n : topo.nodes) groups[n.id] = n.group;
    result.summary = result.sink.summarize(cfg.warmup_frac * cfg.duration_s, cfg.duration_s, groups);
    return result;
  };

  ExperimentResults results;
  results.runs.resize(keys.size());
  const int workers = std::max(1, cfg.parallel_runs);
  for (size_t base = 0; base < keys.size(); base += size_t(workers)) {
    std::vector<std::future<RunResult>> batch;
    for (size_t i = base; i < std::min(keys.size(), base + size_t(workers)); ++i)
      batch.push_back(std::async(std::launch::async, execute, keys[i]));
    for (size_t i = 0; i < batch.size(); ++i) {
      try {
        results.runs[base + i] = batch[i].get();
      } catch (const std::exception& e) {
        const RunKey& key = keys[base + i];
        std::ostringstream os;
        os << "run failed (mode=" << mode_name(key.mode) << ", sweep=" << key.sweep_value << ", seed=" << key.seed
           << "): " << e.what();
        throw std::runtime_error(os.str());
      }
    }
  }

  // aggregate by (mode, sweep value)
  for (double value : sweep)
    for (sim::Mode mode : cfg.modes) {
      AggregateRow row;
      row.mode = mode;
      row.sweep_value = value;
      std::vector<double> delays, pcts;
      for (const RunResult& run : results.runs)
        if (run.key.mode == mode && run.key.sweep_value == value) {
          delays.push_back(run.summary.avg_delay);
          pcts.push_back(run.summary.avg_decoded_pct);
        }
      row.runs = int(delays.size());
      auto mean_of = [](const std::vector<double>& xs) {
        double m = 0.0;
        for (double x : xs) m += x;
        return xs.empty() ? 0.0 : m / double(xs.size());
      };
      auto std_of = [&](const std::vector<double>& xs, double mean) {
        if (xs.size() < 2) return 0.0;
        double acc = 0.0;
        for (double x : xs) acc += (x - mean) * (x - mean);
        return std::sqrt(acc / double(xs.size() - 1));
      };
      row.mean_delay = mean_of(delays);
      row.std_delay = std_of(delays, row.mean_delay);
      row.mean_decoded_pct = mean_of(pcts);
      row.std_decoded_pct = std_of(pcts, row.mean_decoded_pct);
      results.aggregate.push_back(row);
    }

  if (!cfg.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    for (const RunResult& run : results.runs) {
      const std::string tag = run_tag(cfg, run.key);
      std::ofstream gen_csv(cfg.out_dir + "/run_" + tag + ".csv");
      metrics::write_generation_csv(gen_csv, run.sink);
      std::ofstream link_csv(cfg.out_dir + "/links_" + tag + ".csv");
      metrics::write_link_rate_csv(link_csv, run.sink);
    }
    std::ofstream summary(cfg.out_dir + "/summary.csv");
    summary << "mode,bandwidth_param,seed,avg_delay,avg_decoded_pct,audit_violations,converged";
    std::vector<uint16_t> masks;
    if (!results.runs.empty())
      for (auto& [mask, rate] : results.runs.front().summary.rate_per_type) masks.push_back(mask);
    for (uint16_t mask : masks) summary << ",rate_" << PacketType(mask).name();
    summary << "\n";
    for (const RunResult& run : results.runs) {
      summary << mode_name(run.key.mode) << "," << run.key.sweep_value << "," << run.key.seed << ","
              << run.summary.avg_delay << "," << run.summary.avg_decoded_pct << "," << run.sink.audit_violations
              << "," << (run.sink.all_converged ? 1 : 0);
      for (uint16_t mask : masks) {
        auto it = run.summary.rate_per_type.find(mask);
        summary << "," << (it == run.summary.rate_per_type.end() ? 0.0 : it->second);
      }
      summary << "\n";
    }
    std::ofstream agg(cfg.out_dir + "/aggregate.csv");
    agg << "mode,bandwidth_param,runs,mean_delay,std_delay,mean_decoded_pct,std_decoded_pct\n";
    for (const AggregateRow& row : results.aggregate)
      agg << mode_name(row.mode) << "," << row.sweep_value << "," << row.runs << "," << row.mean_delay << ","
          << row.std_delay << "," << row.mean_decoded_pct << "," << row.std_decoded_pct << "\n";
  }
  return results;
}

}  // namespace ncsim::exp
