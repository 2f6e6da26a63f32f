#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ncsim/types.hpp"

namespace ncsim {

struct Session {
  int id = 0;
  double source_rate = 0.0;  // packets/sec injected by the source
  int block_size = 0;        // packets per generation
};

struct Link {
  int index = 0;  // position in Topology::links
  int from = 0;   // node id
  int to = 0;     // node id
  double capacity = 0.0;  // packets/sec
  double loss = 0.0;      // packet loss probability in [0, 1)
  double prop_delay_s = 0.010;
};

struct Node {
  int id = 0;
  std::optional<int> subscription;    // session of interest; sources have none
  std::optional<int> source_session;  // set when the node is the source of a session
  int group = 0;                      // free-form tag used by generated topologies
  std::vector<int> in_links;          // indices into Topology::links
  std::vector<int> out_links;
  std::vector<int> parents;   // node ids
  std::vector<int> children;  // node ids
  double input_capacity = 0.0;  // sum of parent link capacities

  bool is_source() const { return source_session.has_value(); }
};

// Immutable after build(); safe for concurrent reads.
struct Topology {
  std::vector<Session> sessions;
  std::vector<Node> nodes;  // sorted by id
  std::vector<Link> links;

  const Node& node(int id) const;
  Node& node_mut(int id);
  bool has_node(int id) const;
  int node_pos(int id) const;  // index into nodes
  const Link& link_between(int from, int to) const;

  // Recomputes parents/children/in/out/input_capacity from the link list.
  void build();

  // Empty result means the graph is valid: directed acyclic, every non-source
  // node has at least one parent, and every subscribed session has a source.
  std::vector<std::string> validate() const;

  // Node ids in topological order (parents before children).
  std::vector<int> topological_order() const;
};

// Parses the line-oriented topology format:
//   # comment
//   param <name> <float>
//   session <id> rate <float> block <int>
//   node <id> [subscribes <session-id>] [group <int>]
//   source <session-id> at <node-id>
//   link <from> <to> capacity <float> loss <float> [prop <float-ms>]
// Numeric fields accept $name references resolved against param lines and
// the overrides map (overrides win). Parsing is locale-independent.
Topology parse_topology(const std::string& text, const std::map<std::string, double>& overrides = {});

Topology load_topology_file(const std::string& path, const std::map<std::string, double>& overrides = {});

std::string topology_to_text(const Topology& topo);

}  // namespace ncsim
