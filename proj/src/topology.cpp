#include "ncsim/topology.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ncsim {

namespace {

int find_node_pos(const std::vector<Node>& nodes, int id) {
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return static_cast<int>(i);
  return -1;
}

}  // namespace

const Node& Topology::node(int id) const {
  int pos = find_node_pos(nodes, id);
  if (pos < 0) throw std::out_of_range("topology: unknown node " + std::to_string(id));
  return nodes[pos];
}

Node& Topology::node_mut(int id) {
  int pos = find_node_pos(nodes, id);
  if (pos < 0) throw std::out_of_range("topology: unknown node " + std::to_string(id));
  return nodes[pos];
}

bool Topology::has_node(int id) const { return find_node_pos(nodes, id) >= 0; }

int Topology::node_pos(int id) const {
  int pos = find_node_pos(nodes, id);
  if (pos < 0) throw std::out_of_range("topology: unknown node " + std::to_string(id));
  return pos;
}

const Link& Topology::link_between(int from, int to) const {
  for (const Link& l : links)
    if (l.from == from && l.to == to) return l;
  throw std::out_of_range("topology: no link " + std::to_string(from) + "->" + std::to_string(to));
}

void Topology::build() {
  std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
  for (Node& n : nodes) {
    n.in_links.clear();
    n.out_links.clear();
    n.parents.clear();
    n.children.clear();
    n.input_capacity = 0.0;
  }
  for (size_t i = 0; i < links.size(); ++i) {
    links[i].index = static_cast<int>(i);
    Node& from = node_mut(links[i].from);
    Node& to = node_mut(links[i].to);
    from.out_links.push_back(static_cast<int>(i));
    from.children.push_back(to.id);
    to.in_links.push_back(static_cast<int>(i));
    to.parents.push_back(from.id);
    to.input_capacity += links[i].capacity;
  }
}

std::vector<std::string> Topology::validate() const {
  std::vector<std::string> issues;

  for (const Link& l : links) {
    if (l.from == l.to) issues.push_back("self-loop on node " + std::to_string(l.from));
    if (l.capacity <= 0) issues.push_back("non-positive capacity on link " + std::to_string(l.from) + "->" + std::to_string(l.to));
    if (l.loss < 0 || l.loss >= 1.0) issues.push_back("loss probability outside [0,1) on link " + std::to_string(l.from) + "->" + std::to_string(l.to));
  }

  for (const Session& s : sessions) {
    if (s.source_rate <= 0) issues.push_back("session " + std::to_string(s.id) + " has non-positive rate");
    if (s.block_size < 1) issues.push_back("session " + std::to_string(s.id) + " has block size < 1");
  }

  // Subscribed sessions must have a source node somewhere.
  for (const Node& n : nodes) {
    if (n.subscription) {
      bool found = false;
      for (const Node& m : nodes)
        if (m.source_session && *m.source_session == *n.subscription) found = true;
      if (!found) issues.push_back("missing source for session " + std::to_string(*n.subscription));
      if (*n.subscription < 0 || *n.subscription >= static_cast<int>(sessions.size()))
        issues.push_back("node " + std::to_string(n.id) + " subscribes unknown session");
    }
    if (!n.is_source() && n.parents.empty())
      issues.push_back("orphan node " + std::to_string(n.id) + " (no parents and no source role)");
    if (n.is_source() && !n.parents.empty())
      issues.push_back("source node " + std::to_string(n.id) + " must not have parents");
  }

  // Cycle detection via Kahn's algorithm.
  std::map<int, int> indegree;
  for (const Node& n : nodes) indegree[n.id] = 0;
  for (const Link& l : links) indegree[l.to]++;
  std::deque<int> queue;
  for (auto& [id, deg] : indegree)
    if (deg == 0) queue.push_back(id);
  size_t seen = 0;
  while (!queue.empty()) {
    int id = queue.front();
    queue.pop_front();
    ++seen;
    for (int li : node(id).out_links)
      if (--indegree[links[li].to] == 0) queue.push_back(links[li].to);
  }
  if (seen != nodes.size()) {
    std::string cyclic = "cycle detected involving nodes:";
    for (auto& [id, deg] : indegree)
      if (deg > 0) cyclic += " " + std::to_string(id);
    issues.push_back(cyclic);
  }

  std::sort(issues.begin(), issues.end());
  issues.erase(std::unique(issues.begin(), issues.end()), issues.end());
  return issues;
}

std::vector<int> Topology::topological_order() const {
  std::map<int, int> indegree;
  for (const Node& n : nodes) indegree[n.id] = 0;
  for (const Link& l : links) indegree[l.to]++;
  std::deque<int> queue;
  for (const Node& n : nodes)
    if (indegree[n.id] == 0) queue.push_back(n.id);
  std::vector<int> order;
  while (!queue.empty()) {
    int id = queue.front();
    queue.pop_front();
    order.push_back(id);
    for (int li : node(id).out_links)
      if (--indegree[links[li].to] == 0) queue.push_back(links[li].to);
  }
  if (order.size() != nodes.size()) throw std::runtime_error("topology: topological order on cyclic graph");
  return order;
}

namespace {

class LineParser {
 public:
  LineParser(const std::string& text, const std::map<std::string, double>& overrides) : overrides_(overrides) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    // First pass: collect params so later lines may reference them.
    while (std::getline(in, line)) {
      ++lineno;
      auto tokens = tokenize(line);
      if (tokens.empty()) continue;
      if (tokens[0] == "param") {
        if (tokens.size() != 3) fail(lineno, "param expects: param <name> <value>");
        params_[tokens[1]] = parse_number_raw(tokens[2], lineno);
      }
    }
    for (auto& [k, v] : overrides_) params_[k] = v;

    std::istringstream in2(text);
    lineno = 0;
    while (std::getline(in2, line)) {
      ++lineno;
      auto tokens = tokenize(line);
      if (tokens.empty() || tokens[0] == "param") continue;
      handle(tokens, lineno);
    }
  }

  Topology take() {
    topo_.build();
    return std::move(topo_);
  }

 private:
  static std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
      if (c == '#') break;
      if (c == ' ' || c == '\t' || c == '\r') {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
  }

  [[noreturn]] static void fail(int lineno, const std::string& what) {
    throw std::invalid_argument("topology parse error at line " + std::to_string(lineno) + ": " + what);
  }

  static double parse_number_raw(const std::string& tok, int lineno) {
    double value = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) fail(lineno, "bad number '" + tok + "'");
    return value;
  }

  double parse_number(const std::string& tok, int lineno) const {
    if (!tok.empty() && tok[0] == '$') {
      auto it = params_.find(tok.substr(1));
      if (it == params_.end()) fail(lineno, "unknown param '" + tok + "'");
      return it->second;
    }
    return parse_number_raw(tok, lineno);
  }

  int parse_int(const std::string& tok, int lineno) const {
    double v = parse_number(tok, lineno);
    int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) fail(lineno, "expected integer, got '" + tok + "'");
    return i;
  }

  Node& ensure_node(int id) {
    for (Node& n : topo_.nodes)
      if (n.id == id) return n;
    Node n;
    n.id = id;
    topo_.nodes.push_back(n);
    return topo_.nodes.back();
  }

  void handle(const std::vector<std::string>& t, int lineno) {
    if (t[0] == "session") {
      if (t.size() != 6 || t[2] != "rate" || t[4] != "block") fail(lineno, "session expects: session <id> rate <f> block <i>");
      Session s;
      s.id = parse_int(t[1], lineno);
      s.source_rate = parse_number(t[3], lineno);
      s.block_size = parse_int(t[5], lineno);
      topo_.sessions.push_back(s);
    } else if (t[0] == "node") {
      if (t.size() < 2) fail(lineno, "node expects: node <id> [subscribes <s>] [group <g>]");
      Node& n = ensure_node(parse_int(t[1], lineno));
      size_t i = 2;
      while (i < t.size()) {
        if (t[i] == "subscribes" && i + 1 < t.size()) {
          n.subscription = parse_int(t[i + 1], lineno);
          i += 2;
        } else if (t[i] == "group" && i + 1 < t.size()) {
          n.group = parse_int(t[i + 1], lineno);
          i += 2;
        } else {
          fail(lineno, "unexpected token '" + t[i] + "'");
        }
      }
    } else if (t[0] == "source") {
      if (t.size() != 4 || t[2] != "at") fail(lineno, "source expects: source <session> at <node>");
      int session = parse_int(t[1], lineno);
      Node& n = ensure_node(parse_int(t[3], lineno));
      n.source_session = session;
    } else if (t[0] == "link") {
      if (t.size() < 7 || t[3] != "capacity" || t[5] != "loss") fail(lineno, "link expects: link <from> <to> capacity <f> loss <f> [prop <ms>]");
      Link l;
      l.from = parse_int(t[1], lineno);
      l.to = parse_int(t[2], lineno);
      l.capacity = parse_number(t[4], lineno);
      l.loss = parse_number(t[6], lineno);
      if (t.size() >= 9 && t[7] == "prop") l.prop_delay_s = parse_number(t[8], lineno) / 1000.0;
      else if (t.size() != 7) fail(lineno, "trailing tokens on link line");
      ensure_node(l.from);
      ensure_node(l.to);
      topo_.links.push_back(l);
    } else {
      fail(lineno, "unknown directive '" + t[0] + "'");
    }
  }

  std::map<std::string, double> params_;
  std::map<std::string, double> overrides_;
  Topology topo_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << v;
  return os.str();
}

}  // namespace

Topology parse_topology(const std::string& text, const std::map<std::string, double>& overrides) {
  LineParser p(text, overrides);
  Topology topo = p.take();
  // Sessions sorted by id; ids must be dense starting at 0.
  std::sort(topo.sessions.begin(), topo.sessions.end(), [](const Session& a, const Session& b) { return a.id < b.id; });
  for (size_t i = 0; i < topo.sessions.size(); ++i)
    if (topo.sessions[i].id != static_cast<int>(i))
      throw std::invalid_argument("topology: session ids must be 0..n-1 and unique");
  if (topo.sessions.size() > kMaxSessions) throw std::invalid_argument("topology: too many sessions");
  return topo;
}

Topology load_topology_file(const std::string& path, const std::map<std::string, double>& overrides) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open topology file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_topology(ss.str(), overrides);
}

std::string topology_to_text(const Topology& topo) {
  std::ostringstream os;
  for (const Session& s : topo.sessions)
    os << "session " << s.id << " rate " << fmt(s.source_rate) << " block " << s.block_size << "\n";
  for (const Node& n : topo.nodes) {
    os << "node " << n.id;
    if (n.subscription) os << " subscribes " << *n.subscription;
    if (n.group != 0) os << " group " << n.group;
    os << "\n";
  }
  for (const Node& n : topo.nodes)
    if (n.source_session) os << "source " << *n.source_session << " at " << n.id << "\n";
  for (const Link& l : topo.links) {
    os << "link " << l.from << " " << l.to << " capacity " << fmt(l.capacity) << " loss " << fmt(l.loss);
    if (l.prop_delay_s != 0.010) os << " prop " << fmt(l.prop_delay_s * 1000.0);
    os << "\n";
  }
  return os.str();
}

}  // namespace ncsim
