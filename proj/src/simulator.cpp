#include "ncsim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>
#include <set>
#include <stdexcept>

#include "ncsim/coding.hpp"
#include "ncsim/delay_model.hpp"

namespace ncsim::sim {

namespace {

enum class EventKind { ProtocolTick, ControlDelivery, TransmitDue, PacketArrival, MeasureTick, BoundaryDue };

struct Event {
  double time = 0.0;
  uint64_t seq = 0;
  EventKind kind = EventKind::MeasureTick;
  int subject = 0;  // node id or link index
  uint16_t type_mask = 0;
  uint64_t epoch = 0;
  proto::ControlMessage msg;
  CodedPacket packet;
};

struct EventLater {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

// Innovative-rate measurement normalized by active collecting time: counts
// rank-increasing arrivals per generation between the first and last
// innovative packet, aggregated over the generations spanning the
// measurement window. This reports the deliverable (fluid) availability even
// while a decoded generation waits for downstream nodes, when wall-clock
// windows would decay toward zero. Reports are exponentially smoothed and
// pass through a small hysteresis latch so steady-state snapshots repeat
// bit-identically across optimization rounds.
struct RateReport {
  double smoothed = -1.0;
  double latched = 0.0;

  void update(double sample, double smoothing, double hyst_rel, double hyst_abs, double up_frac) {
    smoothed = smoothed < 0.0 ? sample : (1.0 - smoothing) * sample + smoothing * smoothed;
    // rises latch eagerly so reported availability settles at true capability;
    // drops need conviction so loss noise cannot destabilize converged rounds
    const double up = std::max(up_frac * hyst_rel * std::abs(latched), hyst_abs);
    const double down = std::max(hyst_rel * std::abs(latched), hyst_abs);
    if (smoothed - latched > up || latched - smoothed > down) latched = smoothed;
  }
};

struct ActivityMeter {
  // Innovative inter-arrival tally for one (link, type) within one
  // generation: `count` arrivals between `first` and `last`.
  struct Burst {
    double first = -1.0;
    double last = -1.0;
    long count = 0;
  };
  struct Span {
    std::vector<std::map<uint16_t, Burst>> bursts;  // per in-link position
  };
  Span open;
  std::deque<Span> ring;
  double ring_window_s = 2.0;  // retain spans while their bursts cover this much active time

  void note_innovative(size_t link_pos, uint16_t mask, double now) {
    Burst& b = open.bursts[link_pos][mask];
    if (b.first < 0.0) b.first = now;
    b.last = now;
    b.count += 1;
  }

  static double span_duration(const Span& span) {
    double d = 0.0;
    for (auto& per_link : span.bursts)
      for (auto& [mask, b] : per_link)
        if (b.count >= 2) d = std::max(d, b.last - b.first);
    return d;
  }

  void close_span() {
    const size_t links = open.bursts.size();
    bool any = false;
    for (auto& per_link : open.bursts) any |= !per_link.empty();
    if (any) {
      ring.push_back(open);
      double total = 0.0;
      for (auto it = ring.rbegin(); it != ring.rend(); ++it) total += span_duration(*it);
      while (ring.size() > 1 && (total - span_duration(ring.front()) >= ring_window_s || ring.size() > 64)) {
        total -= span_duration(ring.front());
        ring.pop_front();
      }
    }
    open = Span{};
    open.bursts.resize(links);
  }

  // (count-1)/duration pooled over the retained generations: the innovative
  // inter-arrival rate while content remained to deliver. This reads the
  // deliverable rate of the flow rather than the generation-pacing throughput.
  double rate(size_t link_pos, uint16_t mask) const {
    double duration = 0.0;
    long gaps = 0;
    auto absorb = [&](const Span& span) {
      auto it = span.bursts[link_pos].find(mask);
      if (it == span.bursts[link_pos].end()) return;
      const Burst& b = it->second;
      if (b.count >= 2 && b.last > b.first + 1e-9) {
        duration += b.last - b.first;
        gaps += b.count - 1;
      }
    };
    for (const Span& span : ring) absorb(span);
    absorb(open);
    return duration > 1e-9 ? double(gaps) / duration : 0.0;
  }

  std::set<uint16_t> masks(size_t link_pos) const {
    std::set<uint16_t> out;
    for (const Span& span : ring)
      for (auto& [mask, b] : span.bursts[link_pos]) out.insert(mask);
    for (auto& [mask, b] : open.bursts[link_pos]) out.insert(mask);
    return out;
  }
};

struct TxState {
  double rate = 0.0;
  uint64_t epoch = 0;
};

struct OutLinkState {
  uint32_t generation = 0;
  std::map<uint16_t, TxState> tx;
};

struct NodeRuntime {
  const Node* node = nullptr;
  bool is_source = false;
  int source_session = -1;

  std::map<uint32_t, DecoderState> decoders;
  uint32_t input_gen = 0;
  ActivityMeter meter;
  std::vector<std::map<uint16_t, RateReport>> reports;  // per in-link position
  std::vector<OutLinkState> out;                        // per out-link position

  proto::ProtocolState pstate;
  proto::LocalContext ctx;
  bool round_in_flight = false;
  int pending_replies = 0;
  proto::RoundInbox inbox;

  std::optional<sched::GenerationScheduler> scheduler;
  uint64_t boundary_epoch = 0;
  std::set<uint32_t> decoded_gens;
  std::map<int, uint32_t> parent_gen;  // parents' announced input generations

  Rng coeff_rng{0}, loss_rng{0}, jitter_rng{0};
};

struct Engine {
  const Topology& topo;
  const SimConfig& cfg;
  metrics::MetricsSink sink;

  std::priority_queue<Event, std::vector<Event>, EventLater> queue;
  uint64_t next_seq = 0;
  double now = 0.0;

  std::vector<NodeRuntime> nodes;  // by node position in topo.nodes
  std::map<int, int> node_pos;     // node id -> position
  std::vector<PacketType> universe;
  GenerationLayout layout;

  Engine(const Topology& t, const SimConfig& c)
      : topo(t), cfg(c), layout([&] {
          std::vector<int> b;
          for (const Session& s : t.sessions) b.push_back(s.block_size);
          return b;
        }()) {}

  void push(Event e) {
    e.seq = next_seq++;
    if (e.time < now - 1e-9) throw std::logic_error("simulator: event scheduled in the past");
    e.time = std::max(e.time, now);
    queue.push(std::move(e));
  }

  NodeRuntime& rt(int node_id) { return nodes[node_pos.at(node_id)]; }

  int in_link_pos(const NodeRuntime& r, int link_index) const {
    for (size_t i = 0; i < r.node->in_links.size(); ++i)
      if (r.node->in_links[i] == link_index) return static_cast<int>(i);
    throw std::logic_error("simulator: link is not an input of the node");
  }

  int out_link_pos(const NodeRuntime& r, int link_index) const {
    for (size_t i = 0; i < r.node->out_links.size(); ++i)
      if (r.node->out_links[i] == link_index) return static_cast<int>(i);
    throw std::logic_error("simulator: link is not an output of the node");
  }

  double gen_duration(const NodeRuntime& r) const {
    const int session = r.node->subscription ? *r.node->subscription : 0;
    return double(topo.sessions[session].block_size) / topo.sessions[session].source_rate;
  }

  // ---- setup ---------------------------------------------------------------

  void init() {
    universe = cfg.mode == Mode::Inter ? all_types(int(topo.sessions.size()))
                                       : singleton_types(int(topo.sessions.size()));

    nodes.resize(topo.nodes.size());
    for (size_t i = 0; i < topo.nodes.size(); ++i) node_pos[topo.nodes[i].id] = static_cast<int>(i);

    for (size_t i = 0; i < topo.nodes.size(); ++i) {
      const Node& n = topo.nodes[i];
      NodeRuntime& r = nodes[i];
      r.node = &n;
      r.is_source = n.is_source();
      r.source_session = n.source_session.value_or(-1);
      r.meter.open.bursts.resize(n.in_links.size());
      r.reports.resize(n.in_links.size());
      r.out.resize(n.out_links.size());
      r.coeff_rng = Rng::derive(cfg.seed, {uint64_t(n.id), 1});
      r.loss_rng = Rng::derive(cfg.seed, {uint64_t(n.id), 2});
      r.jitter_rng = Rng::derive(cfg.seed, {uint64_t(n.id), 3});

      r.ctx.node_id = n.id;
      r.ctx.subscription = n.subscription;
      r.ctx.input_capacity = n.input_capacity;
      r.ctx.universe = universe;
      for (const Session& s : topo.sessions) r.ctx.sessions.push_back({s.source_rate, s.block_size});
      for (int li : n.in_links)
        r.ctx.parents.push_back({topo.links[li].from, topo.links[li].capacity, topo.links[li].loss});
      for (int li : n.out_links)
        r.ctx.children.push_back({topo.links[li].to, topo.links[li].capacity, topo.links[li].loss});

      r.pstate.params = cfg.protocol;
      if (r.is_source) {
        r.pstate.round = proto::kRoundInf;
      } else {
        sched::Params sp;
        sp.alpha = cfg.alpha;
        sp.playback_delay_s = cfg.playback_delay_s;
        sp.generation_duration_s = gen_duration(r);
        sp.total_generations = cfg.total_generations;
        sp.estimate_from_start = false;  // samples begin once rates exist
        sp.wait_for_children = !cfg.pipelined_generations;
        r.scheduler.emplace(sp, n.children);
        r.meter.ring_window_s = cfg.measure_window_s;
      }
    }

    for (NodeRuntime& r : nodes) {
      if (r.is_source) continue;
      handle_sched_actions(r, r.scheduler->start(0.0));
      Event tick;
      tick.kind = EventKind::ProtocolTick;
      tick.subject = r.node->id;
      tick.time = next_tick_time(r);
      push(std::move(tick));
    }
    Event mt;
    mt.kind = EventKind::MeasureTick;
    mt.time = sub_window();
    push(std::move(mt));
  }

  double next_tick_time(NodeRuntime& r) {
    const double jitter = 1.0 + cfg.protocol.jitter_frac * (2.0 * r.jitter_rng.next_double() - 1.0);
    return now + cfg.protocol.period_s * jitter;
  }

  // ---- control plane -------------------------------------------------------

  static const char* kind_name(proto::MessageKind kind) {
    switch (kind) {
      case proto::MessageKind::RoundQuery: return "round_query";
      case proto::MessageKind::RoundReply: return "round_reply";
      case proto::MessageKind::ParentReport: return "parent_report";
      case proto::MessageKind::ChildReport: return "child_report";
      case proto::MessageKind::RateRequest: return "rate_request";
      case proto::MessageKind::GenerationAdvance: return "generation_advance";
      case proto::MessageKind::GenerationFeedback: return "generation_feedback";
    }
    return "unknown";
  }

  void send(proto::ControlMessage msg, double delay) {
    if (cfg.trace.control) {
      std::ostream& os = *cfg.trace.control;
      os << now << " " << kind_name(msg.kind) << " " << msg.from << " " << msg.to;
      switch (msg.kind) {
        case proto::MessageKind::RoundReply:
          os << " round=" << (msg.round == proto::kRoundInf ? -1 : int(msg.round));
          break;
        case proto::MessageKind::ParentReport:
        case proto::MessageKind::ChildReport:
        case proto::MessageKind::RateRequest:
          os << " total=" << msg.rates.total();
          break;
        case proto::MessageKind::GenerationAdvance:
          os << " gen=" << msg.generation;
          break;
        case proto::MessageKind::GenerationFeedback:
          os << " gen=" << msg.generation << (msg.decoded ? " decoded" : " released");
          break;
        default:
          break;
      }
      os << "\n";
    }
    Event e;
    e.kind = EventKind::ControlDelivery;
    e.time = now + delay;
    e.subject = msg.to;
    e.msg = std::move(msg);
    push(std::move(e));
  }

  double link_delay(int a, int b) const {
    for (const Link& l : topo.links)
      if ((l.from == a && l.to == b) || (l.from == b && l.to == a)) return l.prop_delay_s;
    return 0.010;
  }

  TypeVector measured_input_rates(const NodeRuntime& r, int exclude_link = -1) const {
    TypeVector tv(int(topo.sessions.size()));
    if (r.is_source) {
      tv.at(PacketType::singleton(r.source_session)) = topo.sessions[r.source_session].source_rate;
      return tv;
    }
    for (size_t pos = 0; pos < r.reports.size(); ++pos) {
      if (exclude_link >= 0 && r.node->in_links[pos] == exclude_link) continue;
      for (auto& [mask, rep] : r.reports[pos]) tv.v[mask] += rep.latched;
    }
    return tv;
  }

  void on_protocol_tick(NodeRuntime& r) {
    if (r.pstate.round == proto::kRoundInf || r.pstate.round >= cfg.protocol.l_max) return;
    Event tick;
    tick.kind = EventKind::ProtocolTick;
    tick.subject = r.node->id;
    tick.time = next_tick_time(r);
    push(std::move(tick));

    if (r.round_in_flight) return;
    r.round_in_flight = true;
    r.inbox = {};
    r.pending_replies = 2 * int(r.node->parents.size()) + int(r.node->children.size());
    if (r.pending_replies == 0) {
      r.round_in_flight = false;
      return;  // no neighborhood to optimize against
    }
    for (int p : r.node->parents) {
      proto::ControlMessage q;
      q.kind = proto::MessageKind::RoundQuery;
      q.from = r.node->id;
      q.to = p;
      send(std::move(q), link_delay(p, r.node->id));
    }
    for (int c : r.node->children) {
      proto::ControlMessage q;
      q.kind = proto::MessageKind::RoundQuery;
      q.from = r.node->id;
      q.to = c;
      send(std::move(q), link_delay(r.node->id, c));
    }
  }

  void answer_query(NodeRuntime& r, const proto::ControlMessage& q) {
    const bool asker_is_child = std::count(r.node->children.begin(), r.node->children.end(), q.from) > 0;
    const bool asker_is_parent = std::count(r.node->parents.begin(), r.node->parents.end(), q.from) > 0;
    const double delay = link_delay(q.from, r.node->id);
    if (asker_is_child) {
      proto::ControlMessage reply;
      reply.kind = proto::MessageKind::RoundReply;
      reply.from = r.node->id;
      reply.to = q.from;
      reply.round = r.pstate.round;
      send(std::move(reply), delay);
      proto::ControlMessage report;
      report.kind = proto::MessageKind::ParentReport;
      report.from = r.node->id;
      report.to = q.from;
      report.rates = measured_input_rates(r);
      send(std::move(report), delay);
    } else if (asker_is_parent) {
      int link_from_asker = -1;
      for (int li : r.node->in_links)
        if (topo.links[li].from == q.from) link_from_asker = li;
      proto::ControlMessage report;
      report.kind = proto::MessageKind::ChildReport;
      report.from = r.node->id;
      report.to = q.from;
      report.rates = measured_input_rates(r, link_from_asker);
      report.subscription = r.node->subscription.value_or(-1);
      report.input_capacity = r.node->input_capacity;
      send(std::move(report), delay);
    }
  }

  void on_control(NodeRuntime& r, const proto::ControlMessage& msg) {
    switch (msg.kind) {
      case proto::MessageKind::RoundQuery:
        answer_query(r, msg);
        break;
      case proto::MessageKind::RoundReply:
        if (r.round_in_flight) {
          r.inbox.parent_rounds[msg.from] = msg.round;
          if (--r.pending_replies == 0) finish_round(r);
        }
        break;
      case proto::MessageKind::ParentReport:
        if (r.round_in_flight) {
          r.inbox.parent_reports[msg.from] = msg.rates;
          if (--r.pending_replies == 0) finish_round(r);
        }
        break;
      case proto::MessageKind::ChildReport:
        if (r.round_in_flight) {
          proto::ChildReportData data;
          data.side_supply = msg.rates;
          data.subscription = msg.subscription;
          data.input_capacity = msg.input_capacity;
          r.inbox.child_reports[msg.from] = std::move(data);
          if (--r.pending_replies == 0) finish_round(r);
        }
        break;
      case proto::MessageKind::RateRequest:
        apply_rate_request(r, msg);
        break;
      case proto::MessageKind::GenerationAdvance:
        if (std::count(r.node->parents.begin(), r.node->parents.end(), msg.from)) {
          // a parent announcing its own input moved forward
          uint32_t& known = r.parent_gen[msg.from];
          known = std::max(known, msg.generation);
          update_release_hold(r);
        } else {
          for (size_t pos = 0; pos < r.node->out_links.size(); ++pos)
            if (topo.links[r.node->out_links[pos]].to == msg.from && r.out[pos].generation < msg.generation) {
              r.out[pos].generation = msg.generation;
              for (auto& [mask, tx] : r.out[pos].tx)
                if (tx.rate > 0.0) {
                  tx.epoch++;
                  schedule_transmit(r, int(pos), mask, tx);
                }
            }
          gc_decoders(r);
        }
        break;
      case proto::MessageKind::GenerationFeedback:
        if (r.scheduler)
          handle_sched_actions(r, r.scheduler->on_child_feedback(msg.from, msg.generation, msg.decoded, now));
        break;
    }
  }

  void finish_round(NodeRuntime& r) {
    r.round_in_flight = false;
    const uint32_t round_before = r.pstate.round;
    const double pred_before = r.pstate.has_allocation ? r.pstate.current.avg_delay : -1.0;
    auto outcome = proto::try_round(r.pstate, r.inbox, r.ctx);
    if (cfg.debug_node == r.node->id && outcome.optimized) {
      fprintf(stderr, "t=%.2f node %d round=%u starved=%d memo=%d self=%s avg=%.4f self_d=%.4f\n", now, r.node->id,
              r.pstate.round, int(outcome.starved), int(outcome.memo_hit),
              r.pstate.current.best.self.name().c_str(), r.pstate.current.avg_delay, r.pstate.current.self_delay);
      for (auto& pe : outcome.snapshot.parents) {
        fprintf(stderr, "  parent %d R:", pe.node_id);
        for (size_t m = 1; m < pe.available.v.size(); ++m)
          if (pe.available.v[m] > 0.01) fprintf(stderr, " %s=%.1f", PacketType(uint16_t(m)).name().c_str(), pe.available.v[m]);
        fprintf(stderr, "\n");
      }
      for (auto& ce : outcome.snapshot.children) {
        fprintf(stderr, "  child %d g=%d side:", ce.node_id, ce.subscription);
        for (size_t m = 1; m < ce.side_supply.v.size(); ++m)
          if (ce.side_supply.v[m] > 0.01) fprintf(stderr, " %s=%.1f", PacketType(uint16_t(m)).name().c_str(), ce.side_supply.v[m]);
        fprintf(stderr, "\n");
      }
      if (!outcome.starved)
        for (size_t k = 0; k < outcome.snapshot.parents.size(); ++k) {
          fprintf(stderr, "  req from %d:", outcome.snapshot.parents[k].node_id);
          for (size_t m = 1; m < r.pstate.current.wire_in[k].v.size(); ++m)
            if (r.pstate.current.wire_in[k].v[m] > 0.01)
              fprintf(stderr, " %s=%.1f", PacketType(uint16_t(m)).name().c_str(), r.pstate.current.wire_in[k].v[m]);
          fprintf(stderr, "\n");
        }
    }
    if (!outcome.optimized) return;
    if (!outcome.starved && r.scheduler) {
      r.scheduler->enable_estimation();
      // markedly better predictions mean the old decode-time samples came
      // from a worse transfer regime
      if (pred_before > 0.0 && r.pstate.current.avg_delay < 0.75 * pred_before) r.scheduler->reset_estimation();
    }
    sink.protocol_events.push_back({now, r.node->id, "optimized", round_before, outcome.min_parent_round});
    if (outcome.starved) sink.protocol_events.push_back({now, r.node->id, "starved", round_before, 0});
    if (outcome.reached_inf) sink.protocol_events.push_back({now, r.node->id, "converged", r.pstate.round, 0});
    if (cfg.audit && !outcome.starved && !outcome.memo_hit) {
      auto audit = alloc::audit_constraints(outcome.snapshot, r.pstate.current.rates);
      sink.audit_violations += long(audit.violations.size());
      sink.worst_audit_residual = std::max(sink.worst_audit_residual, audit.worst_residual);
      if (cfg.debug_node == -2 && !audit.violations.empty()) {
        fprintf(stderr, "AUDIT node %d t=%.2f:\n", r.node->id, now);
        for (auto& v : audit.violations) fprintf(stderr, "  %s\n", v.c_str());
      }
    }
    for (auto& [parent, wire] : outcome.rate_requests) {
      proto::ControlMessage req;
      req.kind = proto::MessageKind::RateRequest;
      req.from = r.node->id;
      req.to = parent;
      req.rates = wire;
      send(std::move(req), link_delay(parent, r.node->id));
    }
  }

  void apply_rate_request(NodeRuntime& r, const proto::ControlMessage& msg) {
    for (size_t pos = 0; pos < r.node->out_links.size(); ++pos) {
      if (topo.links[r.node->out_links[pos]].to != msg.from) continue;
      OutLinkState& ol = r.out[pos];
      for (PacketType t : universe) {
        const double f = msg.rates.at(t);
        TxState& tx = ol.tx[t.mask];
        if (std::abs(f - tx.rate) < 1e-9) continue;
        tx.rate = f;
        tx.epoch++;
        if (f > 0.0) schedule_transmit(r, int(pos), t.mask, tx);
      }
    }
  }

  void schedule_transmit(NodeRuntime& r, int out_pos, uint16_t mask, const TxState& tx) {
    Event e;
    e.kind = EventKind::TransmitDue;
    e.subject = r.node->out_links[out_pos];
    e.type_mask = mask;
    e.epoch = tx.epoch;
    e.time = now + 1.0 / tx.rate;
    push(std::move(e));
  }

  // ---- data plane ----------------------------------------------------------

  // Pipelined release gate: the buffer for the current generation is
  // complete once it spans the full blocks of every session the node is
  // actively requesting; only then may the node move on while children
  // continue draining the retained buffer.
  bool buffer_complete(NodeRuntime& r) {
    if (!r.pstate.has_allocation) return true;
    auto it = r.decoders.find(r.input_gen);
    if (it == r.decoders.end()) return false;
    uint16_t sessions = 0;
    for (const TypeVector& wire : r.pstate.current.wire_in)
      for (PacketType t : universe)
        if (wire.at(t) >= 0.5) sessions |= t.mask;
    if (sessions == 0) return true;
    int needed = 0;
    for (int sess = 0; sess < int(topo.sessions.size()); ++sess)
      if ((sessions >> sess) & 1) needed += topo.sessions[sess].block_size;
    return it->second.rank() >= needed;
  }

  // every parent we actively request from can already serve this generation
  bool parents_ready(NodeRuntime& r, uint32_t gen) {
    if (!r.pstate.has_allocation) return true;
    for (size_t pos = 0; pos < r.node->in_links.size(); ++pos) {
      const int parent = topo.links[r.node->in_links[pos]].from;
      if (rt(parent).is_source) continue;
      if (pos < r.pstate.current.wire_in.size() && r.pstate.current.wire_in[pos].total() < 0.5) continue;
      auto it = r.parent_gen.find(parent);
      if ((it == r.parent_gen.end() ? 0u : it->second) < gen) return false;
    }
    return true;
  }

  void update_release_hold(NodeRuntime& r) {
    if (!cfg.pipelined_generations || !r.scheduler) return;
    const bool hold = (!r.node->children.empty() && !buffer_complete(r)) ||
                      !parents_ready(r, r.input_gen + 1);
    r.scheduler->set_release_hold(hold);
    if (!hold) handle_sched_actions(r, r.scheduler->poke(now));
  }

  DecoderState* generation_buffer(NodeRuntime& r, uint32_t gen) {
    if (r.is_source) {
      if (gen >= cfg.total_generations) return nullptr;
      // the stream is produced in real time: a block exists only once the
      // source has emitted its packets
      const Session& s = topo.sessions[r.source_session];
      if (now < double(gen) * double(s.block_size) / s.source_rate) return nullptr;
      auto it = r.decoders.find(gen);
      if (it == r.decoders.end()) {
        DecoderState dec(layout, gen);
        for (int i = 0; i < layout.block_size(r.source_session); ++i)
          dec.insert(make_source_packet(layout, gen, r.source_session, i,
                                        source_payload(r.source_session, gen, i, cfg.payload_bytes)));
        it = r.decoders.emplace(gen, std::move(dec)).first;
      }
      return &it->second;
    }
    auto it = r.decoders.find(gen);
    return it == r.decoders.end() ? nullptr : &it->second;
  }

  // Requested wire rates shape the steady flow; a receiver that has fallen
  // behind the sender's own frontier is served at up to twice the rate,
  // within the link capacity, so one missed window does not cascade.
  double effective_rate(const NodeRuntime& sender, const Link& link, const OutLinkState& ol, double base) const {
    uint32_t frontier = sender.input_gen;
    if (sender.is_source) {
      const Session& sess = topo.sessions[sender.source_session];
      frontier = uint32_t(std::max(0.0, now * sess.source_rate / sess.block_size));
    }
    bool behind = frontier > ol.generation;
    if (!behind) {
      // final stretch before this generation's deadline
      double gen_dur = 1e300;
      for (const Session& sess : topo.sessions) gen_dur = std::min(gen_dur, sess.block_size / sess.source_rate);
      const double deadline = cfg.playback_delay_s + (double(ol.generation) + 1.0) * gen_dur;
      behind = now > deadline - 0.5 * gen_dur;
    }
    if (!behind) return base;
    double requested = 0.0;
    for (auto& [mask, tx] : ol.tx) requested += tx.rate;
    const double factor = requested > 0.0 ? std::clamp(link.capacity / requested, 1.0, 4.0) : 1.0;
    return base * factor;
  }

  void on_transmit_due(const Event& e) {
    const Link& link = topo.links[e.subject];
    NodeRuntime& r = rt(link.from);
    OutLinkState& ol = r.out[out_link_pos(r, e.subject)];
    auto txit = ol.tx.find(e.type_mask);
    if (txit == ol.tx.end() || txit->second.epoch != e.epoch || txit->second.rate <= 0.0) return;

    DecoderState* buffer = generation_buffer(r, ol.generation);
    if (buffer != nullptr) {
      auto pkt = buffer->mix(PacketType(e.type_mask), r.coeff_rng);
      if (pkt && !r.loss_rng.next_bernoulli(link.loss)) {
        Event arrival;
        arrival.kind = EventKind::PacketArrival;
        arrival.subject = e.subject;
        arrival.packet = std::move(*pkt);
        arrival.time = now + link.prop_delay_s;
        push(std::move(arrival));
      }
    }
    Event next;
    next.kind = EventKind::TransmitDue;
    next.subject = e.subject;
    next.type_mask = e.type_mask;
    next.epoch = e.epoch;
    const double rate = effective_rate(r, link, ol, txit->second.rate);
    double gap = 1.0 / rate;
    if (cfg.poisson_departures) gap = -std::log(1.0 - r.loss_rng.next_double()) / rate;
    next.time = now + gap;
    push(std::move(next));
  }

  void on_packet_arrival(const Event& e) {
    const Link& link = topo.links[e.subject];
    NodeRuntime& r = rt(link.to);
    const CodedPacket& pkt = e.packet;
    if (r.is_source) return;
    if (pkt.generation < r.input_gen) return;  // stale generation
    if (pkt.generation >= cfg.total_generations) return;

    auto it = r.decoders.find(pkt.generation);
    if (it == r.decoders.end()) {
      std::vector<PacketType> watch;
      if (r.node->subscription) watch = types_with_session(*r.node->subscription, universe);
      it = r.decoders.emplace(pkt.generation, DecoderState(layout, pkt.generation, std::move(watch))).first;
    }
    if (r.scheduler) r.scheduler->note_first_packet(pkt.generation, now);
    const bool innovative = it->second.insert(pkt);
    if (innovative && pkt.generation == r.input_gen)
      r.meter.note_innovative(size_t(in_link_pos(r, e.subject)), pkt.ptype.mask, now);

    if (innovative && r.node->subscription && pkt.generation == r.input_gen &&
        !r.decoded_gens.count(pkt.generation) && it->second.decodable_watched(*r.node->subscription)) {
      r.decoded_gens.insert(pkt.generation);
      if (cfg.verify_decode) verify_extraction(r, it->second);
      if (cfg.trace.scheduler)
        (*cfg.trace.scheduler) << now << " " << r.node->id << " decode " << pkt.generation << "\n";
      sink.scheduler_events.push_back({now, r.node->id, "decode", pkt.generation});
      if (cfg.pipelined_generations)
        r.scheduler->set_release_hold((!r.node->children.empty() && !buffer_complete(r)) ||
                                      !parents_ready(r, r.input_gen + 1));
      handle_sched_actions(r, r.scheduler->on_self_decoded(pkt.generation, now));
    }
    if (innovative && pkt.generation == r.input_gen && r.decoded_gens.count(pkt.generation))
      update_release_hold(r);
  }

  void verify_extraction(NodeRuntime& r, const DecoderState& dec) {
    const int session = *r.node->subscription;
    auto payloads = dec.extract(session);
    for (size_t i = 0; i < payloads.size(); ++i) {
      auto expect = source_payload(session, dec.generation(), int(i), cfg.payload_bytes);
      expect.resize(payloads[i].size(), 0);
      if (payloads[i] != expect) throw std::runtime_error("simulator: decoded payload mismatch");
    }
  }

  void handle_sched_actions(NodeRuntime& r, const sched::Actions& actions) {
    for (auto& [gen, decoded] : actions.feedback)
      for (int p : r.node->parents) {
        proto::ControlMessage fb;
        fb.kind = proto::MessageKind::GenerationFeedback;
        fb.from = r.node->id;
        fb.to = p;
        fb.generation = gen;
        fb.decoded = decoded;
        send(std::move(fb), link_delay(p, r.node->id));
      }
    if (!actions.advanced) return;

    r.meter.close_span();
    r.input_gen = actions.generation;
    if (actions.skipped) {
      if (cfg.trace.scheduler)
        (*cfg.trace.scheduler) << now << " " << r.node->id << " skip " << actions.generation << "\n";
      sink.scheduler_events.push_back({now, r.node->id, "skip", actions.generation});
    }
    if (cfg.trace.scheduler)
      (*cfg.trace.scheduler) << now << " " << r.node->id << " advance " << actions.generation << "\n";
    sink.scheduler_events.push_back({now, r.node->id, "advance", actions.generation});

    for (int p : r.node->parents) {
      proto::ControlMessage adv;
      adv.kind = proto::MessageKind::GenerationAdvance;
      adv.from = r.node->id;
      adv.to = p;
      adv.generation = actions.generation;
      send(std::move(adv), link_delay(p, r.node->id));
    }
    if (cfg.pipelined_generations)
      for (int c : r.node->children) {
        proto::ControlMessage adv;
        adv.kind = proto::MessageKind::GenerationAdvance;
        adv.from = r.node->id;
        adv.to = c;
        adv.generation = actions.generation;
        send(std::move(adv), link_delay(r.node->id, c));
      }
    gc_decoders(r);

    if (actions.next_boundary >= 0.0) {
      r.boundary_epoch++;
      Event b;
      b.kind = EventKind::BoundaryDue;
      b.subject = r.node->id;
      b.epoch = r.boundary_epoch;
      b.time = std::max(actions.next_boundary, now);
      push(std::move(b));
    }
  }

  void gc_decoders(NodeRuntime& r) {
    uint32_t keep_from = r.is_source ? 0xffffffffu : r.input_gen;
    for (const OutLinkState& ol : r.out) keep_from = std::min(keep_from, ol.generation);
    while (!r.decoders.empty() && r.decoders.begin()->first < keep_from) r.decoders.erase(r.decoders.begin());
  }

  double sub_window() const { return cfg.measure_window_s / double(std::max(1, cfg.measure_subticks)); }

  void on_measure_tick() {
    for (NodeRuntime& r : nodes) {
      if (r.is_source) continue;
      for (size_t pos = 0; pos < r.reports.size(); ++pos) {
        std::set<uint16_t> masks = r.meter.masks(pos);
        for (auto& [mask, rep] : r.reports[pos]) masks.insert(mask);
        for (uint16_t mask : masks)
          r.reports[pos][mask].update(r.meter.rate(pos, mask), cfg.measure_smoothing, cfg.report_hysteresis,
                                      cfg.report_hysteresis_abs, cfg.report_hysteresis_up_frac);
      }
    }
    Event mt;
    mt.kind = EventKind::MeasureTick;
    mt.time = now + sub_window();
    push(std::move(mt));
  }

  // ---- run -------------------------------------------------------------------

  metrics::MetricsSink run() {
    init();
    while (!queue.empty()) {
      Event e = queue.top();
      if (e.time > cfg.duration_s) break;
      queue.pop();
      now = e.time;
      switch (e.kind) {
        case EventKind::ProtocolTick:
          on_protocol_tick(rt(e.subject));
          break;
        case EventKind::ControlDelivery:
          on_control(rt(e.subject), e.msg);
          break;
        case EventKind::TransmitDue:
          on_transmit_due(e);
          break;
        case EventKind::PacketArrival:
          on_packet_arrival(e);
          break;
        case EventKind::MeasureTick:
          on_measure_tick();
          break;
        case EventKind::BoundaryDue: {
          NodeRuntime& r = rt(e.subject);
          if (e.epoch == r.boundary_epoch && r.scheduler) handle_sched_actions(r, r.scheduler->on_boundary(now));
          break;
        }
      }
    }
    finalize();
    return std::move(sink);
  }

  void finalize() {
    for (NodeRuntime& r : nodes) {
      if (r.is_source || !r.scheduler) continue;
      for (auto& [gen, rec] : r.scheduler->records()) {
        metrics::GenerationRow row;
        row.node = r.node->id;
        row.generation = gen;
        row.request_time = rec.request_time;
        row.first_packet_time = rec.first_packet_time;
        row.decode_time = rec.decode_time;
        row.deadline = rec.deadline;
        row.status = rec.status == sched::GenStatus::Decoded   ? "decoded"
                     : rec.status == sched::GenStatus::Skipped ? "skipped"
                                                               : "undecoded";
        sink.generations.push_back(std::move(row));
      }
    }
    for (const Link& link : topo.links) {
      const NodeRuntime& sender = nodes[node_pos.at(link.from)];
      const NodeRuntime& receiver = nodes[node_pos.at(link.to)];
      const OutLinkState& ol = sender.out[out_link_pos(sender, link.index)];
      const auto& reps = receiver.reports[in_link_pos(receiver, link.index)];
      std::set<uint16_t> masks;
      for (auto& [mask, tx] : ol.tx) masks.insert(mask);
      for (auto& [mask, rep] : reps) masks.insert(mask);
      for (uint16_t mask : masks) {
        metrics::LinkTypeRow row;
        row.from = link.from;
        row.to = link.to;
        row.type_mask = mask;
        auto txit = ol.tx.find(mask);
        row.requested_wire_rate = txit == ol.tx.end() ? 0.0 : txit->second.rate;
        auto rit = reps.find(mask);
        row.measured_rate = rit == reps.end() ? 0.0 : rit->second.latched;
        sink.link_rates.push_back(std::move(row));
      }
    }
    sink.all_converged = true;
    for (const NodeRuntime& r : nodes)
      if (!r.is_source && r.pstate.round != proto::kRoundInf) sink.all_converged = false;
  }
};

}  // namespace

std::vector<uint8_t> source_payload(int session, uint32_t generation, int index, int payload_bytes) {
  Rng rng = Rng::derive(0x5eedf00dull, {uint64_t(session), uint64_t(generation), uint64_t(index)});
  std::vector<uint8_t> out(payload_bytes);
  for (auto& b : out) b = rng.next_byte();
  return out;
}

metrics::MetricsSink run(const Topology& topo, const SimConfig& cfg) {
  auto issues = topo.validate();
  if (!issues.empty()) throw std::invalid_argument("simulator: invalid topology: " + issues.front());
  if (cfg.duration_s <= 0) throw std::invalid_argument("simulator: duration must be positive");
  Engine engine(topo, cfg);
  return engine.run();
}

}  // namespace ncsim::sim
