#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <vector>

namespace ncsim::sched {

struct Params {
  double alpha = 1.5;  // penalty factor on undecoded generations
  double playback_delay_s = 1.4;
  double generation_duration_s = 1.0;
  uint32_t total_generations = 0xffffffffu;
  // when false, decode-time samples are ignored until enable_estimation();
  // lets a driver suppress meaningless samples taken before any transfer
  // rates exist
  bool estimate_from_start = true;
  // when false, the node advances its input as soon as it is itself done,
  // letting generations overlap down the tree (continuous collection);
  // parents keep serving lagging children from retained buffers
  bool wait_for_children = true;
};

// Recursive sample mean of the observed per-generation decode times.
struct DecodeTimeEstimator {
  double mean = 0.0;
  long count = 0;
  void add(double sample) {
    ++count;
    mean += (sample - mean) / double(count);
  }
};

enum class GenStatus { Pending, Decoded, Skipped };

struct GenerationRecord {
  double request_time = -1.0;
  double first_packet_time = -1.0;
  double decode_time = -1.0;
  double deadline = 0.0;
  GenStatus status = GenStatus::Pending;
};

// What the caller must do after a scheduler step.
struct Actions {
  bool advanced = false;
  uint32_t generation = 0;   // newly current generation (valid when advanced)
  bool skipped = false;      // that generation was skipped on entry
  bool finished = false;     // stream exhausted
  std::vector<std::pair<uint32_t, bool>> feedback;  // (generation, decoded) for the parents
  double next_boundary = -1.0;  // absolute time of the next scheduled request
};

// Per-node multi-generation coordination: deadline-driven requests, skip
// decisions from the running decode-time estimate, and early advancement
// once the node and all of its children are done with the current block.
class GenerationScheduler {
 public:
  GenerationScheduler(Params params, std::vector<int> children);

  Actions start(double now);
  void enable_estimation() { estimation_enabled_ = true; }
  // discard decode-time history when the transfer regime changed; the old
  // samples describe a different allocation
  void reset_estimation() { est_ = DecodeTimeEstimator{}; }
  // pipelined mode: the driver holds the release while the node's buffer is
  // still filling content its children will need
  void set_release_hold(bool hold) { release_hold_ = hold; }
  Actions poke(double now) { return maybe_advance_early(now); }
  Actions on_boundary(double now);  // the scheduled request timer fired
  Actions on_self_decoded(uint32_t gen, double now);
  Actions on_child_feedback(int child, uint32_t gen, bool decoded, double now);
  void note_first_packet(uint32_t gen, double now);

  uint32_t current() const { return current_; }
  bool finished() const { return finished_; }
  double deadline(uint32_t gen) const {
    return params_.playback_delay_s + double(gen) * params_.generation_duration_s;
  }
  const std::map<uint32_t, GenerationRecord>& records() const { return records_; }
  const DecodeTimeEstimator& estimator() const { return est_; }

 private:
  Actions advance_to(uint32_t gen, double now);
  Actions maybe_advance_early(double now);
  bool self_done() const;
  bool children_done(uint32_t gen) const;

  static constexpr int kProbeAfterSkips = 8;
  Params params_;
  std::vector<int> children_;
  int consecutive_skips_ = 0;
  std::map<uint32_t, GenerationRecord> records_;
  std::map<uint32_t, std::set<int>> child_done_;
  DecodeTimeEstimator est_;
  uint32_t current_ = 0;
  bool started_ = false;
  bool finished_ = false;
  bool estimation_enabled_ = true;
  bool release_hold_ = false;
};

}  // namespace ncsim::sched
