#include "ncsim/scheduler.hpp"

#include <stdexcept>

namespace ncsim::sched {

GenerationScheduler::GenerationScheduler(Params params, std::vector<int> children)
    : params_(params), children_(std::move(children)), estimation_enabled_(params.estimate_from_start) {}

bool GenerationScheduler::self_done() const {
  auto it = records_.find(current_);
  return it != records_.end() && it->second.status != GenStatus::Pending;
}

bool GenerationScheduler::children_done(uint32_t gen) const {
  if (!params_.wait_for_children) return !release_hold_;
  auto it = child_done_.find(gen);
  const size_t done = it == child_done_.end() ? 0 : it->second.size();
  return done >= children_.size();
}

Actions GenerationScheduler::start(double now) {
  if (started_) throw std::logic_error("scheduler: started twice");
  started_ = true;
  return advance_to(0, now);
}

Actions GenerationScheduler::on_boundary(double now) {
  if (finished_ || !started_) return {};
  return advance_to(current_ + 1, now);
}

Actions GenerationScheduler::advance_to(uint32_t gen, double now) {
  Actions actions;
  if (gen >= params_.total_generations) {
    finished_ = true;
    actions.finished = true;
    return actions;
  }

  // an abandoned (still pending) generation releases its parents just like
  // a skipped one; without the notice they would wait for it forever
  if (gen >= 1) {
    auto it = records_.find(gen - 1);
    if (it != records_.end() && it->second.status == GenStatus::Pending && it->second.request_time >= 0.0)
      actions.feedback.emplace_back(gen - 1, false);
  }
  // fold the previous generation's outcome into the decode-time estimate;
  // a generation we decided to skip tells nothing about decode speed
  if (gen >= 1 && estimation_enabled_) {
    auto it = records_.find(gen - 1);
    if (it != records_.end() && it->second.status != GenStatus::Skipped) {
      const GenerationRecord& prev = it->second;
      if (prev.status == GenStatus::Decoded) {
        est_.add(prev.decode_time - prev.first_packet_time);
      } else if (prev.first_packet_time >= 0.0) {
        est_.add(params_.alpha * (now - prev.first_packet_time));
      } else {
        est_.add(params_.alpha * (now - prev.request_time));
      }
    }
  }

  current_ = gen;
  GenerationRecord& rec = records_[gen];
  rec.request_time = now;
  rec.deadline = deadline(gen);
  actions.advanced = true;
  actions.generation = gen;

  // drop the generation when the estimate says it cannot decode in time;
  // a long skip streak earns one probe so the estimate can re-learn after
  // upstream conditions improve
  const double window = deadline(gen) - now;
  if (est_.count > 0 && est_.mean > window && consecutive_skips_ < kProbeAfterSkips) {
    rec.status = GenStatus::Skipped;
    actions.skipped = true;
    actions.feedback.emplace_back(gen, false);
    ++consecutive_skips_;
  } else {
    consecutive_skips_ = 0;
  }

  if (gen + 1 < params_.total_generations) actions.next_boundary = deadline(gen);

  // skipping satisfies the self condition; children may already be done too
  if (actions.skipped && children_done(gen)) {
    Actions chained = advance_to(gen + 1, now);
    chained.advanced = true;
    chained.skipped = actions.skipped || chained.skipped;
    for (auto& f : actions.feedback) chained.feedback.insert(chained.feedback.begin(), f);
    return chained;
  }
  return actions;
}

Actions GenerationScheduler::maybe_advance_early(double now) {
  if (finished_ || !started_) return {};
  if (!self_done() || !children_done(current_)) return {};
  return advance_to(current_ + 1, now);
}

Actions GenerationScheduler::on_self_decoded(uint32_t gen, double now) {
  if (finished_ || gen != current_) return {};
  GenerationRecord& rec = records_[gen];
  if (rec.status != GenStatus::Pending) return {};
  rec.status = GenStatus::Decoded;
  rec.decode_time = now;
  Actions actions = maybe_advance_early(now);
  actions.feedback.insert(actions.feedback.begin(), {gen, true});
  return actions;
}

Actions GenerationScheduler::on_child_feedback(int child, uint32_t gen, bool decoded, double now) {
  (void)decoded;  // decoded and skipped children both release the generation
  child_done_[gen].insert(child);
  while (child_done_.size() > 64) child_done_.erase(child_done_.begin());
  if (gen != current_) return {};
  return maybe_advance_early(now);
}

void GenerationScheduler::note_first_packet(uint32_t gen, double now) {
  auto it = records_.find(gen);
  if (it == records_.end()) return;
  if (it->second.first_packet_time < 0.0) it->second.first_packet_time = now;
}

}  // namespace ncsim::sched
