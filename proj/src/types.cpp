#include "ncsim/types.hpp"

#include <stdexcept>

namespace ncsim {

std::vector<int> PacketType::sessions() const {
  std::vector<int> out;
  for (int s = 0; s < kMaxSessions; ++s)
    if (contains(s)) out.push_back(s);
  return out;
}

std::string PacketType::name() const {
  std::string out;
  for (int s = 0; s < kMaxSessions; ++s)
    if (contains(s)) out += "s" + std::to_string(s);
  return out.empty() ? "none" : out;
}

std::vector<PacketType> all_types(int num_sessions) {
  if (num_sessions < 1 || num_sessions > kMaxSessions)
    throw std::invalid_argument("all_types: session count must be in [1, 16]");
  std::vector<PacketType> out;
  out.reserve((size_t(1) << num_sessions) - 1);
  for (uint32_t m = 1; m < (1u << num_sessions); ++m) out.push_back(PacketType(static_cast<uint16_t>(m)));
  return out;
}

std::vector<PacketType> singleton_types(int num_sessions) {
  if (num_sessions < 1 || num_sessions > kMaxSessions)
    throw std::invalid_argument("singleton_types: session count must be in [1, 16]");
  std::vector<PacketType> out;
  for (int s = 0; s < num_sessions; ++s) out.push_back(PacketType::singleton(s));
  return out;
}

std::vector<PacketType> subtypes(PacketType t) {
  if (!t.valid()) throw std::domain_error("subtypes: empty type");
  std::vector<PacketType> out;
  for (uint32_t m = 1; m <= t.mask; ++m)
    if ((m & ~uint32_t(t.mask)) == 0) out.push_back(PacketType(static_cast<uint16_t>(m)));
  return out;
}

std::vector<PacketType> types_with_session(int session, const std::vector<PacketType>& universe) {
  std::vector<PacketType> out;
  for (PacketType t : universe)
    if (t.contains(session)) out.push_back(t);
  return out;
}

std::vector<PacketType> subtypes_with_session(PacketType t, int session) {
  if (!t.contains(session)) throw std::domain_error("subtypes_with_session: session not a component of the type");
  std::vector<PacketType> out;
  for (PacketType sub : subtypes(t))
    if (sub.contains(session)) out.push_back(sub);
  return out;
}

double TypeVector::total() const {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum;
}

bool TypeVector::all_zero(double eps) const {
  for (double x : v)
    if (x > eps || x < -eps) return false;
  return true;
}

}  // namespace ncsim
