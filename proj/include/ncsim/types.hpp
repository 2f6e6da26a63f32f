#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ncsim {

// Maximum number of concurrent sessions. The type lattice has 2^|S|-1
// elements, so session sets are kept as 16-bit masks.
constexpr int kMaxSessions = 16;

// A packet type: the nonempty set of sessions mixed into a coded packet,
// stored as a bitmask (bit s set <=> session s participates).
struct PacketType {
  uint16_t mask = 0;

  PacketType() = default;
  explicit PacketType(uint16_t m) : mask(m) {}
  static PacketType singleton(int session) { return PacketType(static_cast<uint16_t>(1u << session)); }

  bool valid() const { return mask != 0; }
  bool contains(int session) const { return (mask >> session) & 1u; }
  bool subset_of(PacketType other) const { return (mask & ~other.mask) == 0; }
  int session_count() const { return __builtin_popcount(mask); }
  PacketType united(PacketType other) const { return PacketType(static_cast<uint16_t>(mask | other.mask)); }

  // Component sessions in ascending order.
  std::vector<int> sessions() const;

  // e.g. "s0s2" for mask 0b101
  std::string name() const;

  bool operator==(const PacketType&) const = default;
  auto operator<=>(const PacketType&) const = default;
};

// All 2^n - 1 packet types over n sessions, ascending by mask. This is the
// canonical order used for every serialized rate vector.
std::vector<PacketType> all_types(int num_sessions);

// Singleton types only; the type universe used when cross-session mixing is
// disabled.
std::vector<PacketType> singleton_types(int num_sessions);

// All nonempty subsets of t (t included), ascending by mask.
std::vector<PacketType> subtypes(PacketType t);

// Types in `universe` that contain `session`.
std::vector<PacketType> types_with_session(int session, const std::vector<PacketType>& universe);

// Subsets of t that contain session s. Throws std::domain_error if s is not
// a component of t.
std::vector<PacketType> subtypes_with_session(PacketType t, int session);

// Dense vector indexed by type mask; entry 0 is unused. The uniform carrier
// for per-type rates and probabilities.
struct TypeVector {
  int num_sessions = 0;
  std::vector<double> v;  // size 1 << num_sessions

  TypeVector() = default;
  explicit TypeVector(int sessions) : num_sessions(sessions), v(size_t(1) << sessions, 0.0) {}

  double at(PacketType t) const { return v[t.mask]; }
  double& at(PacketType t) { return v[t.mask]; }
  double total() const;
  bool all_zero(double eps = 0.0) const;
  bool operator==(const TypeVector&) const = default;
};

}  // namespace ncsim
