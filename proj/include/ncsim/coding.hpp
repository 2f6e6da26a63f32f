#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ncsim/rng.hpp"
#include "ncsim/types.hpp"

namespace ncsim {

// Column layout of the global coefficient header: one block of columns per
// session, in session order. Header length is the sum of all block sizes.
class GenerationLayout {
 public:
  GenerationLayout() = default;
  explicit GenerationLayout(std::vector<int> blocks);

  int num_sessions() const { return static_cast<int>(blocks_.size()); }
  int columns() const { return total_; }
  int block_size(int session) const { return blocks_[session]; }
  int offset(int session) const { return offsets_[session]; }
  int column(int session, int index) const { return offsets_[session] + index; }
  const std::vector<int>& blocks() const { return blocks_; }

  // Columns of sessions outside t, ascending.
  std::vector<int> complement_columns(PacketType t) const;
  // Sum of block sizes over the component sessions of t.
  int required_rank(PacketType t) const;

 private:
  std::vector<int> blocks_;
  std::vector<int> offsets_;
  int total_ = 0;
};

struct CodedPacket {
  uint32_t generation = 0;
  PacketType ptype;
  std::vector<uint8_t> coeffs;  // layout.columns() entries
  std::vector<uint8_t> payload;
};

// Streaming Gaussian-elimination decoder for one generation. Rows are kept in
// reduced row-echelon form, payloads follow every row operation, so decoded
// payloads are recovered bit-exactly. Rank queries restricted to a session
// combination are answered from incrementally maintained complement trackers
// for the watched types; other combinations fall back to a fresh elimination.
class DecoderState {
 public:
  DecoderState(const GenerationLayout& layout, uint32_t generation, std::vector<PacketType> watch = {});

  // Returns true iff the packet increased the rank. Throws on generation or
  // header-length mismatch.
  bool insert(const CodedPacket& p);

  int rank() const { return static_cast<int>(rows_.size()); }
  uint32_t generation() const { return generation_; }
  const GenerationLayout& layout() const { return layout_; }

  // True iff the received span contains a full-rank subsystem for the
  // combination t (all component sessions of t decodable together).
  bool decodable_via(PacketType t) const;

  // Sessions recoverable from the current rows, considering every
  // combination in the given universe (defaults to all 2^n-1 types).
  std::vector<int> decodable_sessions() const;
  bool session_decodable(int session) const;

  // Fast path restricted to the watched combinations.
  bool decodable_watched(int session) const;

  // Smallest decodable combination containing the session, if any.
  std::optional<PacketType> decodable_combination(int session) const;

  // Original payloads of the session's block, in packet order. Throws
  // std::logic_error when the session is not decodable.
  std::vector<std::vector<uint8_t>> extract(int session) const;

  // Random mix of the stored rows whose type is a subtype of `target`.
  // Returns nullopt when no such row exists.
  std::optional<CodedPacket> mix(PacketType target, Rng& rng) const;

  struct Row {
    std::vector<uint8_t> coeffs;
    std::vector<uint8_t> payload;
    uint16_t type_mask = 0;
    int pivot = 0;
  };
  const std::vector<Row>& rows() const { return rows_; }

 private:
  struct ComplementTracker {
    PacketType type;               // watched combination
    std::vector<int> cols;         // complement columns
    std::vector<std::vector<uint8_t>> rows;  // echelon form over cols
    std::vector<int> pivots;
    int rank = 0;
  };

  bool tracker_insert(ComplementTracker& tr, const std::vector<uint8_t>& coeffs) const;
  int restricted_complement_rank(PacketType t) const;

  GenerationLayout layout_;
  uint32_t generation_ = 0;
  std::vector<Row> rows_;  // sorted by pivot column
  std::vector<ComplementTracker> trackers_;
};

// Uniform random linear combination of the buffered packets. Inputs must be
// nonempty, share one generation, and have types that are subtypes of
// `target`; the output type is the union of the input types.
CodedPacket recode(std::span<const CodedPacket> buffer, PacketType target, Rng& rng);

// Same, with caller-chosen coefficients (one per input packet).
CodedPacket combine(std::span<const CodedPacket> buffer, std::span<const uint8_t> coeffs, PacketType target);

// A source packet: unit coefficient vector at the session's index-th column.
CodedPacket make_source_packet(const GenerationLayout& layout, uint32_t generation, int session, int index,
                               std::vector<uint8_t> payload);

// Trace wire format: generation u32, type mask u16, coefficient header
// (layout.columns() bytes), payload length u16, payload. Big-endian integers.
std::vector<uint8_t> serialize_packet(const CodedPacket& p, const GenerationLayout& layout);
CodedPacket parse_packet(std::span<const uint8_t> wire, const GenerationLayout& layout);

}  // namespace ncsim
