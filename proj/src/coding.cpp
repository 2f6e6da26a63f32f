#include "ncsim/coding.hpp"

#include <algorithm>
#include <stdexcept>

#include "ncsim/gf256.hpp"

namespace ncsim {

GenerationLayout::GenerationLayout(std::vector<int> blocks) : blocks_(std::move(blocks)) {
  offsets_.resize(blocks_.size());
  for (size_t s = 0; s < blocks_.size(); ++s) {
    if (blocks_[s] < 1) throw std::invalid_argument("layout: block size must be >= 1");
    offsets_[s] = total_;
    total_ += blocks_[s];
  }
}

std::vector<int> GenerationLayout::complement_columns(PacketType t) const {
  std::vector<int> cols;
  for (int s = 0; s < num_sessions(); ++s) {
    if (t.contains(s)) continue;
    for (int i = 0; i < blocks_[s]; ++i) cols.push_back(column(s, i));
  }
  return cols;
}

int GenerationLayout::required_rank(PacketType t) const {
  int total = 0;
  for (int s = 0; s < num_sessions(); ++s)
    if (t.contains(s)) total += blocks_[s];
  return total;
}

DecoderState::DecoderState(const GenerationLayout& layout, uint32_t generation, std::vector<PacketType> watch)
    : layout_(layout), generation_(generation) {
  for (PacketType t : watch) {
    ComplementTracker tr;
    tr.type = t;
    tr.cols = layout_.complement_columns(t);
    trackers_.push_back(std::move(tr));
  }
}

bool DecoderState::tracker_insert(ComplementTracker& tr, const std::vector<uint8_t>& coeffs) const {
  if (tr.cols.empty()) return false;
  std::vector<uint8_t> row(tr.cols.size());
  bool nonzero = false;
  for (size_t i = 0; i < tr.cols.size(); ++i) {
    row[i] = coeffs[tr.cols[i]];
    nonzero |= row[i] != 0;
  }
  if (!nonzero) return false;
  for (size_t r = 0; r < tr.rows.size(); ++r) {
    const uint8_t c = row[tr.pivots[r]];
    if (c) gf::mul_add(row.data(), tr.rows[r].data(), row.size(), c);
  }
  int pivot = -1;
  for (size_t i = 0; i < row.size(); ++i)
    if (row[i]) {
      pivot = static_cast<int>(i);
      break;
    }
  if (pivot < 0) return false;
  gf::scale(row.data(), row.size(), gf::inv(row[pivot]));
  tr.rows.push_back(std::move(row));
  tr.pivots.push_back(pivot);
  tr.rank++;
  return true;
}

bool DecoderState::insert(const CodedPacket& p) {
  if (p.generation != generation_) throw std::invalid_argument("decoder: generation mismatch");
  if (static_cast<int>(p.coeffs.size()) != layout_.columns())
    throw std::invalid_argument("decoder: coefficient header length mismatch");

  std::vector<uint8_t> coeffs = p.coeffs;
  std::vector<uint8_t> payload = p.payload;
  uint16_t mask = p.ptype.mask;

  // Reduce against existing pivots.
  for (const Row& row : rows_) {
    const uint8_t c = coeffs[row.pivot];
    if (!c) continue;
    if (payload.size() < row.payload.size()) payload.resize(row.payload.size(), 0);
    gf::mul_add(coeffs.data(), row.coeffs.data(), coeffs.size(), c);
    gf::mul_add(payload.data(), row.payload.data(), row.payload.size(), c);
    mask |= row.type_mask;
  }

  int pivot = -1;
  for (size_t i = 0; i < coeffs.size(); ++i)
    if (coeffs[i]) {
      pivot = static_cast<int>(i);
      break;
    }
  if (pivot < 0) return false;  // dependent: no rank change anywhere

  const uint8_t lead_inv = gf::inv(coeffs[pivot]);
  gf::scale(coeffs.data(), coeffs.size(), lead_inv);
  gf::scale(payload.data(), payload.size(), lead_inv);

  // Back-substitute into existing rows to keep reduced echelon form.
  for (Row& row : rows_) {
    const uint8_t c = row.coeffs[pivot];
    if (!c) continue;
    if (row.payload.size() < payload.size()) row.payload.resize(payload.size(), 0);
    gf::mul_add(row.coeffs.data(), coeffs.data(), coeffs.size(), c);
    gf::mul_add(row.payload.data(), payload.data(), payload.size(), c);
    row.type_mask |= mask;
  }

  Row row;
  row.coeffs = std::move(coeffs);
  row.payload = std::move(payload);
  row.type_mask = mask;
  row.pivot = pivot;
  auto it = std::upper_bound(rows_.begin(), rows_.end(), pivot, [](int p, const Row& r) { return p < r.pivot; });
  rows_.insert(it, std::move(row));

  for (ComplementTracker& tr : trackers_) tracker_insert(tr, p.coeffs);
  return true;
}

int DecoderState::restricted_complement_rank(PacketType t) const {
  for (const ComplementTracker& tr : trackers_)
    if (tr.type == t) return tr.rank;
  // Fresh elimination over the complement columns of the stored rows.
  ComplementTracker tr;
  tr.type = t;
  tr.cols = layout_.complement_columns(t);
  for (const Row& row : rows_) tracker_insert(tr, row.coeffs);
  return tr.rank;
}

bool DecoderState::decodable_via(PacketType t) const {
  return rank() - restricted_complement_rank(t) >= layout_.required_rank(t);
}

std::vector<int> DecoderState::decodable_sessions() const {
  std::vector<int> out;
  for (int s = 0; s < layout_.num_sessions(); ++s)
    if (session_decodable(s)) out.push_back(s);
  return out;
}

bool DecoderState::session_decodable(int session) const { return decodable_combination(session).has_value(); }

bool DecoderState::decodable_watched(int session) const {
  for (const ComplementTracker& tr : trackers_) {
    if (!tr.type.contains(session)) continue;
    if (rank() - tr.rank >= layout_.required_rank(tr.type)) return true;
  }
  return false;
}

std::optional<PacketType> DecoderState::decodable_combination(int session) const {
  for (PacketType t : all_types(layout_.num_sessions())) {
    if (!t.contains(session)) continue;
    if (decodable_via(t)) return t;
  }
  return std::nullopt;
}

std::vector<std::vector<uint8_t>> DecoderState::extract(int session) const {
  auto combo = decodable_combination(session);
  if (!combo) throw std::logic_error("decoder: session not decodable");
  const PacketType t = *combo;

  // Column order: complement columns first, then the combination's columns.
  std::vector<int> order = layout_.complement_columns(t);
  std::vector<int> combo_cols;
  for (int s = 0; s < layout_.num_sessions(); ++s)
    if (t.contains(s))
      for (int i = 0; i < layout_.block_size(s); ++i) combo_cols.push_back(layout_.column(s, i));
  const size_t complement_count = order.size();
  order.insert(order.end(), combo_cols.begin(), combo_cols.end());

  std::vector<std::vector<uint8_t>> coeffs;
  std::vector<std::vector<uint8_t>> payloads;
  size_t payload_len = 0;
  for (const Row& row : rows_) payload_len = std::max(payload_len, row.payload.size());
  for (const Row& row : rows_) {
    coeffs.push_back(row.coeffs);
    auto p = row.payload;
    p.resize(payload_len, 0);
    payloads.push_back(std::move(p));
  }

  // Gauss-Jordan with the permuted column priority.
  size_t next_row = 0;
  std::vector<int> pivot_row_of_col(layout_.columns(), -1);
  for (size_t ci = 0; ci < order.size() && next_row < coeffs.size(); ++ci) {
    const int col = order[ci];
    size_t sel = next_row;
    while (sel < coeffs.size() && coeffs[sel][col] == 0) ++sel;
    if (sel == coeffs.size()) continue;
    std::swap(coeffs[sel], coeffs[next_row]);
    std::swap(payloads[sel], payloads[next_row]);
    const uint8_t lead_inv = gf::inv(coeffs[next_row][col]);
    gf::scale(coeffs[next_row].data(), coeffs[next_row].size(), lead_inv);
    gf::scale(payloads[next_row].data(), payloads[next_row].size(), lead_inv);
    for (size_t r = 0; r < coeffs.size(); ++r) {
      if (r == next_row) continue;
      const uint8_t c = coeffs[r][col];
      if (!c) continue;
      gf::mul_add(coeffs[r].data(), coeffs[next_row].data(), coeffs[r].size(), c);
      gf::mul_add(payloads[r].data(), payloads[next_row].data(), payloads[r].size(), c);
    }
    pivot_row_of_col[col] = static_cast<int>(next_row);
    if (ci < complement_count) pivot_row_of_col[col] = -2;  // complement pivot, not a source row
    ++next_row;
  }

  std::vector<std::vector<uint8_t>> out;
  for (int i = 0; i < layout_.block_size(session); ++i) {
    const int col = layout_.column(session, i);
    const int row = pivot_row_of_col[col];
    if (row < 0) throw std::logic_error("decoder: extraction failed for a decodable session");
    // A source row must be supported inside the combination's columns only.
    out.push_back(payloads[row]);
  }
  return out;
}

std::optional<CodedPacket> DecoderState::mix(PacketType target, Rng& rng) const {
  std::vector<const Row*> usable;
  for (const Row& row : rows_)
    if ((row.type_mask & ~target.mask) == 0) usable.push_back(&row);
  if (usable.empty()) return std::nullopt;

  CodedPacket out;
  out.generation = generation_;
  out.coeffs.assign(layout_.columns(), 0);
  uint16_t mask = 0;
  size_t payload_len = 0;
  for (const Row* row : usable) payload_len = std::max(payload_len, row->payload.size());
  out.payload.assign(payload_len, 0);
  for (const Row* row : usable) {
    const uint8_t c = rng.next_byte();
    if (!c) continue;
    gf::mul_add(out.coeffs.data(), row->coeffs.data(), out.coeffs.size(), c);
    gf::mul_add(out.payload.data(), row->payload.data(), row->payload.size(), c);
    mask |= row->type_mask;
  }
  // Union of everything we attempted to mix; zero draws keep the declared
  // type conservative but never widen support beyond it.
  for (const Row* row : usable) mask |= row->type_mask;
  out.ptype = PacketType(mask);
  return out;
}

CodedPacket combine(std::span<const CodedPacket> buffer, std::span<const uint8_t> coeffs, PacketType target) {
  if (buffer.empty()) throw std::invalid_argument("recode: empty buffer");
  if (coeffs.size() != buffer.size()) throw std::invalid_argument("recode: one coefficient per packet required");
  const uint32_t gen = buffer[0].generation;
  uint16_t mask = 0;
  size_t payload_len = 0;
  for (const CodedPacket& p : buffer) {
    if (p.generation != gen) throw std::invalid_argument("recode: mixed generations");
    if (!p.ptype.subset_of(target)) throw std::invalid_argument("recode: input type outside the target combination");
    mask |= p.ptype.mask;
    payload_len = std::max(payload_len, p.payload.size());
  }
  CodedPacket out;
  out.generation = gen;
  out.ptype = PacketType(mask);
  out.coeffs.assign(buffer[0].coeffs.size(), 0);
  out.payload.assign(payload_len, 0);
  for (size_t i = 0; i < buffer.size(); ++i) {
    if (buffer[i].coeffs.size() != out.coeffs.size()) throw std::invalid_argument("recode: header length mismatch");
    gf::mul_add(out.coeffs.data(), buffer[i].coeffs.data(), out.coeffs.size(), coeffs[i]);
    gf::mul_add(out.payload.data(), buffer[i].payload.data(), buffer[i].payload.size(), coeffs[i]);
  }
  return out;
}

CodedPacket recode(std::span<const CodedPacket> buffer, PacketType target, Rng& rng) {
  std::vector<uint8_t> coeffs(buffer.size());
  for (uint8_t& c : coeffs) c = rng.next_byte();
  return combine(buffer, coeffs, target);
}

CodedPacket make_source_packet(const GenerationLayout& layout, uint32_t generation, int session, int index,
                               std::vector<uint8_t> payload) {
  CodedPacket p;
  p.generation = generation;
  p.ptype = PacketType::singleton(session);
  p.coeffs.assign(layout.columns(), 0);
  p.coeffs[layout.column(session, index)] = 1;
  p.payload = std::move(payload);
  return p;
}

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

}  // namespace

std::vector<uint8_t> serialize_packet(const CodedPacket& p, const GenerationLayout& layout) {
  if (static_cast<int>(p.coeffs.size()) != layout.columns())
    throw std::invalid_argument("serialize: coefficient header length mismatch");
  if (p.payload.size() > 0xffff) throw std::invalid_argument("serialize: payload too large");
  std::vector<uint8_t> out;
  out.reserve(8 + p.coeffs.size() + p.payload.size());
  put_u32(out, p.generation);
  put_u16(out, p.ptype.mask);
  out.insert(out.end(), p.coeffs.begin(), p.coeffs.end());
  put_u16(out, static_cast<uint16_t>(p.payload.size()));
  out.insert(out.end(), p.payload.begin(), p.payload.end());
  return out;
}

CodedPacket parse_packet(std::span<const uint8_t> wire, const GenerationLayout& layout) {
  const size_t header = 4 + 2 + static_cast<size_t>(layout.columns()) + 2;
  if (wire.size() < header) throw std::invalid_argument("parse: truncated packet");
  CodedPacket p;
  p.generation = (uint32_t(wire[0]) << 24) | (uint32_t(wire[1]) << 16) | (uint32_t(wire[2]) << 8) | wire[3];
  p.ptype = PacketType(static_cast<uint16_t>((uint16_t(wire[4]) << 8) | wire[5]));
  p.coeffs.assign(wire.begin() + 6, wire.begin() + 6 + layout.columns());
  const size_t off = 6 + layout.columns();
  const uint16_t plen = static_cast<uint16_t>((uint16_t(wire[off]) << 8) | wire[off + 1]);
  if (wire.size() < header + plen) throw std::invalid_argument("parse: truncated payload");
  p.payload.assign(wire.begin() + off + 2, wire.begin() + off + 2 + plen);
  return p;
}

}  // namespace ncsim
