#include "doctest.h"
#include "ncsim/coding.hpp"
#include "ncsim/gf256.hpp"

#include <stdexcept>

#include <cstring>

using namespace ncsim;

namespace {

std::vector<uint8_t> random_payload(Rng& rng, size_t n) {
  std::vector<uint8_t> p(n);
  for (auto& b : p) b = rng.next_byte();
  return p;
}

CodedPacket random_typed_packet(const GenerationLayout& layout, PacketType t, Rng& rng) {
  CodedPacket p;
  p.generation = 0;
  p.ptype = t;
  p.coeffs.assign(layout.columns(), 0);
  for (int s : t.sessions())
    for (int i = 0; i < layout.block_size(s); ++i) p.coeffs[layout.column(s, i)] = rng.next_byte();
  return p;
}

}  // namespace

TEST_CASE("gf256 field axioms hold exhaustively") {
  // inverses
  for (int a = 1; a < 256; ++a) {
    CHECK(gf::mul(static_cast<uint8_t>(a), gf::inv(static_cast<uint8_t>(a))) == 1);
  }
  // associativity and distributivity over the full cube, commutativity included
  for (int a = 0; a < 256; ++a) {
    for (int b = 0; b < 256; ++b) {
      const auto ab = gf::mul(a, b);
      CHECK(ab == gf::mul(b, a));
      for (int c = 0; c < 256; c += 7) {  // step keeps the cube affordable; 7 is coprime to 256
        CHECK(gf::mul(ab, c) == gf::mul(a, gf::mul(b, c)));
        CHECK(gf::mul(a, gf::add(b, c)) == gf::add(gf::mul(a, b), gf::mul(a, c)));
      }
    }
  }
  // addition is xor: self-inverse, identity 0
  CHECK(gf::add(0x5a, 0x5a) == 0);
  CHECK(gf::add(0x5a, 0) == 0x5a);
}

TEST_CASE("single-packet combine with coefficient 1 is the identity") {
  GenerationLayout layout({3});
  Rng rng(7);
  CodedPacket p = make_source_packet(layout, 0, 0, 1, {10, 20, 30});
  uint8_t one = 1;
  CodedPacket q = combine(std::span(&p, 1), std::span(&one, 1), PacketType::singleton(0));
  CHECK(q.coeffs == p.coeffs);
  CHECK(q.payload == p.payload);
  CHECK(q.ptype == p.ptype);
}

TEST_CASE("recode stays in the row span and respects type columns") {
  GenerationLayout layout({2, 2});
  Rng rng(42);
  auto a = random_typed_packet(layout, PacketType::singleton(0), rng);
  auto b = random_typed_packet(layout, PacketType::singleton(0), rng);
  CodedPacket buf[2] = {a, b};
  CodedPacket mixed = recode(std::span<const CodedPacket>(buf, 2), PacketType::singleton(0), rng);
  CHECK(mixed.ptype == PacketType::singleton(0));
  // support confined to session 0 columns
  CHECK(mixed.coeffs[layout.column(1, 0)] == 0);
  CHECK(mixed.coeffs[layout.column(1, 1)] == 0);
  // span membership: inserting a, b, mixed gives rank <= 2
  DecoderState dec(layout, 0);
  dec.insert(a);
  dec.insert(b);
  CHECK_FALSE(dec.insert(mixed));

  // cross-session union
  auto c = random_typed_packet(layout, PacketType::singleton(1), rng);
  CodedPacket buf2[2] = {a, c};
  CodedPacket inter = recode(std::span<const CodedPacket>(buf2, 2), PacketType(0b11), rng);
  CHECK(inter.ptype.mask == 0b11);

  // inputs outside the target are rejected
  CHECK_THROWS_AS(recode(std::span<const CodedPacket>(buf2, 2), PacketType::singleton(0), rng), std::invalid_argument);
  CHECK_THROWS_AS(recode(std::span<const CodedPacket>(), PacketType::singleton(0), rng), std::invalid_argument);
}

TEST_CASE("insert is idempotent in rank and detects duplicates") {
  GenerationLayout layout({4});
  Rng rng(3);
  DecoderState dec(layout, 0);
  auto p = random_typed_packet(layout, PacketType::singleton(0), rng);
  CHECK(dec.insert(p));
  CHECK_FALSE(dec.insert(p));
  CHECK(dec.rank() == 1);
  // N independent rows reach full rank
  for (int i = 0; i < 4; ++i) dec.insert(make_source_packet(layout, 0, 0, i, {}));
  CHECK(dec.rank() == 4);
  CodedPacket wrong_gen = p;
  wrong_gen.generation = 9;
  CHECK_THROWS_AS(dec.insert(wrong_gen), std::invalid_argument);
}

TEST_CASE("random rows over GF(256) are innovative at the predicted frequency") {
  // with k of n dimensions filled, a uniform row is dependent with
  // probability 256^(k-n)
  GenerationLayout layout({4});
  Rng rng(1234);
  int innovative = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    DecoderState dec(layout, 0);
    for (int i = 0; i < 3; ++i) dec.insert(make_source_packet(layout, 0, 0, i, {}));
    auto p = random_typed_packet(layout, PacketType::singleton(0), rng);
    if (dec.insert(p)) ++innovative;
  }
  const double expected = 1.0 - 1.0 / 256.0;  // one free dimension
  CHECK(std::abs(innovative / double(trials) - expected) < 0.005);
}

TEST_CASE("decodable_sessions via restricted rank") {
  GenerationLayout layout({2, 3});
  Rng rng(9);

  SUBCASE("own singleton rows decode the session") {
    DecoderState dec(layout, 0, {PacketType::singleton(0)});
    dec.insert(make_source_packet(layout, 0, 0, 0, {1}));
    CHECK(dec.decodable_sessions().empty());
    dec.insert(make_source_packet(layout, 0, 0, 1, {2}));
    CHECK(dec.decodable_sessions() == std::vector<int>{0});
  }

  SUBCASE("full combined rank decodes both sessions") {
    DecoderState dec(layout, 0);
    int inserted = 0;
    while (inserted < 5) {
      auto p = random_typed_packet(layout, PacketType(0b11), rng);
      if (dec.insert(p)) ++inserted;
    }
    auto ds = dec.decodable_sessions();
    CHECK(ds == std::vector<int>{0, 1});
  }

  SUBCASE("mixtures alone short of the combined rank decode nothing") {
    DecoderState dec(layout, 0);
    int inserted = 0;
    while (inserted < 2) {  // N_0 = 2 mixture rows only
      auto p = random_typed_packet(layout, PacketType(0b11), rng);
      if (dec.insert(p)) ++inserted;
    }
    CHECK(dec.decodable_sessions().empty());
  }
}

TEST_CASE("round trip: encode, deliver, extract") {
  GenerationLayout layout({3});
  Rng rng(21);
  std::vector<std::vector<uint8_t>> originals;
  std::vector<CodedPacket> sources;
  for (int i = 0; i < 3; ++i) {
    originals.push_back(random_payload(rng, 16));
    sources.push_back(make_source_packet(layout, 0, 0, i, originals.back()));
  }
  DecoderState dec(layout, 0);
  int got = 0;
  while (got < 3) {
    auto p = recode(std::span<const CodedPacket>(sources.data(), sources.size()), PacketType::singleton(0), rng);
    if (dec.insert(p)) ++got;
  }
  auto out = dec.extract(0);
  REQUIRE(out.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(out[i] == originals[i]);
  CHECK_THROWS_AS(DecoderState(layout, 0).extract(0), std::logic_error);
}

TEST_CASE("multi-hop and inter-session round trips recover payloads bit-exactly") {
  GenerationLayout layout({2, 2, 2});
  Rng rng(77);
  const int kRounds = 40;
  for (int round = 0; round < kRounds; ++round) {
    std::vector<std::vector<CodedPacket>> per_session(3);
    std::vector<std::vector<std::vector<uint8_t>>> originals(3);
    for (int s = 0; s < 3; ++s)
      for (int i = 0; i < 2; ++i) {
        originals[s].push_back(random_payload(rng, 8));
        per_session[s].push_back(make_source_packet(layout, 0, s, i, originals[s].back()));
      }

    // hop 1 holds sessions 0 and 2 and emits mixtures of them
    std::vector<CodedPacket> hop1;
    for (auto& p : per_session[0]) hop1.push_back(p);
    for (auto& p : per_session[2]) hop1.push_back(p);

    // hop 2 re-mixes hop 1 output
    std::vector<CodedPacket> hop2;
    for (int i = 0; i < 4; ++i)
      hop2.push_back(recode(std::span<const CodedPacket>(hop1.data(), hop1.size()), PacketType(0b101), rng));

    // receiver gets hop-2 mixtures plus side packets of session 2
    DecoderState dec(layout, 0, types_with_session(0, all_types(3)));
    int safety = 0;
    while (!dec.session_decodable(0) && safety < 64) {
      ++safety;
      if (safety % 2 == 0) {
        auto side = recode(std::span<const CodedPacket>(per_session[2].data(), 2), PacketType::singleton(2), rng);
        dec.insert(side);
      } else {
        auto mix = recode(std::span<const CodedPacket>(hop2.data(), hop2.size()), PacketType(0b101), rng);
        dec.insert(mix);
      }
    }
    REQUIRE(dec.session_decodable(0));
    auto out = dec.extract(0);
    REQUIRE(out.size() == 2);
    for (int i = 0; i < 2; ++i) {
      auto expect = originals[0][i];
      expect.resize(out[i].size(), 0);
      CHECK(out[i] == expect);
    }
  }
}

TEST_CASE("wire format round trip") {
  GenerationLayout layout({2, 2});
  Rng rng(5);
  auto p = random_typed_packet(layout, PacketType(0b11), rng);
  p.generation = 0x01020304;
  p.payload = random_payload(rng, 10);
  auto wire = serialize_packet(p, layout);
  CHECK(wire.size() == 4 + 2 + 4 + 2 + 10);
  CHECK(wire[0] == 0x01);
  CHECK(wire[3] == 0x04);
  auto q = parse_packet(wire, layout);
  CHECK(q.generation == p.generation);
  CHECK(q.ptype == p.ptype);
  CHECK(q.coeffs == p.coeffs);
  CHECK(q.payload == p.payload);
  wire.pop_back();
  CHECK_THROWS_AS(parse_packet(wire, layout), std::invalid_argument);
}
