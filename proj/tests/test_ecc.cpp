/*
 * Copyright 2026 The npuguard Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <bit>
#include <stdexcept>

#include "npuguard/ecc.hpp"
#include "npuguard/rng.hpp"

using namespace npuguard;

namespace {

// Independent check of the odd-parity extended Hamming layout: every parity
// group holds an odd number of ones, so the XOR of all set positions has every
// group bit set, and the whole word holds an odd number of ones.
bool oracle_valid(const ecc::Codeword& cw) {
  const unsigned r = ecc::check_width(cw.data_width) - 1;
  unsigned x = 0;
  for (unsigned p = 1; p < cw.width(); ++p)
    if ((cw.bits >> p) & 1u) x ^= p;
  return x == (1u << r) - 1 && std::popcount(cw.bits) % 2 == 1;
}

// Data bits occupy the non-power-of-two positions from 3 upwards.
unsigned oracle_data_position(unsigned bit) {
  unsigned p = 2;
  for (unsigned seen = 0;; ) {
    ++p;
    if (std::has_single_bit(p)) continue;
    if (seen++ == bit) return p;
  }
}

}  // namespace

TEST_SUITE("ecc") {
  TEST_CASE("check width follows ceil(log2(a+1)) + 1") {
    CHECK(ecc::check_width(16) == 6);
    CHECK(ecc::encode(0, 16).width() == 22);
    CHECK(ecc::encode(0, 8).width() == 13);
    CHECK(ecc::encode(0, 32).width() == 39);
    for (unsigned a = 1; a <= ecc::kMaxDataWidth; ++a) {
      unsigned lg = 0;
      while ((1u << lg) < a + 1) ++lg;
      CHECK(ecc::check_width(a) == lg + 1);
    }
  }

  TEST_CASE("unencodable widths are rejected") {
    CHECK_THROWS_AS(ecc::encode(0, 0), std::invalid_argument);
    CHECK_THROWS_AS(ecc::encode(0, 58), std::invalid_argument);
  }

  TEST_CASE("layout agrees with the independent oracle") {
    CounterRng rng(3);
    for (unsigned a : {4u, 8u, 11u, 16u, 26u, 32u, 57u}) {
      for (unsigned b = 0; b < a; ++b) CHECK(ecc::data_position(a, b) == oracle_data_position(b));
      for (int i = 0; i < 50; ++i) {
        const std::uint64_t d = rng() & (a == 64 ? ~0ull : ((1ull << a) - 1));
        const auto cw = ecc::encode(d, a);
        CHECK(oracle_valid(cw));
        for (unsigned b = 0; b < a; ++b) CHECK(((cw.bits >> ecc::data_position(a, b)) & 1u) == ((d >> b) & 1u));
      }
    }
    CHECK(oracle_valid(ecc::encode(0, 8)));
  }

  TEST_CASE("clean, single and double errors") {
    const auto cw = ecc::encode(0xBEEF, 16);
    auto r = ecc::decode(cw);
    CHECK(r.status == ecc::DecodeStatus::Clean);
    CHECK(r.data == 0xBEEF);
    r = ecc::decode(ecc::flip(cw, 3));
    CHECK(r.status == ecc::DecodeStatus::Corrected);
    CHECK(r.position == 3);
    CHECK(r.data == 0xBEEF);
    r = ecc::decode(ecc::flip(ecc::flip(cw, 3), 9));
    CHECK(r.status == ecc::DecodeStatus::DoubleError);
  }

  TEST_CASE("register file scrubs transient flips") {
    ecc::RegisterFile rf;
    rf.declare("scale", 32);
    rf.write("scale", 0x3F800000u);
    CHECK(rf.read("scale").status == ecc::DecodeStatus::Clean);
    rf.inject_flip("scale", 7);
    const auto r = rf.read("scale");
    CHECK(r.status == ecc::DecodeStatus::Corrected);
    CHECK(r.data == 0x3F800000u);
    CHECK(rf.read("scale").status == ecc::DecodeStatus::Clean);
    rf.inject_flip("scale", 1);
    rf.inject_flip("scale", 2);
    CHECK(rf.read("scale").status == ecc::DecodeStatus::DoubleError);
    CHECK(rf.stats("scale").double_errors == 1);
  }

  TEST_CASE("a stuck codeword bit is corrected on every read") {
    ecc::RegisterFile rf;
    rf.declare("r", 8);
    rf.write("r", 0x00);
    const unsigned pos = ecc::data_position(8, 0);
    rf.set_stuck("r", pos, true);
    for (int i = 0; i < 3; ++i) {
      const auto r = rf.read("r");
      CHECK(r.status == ecc::DecodeStatus::Corrected);
      CHECK(r.data == 0u);
    }
    CHECK(rf.stats("r").corrected == 3);
  }
}
