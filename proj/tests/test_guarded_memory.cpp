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

#include <sstream>

#include "npuguard/guarded_memory.hpp"
#include "npuguard/rng.hpp"

using namespace npuguard;

namespace {

WordMatrix small_block() {
  WordMatrix m(2, 2);
  m(0, 0) = Word{0b1100, DType::Int8};
  m(0, 1) = Word{0b0011, DType::Int8};
  m(1, 0) = Word{0b0001, DType::Int8};
  m(1, 1) = Word{0b0010, DType::Int8};
  return m;
}

WordMatrix random_block(CounterRng& rng, std::size_t n, DType t) {
  WordMatrix m(n, n, zero_word(t));
  for (auto& w : m.flat()) w = Word::from_bits(static_cast<std::uint32_t>(rng()), t);
  return m;
}

}  // namespace

TEST_SUITE("guarded_memory") {
  TEST_CASE("checksums are wrapping sums of masked patterns") {
    const auto s = checksum_generate(small_block(), protection_mask(DType::Int8, MaskPolicy::full()));
    CHECK(s.row_sums == std::vector<std::uint32_t>{15, 3});
    CHECK(s.col_sums == std::vector<std::uint32_t>{13, 5});

    WordMatrix z(4, 4, zero_word(DType::Int8));
    const auto zs = checksum_generate(z, protection_mask(DType::Int8, MaskPolicy::full()));
    for (auto v : zs.row_sums) CHECK(v == 0u);

    // Row and column totals agree modulo the checksum width.
    CounterRng rng(1);
    const auto b = random_block(rng, 16, DType::Fp32);
    const auto bs = checksum_generate(b, protection_mask(DType::Fp32, MaskPolicy::top_sensitive()));
    std::uint32_t r = 0, c = 0;
    for (auto v : bs.row_sums) r += v;
    for (auto v : bs.col_sums) c += v;
    const std::uint32_t w = low_bits(bs.width);
    CHECK((r & w) == (c & w));
  }

  TEST_CASE("single masked flip is corrected in place") {
    GuardedMemory mem(64, MaskPolicy::full());
    mem.mvin(0, small_block());
    CHECK(mem.verify_and_correct(0).status == VerifyStatus::Clean);
    mem.raw_data(0)(0, 0) = flip_bit(mem.raw_data(0)(0, 0), 2);
    CHECK(mem.raw_data(0)(0, 0).bits == 0b1000u);
    const auto out = mem.verify_and_correct(0);
    CHECK(out.status == VerifyStatus::Corrected);
    REQUIRE(out.corrections.size() == 1);
    CHECK(out.corrections[0].row == 0);
    CHECK(out.corrections[0].col == 0);
    CHECK(mem.raw_data(0) == small_block());
    const auto log = mem.mvout_error_block();
    REQUIRE(log.size() == 1);
    CHECK(log[0].count == 1);
    CHECK(log[0].row == 0);
    CHECK(log[0].col_or_tile == 0);
  }

  TEST_CASE("lone guardpad mismatch repairs the checksum, not the data") {
    GuardedMemory mem(64, MaskPolicy::full());
    mem.mvin(0, small_block());
    mem.guardpad_entry(0, Axis::Row, 1) ^= 1u << 4;
    const auto out = mem.verify_and_correct(0);
    CHECK(out.status == VerifyStatus::ChecksumRepaired);
    CHECK(mem.raw_data(0) == small_block());
    CHECK(mem.stored_checksums(0) ==
          checksum_generate(small_block(), protection_mask(DType::Int8, MaskPolicy::full())));
  }

  TEST_CASE("16x16 blocks keep 32 guardpad entries") {
    CounterRng rng(2);
    GuardedMemory mem(64);
    const auto b = random_block(rng, 16, DType::Int8);
    mem.mvin(0, b);
    CHECK(mem.guardpad_size() >= 32);
    CHECK(mem.stored_checksums(0) == checksum_generate(b, mem.mask_for(DType::Int8)));
  }

  TEST_CASE("re-writing an address keeps the error count") {
    GuardedMemory mem(64, MaskPolicy::full());
    for (int trial = 0; trial < 3; ++trial) {
      mem.mvin(0, small_block());
      mem.raw_data(0)(1, 1) = flip_bit(mem.raw_data(0)(1, 1), 0);
      CHECK(mem.verify_and_correct(0).status == VerifyStatus::Corrected);
    }
    const auto log = mem.mvout_error_block(true);
    REQUIRE(log.size() == 1);
    CHECK(log[0].count == 3);
    CHECK(log[0].permanent_candidate());
    CHECK(mem.mvout_error_block().empty());
  }

  TEST_CASE("overlap and overflow are rejected") {
    GuardedMemory mem(8);
    mem.mvin(0, WordMatrix(4, 4, zero_word(DType::Int8)));
    CHECK_THROWS_AS(mem.mvin(2, WordMatrix(4, 4, zero_word(DType::Int8))), AllocationError);
    CHECK_THROWS_AS(mem.mvin(6, WordMatrix(4, 4, zero_word(DType::Int8))), AllocationError);
    mem.mvin(4, WordMatrix(4, 4, zero_word(DType::Int8)));
    CHECK_THROWS_AS(mem.verify_and_correct(2), std::out_of_range);
  }

  TEST_CASE("unmasked flips never trigger corrections") {
    CounterRng rng(5);
    GuardedMemory mem(64);
    const auto b = random_block(rng, 8, DType::Fp32);
    mem.mvin(0, b);
    mem.raw_data(0)(3, 3) = flip_bit(mem.raw_data(0)(3, 3), 5);  // mantissa
    CHECK(mem.verify_and_correct(0).status == VerifyStatus::Clean);
  }

  TEST_CASE("two flips: corrected means restored, otherwise flagged") {
    // Every placement of two single-bit flips on a 4x4 int8 block.
    CounterRng rng(9);
    const auto b = random_block(rng, 4, DType::Int8);
    std::size_t corrected = 0, flagged = 0;
    for (std::size_t p = 0; p < 16; ++p)
      for (std::size_t q = p + 1; q < 16; ++q)
        for (unsigned bp : {0u, 3u, 7u})
          for (unsigned bq : {1u, 3u}) {
            GuardedMemory mem(8, MaskPolicy::full());
            mem.mvin(0, b);
            auto& raw = mem.raw_data(0);
            raw.flat()[p] = flip_bit(raw.flat()[p], bp);
            raw.flat()[q] = flip_bit(raw.flat()[q], bq);
            const auto out = mem.verify_and_correct(0);
            if (out.status == VerifyStatus::Corrected) {
              CHECK(mem.raw_data(0) == b);
              ++corrected;
            } else {
              CHECK(out.status == VerifyStatus::Uncorrectable);
              ++flagged;
            }
          }
    CHECK(corrected > 0);
    CHECK(corrected + flagged == 120 * 6);
  }

  TEST_CASE("read hands out verified data with fresh sums") {
    GuardedMemory mem(64, MaskPolicy::full());
    mem.mvin(0, small_block());
    mem.raw_data(0)(0, 1) = flip_bit(mem.raw_data(0)(0, 1), 6);
    const auto r = mem.read(0);
    CHECK(r.outcome.status == VerifyStatus::Corrected);
    CHECK(r.data == small_block());
    CHECK(r.sums.row_sums == std::vector<std::uint32_t>{15, 3});
  }

  TEST_CASE("error log csv") {
    GuardedMemory mem(64, MaskPolicy::full());
    mem.mvin(0, small_block());
    mem.raw_data(0)(0, 0) = flip_bit(mem.raw_data(0)(0, 0), 2);
    mem.verify_and_correct(0);
    std::ostringstream os;
    write_error_log_csv(os, mem.mvout_error_block());
    CHECK(os.str().find("address") == 0);
    CHECK(os.str().find("\n0,0,0,") != std::string::npos);
  }
}
