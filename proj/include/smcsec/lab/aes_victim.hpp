#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>

#include "smcsec/cache/cache.hpp"

namespace smcsec::lab {

using Block = std::array<std::uint8_t, 16>;

/// First-round AES victim with a single 256-entry, 4-byte T-table.
struct AesVictim {
  Block key{};
  std::uint64_t table_base = 0;
  std::size_t line_bytes = 64;
  std::size_t entries_per_line = 16;
  std::size_t table_lines = 16;

  static AesVictim make(const Block& key, std::uint64_t table_base, std::size_t line_bytes) {
    if (line_bytes < 4 || line_bytes % 4 != 0 || table_base % line_bytes != 0) {
      throw std::invalid_argument("AES victim: table must be line aligned and lines hold whole entries");
    }
    const std::size_t per_line = line_bytes / 4;
    if (per_line > 256) throw std::invalid_argument("AES victim: line larger than the T-table");
    return {key, table_base, line_bytes, per_line, 256 / per_line};
  }

  std::size_t table_line(std::uint8_t plaintext_byte, std::uint8_t key_byte) const {
    return static_cast<std::size_t>(plaintext_byte ^ key_byte) / entries_per_line;
  }

  std::uint64_t line_address(std::size_t table_line_index) const {
    return table_base + line_bytes * table_line_index;
  }

  /// Table line that position i would touch if its key upper nibble were n.
  std::size_t candidate_line(std::uint8_t plaintext_byte, unsigned nibble) const {
    return static_cast<std::size_t>(plaintext_byte ^ static_cast<std::uint8_t>(nibble << 4)) / entries_per_line;
  }

  std::uint8_t key_nibble(std::size_t position) const { return static_cast<std::uint8_t>(key[position] >> 4); }
};

/// The 16 first-round T-table lookups for one plaintext block.
inline void victim_first_round(const AesVictim& victim, const Block& plaintext, cache::Cache& cache) {
  for (std::size_t i = 0; i < 16; ++i) cache.access(victim.line_address(victim.table_line(plaintext[i], victim.key[i])));
}

}  // namespace smcsec::lab
