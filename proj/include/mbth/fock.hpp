#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "mbth/errors.hpp"

namespace mbth {

/// Exact binomial coefficient in 64-bit arithmetic (valid for all inputs used here).
inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

/// One occupation-number ket: master/partner counts plus packed memory bits.
/// Memory bit b in [0, K) is mode b+1 of the first memory sector; bit b in
/// [K, 2K) is mode b-K+1 of the second sector. Occupations are hard-core (0/1).
struct FockState {
  int n_a = 0;
  int n_b = 0;
  std::uint64_t memory = 0;

  friend bool operator==(const FockState&, const FockState&) = default;
};

/// The ordered basis of the conserved sector: n_a + n_b = N and the total
/// memory occupation fixed at N_m. Immutable after construction.
///
/// Canonical order: n_a descending is the major key; within a fixed n_a the
/// memory words increase, which is colexicographic order on the set of
/// occupied modes. Rank/unrank are O(1) arithmetic on that layout.
class SectorBasis {
 public:
  SectorBasis(int n, int k, int n_m)
      : n_(n), k_(k), n_m_(n_m) {
    if (n < 0 || k < 0 || n_m < 0)
      throw InvalidParameterError("SectorBasis: negative argument");
    if (n_m > 2 * k)
      throw InvalidParameterError("SectorBasis: memory occupation exceeds mode count");
    if (2 * k > 64)
      throw InvalidParameterError("SectorBasis: more than 64 memory modes unsupported");

    mem_patterns_ = binomial(2 * k, n_m);
    states_.reserve(static_cast<std::size_t>(n + 1) * mem_patterns_);
    for (int n_a = n; n_a >= 0; --n_a) {
      std::uint64_t word = n_m == 0 ? 0 : (~std::uint64_t{0} >> (64 - n_m));
      for (std::uint64_t c = 0; c < mem_patterns_; ++c) {
        states_.push_back(FockState{n_a, n - n_a, word});
        word = next_bit_permutation(word);
      }
    }
  }

  int system_size() const { return n_; }
  int modes_per_sector() const { return k_; }
  int memory_occupation() const { return n_m_; }

  std::size_t size() const { return states_.size(); }
  const FockState& state(std::size_t j) const { return states_[j]; }
  const std::vector<FockState>& states() const { return states_; }

  bool in_sector(const FockState& s) const {
    return s.n_a >= 0 && s.n_b >= 0 && s.n_a + s.n_b == n_ &&
           (k_ == 32 ? true : s.memory < (std::uint64_t{1} << (2 * k_))) &&
           std::popcount(s.memory) == n_m_;
  }

  /// Position of s in the canonical order; throws if s violates a conservation law.
  std::size_t rank(const FockState& s) const {
    if (!in_sector(s))
      throw NotInSectorError("rank: state violates the sector conservation laws");
    return static_cast<std::size_t>(n_ - s.n_a) * mem_patterns_ + colex_rank(s.memory);
  }

  /// Occupation (0 or 1) of memory mode `mode_index` in 1..2K for state j.
  int memory_bit(std::size_t j, int mode_index) const {
    return static_cast<int>((states_[j].memory >> (mode_index - 1)) & 1u);
  }

 private:
  // Colex rank of the combination encoded by the set bits of `word`.
  static std::size_t colex_rank(std::uint64_t word) {
    std::size_t r = 0;
    int j = 1;
    while (word != 0) {
      const int p = std::countr_zero(word);
      r += binomial(p, j++);
      word &= word - 1;
    }
    return r;
  }

  // Next word with the same popcount in increasing order (Gosper).
  static std::uint64_t next_bit_permutation(std::uint64_t v) {
    if (v == 0) return 0;
    const std::uint64_t t = v | (v - 1);
    return (t + 1) | (((~t & (t + 1)) - 1) >> (std::countr_zero(v) + 1));
  }

  int n_;
  int k_;
  int n_m_;
  std::uint64_t mem_patterns_ = 0;
  std::vector<FockState> states_;
};

/// All states satisfying both conservation laws, in canonical order.
inline SectorBasis enumerate_sector(int n, int k, int n_m) { return SectorBasis(n, k, n_m); }

}  // namespace mbth
