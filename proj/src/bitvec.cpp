#include "lutcount/bitvec.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace lutcount {

namespace {

constexpr std::size_t words_for(std::size_t n) { return (n + BitVector::word_bits - 1) / BitVector::word_bits; }

void check_same_length(const BitVector& a, const BitVector& b) {
  if (a.length() != b.length()) {
    throw std::invalid_argument("bit vector length mismatch: " + std::to_string(a.length()) + " vs " +
                                std::to_string(b.length()));
  }
}

}  // namespace

BitVector::BitVector(std::size_t n) : length_(n) {
  if (n == 0) throw std::invalid_argument("bit vector length must be at least 1");
  words_.assign(words_for(n), 0);
}

bool BitVector::test(std::size_t i) const {
  if (i >= length_) throw std::out_of_range("bit index " + std::to_string(i) + " out of range");
  return (words_[i / word_bits] >> (i % word_bits)) & 1U;
}

void BitVector::set(std::size_t i, bool value) {
  if (i >= length_) throw std::out_of_range("bit index " + std::to_string(i) + " out of range");
  const word_type mask = word_type{1} << (i % word_bits);
  if (value) {
    words_[i / word_bits] |= mask;
  } else {
    words_[i / word_bits] &= ~mask;
  }
}

std::size_t BitVector::weight() const noexcept {
  std::size_t total = 0;
  for (word_type w : words_) total += static_cast<std::size_t>(std::popcount(w));
  return total;
}

std::size_t BitVector::weight_range(std::size_t first, std::size_t count) const noexcept {
  if (first >= length_) return 0;
  std::size_t last = first + count;
  if (last > length_) last = length_;
  std::size_t total = 0;
  while (first < last) {
    const std::size_t offset = first % word_bits;
    const std::size_t take = std::min(word_bits - offset, last - first);
    word_type w = words_[first / word_bits] >> offset;
    if (take < word_bits) w &= (word_type{1} << take) - 1;
    total += static_cast<std::size_t>(std::popcount(w));
    first += take;
  }
  return total;
}

std::vector<std::uint32_t> BitVector::indices() const {
  std::vector<std::uint32_t> out;
  for (std::size_t k = 0; k < words_.size(); ++k) {
    word_type w = words_[k];
    while (w != 0) {
      out.push_back(static_cast<std::uint32_t>(k * word_bits + static_cast<std::size_t>(std::countr_zero(w))));
      w &= w - 1;
    }
  }
  return out;
}

std::string BitVector::to_string() const {
  std::string s(length_, '0');
  for (std::size_t i = 0; i < length_; ++i) {
    if ((words_[i / word_bits] >> (i % word_bits)) & 1U) s[i] = '1';
  }
  return s;
}

BitVector make_zero(std::size_t n) { return BitVector(n); }

BitVector make_ones(std::size_t n) {
  BitVector v(n);
  for (std::size_t i = 0; i < n; ++i) v.set(i);
  return v;
}

BitVector from_indices(std::size_t n, std::span<const std::uint32_t> indices) {
  BitVector v(n);
  for (std::uint32_t i : indices) v.set(i);
  return v;
}

BitVector from_indices(std::size_t n, std::initializer_list<std::uint32_t> indices) {
  return from_indices(n, std::span<const std::uint32_t>(indices.begin(), indices.size()));
}

BitVector from_string(std::string_view bits) {
  BitVector v(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      v.set(i);
    } else if (bits[i] != '0') {
      throw std::invalid_argument("bit string may contain only '0' and '1'");
    }
  }
  return v;
}

BitVector random_fixed_weight(std::size_t n, std::size_t w, RngStream& rng) {
  if (w > n) {
    throw std::invalid_argument("target weight " + std::to_string(w) + " exceeds length " + std::to_string(n));
  }
  BitVector v(n);
  // Floyd: for j in [n-w, n) pick t in [0, j]; take t unless already taken, else j.
  for (std::size_t j = n - w; j < n; ++j) {
    const auto t = static_cast<std::size_t>(rng.uniform_below(j + 1));
    v.set(v.test(t) ? j : t);
  }
  return v;
}

std::size_t exact_weight(const BitVector& v) noexcept { return v.weight(); }

BitVector bitwise_and(const BitVector& a, const BitVector& b) {
  check_same_length(a, b);
  BitVector out(a.length());
  // Padding bits stay zero because both inputs keep them zero.
  for (std::size_t k = 0; k < a.words_.size(); ++k) out.words_[k] = a.words_[k] & b.words_[k];
  return out;
}

std::size_t and_weight(const BitVector& a, const BitVector& b) {
  check_same_length(a, b);
  std::size_t total = 0;
  for (std::size_t k = 0; k < a.words().size(); ++k) {
    total += static_cast<std::size_t>(std::popcount(a.words()[k] & b.words()[k]));
  }
  return total;
}

}  // namespace lutcount
