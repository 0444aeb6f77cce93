#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "omfb/matrix.hpp"
#include "omfb/rng.hpp"

namespace omfb {

enum class Sampling { uniform_random, sequential };

/// Deterministic stream of column indices (or index sets) over [0, n).
///
/// uniform_random draws with replacement across steps; a batch is drawn
/// without replacement inside the step (partial Fisher-Yates over a fresh
/// identity array, so a batch of 1 consumes exactly one draw and equals the
/// single-column stream). sequential cycles 0..n-1, batches being consecutive
/// blocks. Streams are bitwise reproducible for a given seed.
class ColumnSampler {
 public:
  ColumnSampler(Index n, Sampling mode, std::uint64_t seed, Index batch = 1)
      : n_(n), batch_(batch), mode_(mode), rng_(seed), cursor_(0) {
    if (n < 1) throw ArgumentError("ColumnSampler: n must be >= 1");
    if (batch < 1) throw ArgumentError("ColumnSampler: batch must be >= 1");
    if (batch > n) throw ArgumentError("ColumnSampler: batch exceeds column count");
    if (mode_ == Sampling::uniform_random && batch_ > 1) {
      pool_.resize(static_cast<std::size_t>(n));
      std::iota(pool_.begin(), pool_.end(), Index{0});
    }
  }

  Index next() {
    if (batch_ != 1) throw ArgumentError("ColumnSampler: next() requires batch == 1");
    return draw_one();
  }

  std::vector<Index> next_batch() {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(batch_));
    if (mode_ == Sampling::sequential) {
      for (Index i = 0; i < batch_; ++i) out.push_back(advance_sequential());
      return out;
    }
    if (batch_ == 1) {
      out.push_back(draw_one());
      return out;
    }
    // fresh identity each step: batches are independent across steps
    std::iota(pool_.begin(), pool_.end(), Index{0});
    for (Index i = 0; i < batch_; ++i) {
      const auto j = i + Index(rng_.uniform_below(std::uint64_t(n_ - i)));
      std::swap(pool_[std::size_t(i)], pool_[std::size_t(j)]);
      out.push_back(pool_[std::size_t(i)]);
    }
    return out;
  }

  Index n() const { return n_; }
  Index batch() const { return batch_; }

 private:
  Index draw_one() {
    if (mode_ == Sampling::sequential) return advance_sequential();
    return Index(rng_.uniform_below(std::uint64_t(n_)));
  }
  Index advance_sequential() {
    const Index k = cursor_;
    cursor_ = (cursor_ + 1) % n_;
    return k;
  }

  Index n_;
  Index batch_;
  Sampling mode_;
  Xoshiro256pp rng_;
  Index cursor_;
  std::vector<Index> pool_;
};

}  // namespace omfb
