#include "omfb/rng.hpp"

namespace omfb {

Matrix normal_matrix(Index rows, Index cols, std::uint64_t seed) {
  Xoshiro256pp rng(seed);
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = rng.normal();
  return out;
}

}  // namespace omfb
