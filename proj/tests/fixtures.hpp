#pragma once

// Published metadata of the three large benchmark datasets, used where the
// files themselves (5-27 GB) are out of reach.

#include <cstddef>

namespace fixtures {

struct DatasetMeta {
  const char* name;
  std::size_t n;
  std::size_t d;
  std::size_t nnz;
  double t_seq;   // seconds for one sequential full-gradient pass
  double t_rand;  // seconds for n random component gradients
};

inline constexpr DatasetMeta kddb{"kddb", 19264097, 29890095, 566345888, 3.91, 11.43};
inline constexpr DatasetMeta avazu{"avazu", 25832830, 999962, 387492450, 4.14, 9.08};
inline constexpr DatasetMeta criteo{"criteo", 45840617, 999999, 1787784063, 14.07, 30.51};

}  // namespace fixtures
