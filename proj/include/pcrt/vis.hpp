// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "pcrt/isect.hpp"
#include "pcrt/threading.hpp"

namespace pcrt {

/// Packed RX x DPS visibility bitset. Entry (r, d) is true iff the segment
/// from receiver r to the reception point of DPS d was unoccluded at build
/// time.
class VisibilityMatrix {
public:
  static VisibilityMatrix build(const Scene& scene,
                                const std::vector<DiscretizedPointSet>& dps_list,
                                const AccelStructure& accel, const IntersectionConfig& config,
                                ThreadPool& pool);

  /// Assembles a matrix from raw words (the --dump-vis layout).
  static VisibilityMatrix from_words(std::size_t rows, std::size_t cols,
                                     std::vector<std::uint64_t> words);

  bool visible(std::size_t rx, std::size_t dps) const {
    check_bounds(rx, dps);
    const std::size_t bit = rx * cols_ + dps;
    return (words_[bit >> 6] >> (bit & 63)) & 1u;
  }

  /// Receiver indices with a true entry in column dps.
  std::vector<std::uint32_t> visible_receivers(std::size_t dps) const;

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double build_millis() const { return build_millis_; }
  const std::vector<std::uint64_t>& words() const { return words_; }

private:
  void check_bounds(std::size_t rx, std::size_t dps) const;

  std::size_t rows_ = 0, cols_ = 0;
  std::vector<std::uint64_t> words_; // row-major, one bit per entry
  double build_millis_ = 0.0;
};

} // namespace pcrt
