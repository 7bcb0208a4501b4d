// SPDX-License-Identifier: Apache-2.0
#include "pcrt/vis.hpp"

#include <atomic>
#include <chrono>
#include <stdexcept>

namespace pcrt {

namespace {
// Rows are not word aligned when cols % 64 != 0, so neighbouring tasks can
// touch the same word.
void atomic_or(std::vector<std::uint64_t>& words, std::size_t index, std::uint64_t value) {
  if (value == 0) return;
  std::atomic_ref<std::uint64_t>(words[index]).fetch_or(value, std::memory_order_relaxed);
}
} // namespace

VisibilityMatrix VisibilityMatrix::build(const Scene& scene,
                                         const std::vector<DiscretizedPointSet>& dps_list,
                                         const AccelStructure& accel,
                                         const IntersectionConfig& config, ThreadPool& pool) {
  if (scene.receivers.empty()) throw std::invalid_argument("visibility matrix needs >= 1 RX");

  const auto start = std::chrono::steady_clock::now();
  VisibilityMatrix m;
  m.rows_ = scene.receivers.size();
  m.cols_ = dps_list.size();
  m.words_.assign((m.rows_ * m.cols_ + 63) / 64, 0);

  // Tasks are 64-column blocks of one row; bits merge with atomic ORs.
  const std::size_t blocks = (m.cols_ + 63) / 64;
  pool.parallel_for(m.rows_ * blocks, 1, [&](std::size_t begin, std::size_t end) {
    for (std::size_t task = begin; task < end; ++task) {
      const std::size_t rx = task / blocks;
      const std::size_t block = task % blocks;
      const std::size_t col0 = block * 64;
      const std::size_t col1 = std::min(col0 + 64, m.cols_);
      std::uint64_t bits = 0;
      for (std::size_t d = col0; d < col1; ++d) {
        if (test_visibility(scene.receivers[rx], dps_list[d].reception_point, accel, dps_list,
                            scene, config))
          bits |= std::uint64_t{1} << (d - col0);
      }
      // Row bit offset need not be word aligned when cols % 64 != 0.
      const std::size_t bit0 = rx * m.cols_ + col0;
      const std::size_t word = bit0 >> 6;
      const unsigned shift = static_cast<unsigned>(bit0 & 63);
      atomic_or(m.words_, word, bits << shift);
      if (shift != 0 && word + 1 < m.words_.size())
        atomic_or(m.words_, word + 1, bits >> (64 - shift));
    }
  });

  m.build_millis_ =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return m;
}

VisibilityMatrix VisibilityMatrix::from_words(std::size_t rows, std::size_t cols,
                                              std::vector<std::uint64_t> words) {
  if (words.size() != (rows * cols + 63) / 64)
    throw std::invalid_argument("visibility word count does not match the matrix shape");
  VisibilityMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.words_ = std::move(words);
  return m;
}

std::vector<std::uint32_t> VisibilityMatrix::visible_receivers(std::size_t dps) const {
  if (dps >= cols_) throw std::out_of_range("DPS index out of range");
  std::vector<std::uint32_t> out;
  for (std::size_t rx = 0; rx < rows_; ++rx)
    if (visible(rx, dps)) out.push_back(static_cast<std::uint32_t>(rx));
  return out;
}

void VisibilityMatrix::check_bounds(std::size_t rx, std::size_t dps) const {
  if (rx >= rows_ || dps >= cols_) throw std::out_of_range("visibility matrix index out of range");
}

} // namespace pcrt
