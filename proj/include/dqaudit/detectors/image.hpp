/*
 * Copyright 2026 The dqaudit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Pixel-level near-duplicate similarity: 64-bit DCT perceptual hash and
// windowed structural similarity on 8-bit grayscale images.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "dqaudit/core/error.hpp"
#include "dqaudit/core/types.hpp"

namespace dqaudit::detectors {

struct PerceptualHash {
  std::uint64_t bits = 0;
  friend bool operator==(PerceptualHash, PerceptualHash) = default;
};

// Bilinear resize with pixel-center alignment (src = (dst + 0.5) * scale - 0.5,
// clamped to the border), returning doubles.
inline std::vector<double> ResizeBilinear(const GrayImage& img, std::size_t out_w,
                                          std::size_t out_h) {
  std::vector<double> out(out_w * out_h);
  const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
  const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);
  const double max_x = static_cast<double>(img.width - 1);
  const double max_y = static_cast<double>(img.height - 1);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, max_x);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = (1.0 - wx) * img.at(x0, y0) + wx * img.at(x1, y0);
      const double bottom = (1.0 - wx) * img.at(x0, y1) + wx * img.at(x1, y1);
      out[y * out_w + x] = (1.0 - wy) * top + wy * bottom;
    }
  }
  return out;
}

// Top-left `keep` x `keep` block of the orthonormal 2-D DCT-II of an n x n block.
inline std::vector<double> DctLowFrequency(const std::vector<double>& block, std::size_t n,
                                           std::size_t keep) {
  std::vector<double> basis(keep * n);
  for (std::size_t u = 0; u < keep; ++u) {
    const double a = u == 0 ? std::sqrt(1.0 / static_cast<double>(n))
                            : std::sqrt(2.0 / static_cast<double>(n));
    for (std::size_t x = 0; x < n; ++x)
      basis[u * n + x] =
          a * std::cos(std::numbers::pi * (2.0 * static_cast<double>(x) + 1.0) *
                       static_cast<double>(u) / (2.0 * static_cast<double>(n)));
  }
  // rows first: tmp[u][x] = sum_y basis[u][y] * block[y][x]
  std::vector<double> tmp(keep * n, 0.0);
  for (std::size_t u = 0; u < keep; ++u)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) tmp[u * n + x] += basis[u * n + y] * block[y * n + x];
  std::vector<double> out(keep * keep, 0.0);
  for (std::size_t u = 0; u < keep; ++u)
    for (std::size_t v = 0; v < keep; ++v)
      for (std::size_t x = 0; x < n; ++x) out[u * keep + v] += tmp[u * n + x] * basis[v * n + x];
  return out;
}

// Bits are coefficient > median over the 8x8 block (DC included), packed
// row-major with coefficient (0,0) in the most significant bit.
inline PerceptualHash PHash(const GrayImage& img) {
  Require(img.width >= 8 && img.height >= 8, ErrorKind::kContract,
          "pHash needs an image of at least 8x8 pixels");
  const auto small = ResizeBilinear(img, 32, 32);
  const auto coef = DctLowFrequency(small, 32, 8);
  auto sorted = coef;
  std::sort(sorted.begin(), sorted.end());
  const double median = 0.5 * (sorted[31] + sorted[32]);
  PerceptualHash h;
  for (std::size_t k = 0; k < 64; ++k)
    if (coef[k] > median) h.bits |= std::uint64_t{1} << (63 - k);
  return h;
}

inline int HammingDistance(PerceptualHash a, PerceptualHash b) {
  return std::popcount(a.bits ^ b.bits);
}

inline double HashSimilarity(PerceptualHash a, PerceptualHash b) {
  return 1.0 - static_cast<double>(HammingDistance(a, b)) / 64.0;
}

enum class SsimWindowing { kNonOverlapping, kSliding };

// Mean SSIM over 8x8 windows. Trailing rows/columns that do not fill a whole
// window are ignored in non-overlapping mode.
inline double SsimPair(const GrayImage& a, const GrayImage& b,
                       SsimWindowing mode = SsimWindowing::kNonOverlapping) {
  Require(a.width == b.width && a.height == b.height, ErrorKind::kContract,
          "SSIM needs images of equal size");
  Require(a.width >= 8 && a.height >= 8, ErrorKind::kContract,
          "SSIM needs images of at least 8x8 pixels");
  constexpr std::size_t kWin = 8;
  constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);
  const std::size_t step = mode == SsimWindowing::kNonOverlapping ? kWin : 1;
  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t y0 = 0; y0 + kWin <= a.height; y0 += step) {
    for (std::size_t x0 = 0; x0 + kWin <= a.width; x0 += step) {
      double ma = 0.0, mb = 0.0;
      for (std::size_t y = y0; y < y0 + kWin; ++y)
        for (std::size_t x = x0; x < x0 + kWin; ++x) {
          ma += a.at(x, y);
          mb += b.at(x, y);
        }
      const double count = static_cast<double>(kWin * kWin);
      ma /= count;
      mb /= count;
      double va = 0.0, vb = 0.0, cov = 0.0;
      for (std::size_t y = y0; y < y0 + kWin; ++y)
        for (std::size_t x = x0; x < x0 + kWin; ++x) {
          const double da = a.at(x, y) - ma;
          const double db = b.at(x, y) - mb;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      va /= count;
      vb /= count;
      cov /= count;
      total += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
               ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

}  // namespace dqaudit::detectors
