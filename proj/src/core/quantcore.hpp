/*
 * Copyright 2026 The Semistream Authors. All Rights Reserved
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace semistream::quant {

/// How a real multiplier is turned into MULT and how the final right shift
/// disposes of the discarded bits.
///
/// Nearest: MULT = round(m * 2^shift), shifts add 2^(shift-1) and round
/// half away from zero.  Truncate: MULT = floor(m * 2^shift), shifts are a
/// plain arithmetic (flooring) right shift.
enum class Rounding : std::uint8_t { Nearest, Truncate };

/// Fixed-point encoding of a real scalar in (0, 1): value = mult * 2^-shift,
/// with mult normalized into [2^31, 2^32).
struct MultShift {
  std::uint32_t mult = 0;
  std::uint8_t shift = 0;

  double value() const;
  bool operator==(const MultShift&) const = default;
};

struct RequantParams {
  MultShift ms;
  std::int32_t out_zero = 0;
  std::int32_t out_min = 0;
  std::int32_t out_max = 255;

  bool operator==(const RequantParams&) const = default;
};

/// Scalars for the normalized residual addition.  Both inputs are lifted by
/// pre_shift bits, scaled onto a common grid, summed and rescaled.
struct AddParams {
  MultShift mult1;
  MultShift mult2;
  MultShift mult3;
  std::int32_t in1_zero = 0;
  std::int32_t in2_zero = 0;
  std::int32_t out_zero = 0;
  std::int32_t pre_shift = 20;
  std::int32_t out_min = 0;
  std::int32_t out_max = 255;

  bool operator==(const AddParams&) const = default;
};

struct BatchNormParams {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> mean;
  std::vector<double> variance;
  double epsilon = 1e-3;
};

struct FoldedConv {
  std::vector<double> weights;
  std::vector<double> bias;
};

inline constexpr double kMinMultiplier = 1.0 / (1 << 24);
inline constexpr int kAddPreShift = 20;

MultShift quantize_multiplier(double m, Rounding mode = Rounding::Nearest);

/// Right shift of a signed 64-bit product under the given rounding mode.
std::int64_t rounding_shift(std::int64_t value, unsigned shift, Rounding mode);

/// ((acc * mult) >> shift) + out_zero, unclamped.
std::int32_t requantize(std::int32_t acc, const RequantParams& p,
                        Rounding mode = Rounding::Nearest);

std::int32_t clamp(std::int32_t v, std::int32_t lo, std::int32_t hi);

/// requantize followed by clamping to [out_min, out_max].
inline std::uint8_t requantize_clamped(std::int32_t acc, const RequantParams& p,
                                       Rounding mode) {
  return static_cast<std::uint8_t>(clamp(requantize(acc, p, mode), p.out_min, p.out_max));
}

/// Folds an inference-time batch normalization into the preceding
/// convolution.  `weights` is laid out output-channel-major; the number of
/// output channels is bias.size().
FoldedConv fold_batch_norm(std::span<const double> weights, std::span<const double> bias,
                           const BatchNormParams& bn);

/// Checks that b is representable as a signed `bits`-wide integer.  The
/// narrow value is returned widened back to 32 bits.
std::int32_t narrow_bias(std::int32_t b, int bits);

/// Normalized residual addition of one element pair.
std::uint8_t add_element(std::int32_t in1, std::int32_t in2, const AddParams& p,
                         Rounding mode = Rounding::Nearest);

}  // namespace semistream::quant
