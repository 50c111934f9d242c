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

#include "quantcore.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "errors.hpp"

namespace semistream::quant {

double MultShift::value() const { return std::ldexp(static_cast<double>(mult), -shift); }

MultShift quantize_multiplier(double m, Rounding mode) {
  if (!std::isfinite(m) || m <= 0.0 || m >= 1.0) {
    std::ostringstream os;
    os << "multiplier " << m << " outside (0, 1)";
    throw DomainError(os.str());
  }
  if (m < kMinMultiplier) {
    std::ostringstream os;
    os << "multiplier " << m << " below 2^-24";
    throw DomainError(os.str());
  }
  int exponent = 0;
  const double fraction = std::frexp(m, &exponent);  // m = fraction * 2^exponent
  const int doublings = -exponent;
  const double scaled = std::ldexp(fraction, 32);
  double rounded = mode == Rounding::Nearest ? std::round(scaled) : std::floor(scaled);
  // fraction close to 1 can round up to 2^32; saturating keeps shift = 32 + doublings
  // at a relative error below 2^-32.
  if (rounded >= 4294967296.0) rounded = 4294967295.0;
  const int shift = 32 + doublings;
  if (shift > 255) throw DomainError("multiplier requires a shift above 255");
  return {static_cast<std::uint32_t>(rounded), static_cast<std::uint8_t>(shift)};
}

std::int64_t rounding_shift(std::int64_t value, unsigned shift, Rounding mode) {
  if (shift == 0) return value;
  if (mode == Rounding::Truncate) {
    if (shift >= 63) return value < 0 ? -1 : 0;
    return value >> shift;
  }
  if (shift >= 127) return 0;
  const bool negative = value < 0;
  unsigned __int128 magnitude = negative ? static_cast<unsigned __int128>(-(value + 1)) + 1
                                         : static_cast<unsigned __int128>(value);
  magnitude += static_cast<unsigned __int128>(1) << (shift - 1);
  const auto result = static_cast<std::int64_t>(magnitude >> shift);
  return negative ? -result : result;
}

std::int32_t requantize(std::int32_t acc, const RequantParams& p, Rounding mode) {
  const std::int64_t product = static_cast<std::int64_t>(acc) * static_cast<std::int64_t>(p.ms.mult);
  const std::int64_t result = rounding_shift(product, p.ms.shift, mode) + p.out_zero;
  if (result > std::numeric_limits<std::int32_t>::max()) return std::numeric_limits<std::int32_t>::max();
  if (result < std::numeric_limits<std::int32_t>::min()) return std::numeric_limits<std::int32_t>::min();
  return static_cast<std::int32_t>(result);
}

std::int32_t clamp(std::int32_t v, std::int32_t lo, std::int32_t hi) {
  if (lo > hi) throw DomainError("clamp bounds inverted");
  return v < lo ? lo : (v > hi ? hi : v);
}

FoldedConv fold_batch_norm(std::span<const double> weights, std::span<const double> bias,
                           const BatchNormParams& bn) {
  const std::size_t channels = bias.size();
  if (channels == 0 || bn.gamma.size() != channels || bn.beta.size() != channels ||
      bn.mean.size() != channels || bn.variance.size() != channels) {
    throw DomainError("batch-norm vectors do not match the output-channel count");
  }
  if (weights.size() % channels != 0) {
    throw DomainError("weight count is not a multiple of the output-channel count");
  }
  const std::size_t per_channel = weights.size() / channels;
  FoldedConv out{std::vector<double>(weights.begin(), weights.end()),
                 std::vector<double>(bias.begin(), bias.end())};
  for (std::size_t c = 0; c < channels; ++c) {
    const double denom = bn.variance[c] + bn.epsilon;
    if (!(denom > 0.0)) throw DomainError("variance + epsilon must be positive");
    const double gain = bn.gamma[c] / std::sqrt(denom);
    for (std::size_t i = 0; i < per_channel; ++i) out.weights[c * per_channel + i] *= gain;
    out.bias[c] = (bias[c] - bn.mean[c]) * gain + bn.beta[c];
  }
  return out;
}

std::int32_t narrow_bias(std::int32_t b, int bits) {
  if (bits != 16 && bits != 18) throw DomainError("bias width must be 16 or 18 bits");
  const std::int32_t hi = (1 << (bits - 1)) - 1;
  const std::int32_t lo = -(1 << (bits - 1));
  if (b < lo || b > hi) {
    std::ostringstream os;
    os << "bias " << b << " does not fit in " << bits << " bits";
    throw RangeError(os.str());
  }
  return b;
}

std::uint8_t add_element(std::int32_t in1, std::int32_t in2, const AddParams& p, Rounding mode) {
  const std::int64_t lifted1 = static_cast<std::int64_t>(in1 - p.in1_zero) << p.pre_shift;
  const std::int64_t lifted2 = static_cast<std::int64_t>(in2 - p.in2_zero) << p.pre_shift;
  const std::int64_t a1 = rounding_shift(lifted1 * p.mult1.mult, p.mult1.shift, mode);
  const std::int64_t a2 = rounding_shift(lifted2 * p.mult2.mult, p.mult2.shift, mode);
  const std::int64_t result = rounding_shift((a1 + a2) * p.mult3.mult, p.mult3.shift, mode) + p.out_zero;
  const std::int64_t clamped = result < p.out_min ? p.out_min : (result > p.out_max ? p.out_max : result);
  return static_cast<std::uint8_t>(clamped);
}

}  // namespace semistream::quant
