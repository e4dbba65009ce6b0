#pragma once

#include <cstddef>
#include <span>

#include "cyclosense/signal.hpp"

// Thin wrapper over FFTW. Plans are created with FFTW_ESTIMATE so results do
// not depend on runtime measurement, and are cached per geometry.
namespace cyclosense::fft {

enum class Direction { Forward, Inverse };

// Unnormalized in-place DFT: X[k] = sum_n x[n] exp(-+i 2 pi k n / N).
void transform(std::span<cdouble> data, Direction dir = Direction::Forward);

// `count` transforms of length `n`; element j of transform t lives at
// data[t * dist + j * stride].
void transform_many(std::span<cdouble> data, std::size_t n, std::size_t count,
                    std::size_t stride, std::size_t dist,
                    Direction dir = Direction::Forward);

bool is_power_of_two(std::size_t n);

} // namespace cyclosense::fft
