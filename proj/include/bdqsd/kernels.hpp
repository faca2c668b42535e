#pragma once

#include <span>

#include "bdqsd/truncation.hpp"

// Sparse generator kernels. Every output entry is produced by exactly one
// loop iteration with a fixed summation order, so the serial and OpenMP
// variants return bit-identical results for any thread count.
namespace bdqsd::kernels {

namespace serial {
/// y = x Q
void left_multiply(const SubGenerator& q, std::span<const double> x,
                   std::span<double> y);
/// y = Q x
void right_multiply(const SubGenerator& q, std::span<const double> x,
                    std::span<double> y);
/// y = x (I + Q / rate)
void left_step(const SubGenerator& q, double rate, std::span<const double> x,
               std::span<double> y);
/// y = (I + Q / rate) x
void right_step(const SubGenerator& q, double rate, std::span<const double> x,
                std::span<double> y);
}  // namespace serial

namespace parallel {
void left_multiply(const SubGenerator& q, std::span<const double> x,
                   std::span<double> y);
void right_multiply(const SubGenerator& q, std::span<const double> x,
                    std::span<double> y);
void left_step(const SubGenerator& q, double rate, std::span<const double> x,
               std::span<double> y);
void right_step(const SubGenerator& q, double rate, std::span<const double> x,
                std::span<double> y);
}  // namespace parallel

/// Below this many states the dispatching kernels stay serial.
inline constexpr std::size_t kParallelThreshold = 2048;

void left_multiply(const SubGenerator& q, std::span<const double> x,
                   std::span<double> y);
void right_multiply(const SubGenerator& q, std::span<const double> x,
                    std::span<double> y);
void left_step(const SubGenerator& q, double rate, std::span<const double> x,
               std::span<double> y);
void right_step(const SubGenerator& q, double rate, std::span<const double> x,
                std::span<double> y);

}  // namespace bdqsd::kernels
