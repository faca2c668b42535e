#include "bdqsd/kernels.hpp"

#include <cstddef>

namespace bdqsd::kernels {

namespace {

inline double left_entry(const SubGenerator& q, std::span<const double> x,
                         std::size_t j) {
  const auto& cols = q.columns();
  double sum = x[j] * q.diagonal()[j];
  for (std::size_t k = cols.offsets[j]; k < cols.offsets[j + 1]; ++k) {
    sum += x[cols.columns[k]] * cols.values[k];
  }
  return sum;
}

inline double right_entry(const SubGenerator& q, std::span<const double> x,
                          std::size_t i) {
  const auto& rows = q.rows();
  double sum = q.diagonal()[i] * x[i];
  for (std::size_t k = rows.offsets[i]; k < rows.offsets[i + 1]; ++k) {
    sum += rows.values[k] * x[rows.columns[k]];
  }
  return sum;
}

}  // namespace

namespace serial {

void left_multiply(const SubGenerator& q, std::span<const double> x,
                   std::span<double> y) {
  const std::size_t n = q.size();
  for (std::size_t j = 0; j < n; ++j) y[j] = left_entry(q, x, j);
}

void right_multiply(const SubGenerator& q, std::span<const double> x,
                    std::span<double> y) {
  const std::size_t n = q.size();
  for (std::size_t i = 0; i < n; ++i) y[i] = right_entry(q, x, i);
}

void left_step(const SubGenerator& q, double rate, std::span<const double> x,
               std::span<double> y) {
  const std::size_t n = q.size();
  for (std::size_t j = 0; j < n; ++j) {
    y[j] = x[j] + left_entry(q, x, j) / rate;
  }
}

void right_step(const SubGenerator& q, double rate, std::span<const double> x,
                std::span<double> y) {
  const std::size_t n = q.size();
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = x[i] + right_entry(q, x, i) / rate;
  }
}

}  // namespace serial

namespace parallel {

void left_multiply(const SubGenerator& q, std::span<const double> x,
                   std::span<double> y) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(q.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    y[j] = left_entry(q, x, static_cast<std::size_t>(j));
  }
}

void right_multiply(const SubGenerator& q, std::span<const double> x,
                    std::span<double> y) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(q.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    y[i] = right_entry(q, x, static_cast<std::size_t>(i));
  }
}

void left_step(const SubGenerator& q, double rate, std::span<const double> x,
               std::span<double> y) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(q.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    const auto u = static_cast<std::size_t>(j);
    y[u] = x[u] + left_entry(q, x, u) / rate;
  }
}

void right_step(const SubGenerator& q, double rate, std::span<const double> x,
                std::span<double> y) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(q.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    y[u] = x[u] + right_entry(q, x, u) / rate;
  }
}

}  // namespace parallel

void left_multiply(const SubGenerator& q, std::span<const double> x,
                   std::span<double> y) {
  if (q.size() >= kParallelThreshold) {
    parallel::left_multiply(q, x, y);
  } else {
    serial::left_multiply(q, x, y);
  }
}

void right_multiply(const SubGenerator& q, std::span<const double> x,
                    std::span<double> y) {
  if (q.size() >= kParallelThreshold) {
    parallel::right_multiply(q, x, y);
  } else {
    serial::right_multiply(q, x, y);
  }
}

void left_step(const SubGenerator& q, double rate, std::span<const double> x,
               std::span<double> y) {
  if (q.size() >= kParallelThreshold) {
    parallel::left_step(q, rate, x, y);
  } else {
    serial::left_step(q, rate, x, y);
  }
}

void right_step(const SubGenerator& q, double rate, std::span<const double> x,
                std::span<double> y) {
  if (q.size() >= kParallelThreshold) {
    parallel::right_step(q, rate, x, y);
  } else {
    serial::right_step(q, rate, x, y);
  }
}

}  // namespace bdqsd::kernels
