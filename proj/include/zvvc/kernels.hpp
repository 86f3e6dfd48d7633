#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace zvvc::kernels {

enum class Backend { scalar, avx2, neon };

/// Backend chosen at startup: the widest SIMD level the CPU supports,
/// unless overridden by force_backend() or the ZVVC_KERNELS environment
/// variable (values: scalar, avx2, neon).
Backend active_backend();

/// Force a specific backend. Throws ConfigError if this build/CPU cannot run it.
void force_backend(Backend b);

std::string_view backend_name(Backend b);

struct MinMax {
    double min_value;
    std::size_t min_index;
    double max_value;
    std::size_t max_index;
};

double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);

/// First occurrence wins on ties; x must be non-empty.
MinMax minmax(std::span<const double> x);

/// Count of entries strictly outside [lo, hi].
std::size_t count_outside(std::span<const double> x, double lo, double hi);

// Scalar reference kernels. The dispatched entry points above must agree with
// these: bit-exactly for minmax/count_outside, to rounding error for sum/dot.
namespace ref {
double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
MinMax minmax(std::span<const double> x);
std::size_t count_outside(std::span<const double> x, double lo, double hi);
} // namespace ref

} // namespace zvvc::kernels
