#include "zvvc/kernels.hpp"

#include <cstddef>

#if defined(__aarch64__)
#include <arm_neon.h>
#define ZVVC_HAVE_NEON_BUILD 1
#else
#define ZVVC_HAVE_NEON_BUILD 0
#endif

namespace zvvc::kernels::neon {

#if ZVVC_HAVE_NEON_BUILD

bool available() { return true; } // NEON is mandatory on aarch64

double sum(std::span<const double> x) {
    const std::size_t n = x.size();
    const double* p = x.data();
    std::size_t i = 0;
    float64x2_t acc = vdupq_n_f64(0.0);
    for (; i + 2 <= n; i += 2) {
        acc = vaddq_f64(acc, vld1q_f64(p + i));
    }
    double r = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) r += p[i];
    return r;
}

double dot(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    const double* a = x.data();
    const double* b = y.data();
    std::size_t i = 0;
    float64x2_t acc = vdupq_n_f64(0.0);
    for (; i + 2 <= n; i += 2) {
        acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
    }
    double r = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) r += a[i] * b[i];
    return r;
}

MinMax minmax(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 4) return ref::minmax(x);
    const double* p = x.data();

    float64x2_t vmin = vld1q_f64(p);
    float64x2_t vmax = vmin;
    float64x2_t idx = {0.0, 1.0};
    float64x2_t imin = idx;
    float64x2_t imax = idx;
    const float64x2_t two = vdupq_n_f64(2.0);

    std::size_t i = 2;
    for (; i + 2 <= n; i += 2) {
        idx = vaddq_f64(idx, two);
        float64x2_t v = vld1q_f64(p + i);
        uint64x2_t lt = vcltq_f64(v, vmin);
        uint64x2_t gt = vcgtq_f64(v, vmax);
        vmin = vbslq_f64(lt, v, vmin);
        imin = vbslq_f64(lt, idx, imin);
        vmax = vbslq_f64(gt, v, vmax);
        imax = vbslq_f64(gt, idx, imax);
    }

    double minv[2] = {vgetq_lane_f64(vmin, 0), vgetq_lane_f64(vmin, 1)};
    double mini[2] = {vgetq_lane_f64(imin, 0), vgetq_lane_f64(imin, 1)};
    double maxv[2] = {vgetq_lane_f64(vmax, 0), vgetq_lane_f64(vmax, 1)};
    double maxi[2] = {vgetq_lane_f64(imax, 0), vgetq_lane_f64(imax, 1)};

    MinMax r{minv[0], static_cast<std::size_t>(mini[0]), maxv[0], static_cast<std::size_t>(maxi[0])};
    if (minv[1] < r.min_value || (minv[1] == r.min_value && static_cast<std::size_t>(mini[1]) < r.min_index)) {
        r.min_value = minv[1];
        r.min_index = static_cast<std::size_t>(mini[1]);
    }
    if (maxv[1] > r.max_value || (maxv[1] == r.max_value && static_cast<std::size_t>(maxi[1]) < r.max_index)) {
        r.max_value = maxv[1];
        r.max_index = static_cast<std::size_t>(maxi[1]);
    }
    for (; i < n; ++i) {
        if (p[i] < r.min_value) { r.min_value = p[i]; r.min_index = i; }
        if (p[i] > r.max_value) { r.max_value = p[i]; r.max_index = i; }
    }
    return r;
}

std::size_t count_outside(std::span<const double> x, double lo, double hi) {
    const std::size_t n = x.size();
    const double* p = x.data();
    const float64x2_t vlo = vdupq_n_f64(lo);
    const float64x2_t vhi = vdupq_n_f64(hi);
    std::size_t count = 0;
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t v = vld1q_f64(p + i);
        uint64x2_t out = vorrq_u64(vcltq_f64(v, vlo), vcgtq_f64(v, vhi));
        count += (vgetq_lane_u64(out, 0) >> 63) + (vgetq_lane_u64(out, 1) >> 63);
    }
    for (; i < n; ++i) {
        if (p[i] < lo || p[i] > hi) ++count;
    }
    return count;
}

#else

bool available() { return false; }
double sum(std::span<const double> x) { return ref::sum(x); }
double dot(std::span<const double> x, std::span<const double> y) { return ref::dot(x, y); }
MinMax minmax(std::span<const double> x) { return ref::minmax(x); }
std::size_t count_outside(std::span<const double> x, double lo, double hi) {
    return ref::count_outside(x, lo, hi);
}

#endif

} // namespace zvvc::kernels::neon
