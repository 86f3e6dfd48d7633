#include "zvvc/kernels.hpp"

#include <cstddef>

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define ZVVC_HAVE_AVX2_BUILD 1
#else
#define ZVVC_HAVE_AVX2_BUILD 0
#endif

namespace zvvc::kernels::avx2 {

#if ZVVC_HAVE_AVX2_BUILD

bool available() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

double sum(std::span<const double> x) {
    const std::size_t n = x.size();
    const double* p = x.data();
    std::size_t i = 0;
    __m256d acc = _mm256_setzero_pd();
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_loadu_pd(p + i));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    // lane order fixed so the result is reproducible run to run
    double r = ((lanes[0] + lanes[1]) + lanes[2]) + lanes[3];
    for (; i < n; ++i) r += p[i];
    return r;
}

double dot(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    const double* a = x.data();
    const double* b = y.data();
    std::size_t i = 0;
    __m256d acc = _mm256_setzero_pd();
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double r = ((lanes[0] + lanes[1]) + lanes[2]) + lanes[3];
    for (; i < n; ++i) r += a[i] * b[i];
    return r;
}

MinMax minmax(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 8) return ref::minmax(x);
    const double* p = x.data();

    __m256d vmin = _mm256_loadu_pd(p);
    __m256d vmax = vmin;
    const __m256d idx0 = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
    __m256d imin = idx0;
    __m256d imax = idx0;
    __m256d idx = idx0;
    const __m256d four = _mm256_set1_pd(4.0);

    std::size_t i = 4;
    for (; i + 4 <= n; i += 4) {
        idx = _mm256_add_pd(idx, four);
        __m256d v = _mm256_loadu_pd(p + i);
        // strict compare keeps the earliest index inside each lane stream
        __m256d lt = _mm256_cmp_pd(v, vmin, _CMP_LT_OQ);
        __m256d gt = _mm256_cmp_pd(v, vmax, _CMP_GT_OQ);
        vmin = _mm256_blendv_pd(vmin, v, lt);
        imin = _mm256_blendv_pd(imin, idx, lt);
        vmax = _mm256_blendv_pd(vmax, v, gt);
        imax = _mm256_blendv_pd(imax, idx, gt);
    }

    alignas(32) double minv[4], mini[4], maxv[4], maxi[4];
    _mm256_store_pd(minv, vmin);
    _mm256_store_pd(mini, imin);
    _mm256_store_pd(maxv, vmax);
    _mm256_store_pd(maxi, imax);

    MinMax r{minv[0], static_cast<std::size_t>(mini[0]), maxv[0], static_cast<std::size_t>(maxi[0])};
    for (int lane = 1; lane < 4; ++lane) {
        auto li = static_cast<std::size_t>(mini[lane]);
        if (minv[lane] < r.min_value || (minv[lane] == r.min_value && li < r.min_index)) {
            r.min_value = minv[lane];
            r.min_index = li;
        }
        auto hi = static_cast<std::size_t>(maxi[lane]);
        if (maxv[lane] > r.max_value || (maxv[lane] == r.max_value && hi < r.max_index)) {
            r.max_value = maxv[lane];
            r.max_index = hi;
        }
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
    const __m256d vlo = _mm256_set1_pd(lo);
    const __m256d vhi = _mm256_set1_pd(hi);
    std::size_t count = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(p + i);
        __m256d out = _mm256_or_pd(_mm256_cmp_pd(v, vlo, _CMP_LT_OQ), _mm256_cmp_pd(v, vhi, _CMP_GT_OQ));
        count += static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(_mm256_movemask_pd(out))));
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

} // namespace zvvc::kernels::avx2
