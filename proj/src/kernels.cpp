#include "zvvc/kernels.hpp"

#include "zvvc/errors.hpp"

#include <cstdlib>
#include <string>

namespace zvvc::kernels {

namespace ref {

double sum(std::span<const double> x) {
    double acc = 0.0;
    for (double v : x) acc += v;
    return acc;
}

double dot(std::span<const double> x, std::span<const double> y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
}

MinMax minmax(std::span<const double> x) {
    MinMax r{x[0], 0, x[0], 0};
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (x[i] < r.min_value) { r.min_value = x[i]; r.min_index = i; }
        if (x[i] > r.max_value) { r.max_value = x[i]; r.max_index = i; }
    }
    return r;
}

std::size_t count_outside(std::span<const double> x, double lo, double hi) {
    std::size_t n = 0;
    for (double v : x) {
        if (v < lo || v > hi) ++n;
    }
    return n;
}

} // namespace ref

// Implemented in kernels_avx2.cpp / kernels_neon.cpp; null on other targets.
namespace avx2 {
bool available();
double sum(std::span<const double>);
double dot(std::span<const double>, std::span<const double>);
MinMax minmax(std::span<const double>);
std::size_t count_outside(std::span<const double>, double, double);
} // namespace avx2

namespace neon {
bool available();
double sum(std::span<const double>);
double dot(std::span<const double>, std::span<const double>);
MinMax minmax(std::span<const double>);
std::size_t count_outside(std::span<const double>, double, double);
} // namespace neon

namespace {

struct Dispatch {
    Backend backend;
    double (*sum)(std::span<const double>);
    double (*dot)(std::span<const double>, std::span<const double>);
    MinMax (*minmax)(std::span<const double>);
    std::size_t (*count_outside)(std::span<const double>, double, double);
};

Dispatch make_dispatch(Backend b) {
    switch (b) {
    case Backend::avx2:
        return {b, &avx2::sum, &avx2::dot, &avx2::minmax, &avx2::count_outside};
    case Backend::neon:
        return {b, &neon::sum, &neon::dot, &neon::minmax, &neon::count_outside};
    case Backend::scalar:
    default:
        return {Backend::scalar, &ref::sum, &ref::dot, &ref::minmax, &ref::count_outside};
    }
}

bool backend_supported(Backend b) {
    switch (b) {
    case Backend::scalar: return true;
    case Backend::avx2: return avx2::available();
    case Backend::neon: return neon::available();
    }
    return false;
}

Backend detect_backend() {
    if (const char* env = std::getenv("ZVVC_KERNELS")) {
        std::string v(env);
        Backend want = Backend::scalar;
        if (v == "avx2") want = Backend::avx2;
        else if (v == "neon") want = Backend::neon;
        else if (v != "scalar") throw ConfigError("ZVVC_KERNELS: unknown backend '" + v + "'");
        if (!backend_supported(want)) {
            throw ConfigError("ZVVC_KERNELS: backend '" + v + "' not supported on this CPU/build");
        }
        return want;
    }
    if (avx2::available()) return Backend::avx2;
    if (neon::available()) return Backend::neon;
    return Backend::scalar;
}

Dispatch& dispatch() {
    static Dispatch d = make_dispatch(detect_backend());
    return d;
}

} // namespace

Backend active_backend() { return dispatch().backend; }

void force_backend(Backend b) {
    if (!backend_supported(b)) {
        throw ConfigError(std::string("kernel backend '") + std::string(backend_name(b)) +
                          "' not supported on this CPU/build");
    }
    dispatch() = make_dispatch(b);
}

std::string_view backend_name(Backend b) {
    switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
    }
    return "unknown";
}

double sum(std::span<const double> x) { return dispatch().sum(x); }

double dot(std::span<const double> x, std::span<const double> y) { return dispatch().dot(x, y); }

MinMax minmax(std::span<const double> x) { return dispatch().minmax(x); }

std::size_t count_outside(std::span<const double> x, double lo, double hi) {
    return dispatch().count_outside(x, lo, hi);
}

} // namespace zvvc::kernels
