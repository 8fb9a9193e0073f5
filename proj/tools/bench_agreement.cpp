// Compares the serial and OpenMP bootstrap kernels on synthetic reliability
// data of increasing size.

#include "kappaforge/agreement.hpp"
#include "kappaforge/sha256.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace kappaforge;

namespace {

std::vector<LabelVector> synthetic_vectors(int coders, int units, double flip_rate,
                                           uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::string> base(units);
    for (int u = 0; u < units; ++u) {
        base[u] = (rng() % 100 < 20) ? "1" : "0";
    }
    std::vector<LabelVector> vectors(coders);
    for (int c = 0; c < coders; ++c) {
        vectors[c].coder_id = "coder" + std::to_string(c);
        for (int u = 0; u < units; ++u) {
            std::string label = base[u];
            if (double(rng() % 10000) < flip_rate * 10000.0) {
                label = label == "0" ? "1" : "0";
            }
            vectors[c].labels["u" + std::to_string(u)] = label;
        }
    }
    return vectors;
}

double time_ms(const std::function<void()>& fn) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP not enabled; both paths run serially\n");
#endif
    std::printf("%8s %8s %12s %12s %8s\n", "units", "coders", "serial(ms)", "parallel(ms)",
                "speedup");

    for (int units : {200, 1117, 5000}) {
        auto vectors = synthetic_vectors(10, units, 0.02, 42);
        BootstrapOptions options;
        options.n_resamples = 1000;
        options.seed = 7;

        std::vector<double> serial_dist;
        std::vector<double> parallel_dist;
        double serial_ms = time_ms(
            [&] { serial_dist = bootstrap_alpha_distribution_serial(vectors, options); });
        double parallel_ms = time_ms(
            [&] { parallel_dist = bootstrap_alpha_distribution_parallel(vectors, options); });

        bool identical = serial_dist == parallel_dist;
        std::printf("%8d %8d %12.1f %12.1f %7.2fx %s\n", units, 10, serial_ms, parallel_ms,
                    serial_ms / parallel_ms, identical ? "" : "MISMATCH");
    }
    return 0;
}
