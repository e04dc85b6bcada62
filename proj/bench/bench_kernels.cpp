// Times the OpenMP kernels against their serial reference twins.
//   rde-bench [--repeats N]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "rde/kernels.hpp"
#include "rde/nnmodel.hpp"
#include "rde/obfuscation.hpp"
#include "rde/parallel.hpp"
#include "rde/rdecore.hpp"
#include "rde/rng.hpp"
#include "rde/wavelet.hpp"

using namespace rde;

namespace {

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <typename Fn>
double time_best(int repeats, Fn&& fn) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        double t0 = now_seconds();
        fn();
        best = std::min(best, now_seconds() - t0);
    }
    return best;
}

void report(const char* name, double serial_s, double parallel_s) {
    std::printf("%-28s serial %9.3f ms   omp %9.3f ms   speedup %.2fx\n", name,
                serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s);
}

std::vector<double> random_buffer(std::size_t n, std::uint64_t key) {
    std::vector<double> buf(n);
    for (std::size_t i = 0; i < n; ++i)
        buf[i] = rng::uniform(key, i) - 0.5;
    return buf;
}

} // namespace

int main(int argc, char** argv) {
    int repeats = 5;
    for (int i = 1; i + 1 < argc; i += 2)
        if (std::strcmp(argv[i], "--repeats") == 0)
            repeats = std::atoi(argv[i + 1]);

    std::printf("workers: %d, repeats: %d (best-of timing)\n\n", worker_count(), repeats);

    // wavelet cascade, 512x512 single channel
    {
        const int h = 512, w = 512;
        auto grid = random_buffer(static_cast<std::size_t>(h) * w, 1);
        WaveletSpec spec{Family::db3, 5};
        double ser = time_best(repeats, [&] { serial::dwt2(grid, 1, h, w, spec); });
        double par = time_best(repeats, [&] { dwt2(grid, 1, h, w, spec); });
        report("dwt2 512x512 db3 J=5", ser, par);

        WaveletPyramid pyr = dwt2(grid, 1, h, w, spec);
        ser = time_best(repeats, [&] { serial::idwt2(pyr); });
        par = time_best(repeats, [&] { idwt2(pyr); });
        report("idwt2 512x512 db3 J=5", ser, par);
    }

    // convolution block, 16 -> 32 channels at 128x128
    {
        const int ci = 16, co = 32, h = 128, w = 128;
        auto in = random_buffer(static_cast<std::size_t>(ci) * h * w, 2);
        auto weights = random_buffer(static_cast<std::size_t>(co) * ci * 9, 3);
        auto bias = random_buffer(co, 4);
        std::vector<double> out(static_cast<std::size_t>(co) * h * w);
        double ser = time_best(repeats, [&] {
            kernels::serial::conv3x3_forward(in.data(), ci, h, w, weights.data(),
                                             bias.data(), co, out.data());
        });
        double par = time_best(repeats, [&] {
            kernels::conv3x3_forward(in.data(), ci, h, w, weights.data(), bias.data(), co,
                                     out.data());
        });
        report("conv3x3 fwd 16->32 128^2", ser, par);

        auto gout = random_buffer(out.size(), 5);
        std::vector<double> gin(in.size());
        ser = time_best(repeats, [&] {
            kernels::serial::conv3x3_backward_input(gout.data(), co, h, w, weights.data(),
                                                    ci, gin.data());
        });
        par = time_best(repeats, [&] {
            kernels::conv3x3_backward_input(gout.data(), co, h, w, weights.data(), ci,
                                            gin.data());
        });
        report("conv3x3 bwd-in 32->16 128^2", ser, par);
    }

    // one optimizer step on the desk-scale pipeline: the L model evaluations
    // and their vjps run in the sample-parallel loop
    {
        ReferenceCnn model(10, 1, 28, 28, 7);
        Image x(1, 28, 28);
        for (std::size_t i = 0; i < x.data.size(); ++i)
            x.data[i] = rng::uniform(8, i);
        WaveletSpec spec{Family::db3, 4};
        auto repr = wavelet_representation(1, 28, 28, spec);
        Coefficients h = repr->encode(x.data);
        auto obf = make_obfuscator(ObfuscationStrategy::AdaptiveGaussian, h,
                                   repr->partition(), 9);
        RdeConfig cfg;
        cfg.samples = 16;
        std::vector<double> mask(repr->coefficient_count(), 0.7);
        std::vector<double> grad;

        int default_workers = worker_count();
        set_thread_cap(1);
        double ser = time_best(repeats, [&] {
            rde_objective(model, *repr, x, mask, *obf, cfg, 0, &grad);
        });
        set_thread_cap(default_workers);
        double par = time_best(repeats, [&] {
            rde_objective(model, *repr, x, mask, *obf, cfg, 0, &grad);
        });
        report("objective step L=16 28x28", ser, par);
    }
    return 0;
}
