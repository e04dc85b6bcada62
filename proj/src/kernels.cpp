#include "rde/kernels.hpp"

#include <algorithm>
#include <cstring>

namespace rde::kernels {

void conv3x3_forward(const double* in, int ci, int h, int w, const double* weights,
                     const double* bias, int co, double* out) {
    const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
#pragma omp parallel for schedule(static)
    for (int o = 0; o < co; ++o) {
        const double* wbase = weights + static_cast<std::ptrdiff_t>(o) * ci * 9;
        double* obase = out + o * plane;
        for (std::ptrdiff_t p = 0; p < plane; ++p)
            obase[p] = bias[o];
        for (int i = 0; i < ci; ++i) {
            const double* ibase = in + i * plane;
            const double* wk = wbase + i * 9;
            for (int y = 0; y < h; ++y) {
                double* orow = obase + static_cast<std::ptrdiff_t>(y) * w;
                // taps with all rows in range, unrolled over the interior
                for (int ky = 0; ky < 3; ++ky) {
                    int yy = y + ky - 1;
                    if (yy < 0 || yy >= h) continue;
                    const double* irow = ibase + static_cast<std::ptrdiff_t>(yy) * w;
                    const double w0 = wk[ky * 3], w1 = wk[ky * 3 + 1], w2 = wk[ky * 3 + 2];
                    if (w == 1) {
                        orow[0] += w1 * irow[0];
                        continue;
                    }
                    orow[0] += w1 * irow[0] + w2 * irow[1];
                    for (int x = 1; x < w - 1; ++x)
                        orow[x] += w0 * irow[x - 1] + w1 * irow[x] + w2 * irow[x + 1];
                    orow[w - 1] += w0 * irow[w - 2] + w1 * irow[w - 1];
                }
            }
        }
    }
}

void conv3x3_backward_input(const double* gout, int co, int h, int w,
                            const double* weights, int ci, double* gin) {
    const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
    // Correlation with the 180-degree-rotated kernels, one input channel per
    // worker so every element is written by exactly one thread.
#pragma omp parallel for schedule(static)
    for (int i = 0; i < ci; ++i) {
        double* gbase = gin + i * plane;
        for (std::ptrdiff_t p = 0; p < plane; ++p)
            gbase[p] = 0.0;
        for (int o = 0; o < co; ++o) {
            const double* obase = gout + o * plane;
            const double* wk = weights + (static_cast<std::ptrdiff_t>(o) * ci + i) * 9;
            for (int y = 0; y < h; ++y) {
                double* grow_out = gbase + static_cast<std::ptrdiff_t>(y) * w;
                for (int ky = 0; ky < 3; ++ky) {
                    int yy = y - ky + 1;
                    if (yy < 0 || yy >= h) continue;
                    const double* grow = obase + static_cast<std::ptrdiff_t>(yy) * w;
                    const double w0 = wk[ky * 3], w1 = wk[ky * 3 + 1], w2 = wk[ky * 3 + 2];
                    if (w == 1) {
                        grow_out[0] += w1 * grow[0];
                        continue;
                    }
                    grow_out[0] += w0 * grow[1] + w1 * grow[0];
                    for (int x = 1; x < w - 1; ++x)
                        grow_out[x] += w0 * grow[x + 1] + w1 * grow[x] + w2 * grow[x - 1];
                    grow_out[w - 1] += w1 * grow[w - 1] + w2 * grow[w - 2];
                }
            }
        }
    }
}

void conv3x3_backward_params(const double* in, int ci, const double* gout, int co,
                             int h, int w, double* gweights, double* gbias) {
    const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
#pragma omp parallel for schedule(static)
    for (int o = 0; o < co; ++o) {
        const double* obase = gout + o * plane;
        double bacc = 0.0;
        for (std::ptrdiff_t p = 0; p < plane; ++p)
            bacc += obase[p];
        gbias[o] += bacc;
        for (int i = 0; i < ci; ++i) {
            const double* ibase = in + i * plane;
            double* wk = gweights + (static_cast<std::ptrdiff_t>(o) * ci + i) * 9;
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    double acc = 0.0;
                    for (int y = 0; y < h; ++y) {
                        int yy = y + ky - 1;
                        if (yy < 0 || yy >= h) continue;
                        for (int x = 0; x < w; ++x) {
                            int xx = x + kx - 1;
                            if (xx < 0 || xx >= w) continue;
                            acc += obase[y * w + x] * ibase[yy * w + xx];
                        }
                    }
                    wk[ky * 3 + kx] += acc;
                }
        }
    }
}

void maxpool2_forward(const double* in, int c, int h, int w, double* out,
                      std::int32_t* argmax) {
    int ho = h / 2, wo = w / 2;
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        const double* ibase = in + static_cast<std::ptrdiff_t>(ch) * h * w;
        double* obase = out + static_cast<std::ptrdiff_t>(ch) * ho * wo;
        std::int32_t* abase = argmax + static_cast<std::ptrdiff_t>(ch) * ho * wo;
        for (int y = 0; y < ho; ++y)
            for (int x = 0; x < wo; ++x) {
                int best = (2 * y) * w + 2 * x;
                double bv = ibase[best];
                const int cand[3] = {(2 * y) * w + 2 * x + 1, (2 * y + 1) * w + 2 * x,
                                     (2 * y + 1) * w + 2 * x + 1};
                for (int idx : cand)
                    if (ibase[idx] > bv) { // strict: ties keep the first index
                        bv = ibase[idx];
                        best = idx;
                    }
                obase[y * wo + x] = bv;
                abase[y * wo + x] = best;
            }
    }
}

void maxpool2_backward(const double* gout, int c, int h, int w, const std::int32_t* argmax,
                       double* gin) {
    int ho = h / 2, wo = w / 2;
    std::memset(gin, 0, sizeof(double) * static_cast<std::size_t>(c) * h * w);
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        const double* obase = gout + static_cast<std::ptrdiff_t>(ch) * ho * wo;
        const std::int32_t* abase = argmax + static_cast<std::ptrdiff_t>(ch) * ho * wo;
        double* gbase = gin + static_cast<std::ptrdiff_t>(ch) * h * w;
        for (int p = 0; p < ho * wo; ++p)
            gbase[abase[p]] += obase[p];
    }
}

void dense_forward(const double* in, int n, const double* weights, const double* bias,
                   int m, double* out) {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < m; ++j) {
        const double* wrow = weights + static_cast<std::ptrdiff_t>(j) * n;
        double acc = bias[j];
        for (int i = 0; i < n; ++i)
            acc += wrow[i] * in[i];
        out[j] = acc;
    }
}

void dense_backward_input(const double* gout, int m, const double* weights, int n,
                          double* gin) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < m; ++j)
            acc += weights[static_cast<std::ptrdiff_t>(j) * n + i] * gout[j];
        gin[i] = acc;
    }
}

void dense_backward_params(const double* in, int n, const double* gout, int m,
                           double* gweights, double* gbias) {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < m; ++j) {
        double* wrow = gweights + static_cast<std::ptrdiff_t>(j) * n;
        for (int i = 0; i < n; ++i)
            wrow[i] += gout[j] * in[i];
        gbias[j] += gout[j];
    }
}

namespace serial {

void conv3x3_forward(const double* in, int ci, int h, int w, const double* weights,
                     const double* bias, int co, double* out) {
    const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
    for (std::ptrdiff_t p = 0; p < co * plane; ++p)
        out[p] = bias[p / plane];
    for (int o = 0; o < co; ++o)
        for (int i = 0; i < ci; ++i)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    double wv = weights[((static_cast<std::ptrdiff_t>(o) * ci + i) * 3 + ky) * 3 + kx];
                    for (int y = std::max(0, 1 - ky); y < std::min(h, h + 1 - ky); ++y)
                        for (int x = std::max(0, 1 - kx); x < std::min(w, w + 1 - kx); ++x)
                            out[o * plane + y * w + x] +=
                                wv * in[i * plane + (y + ky - 1) * w + (x + kx - 1)];
                }
}

void conv3x3_backward_input(const double* gout, int co, int h, int w,
                            const double* weights, int ci, double* gin) {
    const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
    std::memset(gin, 0, sizeof(double) * ci * plane);
    // scatter form: each output gradient feeds the 3x3 patch it read
    for (int o = 0; o < co; ++o)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double g = gout[o * plane + y * w + x];
                for (int i = 0; i < ci; ++i)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            int yy = y + ky - 1, xx = x + kx - 1;
                            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                            gin[i * plane + yy * w + xx] +=
                                g * weights[((static_cast<std::ptrdiff_t>(o) * ci + i) * 3 + ky) * 3 + kx];
                        }
            }
}

} // namespace serial

} // namespace rde::kernels
