#include "rde/wavelet.hpp"

#include <algorithm>
#include <cmath>

#include "rde/errors.hpp"
#include "rde/parallel.hpp"

namespace rde {

namespace {

// Orthonormal minimum-phase Daubechies analysis low-pass taps.
constexpr double kDb1[2] = {0.7071067811865476, 0.7071067811865476};
constexpr double kDb2[4] = {0.4829629131445342, 0.8365163037378080,
                            0.2241438680420133, -0.1294095225512604};
constexpr double kDb3[6] = {0.3326705529500827,   0.8068915093110927,
                            0.4598775021184915,   -0.1350110200102546,
                            -0.08544127388202663, 0.03522629188570956};
constexpr double kDb4[8] = {0.23037781330889662,  0.7148465705529160,
                            0.6308807679298590,   -0.02798376941686012,
                            -0.18703481171909325, 0.030841381835560764,
                            0.032883011666885203, -0.010597401785069037};

struct FilterPair {
    std::vector<double> lo;
    std::vector<double> hi;
};

FilterPair make_filter_pair(std::span<const double> lo) {
    FilterPair p;
    p.lo.assign(lo.begin(), lo.end());
    int F = static_cast<int>(lo.size());
    p.hi.resize(F);
    for (int j = 0; j < F; ++j)
        p.hi[j] = ((j % 2) ? -1.0 : 1.0) * lo[F - 1 - j];
    return p;
}

const FilterPair& filters(Family f) {
    static const FilterPair db1 = make_filter_pair(kDb1);
    static const FilterPair db2 = make_filter_pair(kDb2);
    static const FilterPair db3 = make_filter_pair(kDb3);
    static const FilterPair db4 = make_filter_pair(kDb4);
    switch (f) {
        case Family::db1: return db1;
        case Family::db2: return db2;
        case Family::db3: return db3;
        case Family::db4: return db4;
    }
    throw DomainError("unknown wavelet family");
}

// One analysis step along a strided line. Output m sits at full-convolution
// index 2m+1 of the zero-extended signal, so every nonzero coefficient of
// the infinite transform is kept and the cascade stays an isometry.
void analyze_line(const double* x, int n, int stride, const FilterPair& fp,
                  double* lo_out, double* hi_out, int out_stride) {
    int F = static_cast<int>(fp.lo.size());
    int out_len = dwt_out_len(n, F);
    for (int m = 0; m < out_len; ++m) {
        int base = 2 * m + 1;
        int jlo = std::max(0, base - (n - 1));
        int jhi = std::min(F - 1, base);
        double lo = 0.0, hi = 0.0;
        for (int j = jlo; j <= jhi; ++j) {
            double xv = x[static_cast<std::ptrdiff_t>(base - j) * stride];
            lo += fp.lo[j] * xv;
            hi += fp.hi[j] * xv;
        }
        lo_out[static_cast<std::ptrdiff_t>(m) * out_stride] = lo;
        hi_out[static_cast<std::ptrdiff_t>(m) * out_stride] = hi;
    }
}

// Transpose of analyze_line: scatter each coefficient back through the same
// taps. Accumulates into x, which the caller zero-initializes.
void synthesize_line(const double* lo_in, const double* hi_in, int m_len, int in_stride,
                     const FilterPair& fp, double* x, int n, int stride) {
    int F = static_cast<int>(fp.lo.size());
    for (int m = 0; m < m_len; ++m) {
        int base = 2 * m + 1;
        double a = lo_in[static_cast<std::ptrdiff_t>(m) * in_stride];
        double d = hi_in[static_cast<std::ptrdiff_t>(m) * in_stride];
        int jlo = std::max(0, base - (n - 1));
        int jhi = std::min(F - 1, base);
        for (int j = jlo; j <= jhi; ++j)
            x[static_cast<std::ptrdiff_t>(base - j) * stride] += fp.lo[j] * a + fp.hi[j] * d;
    }
}

void check_spec(int height, int width, const WaveletSpec& spec) {
    if (height < 1 || width < 1)
        throw DomainError("wavelet: empty image");
    if (spec.scales < 1)
        throw DomainError("wavelet spec: scales must be >= 1");
    int cap = static_cast<int>(std::floor(std::log2(std::min(height, width))));
    if (spec.scales > cap)
        throw DomainError("wavelet spec: " + std::to_string(spec.scales) +
                          " scales too deep for " + std::to_string(height) + "x" +
                          std::to_string(width) + " image (max " + std::to_string(cap) + ")");
}

void check_pyramid(const WaveletPyramid& pyr,
                   const std::vector<std::pair<int, int>>& dims) {
    if (static_cast<int>(pyr.ch.size()) != pyr.channels)
        throw DomainError("pyramid: channel count mismatch");
    for (const auto& chan : pyr.ch) {
        if (static_cast<int>(chan.details.size()) != pyr.spec.scales)
            throw DomainError("pyramid: level count does not match spec");
        const auto [ah, aw] = dims[pyr.spec.scales];
        if (chan.approx.rows != ah || chan.approx.cols != aw)
            throw DomainError("pyramid: approx subband shape mismatch");
        for (int level = 0; level < pyr.spec.scales; ++level) {
            const auto [dh, dw] = dims[level + 1];
            for (const auto& band : chan.details[level])
                if (band.rows != dh || band.cols != dw)
                    throw DomainError("pyramid: detail subband shape mismatch at level " +
                                      std::to_string(level + 1));
        }
    }
}

} // namespace

Family family_from_name(const std::string& name) {
    if (name == "db1" || name == "haar") return Family::db1;
    if (name == "db2") return Family::db2;
    if (name == "db3") return Family::db3;
    if (name == "db4") return Family::db4;
    throw DomainError("unknown wavelet family '" + name + "' (supported: db1..db4)");
}

const char* family_name(Family f) {
    switch (f) {
        case Family::db1: return "db1";
        case Family::db2: return "db2";
        case Family::db3: return "db3";
        case Family::db4: return "db4";
    }
    return "?";
}

std::span<const double> analysis_lowpass(Family f) { return filters(f).lo; }
std::span<const double> analysis_highpass(Family f) { return filters(f).hi; }

std::vector<std::pair<int, int>> level_dims(int height, int width, const WaveletSpec& spec) {
    check_spec(height, width, spec);
    int F = static_cast<int>(filters(spec.family).lo.size());
    std::vector<std::pair<int, int>> dims{{height, width}};
    int h = height, w = width;
    for (int level = 0; level < spec.scales; ++level) {
        h = dwt_out_len(h, F);
        w = dwt_out_len(w, F);
        dims.emplace_back(h, w);
    }
    return dims;
}

std::size_t WaveletPyramid::positions_per_channel() const {
    const auto& c0 = ch.at(0);
    std::size_t k = c0.approx.size();
    for (const auto& level : c0.details)
        for (const auto& band : level)
            k += band.size();
    return k;
}

void WaveletPyramid::flatten_channel(int c, std::span<double> out) const {
    const auto& chan = ch.at(c);
    std::size_t off = 0;
    auto put = [&](const Subband& b) {
        std::copy(b.v.begin(), b.v.end(), out.begin() + off);
        off += b.size();
    };
    put(chan.approx);
    for (int level = spec.scales - 1; level >= 0; --level)
        for (const auto& band : chan.details[level])
            put(band);
}

void WaveletPyramid::unflatten_channel(int c, std::span<const double> in) {
    auto& chan = ch.at(c);
    std::size_t off = 0;
    auto take = [&](Subband& b) {
        std::copy(in.begin() + off, in.begin() + off + b.size(), b.v.begin());
        off += b.size();
    };
    take(chan.approx);
    for (int level = spec.scales - 1; level >= 0; --level)
        for (auto& band : chan.details[level])
            take(band);
}

WaveletPyramid dwt2(const Image& img, const WaveletSpec& spec) {
    return dwt2(std::span<const double>(img.data), img.channels, img.height, img.width, spec);
}

WaveletPyramid dwt2(std::span<const double> grid, int channels, int height, int width,
                    const WaveletSpec& spec) {
    if (grid.size() != static_cast<std::size_t>(channels) * height * width)
        throw DomainError("dwt2: grid size does not match shape");
    check_spec(height, width, spec);
    const FilterPair& fp = filters(spec.family);
    int F = static_cast<int>(fp.lo.size());

    WaveletPyramid pyr;
    pyr.spec = spec;
    pyr.channels = channels;
    pyr.height = height;
    pyr.width = width;
    pyr.ch.resize(channels);

    for (int c = 0; c < channels; ++c) {
        auto& out = pyr.ch[c];
        out.details.resize(spec.scales);
        std::vector<double> ll(grid.begin() + static_cast<std::ptrdiff_t>(c) * height * width,
                               grid.begin() + static_cast<std::ptrdiff_t>(c + 1) * height * width);
        int h = height, w = width;
        for (int level = 0; level < spec.scales; ++level) {
            int wo = dwt_out_len(w, F);
            int ho = dwt_out_len(h, F);
            std::vector<double> lx(static_cast<std::size_t>(h) * wo);
            std::vector<double> hx(static_cast<std::size_t>(h) * wo);
#pragma omp parallel for schedule(static)
            for (int r = 0; r < h; ++r)
                analyze_line(ll.data() + static_cast<std::ptrdiff_t>(r) * w, w, 1, fp,
                             lx.data() + static_cast<std::ptrdiff_t>(r) * wo,
                             hx.data() + static_cast<std::ptrdiff_t>(r) * wo, 1);
            Subband next_ll(ho, wo), lh(ho, wo), hl(ho, wo), hh(ho, wo);
#pragma omp parallel for schedule(static)
            for (int col = 0; col < wo; ++col) {
                analyze_line(lx.data() + col, h, wo, fp, next_ll.v.data() + col,
                             lh.v.data() + col, wo);
                analyze_line(hx.data() + col, h, wo, fp, hl.v.data() + col,
                             hh.v.data() + col, wo);
            }
            out.details[level] = {std::move(lh), std::move(hl), std::move(hh)};
            ll = std::move(next_ll.v);
            h = ho;
            w = wo;
        }
        out.approx.rows = h;
        out.approx.cols = w;
        out.approx.v = std::move(ll);
    }
    return pyr;
}

std::vector<double> idwt2(const WaveletPyramid& pyr) {
    const FilterPair& fp = filters(pyr.spec.family);
    auto dims = level_dims(pyr.height, pyr.width, pyr.spec);
    check_pyramid(pyr, dims);
    std::vector<double> grid(static_cast<std::size_t>(pyr.channels) * pyr.height * pyr.width);

    for (int c = 0; c < pyr.channels; ++c) {
        const auto& in = pyr.ch[c];
        std::vector<double> ll = in.approx.v;
        for (int level = pyr.spec.scales - 1; level >= 0; --level) {
            const auto [ho, wo] = dims[level + 1];
            const auto [h, w] = dims[level];
            const auto& [lh, hl, hh] = in.details[level];
            std::vector<double> lx(static_cast<std::size_t>(h) * wo, 0.0);
            std::vector<double> hx(static_cast<std::size_t>(h) * wo, 0.0);
#pragma omp parallel for schedule(static)
            for (int col = 0; col < wo; ++col) {
                synthesize_line(ll.data() + col, lh.v.data() + col, ho, wo, fp,
                                lx.data() + col, h, wo);
                synthesize_line(hl.v.data() + col, hh.v.data() + col, ho, wo, fp,
                                hx.data() + col, h, wo);
            }
            std::vector<double> next(static_cast<std::size_t>(h) * w, 0.0);
#pragma omp parallel for schedule(static)
            for (int r = 0; r < h; ++r)
                synthesize_line(lx.data() + static_cast<std::ptrdiff_t>(r) * wo,
                                hx.data() + static_cast<std::ptrdiff_t>(r) * wo, wo, 1, fp,
                                next.data() + static_cast<std::ptrdiff_t>(r) * w, w, 1);
            ll = std::move(next);
        }
        std::copy(ll.begin(), ll.end(),
                  grid.begin() + static_cast<std::ptrdiff_t>(c) * pyr.height * pyr.width);
    }
    return grid;
}

WaveletPyramid vjp_idwt2(std::span<const double> upstream, int channels, int height,
                         int width, const WaveletSpec& spec) {
    return dwt2(upstream, channels, height, width, spec);
}

std::vector<std::vector<std::size_t>> scale_partition(const WaveletPyramid& pyr) {
    const auto& c0 = pyr.ch.at(0);
    std::vector<std::vector<std::size_t>> groups;
    std::size_t off = 0;
    auto range_group = [&off](std::size_t count) {
        std::vector<std::size_t> g(count);
        for (std::size_t i = 0; i < count; ++i)
            g[i] = off + i;
        off += count;
        return g;
    };
    groups.push_back(range_group(c0.approx.size()));
    for (int level = pyr.spec.scales - 1; level >= 0; --level) {
        std::size_t count = 0;
        for (const auto& band : c0.details[level])
            count += band.size();
        groups.push_back(range_group(count));
    }
    return groups;
}

std::vector<PositionTag> position_tags(const WaveletPyramid& pyr) {
    const auto& c0 = pyr.ch.at(0);
    std::vector<PositionTag> tags;
    tags.reserve(pyr.positions_per_channel());
    auto put = [&tags](const Subband& b, int scale, const char* orient) {
        for (int r = 0; r < b.rows; ++r)
            for (int col = 0; col < b.cols; ++col)
                tags.push_back({scale, orient, r, col});
    };
    put(c0.approx, 0, "a");
    static const char* kOrient[3] = {"lh", "hl", "hh"};
    for (int level = pyr.spec.scales - 1; level >= 0; --level)
        for (int o = 0; o < 3; ++o)
            put(c0.details[level][o], level + 1, kOrient[o]);
    return tags;
}

// Plain reference transforms. Independent loop structure: per-output gather
// formulas for both directions (synthesis gathers through the transposed
// taps instead of scattering). Used by tests and the benchmark.
namespace serial {

namespace {

void ref_analyze(const std::vector<double>& x, int n, int stride, int count,
                 int line_stride, std::span<const double> f, std::vector<double>& out,
                 int out_stride, int out_line_stride) {
    int F = static_cast<int>(f.size());
    int out_len = dwt_out_len(n, F);
    for (int line = 0; line < count; ++line)
        for (int m = 0; m < out_len; ++m) {
            double acc = 0.0;
            for (int j = 0; j < F; ++j) {
                int xi = 2 * m + 1 - j;
                if (xi >= 0 && xi < n)
                    acc += f[j] * x[static_cast<std::size_t>(line) * line_stride +
                                    static_cast<std::size_t>(xi) * stride];
            }
            out[static_cast<std::size_t>(line) * out_line_stride +
                static_cast<std::size_t>(m) * out_stride] = acc;
        }
}

// x[i] = sum over m of f[2m+1-i] g[m], the transpose of ref_analyze.
void ref_synthesize_add(const std::vector<double>& g, int m_len, int stride, int count,
                        int line_stride, std::span<const double> f, std::vector<double>& x,
                        int n, int out_stride, int out_line_stride) {
    int F = static_cast<int>(f.size());
    for (int line = 0; line < count; ++line)
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int m = i / 2; m <= (i + F - 2) / 2 && m < m_len; ++m) {
                int j = 2 * m + 1 - i;
                if (j >= 0 && j < F)
                    acc += f[j] * g[static_cast<std::size_t>(line) * line_stride +
                                    static_cast<std::size_t>(m) * stride];
            }
            x[static_cast<std::size_t>(line) * out_line_stride +
              static_cast<std::size_t>(i) * out_stride] += acc;
        }
}

} // namespace

WaveletPyramid dwt2(std::span<const double> grid, int channels, int height, int width,
                    const WaveletSpec& spec) {
    if (grid.size() != static_cast<std::size_t>(channels) * height * width)
        throw DomainError("dwt2: grid size does not match shape");
    check_spec(height, width, spec);
    auto lo = analysis_lowpass(spec.family);
    auto hi = analysis_highpass(spec.family);
    int F = static_cast<int>(lo.size());

    WaveletPyramid pyr;
    pyr.spec = spec;
    pyr.channels = channels;
    pyr.height = height;
    pyr.width = width;
    pyr.ch.resize(channels);

    for (int c = 0; c < channels; ++c) {
        auto& out = pyr.ch[c];
        out.details.resize(spec.scales);
        std::vector<double> ll(grid.begin() + static_cast<std::ptrdiff_t>(c) * height * width,
                               grid.begin() + static_cast<std::ptrdiff_t>(c + 1) * height * width);
        int h = height, w = width;
        for (int level = 0; level < spec.scales; ++level) {
            int wo = dwt_out_len(w, F);
            int ho = dwt_out_len(h, F);
            std::vector<double> lx(static_cast<std::size_t>(h) * wo);
            std::vector<double> hx(static_cast<std::size_t>(h) * wo);
            ref_analyze(ll, w, 1, h, w, lo, lx, 1, wo);
            ref_analyze(ll, w, 1, h, w, hi, hx, 1, wo);
            Subband next_ll(ho, wo), lh(ho, wo), hl(ho, wo), hh(ho, wo);
            ref_analyze(lx, h, wo, wo, 1, lo, next_ll.v, wo, 1);
            ref_analyze(lx, h, wo, wo, 1, hi, lh.v, wo, 1);
            ref_analyze(hx, h, wo, wo, 1, lo, hl.v, wo, 1);
            ref_analyze(hx, h, wo, wo, 1, hi, hh.v, wo, 1);
            out.details[level] = {std::move(lh), std::move(hl), std::move(hh)};
            ll = std::move(next_ll.v);
            h = ho;
            w = wo;
        }
        out.approx.rows = h;
        out.approx.cols = w;
        out.approx.v = std::move(ll);
    }
    return pyr;
}

std::vector<double> idwt2(const WaveletPyramid& pyr) {
    auto lo = analysis_lowpass(pyr.spec.family);
    auto hi = analysis_highpass(pyr.spec.family);
    auto dims = level_dims(pyr.height, pyr.width, pyr.spec);
    check_pyramid(pyr, dims);
    std::vector<double> grid(static_cast<std::size_t>(pyr.channels) * pyr.height * pyr.width);

    for (int c = 0; c < pyr.channels; ++c) {
        const auto& in = pyr.ch[c];
        std::vector<double> ll = in.approx.v;
        for (int level = pyr.spec.scales - 1; level >= 0; --level) {
            const auto [ho, wo] = dims[level + 1];
            const auto [h, w] = dims[level];
            const auto& [lh, hl, hh] = in.details[level];
            std::vector<double> lx(static_cast<std::size_t>(h) * wo, 0.0);
            std::vector<double> hx(static_cast<std::size_t>(h) * wo, 0.0);
            ref_synthesize_add(ll, ho, wo, wo, 1, lo, lx, h, wo, 1);
            ref_synthesize_add(lh.v, ho, wo, wo, 1, hi, lx, h, wo, 1);
            ref_synthesize_add(hl.v, ho, wo, wo, 1, lo, hx, h, wo, 1);
            ref_synthesize_add(hh.v, ho, wo, wo, 1, hi, hx, h, wo, 1);
            std::vector<double> next(static_cast<std::size_t>(h) * w, 0.0);
            ref_synthesize_add(lx, wo, 1, h, wo, lo, next, w, 1, w);
            ref_synthesize_add(hx, wo, 1, h, wo, hi, next, w, 1, w);
            ll = std::move(next);
        }
        std::copy(ll.begin(), ll.end(),
                  grid.begin() + static_cast<std::ptrdiff_t>(c) * pyr.height * pyr.width);
    }
    return grid;
}

} // namespace serial

} // namespace rde
