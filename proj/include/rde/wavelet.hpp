#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rde/image.hpp"

namespace rde {

enum class Family { db1, db2, db3, db4 };

Family family_from_name(const std::string& name);
const char* family_name(Family f);

// Orthonormal minimum-phase analysis low-pass taps.
std::span<const double> analysis_lowpass(Family f);
// Alternating-flip high-pass: hi[j] = (-1)^j lo[F-1-j].
std::span<const double> analysis_highpass(Family f);

struct WaveletSpec {
    Family family = Family::db3;
    int scales = 5; // J
    // padding: always zero-extension
};

struct Subband {
    int rows = 0;
    int cols = 0;
    std::vector<double> v; // row-major

    Subband() = default;
    Subband(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}
    std::size_t size() const { return v.size(); }
};

// Multi-scale DWT coefficient set. details[l] holds {LH, HL, HH} for
// decomposition level l, l = 0 the finest scale. approx is the coarsest LL.
struct WaveletPyramid {
    WaveletSpec spec;
    int channels = 0;
    int height = 0; // original image shape, needed for exact inversion
    int width = 0;

    struct Channel {
        Subband approx;
        std::vector<std::array<Subband, 3>> details;
    };
    std::vector<Channel> ch;

    // Coefficient positions per channel in the fixed flattened ordering:
    // approx first, then detail scales coarse -> fine, orientations
    // LH, HL, HH, row-major within a subband.
    std::size_t positions_per_channel() const;

    // Copies channel c into out (positions_per_channel() values).
    void flatten_channel(int c, std::span<double> out) const;
    void unflatten_channel(int c, std::span<const double> in);
};

// Zero-padded subband length after one analysis level.
inline int dwt_out_len(int n, int filter_len) { return (n + filter_len - 1) / 2; }

// Per-level LL dimensions (h, w), index 0 = original image, index J = coarsest.
std::vector<std::pair<int, int>> level_dims(int height, int width, const WaveletSpec& spec);

// Separable Mallat cascade, rows then columns, channels independent.
WaveletPyramid dwt2(const Image& img, const WaveletSpec& spec);
WaveletPyramid dwt2(std::span<const double> grid, int channels, int height, int width,
                    const WaveletSpec& spec);

// Exact synthesis inverse; output is not clipped.
std::vector<double> idwt2(const WaveletPyramid& pyr);

// Adjoint (transpose) of idwt2. Each level's synthesis scatter is the exact
// transpose of the analysis gather, so the adjoint of the inverse cascade is
// the forward cascade applied to the upstream grid.
WaveletPyramid vjp_idwt2(std::span<const double> upstream, int channels, int height,
                         int width, const WaveletSpec& spec);

// J+1 disjoint position groups in flattened order, coarse -> fine:
// approx first, then one group per detail scale (its three orientations).
std::vector<std::vector<std::size_t>> scale_partition(const WaveletPyramid& pyr);

// Per-position tags for CSV output, aligned with the flattened ordering.
// scale 0 = approx, otherwise 1 = finest .. J = coarsest.
struct PositionTag {
    int scale;
    const char* orientation; // "a", "lh", "hl", "hh"
    int row;
    int col;
};
std::vector<PositionTag> position_tags(const WaveletPyramid& pyr);

// Serial reference transforms, kept for testing the OpenMP paths and for
// the benchmark. Same contract as dwt2/idwt2.
namespace serial {
WaveletPyramid dwt2(std::span<const double> grid, int channels, int height, int width,
                    const WaveletSpec& spec);
std::vector<double> idwt2(const WaveletPyramid& pyr);
} // namespace serial

} // namespace rde
