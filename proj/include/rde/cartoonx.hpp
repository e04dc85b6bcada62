#pragma once

#include "rde/rdecore.hpp"
#include "rde/wavelet.hpp"

namespace rde {

struct Explanation {
    enum class Kind { CartoonX, PixelRde };

    Kind kind;
    Mask mask;   // over the representation's coefficient positions
    Image image; // the visualization: masked greyscale reconstruction for
                 // CartoonX, the mask itself as a heatmap for Pixel RDE
    RdeResult rde;
    std::vector<double> p_ref;
    int j_star = 0;
};

// Masks the greyscale image's wavelet coefficients with the channel-shared
// mask and inverts, clipped into [0,1] in pixel space.
Image cartoonx_visualization(const Image& x, std::span<const double> mask,
                             const WaveletSpec& spec);

// Optimizes the mask in the wavelet domain, then visualizes by masking the
// greyscale image's coefficients and inverting, clipped into [0,1].
Explanation explain_cartoonx(const Model& model, const Image& x, const RdeConfig& cfg,
                             const WaveletSpec& spec,
                             ObfuscationStrategy strategy = ObfuscationStrategy::AdaptiveGaussian);

// Mask on pixel positions with single-group statistics; the visualization is
// the mask rendered as a greyscale relevance heatmap.
Explanation explain_pixel_rde(const Model& model, const Image& x, const RdeConfig& cfg,
                              ObfuscationStrategy strategy = ObfuscationStrategy::AdaptiveGaussian);

} // namespace rde
