#pragma once

#include "rde/cartoonx.hpp"
#include "rde/rdecore.hpp"

namespace rde {

// Coefficient positions by descending relevance, ties by ascending index.
struct RelevanceOrder {
    std::vector<std::size_t> indices;
};

RelevanceOrder order_from_mask(std::span<const double> mask);
RelevanceOrder random_order(std::size_t k, std::uint64_t seed);

struct CurvePoint {
    double rate;            // kept (or randomized) fraction
    double mean_distortion; // over the draws
    double std_error;       // sample standard error over the draws
};

// Keeps the top floor(rate * k) positions under the order and randomizes the
// rest, for each rate in the grid. One fixed draw set is shared across all
// grid points and orderings, so curve comparisons are paired.
std::vector<CurvePoint> rate_distortion_curve(const Model& model, const Representation& repr,
                                              const Image& x, const RelevanceOrder& order,
                                              const Obfuscator& obf, DistortionKind d,
                                              std::span<const double> grid, int samples,
                                              std::uint64_t stream);

// Mirror image: randomizes the top fraction, keeps the rest.
std::vector<CurvePoint> randomization_curve(const Model& model, const Representation& repr,
                                            const Image& x, const RelevanceOrder& order,
                                            const Obfuscator& obf, DistortionKind d,
                                            std::span<const double> grid, int samples,
                                            std::uint64_t stream);

// Trapezoidal area under the curve on its rate grid.
double curve_auc(std::span<const CurvePoint> curve);

// Evenly spaced rates {0, 1/(points-1), ..., 1}.
std::vector<double> default_rate_grid(int points = 21);

struct LambdaSweepPoint {
    double lambda_times_k;
    double cartoonx_distortion;
    double cartoonx_l1_normalized;
    double pixel_distortion;
    double pixel_l1_normalized;
};

// Runs CartoonX and Pixel RDE per sparsity value; records the final
// expected distortion (fresh draws) and ||s||_1 / k of each final mask.
std::vector<LambdaSweepPoint> lambda_sweep(const Model& model, const Image& x,
                                           std::span<const double> lambda_values,
                                           const RdeConfig& base_cfg,
                                           const WaveletSpec& spec,
                                           ObfuscationStrategy strategy);

} // namespace rde
