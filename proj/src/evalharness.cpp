#include "rde/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rde/errors.hpp"
#include "rde/rng.hpp"

namespace rde {

namespace {

std::vector<double> binary_mask_keep(std::size_t k, const RelevanceOrder& order,
                                     std::size_t keep_count, bool keep_top) {
    if (order.indices.size() != k)
        throw DomainError("curve: order is not a permutation of the positions");
    std::vector<double> mask(k, keep_top ? 0.0 : 1.0);
    for (std::size_t i = 0; i < keep_count; ++i)
        mask[order.indices[i]] = keep_top ? 1.0 : 0.0;
    return mask;
}

std::vector<CurvePoint> curve_impl(const Model& model, const Representation& repr,
                                   const Image& x, const RelevanceOrder& order,
                                   const Obfuscator& obf, DistortionKind d,
                                   std::span<const double> grid, int samples,
                                   std::uint64_t stream, bool top_is_kept) {
    if (samples < 1)
        throw DomainError("curve: need at least one draw");
    for (double r : grid)
        if (!(r >= 0.0 && r <= 1.0))
            throw DomainError("curve: grid rates must lie in [0,1]");

    std::vector<double> p_ref = model.predict(x);
    int j_star = static_cast<int>(std::max_element(p_ref.begin(), p_ref.end()) -
                                  p_ref.begin());
    Coefficients h = repr.encode(x.data);
    std::size_t k = repr.coefficient_count();

    // Common random numbers: the same draws at every grid point and for
    // every ordering evaluated with the same stream.
    std::vector<Coefficients> draws = sample(obf, static_cast<std::size_t>(samples), stream);

    std::vector<CurvePoint> curve(grid.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        std::size_t count = static_cast<std::size_t>(std::floor(grid[gi] * static_cast<double>(k)));
        std::vector<double> mask = binary_mask_keep(k, order, count, top_is_kept);

        std::vector<double> dist(samples);
        for (int i = 0; i < samples; ++i) {
            const Coefficients& noise = draws[i];
            Coefficients z(k, h.channels);
            for (int ch = 0; ch < h.channels; ++ch)
                for (std::size_t pos = 0; pos < k; ++pos)
                    z.at(ch, pos) = mask[pos] * h.at(ch, pos) +
                                    (1.0 - mask[pos]) * noise.at(ch, pos);
            std::vector<double> y = repr.decode(z);
            for (auto& v : y)
                v = std::clamp(v, 0.0, 1.0);
            Image img(model.in_channels(), model.in_height(), model.in_width());
            img.data = std::move(y);
            std::vector<double> p = model.predict(img);
            dist[i] = distortion(d, p_ref, p, j_star);
        }
        double mean = std::accumulate(dist.begin(), dist.end(), 0.0) / samples;
        double se = 0.0;
        if (samples > 1) {
            double var = 0.0;
            for (double v : dist)
                var += (v - mean) * (v - mean);
            var /= (samples - 1);
            se = std::sqrt(var / samples);
        }
        curve[gi] = {grid[gi], mean, se};
    }
    return curve;
}

} // namespace

RelevanceOrder order_from_mask(std::span<const double> mask) {
    RelevanceOrder order;
    order.indices.resize(mask.size());
    std::iota(order.indices.begin(), order.indices.end(), 0);
    std::stable_sort(order.indices.begin(), order.indices.end(),
                     [&mask](std::size_t a, std::size_t b) {
                         if (mask[a] != mask[b])
                             return mask[a] > mask[b];
                         return a < b;
                     });
    return order;
}

RelevanceOrder random_order(std::size_t k, std::uint64_t seed) {
    RelevanceOrder order;
    order.indices.resize(k);
    std::iota(order.indices.begin(), order.indices.end(), 0);
    rng::Stream stream(rng::derive(seed, 0x9au));
    for (std::size_t i = k; i > 1; --i)
        std::swap(order.indices[i - 1], order.indices[stream.next_below(i)]);
    return order;
}

std::vector<CurvePoint> rate_distortion_curve(const Model& model, const Representation& repr,
                                              const Image& x, const RelevanceOrder& order,
                                              const Obfuscator& obf, DistortionKind d,
                                              std::span<const double> grid, int samples,
                                              std::uint64_t stream) {
    return curve_impl(model, repr, x, order, obf, d, grid, samples, stream, true);
}

std::vector<CurvePoint> randomization_curve(const Model& model, const Representation& repr,
                                            const Image& x, const RelevanceOrder& order,
                                            const Obfuscator& obf, DistortionKind d,
                                            std::span<const double> grid, int samples,
                                            std::uint64_t stream) {
    return curve_impl(model, repr, x, order, obf, d, grid, samples, stream, false);
}

double curve_auc(std::span<const CurvePoint> curve) {
    double auc = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i)
        auc += 0.5 * (curve[i].mean_distortion + curve[i - 1].mean_distortion) *
               (curve[i].rate - curve[i - 1].rate);
    return auc;
}

std::vector<double> default_rate_grid(int points) {
    if (points < 2)
        throw DomainError("rate grid needs at least 2 points");
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i)
        grid[i] = static_cast<double>(i) / (points - 1);
    return grid;
}

std::vector<LambdaSweepPoint> lambda_sweep(const Model& model, const Image& x,
                                           std::span<const double> lambda_values,
                                           const RdeConfig& base_cfg,
                                           const WaveletSpec& spec,
                                           ObfuscationStrategy strategy) {
    for (std::size_t i = 1; i < lambda_values.size(); ++i)
        if (lambda_values[i] < lambda_values[i - 1])
            throw DomainError("lambda sweep: values must be ascending");

    std::vector<LambdaSweepPoint> points;
    points.reserve(lambda_values.size());
    for (double lk : lambda_values) {
        RdeConfig cfg = base_cfg;
        cfg.lambda_times_k = lk;

        Explanation cartoon = explain_cartoonx(model, x, cfg, spec, strategy);
        Explanation pixel = explain_pixel_rde(model, x, cfg, strategy);

        LambdaSweepPoint pt;
        pt.lambda_times_k = lk;

        // Final expected distortion under fresh draws, plain (unsquared) d.
        {
            auto repr = wavelet_representation(x.channels, x.height, x.width, spec);
            Coefficients h = repr->encode(x.data);
            auto obf = make_obfuscator(strategy, h, repr->partition(),
                                       rng::derive(cfg.seed, 0xEu));
            pt.cartoonx_distortion =
                expected_distortion(model, *repr, x, h, cartoon.mask, *obf,
                                    cfg.distortion, cfg.samples, 0, false);
            pt.cartoonx_l1_normalized =
                std::accumulate(cartoon.mask.begin(), cartoon.mask.end(), 0.0) /
                static_cast<double>(cartoon.mask.size());
        }
        {
            auto repr = pixel_representation(x.channels, x.height, x.width);
            Coefficients h = repr->encode(x.data);
            auto obf = make_obfuscator(strategy, h, repr->partition(),
                                       rng::derive(cfg.seed, 0xFu));
            pt.pixel_distortion =
                expected_distortion(model, *repr, x, h, pixel.mask, *obf,
                                    cfg.distortion, cfg.samples, 0, false);
            pt.pixel_l1_normalized =
                std::accumulate(pixel.mask.begin(), pixel.mask.end(), 0.0) /
                static_cast<double>(pixel.mask.size());
        }
        points.push_back(pt);
    }
    return points;
}

} // namespace rde
