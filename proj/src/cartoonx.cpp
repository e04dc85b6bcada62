#include "rde/cartoonx.hpp"

#include <algorithm>

#include "rde/errors.hpp"

namespace rde {

Image cartoonx_visualization(const Image& x, std::span<const double> mask,
                             const WaveletSpec& spec) {
    // Same spec as the optimization pyramid, so mask indices align 1:1.
    Image grey = to_greyscale(x);
    auto repr = wavelet_representation(1, x.height, x.width, spec);
    if (mask.size() != repr->coefficient_count())
        throw DomainError("visualization: mask length does not match the pyramid");
    Coefficients h = repr->encode(grey.data);
    for (std::size_t pos = 0; pos < h.k; ++pos)
        h.v[pos] *= mask[pos];
    std::vector<double> vis = repr->decode(h);
    for (auto& v : vis)
        v = std::clamp(v, 0.0, 1.0);
    Image out(1, x.height, x.width);
    out.data = std::move(vis);
    return out;
}

Explanation explain_cartoonx(const Model& model, const Image& x, const RdeConfig& cfg,
                             const WaveletSpec& spec, ObfuscationStrategy strategy) {
    auto repr = wavelet_representation(x.channels, x.height, x.width, spec);
    Coefficients h = repr->encode(x.data);
    auto obf = make_obfuscator(strategy, h, repr->partition(), cfg.seed);

    Explanation result;
    result.kind = Explanation::Kind::CartoonX;
    result.p_ref = model.predict(x);
    result.j_star = static_cast<int>(
        std::max_element(result.p_ref.begin(), result.p_ref.end()) - result.p_ref.begin());
    result.rde = rde_optimize(model, *repr, x, cfg, *obf);
    result.mask = result.rde.mask;
    result.image = cartoonx_visualization(x, result.mask, spec);
    return result;
}

Explanation explain_pixel_rde(const Model& model, const Image& x, const RdeConfig& cfg,
                              ObfuscationStrategy strategy) {
    auto repr = pixel_representation(x.channels, x.height, x.width);
    Coefficients h = repr->encode(x.data);
    auto obf = make_obfuscator(strategy, h, repr->partition(), cfg.seed);

    Explanation result;
    result.kind = Explanation::Kind::PixelRde;
    result.p_ref = model.predict(x);
    result.j_star = static_cast<int>(
        std::max_element(result.p_ref.begin(), result.p_ref.end()) - result.p_ref.begin());
    result.rde = rde_optimize(model, *repr, x, cfg, *obf);
    result.mask = result.rde.mask;

    result.image = Image(1, x.height, x.width);
    result.image.data = result.mask; // heatmap semantics, entries already in [0,1]
    return result;
}

} // namespace rde
