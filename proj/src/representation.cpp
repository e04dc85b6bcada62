#include "rde/representation.hpp"

#include <cmath>

#include "rde/errors.hpp"

namespace rde {

namespace {

class PixelRepresentation final : public Representation {
public:
    PixelRepresentation(int channels, int height, int width)
        : c_(channels), h_(height), w_(width) {
        if (channels < 1 || height < 1 || width < 1)
            throw DomainError("pixel representation: invalid shape");
    }

    std::size_t coefficient_count() const override {
        return static_cast<std::size_t>(h_) * w_;
    }
    int channels() const override { return c_; }
    std::size_t signal_size() const override { return coefficient_count() * c_; }

    Coefficients encode(std::span<const double> signal) const override {
        if (signal.size() != signal_size())
            throw DomainError("pixel encode: signal size mismatch");
        Coefficients h(coefficient_count(), c_);
        // channel-major image grid and channel-major coefficients coincide
        h.v.assign(signal.begin(), signal.end());
        return h;
    }

    std::vector<double> decode(const Coefficients& h) const override {
        if (h.k != coefficient_count() || h.channels != c_)
            throw DomainError("pixel decode: coefficient shape mismatch");
        return h.v;
    }

    Coefficients vjp_decode(const Coefficients&,
                            std::span<const double> upstream) const override {
        if (upstream.size() != signal_size())
            throw DomainError("pixel vjp: upstream size mismatch");
        Coefficients g(coefficient_count(), c_);
        g.v.assign(upstream.begin(), upstream.end());
        return g;
    }

    std::vector<std::vector<std::size_t>> partition() const override {
        std::vector<std::size_t> all(coefficient_count());
        for (std::size_t i = 0; i < all.size(); ++i)
            all[i] = i;
        return {all};
    }

private:
    int c_, h_, w_;
};

class WaveletRepresentation final : public Representation {
public:
    WaveletRepresentation(int channels, int height, int width, const WaveletSpec& spec)
        : c_(channels), h_(height), w_(width), spec_(spec),
          proto_(dwt2(std::vector<double>(static_cast<std::size_t>(channels) * height * width,
                                          0.0),
                      channels, height, width, spec)),
          k_(proto_.positions_per_channel()) {}

    std::size_t coefficient_count() const override { return k_; }
    int channels() const override { return c_; }
    std::size_t signal_size() const override {
        return static_cast<std::size_t>(c_) * h_ * w_;
    }

    Coefficients encode(std::span<const double> signal) const override {
        WaveletPyramid pyr = dwt2(signal, c_, h_, w_, spec_);
        Coefficients h(k_, c_);
        for (int ch = 0; ch < c_; ++ch)
            pyr.flatten_channel(ch, std::span<double>(h.v).subspan(ch * k_, k_));
        return h;
    }

    std::vector<double> decode(const Coefficients& h) const override {
        if (h.k != k_ || h.channels != c_)
            throw DomainError("wavelet decode: coefficient shape mismatch");
        WaveletPyramid pyr = proto_;
        for (int ch = 0; ch < c_; ++ch)
            pyr.unflatten_channel(ch, std::span<const double>(h.v).subspan(ch * k_, k_));
        return idwt2(pyr);
    }

    Coefficients vjp_decode(const Coefficients&,
                            std::span<const double> upstream) const override {
        WaveletPyramid pyr = vjp_idwt2(upstream, c_, h_, w_, spec_);
        Coefficients g(k_, c_);
        for (int ch = 0; ch < c_; ++ch)
            pyr.flatten_channel(ch, std::span<double>(g.v).subspan(ch * k_, k_));
        return g;
    }

    std::vector<std::vector<std::size_t>> partition() const override {
        return scale_partition(proto_);
    }

    const WaveletPyramid& prototype() const { return proto_; }

private:
    int c_, h_, w_;
    WaveletSpec spec_;
    WaveletPyramid proto_;
    std::size_t k_;
};

class PolarRepresentation final : public Representation {
public:
    std::size_t coefficient_count() const override { return 2; }
    int channels() const override { return 1; }
    std::size_t signal_size() const override { return 2; }

    Coefficients encode(std::span<const double> signal) const override {
        if (signal.size() != 2)
            throw DomainError("polar encode: signal must be a 2-vector");
        double r = std::hypot(signal[0], signal[1]);
        if (r == 0.0)
            throw DomainError("polar encode: angle undefined at the origin");
        Coefficients h(2, 1);
        h.v[0] = std::atan2(signal[1], signal[0]);
        h.v[1] = r;
        return h;
    }

    std::vector<double> decode(const Coefficients& h) const override {
        if (h.k != 2 || h.channels != 1)
            throw DomainError("polar decode: coefficient shape mismatch");
        return {h.v[1] * std::cos(h.v[0]), h.v[1] * std::sin(h.v[0])};
    }

    Coefficients vjp_decode(const Coefficients& at,
                            std::span<const double> upstream) const override {
        if (upstream.size() != 2)
            throw DomainError("polar vjp: upstream must be a 2-vector");
        double angle = at.v[0], mag = at.v[1];
        Coefficients g(2, 1);
        g.v[0] = -mag * std::sin(angle) * upstream[0] + mag * std::cos(angle) * upstream[1];
        g.v[1] = std::cos(angle) * upstream[0] + std::sin(angle) * upstream[1];
        return g;
    }

    std::vector<std::vector<std::size_t>> partition() const override {
        return {{0}, {1}};
    }
};

} // namespace

std::unique_ptr<Representation> pixel_representation(int channels, int height, int width) {
    return std::make_unique<PixelRepresentation>(channels, height, width);
}

std::unique_ptr<Representation> wavelet_representation(int channels, int height, int width,
                                                       const WaveletSpec& spec) {
    return std::make_unique<WaveletRepresentation>(channels, height, width, spec);
}

std::unique_ptr<Representation> polar_representation() {
    return std::make_unique<PolarRepresentation>();
}

} // namespace rde
