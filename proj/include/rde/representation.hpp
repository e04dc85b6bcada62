#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "rde/image.hpp"
#include "rde/wavelet.hpp"

namespace rde {

// k coefficient positions, each carrying `channels` values.
// Channel-major storage: v[ch * k + pos].
struct Coefficients {
    std::size_t k = 0;
    int channels = 0;
    std::vector<double> v;

    Coefficients() = default;
    Coefficients(std::size_t k_, int c_) : k(k_), channels(c_), v(k_ * c_, 0.0) {}

    double& at(int ch, std::size_t pos) { return v[ch * k + pos]; }
    double at(int ch, std::size_t pos) const { return v[ch * k + pos]; }
};

// Data representation x = f(h): decode maps coefficients to the flat signal
// grid, encode is its inverse where one exists, vjp_decode the reverse-mode
// derivative of decode. One mask entry covers all channels of a position.
class Representation {
public:
    virtual ~Representation() = default;

    virtual std::size_t coefficient_count() const = 0; // k
    virtual int channels() const = 0;                  // c per position
    virtual std::size_t signal_size() const = 0;       // n

    virtual Coefficients encode(std::span<const double> signal) const = 0;
    virtual std::vector<double> decode(const Coefficients& h) const = 0;

    // Gradient of <upstream, decode(.)> evaluated at `at`; exact adjoint for
    // the linear instances.
    virtual Coefficients vjp_decode(const Coefficients& at,
                                    std::span<const double> upstream) const = 0;

    // Disjoint position groups covering {0..k-1}, for obfuscation statistics.
    virtual std::vector<std::vector<std::size_t>> partition() const = 0;
};

// Identity on the pixel grid; k = pixel count, one partition group.
std::unique_ptr<Representation> pixel_representation(int channels, int height, int width);

// DWT coefficients with channel-shared positions; partition by scale.
std::unique_ptr<Representation> wavelet_representation(int channels, int height, int width,
                                                       const WaveletSpec& spec);

// f(h) = (h2 cos h1, h2 sin h1) on 2-vectors; the non-linear test instance.
std::unique_ptr<Representation> polar_representation();

} // namespace rde
