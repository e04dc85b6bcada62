#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rde/representation.hpp"

namespace rde {

// Per-group empirical mean and population standard deviation over all
// channel entries of the group's positions.
struct PartitionStats {
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<std::vector<std::size_t>> groups;
};

PartitionStats fit_stats(const Coefficients& h,
                         const std::vector<std::vector<std::size_t>>& partition);

// Perturbation distribution V over coefficient space. Draws are addressed by
// (stream, index): the obfuscator derives a subseed from its run seed by a
// fixed mixing rule, so sampling is reproducible and order-independent.
class Obfuscator {
public:
    virtual ~Obfuscator() = default;
    virtual void sample_into(std::uint64_t stream, std::uint64_t index,
                             Coefficients& out) const = 0;
    virtual std::string name() const = 0;
};

// v ~ N(mu_g, sigma_g^2) per channel entry, group statistics from fit_stats.
std::unique_ptr<Obfuscator> adaptive_gaussian_obfuscator(PartitionStats stats,
                                                         std::size_t k, int channels,
                                                         std::uint64_t seed);

// v = 0 everywhere; the deterministic baseline.
std::unique_ptr<Obfuscator> zero_obfuscator(std::size_t k, int channels);

enum class ObfuscationStrategy { AdaptiveGaussian, Zero };

ObfuscationStrategy strategy_from_name(const std::string& name);
const char* strategy_name(ObfuscationStrategy s);

// Builds the obfuscator for the given coefficients: fits partition
// statistics for the Gaussian strategy, ignores them for zero.
std::unique_ptr<Obfuscator> make_obfuscator(ObfuscationStrategy strategy,
                                            const Coefficients& h,
                                            const std::vector<std::vector<std::size_t>>& partition,
                                            std::uint64_t seed);

// Convenience: L draws of the given stream.
std::vector<Coefficients> sample(const Obfuscator& obf, std::size_t count,
                                 std::uint64_t stream);

} // namespace rde
