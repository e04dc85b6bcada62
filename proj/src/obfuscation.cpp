#include "rde/obfuscation.hpp"

#include <cmath>

#include "rde/errors.hpp"
#include "rde/rng.hpp"

namespace rde {

PartitionStats fit_stats(const Coefficients& h,
                         const std::vector<std::vector<std::size_t>>& partition) {
    std::vector<std::uint8_t> seen(h.k, 0);
    for (const auto& group : partition) {
        if (group.empty())
            throw DomainError("fit_stats: degenerate empty group");
        for (std::size_t pos : group) {
            if (pos >= h.k)
                throw DomainError("fit_stats: group index out of range");
            if (seen[pos])
                throw DomainError("fit_stats: groups overlap at position " +
                                  std::to_string(pos));
            seen[pos] = 1;
        }
    }
    for (std::size_t pos = 0; pos < h.k; ++pos)
        if (!seen[pos])
            throw DomainError("fit_stats: partition does not cover position " +
                              std::to_string(pos));

    PartitionStats stats;
    stats.groups = partition;
    stats.mean.reserve(partition.size());
    stats.stddev.reserve(partition.size());
    for (const auto& group : partition) {
        double count = static_cast<double>(group.size()) * h.channels;
        double mean = 0.0;
        for (std::size_t pos : group)
            for (int ch = 0; ch < h.channels; ++ch)
                mean += h.at(ch, pos);
        mean /= count;
        double var = 0.0;
        for (std::size_t pos : group)
            for (int ch = 0; ch < h.channels; ++ch) {
                double dlt = h.at(ch, pos) - mean;
                var += dlt * dlt;
            }
        var /= count; // population form
        stats.mean.push_back(mean);
        stats.stddev.push_back(std::sqrt(var));
    }
    return stats;
}

namespace {

class AdaptiveGaussian final : public Obfuscator {
public:
    AdaptiveGaussian(PartitionStats stats, std::size_t k, int channels, std::uint64_t seed)
        : k_(k), channels_(channels), seed_(seed), group_mean_(k), group_sd_(k) {
        // Flatten group stats to per-position lookups.
        std::vector<std::uint8_t> seen(k, 0);
        for (std::size_t g = 0; g < stats.groups.size(); ++g)
            for (std::size_t pos : stats.groups[g]) {
                if (pos >= k || seen[pos])
                    throw DomainError("obfuscator: invalid partition");
                seen[pos] = 1;
                group_mean_[pos] = stats.mean[g];
                group_sd_[pos] = stats.stddev[g];
            }
        for (std::size_t pos = 0; pos < k; ++pos)
            if (!seen[pos])
                throw DomainError("obfuscator: partition does not cover all positions");
    }

    void sample_into(std::uint64_t stream, std::uint64_t index,
                     Coefficients& out) const override {
        out.k = k_;
        out.channels = channels_;
        out.v.resize(k_ * channels_);
        std::uint64_t key = rng::derive(seed_, stream, index);
        for (int ch = 0; ch < channels_; ++ch)
            for (std::size_t pos = 0; pos < k_; ++pos) {
                std::uint64_t counter = static_cast<std::uint64_t>(ch) * k_ + pos;
                out.v[counter] = group_mean_[pos] + group_sd_[pos] * rng::normal(key, counter);
            }
    }

    std::string name() const override { return "adaptive-gaussian"; }

private:
    std::size_t k_;
    int channels_;
    std::uint64_t seed_;
    std::vector<double> group_mean_;
    std::vector<double> group_sd_;
};

class ZeroObfuscator final : public Obfuscator {
public:
    ZeroObfuscator(std::size_t k, int channels) : k_(k), channels_(channels) {}

    void sample_into(std::uint64_t, std::uint64_t, Coefficients& out) const override {
        out.k = k_;
        out.channels = channels_;
        out.v.assign(k_ * channels_, 0.0);
    }

    std::string name() const override { return "zero"; }

private:
    std::size_t k_;
    int channels_;
};

} // namespace

std::unique_ptr<Obfuscator> adaptive_gaussian_obfuscator(PartitionStats stats,
                                                         std::size_t k, int channels,
                                                         std::uint64_t seed) {
    return std::make_unique<AdaptiveGaussian>(std::move(stats), k, channels, seed);
}

std::unique_ptr<Obfuscator> zero_obfuscator(std::size_t k, int channels) {
    return std::make_unique<ZeroObfuscator>(k, channels);
}

std::vector<Coefficients> sample(const Obfuscator& obf, std::size_t count,
                                 std::uint64_t stream) {
    std::vector<Coefficients> draws(count);
    for (std::size_t i = 0; i < count; ++i)
        obf.sample_into(stream, i, draws[i]);
    return draws;
}

ObfuscationStrategy strategy_from_name(const std::string& name) {
    if (name == "adaptive-gaussian") return ObfuscationStrategy::AdaptiveGaussian;
    if (name == "zero") return ObfuscationStrategy::Zero;
    throw DomainError("unknown obfuscation strategy '" + name +
                      "' (adaptive-gaussian, zero)");
}

const char* strategy_name(ObfuscationStrategy s) {
    switch (s) {
        case ObfuscationStrategy::AdaptiveGaussian: return "adaptive-gaussian";
        case ObfuscationStrategy::Zero: return "zero";
    }
    return "?";
}

std::unique_ptr<Obfuscator> make_obfuscator(ObfuscationStrategy strategy,
                                            const Coefficients& h,
                                            const std::vector<std::vector<std::size_t>>& partition,
                                            std::uint64_t seed) {
    switch (strategy) {
        case ObfuscationStrategy::AdaptiveGaussian:
            return adaptive_gaussian_obfuscator(fit_stats(h, partition), h.k, h.channels,
                                                seed);
        case ObfuscationStrategy::Zero:
            return zero_obfuscator(h.k, h.channels);
    }
    throw DomainError("unknown obfuscation strategy");
}

} // namespace rde
