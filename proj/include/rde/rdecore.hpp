#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rde/nnmodel.hpp"
#include "rde/obfuscation.hpp"
#include "rde/representation.hpp"

namespace rde {

// Continuous relevance mask over coefficient positions, entries in [0,1].
using Mask = std::vector<double>;

enum class DistortionKind {
    SqLabelProb,   // (p_ref[j*] - p_obf[j*])^2
    MaxLabel,      // |p_obf[j*] - 1|
    L2PostSoftmax, // ||p_ref - p_obf||_2
    KlPostSoftmax, // sum p_ref ln(p_ref / p_obf)
};

DistortionKind distortion_from_name(const std::string& name);
const char* distortion_name(DistortionKind d);

double distortion(DistortionKind d, std::span<const double> p_ref,
                  std::span<const double> p_obf, int j_star);

// d distortion / d p_obf, written into grad (same length as p_obf).
void distortion_gradient(DistortionKind d, std::span<const double> p_ref,
                         std::span<const double> p_obf, int j_star,
                         std::span<double> grad);

struct RdeConfig {
    double lambda_times_k = 40.0; // sparsity as the product lambda * k
    int steps = 2000;             // N
    int samples = 64;             // L per step
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    DistortionKind distortion = DistortionKind::SqLabelProb;
    std::uint64_t seed = 0;
    // Average d(.)^2 per sample (the algorithmic form); false averages plain d
    // (the definitional form).
    bool alg1_square = true;
};

struct RdeResult {
    Mask mask;
    std::vector<double> loss_trace;       // length N
    std::vector<double> distortion_trace; // estimated expected distortion per step
    std::vector<double> l1_trace;         // ||s||_1 per step
    double elapsed_seconds = 0.0;
    RdeConfig config;
};

// Monte-Carlo estimate of the expected distortion under the mask: decode
// s.h + (1-s).v, clip to [0,1], compare model outputs. Draws come from
// (stream, 0..L-1) of the obfuscator.
double expected_distortion(const Model& model, const Representation& repr, const Image& x,
                           const Coefficients& h, std::span<const double> mask,
                           const Obfuscator& obf, DistortionKind d, int samples,
                           std::uint64_t stream, bool square = false);

// Full relaxed objective D-hat + lambda ||s||_1 at the given mask, and its
// analytic gradient when grad_out is non-null. Exposed for gradient checks.
double rde_objective(const Model& model, const Representation& repr, const Image& x,
                     std::span<const double> mask, const Obfuscator& obf,
                     const RdeConfig& cfg, std::uint64_t stream,
                     std::vector<double>* grad_out);

// Adam-driven minimization of the relaxed objective from the all-ones mask,
// projecting into [0,1]^k after every step. Fresh draws per step.
RdeResult rde_optimize(const Model& model, const Representation& repr, const Image& x,
                       const RdeConfig& cfg, const Obfuscator& obf);

// Brute-force minimizer over binary masks with at most `sparsity` ones,
// sharing one fixed set of draws across all candidates. Ties break toward
// the lexicographically smallest mask. Refuses k > 20.
std::vector<std::uint8_t> exact_rde_mask(const Model& model, const Representation& repr,
                                         const Image& x, int sparsity,
                                         const Obfuscator& obf, DistortionKind d,
                                         int sample_budget, std::uint64_t stream = 0);

} // namespace rde
