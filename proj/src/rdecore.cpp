#include "rde/rdecore.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>

#include "rde/errors.hpp"

namespace rde {

namespace {

int argmax_index(std::span<const double> p) {
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

Image image_from_grid(const Model& model, std::vector<double> grid) {
    Image img(model.in_channels(), model.in_height(), model.in_width());
    if (grid.size() != img.size())
        throw DomainError("representation signal size does not match model input");
    img.data = std::move(grid);
    return img;
}

// One obfuscation sample: distortion value and, when requested, its
// contribution to the mask gradient. Positive-part clipping passes gradient
// through inside [0,1] and blocks it outside.
double sample_term(const Model& model, const Representation& repr,
                   std::span<const double> p_ref, int j_star, const Coefficients& h,
                   std::span<const double> mask, const Obfuscator& obf, DistortionKind d,
                   std::uint64_t stream, std::uint64_t index, bool square,
                   std::vector<double>* grad_out) {
    std::size_t k = h.k;
    int c = h.channels;

    Coefficients noise;
    obf.sample_into(stream, index, noise);
    if (noise.k != k || noise.channels != c)
        throw DomainError("obfuscator draw shape mismatch");

    Coefficients z(k, c);
    for (int ch = 0; ch < c; ++ch)
        for (std::size_t pos = 0; pos < k; ++pos)
            z.at(ch, pos) =
                mask[pos] * h.at(ch, pos) + (1.0 - mask[pos]) * noise.at(ch, pos);

    std::vector<double> y = repr.decode(z);
    std::vector<std::uint8_t> inside(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        inside[i] = (y[i] >= 0.0 && y[i] <= 1.0);
        y[i] = std::clamp(y[i], 0.0, 1.0);
    }

    Image obf_img = image_from_grid(model, std::move(y));
    std::vector<double> p = model.predict(obf_img);
    double dist = distortion(d, p_ref, p, j_star);
    double term = square ? dist * dist : dist;

    if (grad_out) {
        if (!std::isfinite(term))
            throw NumericalError("non-finite distortion during mask optimization (" +
                                 std::string(distortion_name(d)) + ")");
        std::vector<double> dp(p.size());
        distortion_gradient(d, p_ref, p, j_star, dp);
        double chain = square ? 2.0 * dist : 1.0;
        for (auto& g : dp)
            g *= chain;

        std::vector<double> gy = model.input_vjp(obf_img, dp);
        for (std::size_t i = 0; i < gy.size(); ++i)
            if (!inside[i])
                gy[i] = 0.0;

        Coefficients q = repr.vjp_decode(z, gy);
        for (std::size_t pos = 0; pos < k; ++pos) {
            double acc = 0.0;
            for (int ch = 0; ch < c; ++ch)
                acc += q.at(ch, pos) * (h.at(ch, pos) - noise.at(ch, pos));
            (*grad_out)[pos] = acc;
        }
    }
    return term;
}

// Mean over L draws with per-sample slots and a fixed-order reduction, so
// the result is independent of the worker count.
double estimate(const Model& model, const Representation& repr,
                std::span<const double> p_ref, int j_star, const Coefficients& h,
                std::span<const double> mask, const Obfuscator& obf, DistortionKind d,
                int samples, std::uint64_t stream, bool square,
                std::vector<double>* grad_out) {
    if (samples < 1)
        throw DomainError("expected distortion: need at least one sample");
    std::size_t k = h.k;
    std::vector<double> terms(samples, 0.0);
    std::vector<std::vector<double>> grads;
    if (grad_out)
        grads.assign(samples, std::vector<double>(k, 0.0));

    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < samples; ++i) {
        try {
            terms[i] = sample_term(model, repr, p_ref, j_star, h, mask, obf, d, stream,
                                   static_cast<std::uint64_t>(i), square,
                                   grad_out ? &grads[i] : nullptr);
        } catch (...) {
#pragma omp critical
            if (!failure)
                failure = std::current_exception();
        }
    }
    if (failure)
        std::rethrow_exception(failure);

    double mean = 0.0;
    for (int i = 0; i < samples; ++i)
        mean += terms[i];
    mean /= samples;

    if (grad_out) {
        grad_out->assign(k, 0.0);
        for (int i = 0; i < samples; ++i)
            for (std::size_t pos = 0; pos < k; ++pos)
                (*grad_out)[pos] += grads[i][pos];
        for (auto& g : *grad_out)
            g /= samples;
    }
    return mean;
}

void check_config(const RdeConfig& cfg) {
    if (cfg.steps < 0 || cfg.samples < 1 || cfg.learning_rate <= 0.0 ||
        cfg.lambda_times_k < 0.0)
        throw DomainError("rde config: require N >= 0, L >= 1, lr > 0, lambda*k >= 0");
}

} // namespace

DistortionKind distortion_from_name(const std::string& name) {
    if (name == "sq-label-prob") return DistortionKind::SqLabelProb;
    if (name == "max-label") return DistortionKind::MaxLabel;
    if (name == "l2") return DistortionKind::L2PostSoftmax;
    if (name == "kl") return DistortionKind::KlPostSoftmax;
    throw DomainError("unknown distortion measure '" + name +
                      "' (sq-label-prob, max-label, l2, kl)");
}

const char* distortion_name(DistortionKind d) {
    switch (d) {
        case DistortionKind::SqLabelProb: return "sq-label-prob";
        case DistortionKind::MaxLabel: return "max-label";
        case DistortionKind::L2PostSoftmax: return "l2";
        case DistortionKind::KlPostSoftmax: return "kl";
    }
    return "?";
}

double distortion(DistortionKind d, std::span<const double> p_ref,
                  std::span<const double> p_obf, int j_star) {
    if (p_ref.size() != p_obf.size())
        throw DomainError("distortion: probability vector length mismatch");
    switch (d) {
        case DistortionKind::SqLabelProb: {
            double delta = p_ref[j_star] - p_obf[j_star];
            return delta * delta;
        }
        case DistortionKind::MaxLabel:
            return std::abs(p_obf[j_star] - 1.0);
        case DistortionKind::L2PostSoftmax: {
            double acc = 0.0;
            for (std::size_t i = 0; i < p_ref.size(); ++i) {
                double delta = p_ref[i] - p_obf[i];
                acc += delta * delta;
            }
            return std::sqrt(acc);
        }
        case DistortionKind::KlPostSoftmax: {
            double acc = 0.0;
            for (std::size_t i = 0; i < p_ref.size(); ++i) {
                if (p_ref[i] <= 0.0)
                    continue; // 0 ln(0/q) = 0
                if (p_obf[i] <= 0.0)
                    return std::numeric_limits<double>::infinity();
                acc += p_ref[i] * std::log(p_ref[i] / p_obf[i]);
            }
            return acc;
        }
    }
    throw DomainError("unknown distortion kind");
}

void distortion_gradient(DistortionKind d, std::span<const double> p_ref,
                         std::span<const double> p_obf, int j_star,
                         std::span<double> grad) {
    if (p_ref.size() != p_obf.size() || grad.size() != p_ref.size())
        throw DomainError("distortion gradient: length mismatch");
    std::fill(grad.begin(), grad.end(), 0.0);
    switch (d) {
        case DistortionKind::SqLabelProb:
            grad[j_star] = -2.0 * (p_ref[j_star] - p_obf[j_star]);
            return;
        case DistortionKind::MaxLabel:
            // p_obf[j*] <= 1, so |p_obf[j*] - 1| = 1 - p_obf[j*]
            grad[j_star] = -1.0;
            return;
        case DistortionKind::L2PostSoftmax: {
            double norm = distortion(DistortionKind::L2PostSoftmax, p_ref, p_obf, j_star);
            if (norm == 0.0)
                return; // subgradient 0 at the tip
            for (std::size_t i = 0; i < grad.size(); ++i)
                grad[i] = (p_obf[i] - p_ref[i]) / norm;
            return;
        }
        case DistortionKind::KlPostSoftmax: {
            for (std::size_t i = 0; i < grad.size(); ++i) {
                if (p_ref[i] <= 0.0)
                    continue;
                if (p_obf[i] <= 0.0)
                    throw NumericalError("KL gradient undefined: zero probability under "
                                         "positive reference mass");
                grad[i] = -p_ref[i] / p_obf[i];
            }
            return;
        }
    }
    throw DomainError("unknown distortion kind");
}

double expected_distortion(const Model& model, const Representation& repr, const Image& x,
                           const Coefficients& h, std::span<const double> mask,
                           const Obfuscator& obf, DistortionKind d, int samples,
                           std::uint64_t stream, bool square) {
    std::vector<double> p_ref = model.predict(x);
    int j_star = argmax_index(p_ref);
    return estimate(model, repr, p_ref, j_star, h, mask, obf, d, samples, stream, square,
                    nullptr);
}

double rde_objective(const Model& model, const Representation& repr, const Image& x,
                     std::span<const double> mask, const Obfuscator& obf,
                     const RdeConfig& cfg, std::uint64_t stream,
                     std::vector<double>* grad_out) {
    check_config(cfg);
    std::vector<double> p_ref = model.predict(x);
    int j_star = argmax_index(p_ref);
    Coefficients h = repr.encode(x.data);
    std::size_t k = repr.coefficient_count();
    double lambda = (k > 0) ? cfg.lambda_times_k / static_cast<double>(k) : 0.0;

    double dhat = estimate(model, repr, p_ref, j_star, h, mask, obf, cfg.distortion,
                           cfg.samples, stream, cfg.alg1_square, grad_out);
    double l1 = 0.0;
    for (double s : mask)
        l1 += std::abs(s);
    if (grad_out)
        for (auto& g : *grad_out)
            g += lambda; // mask entries stay in [0,1], so d|s|/ds = 1
    return dhat + lambda * l1;
}

RdeResult rde_optimize(const Model& model, const Representation& repr, const Image& x,
                       const RdeConfig& cfg, const Obfuscator& obf) {
    check_config(cfg);
    auto t0 = std::chrono::steady_clock::now();

    std::vector<double> p_ref = model.predict(x);
    int j_star = argmax_index(p_ref);
    Coefficients h = repr.encode(x.data);
    std::size_t k = repr.coefficient_count();
    double lambda = (k > 0) ? cfg.lambda_times_k / static_cast<double>(k) : 0.0;

    RdeResult result;
    result.config = cfg;
    result.mask.assign(k, 1.0);
    result.loss_trace.reserve(cfg.steps);
    result.distortion_trace.reserve(cfg.steps);
    result.l1_trace.reserve(cfg.steps);

    std::vector<double> adam_m(k, 0.0), adam_v(k, 0.0), grad;
    for (int step = 0; step < cfg.steps; ++step) {
        double dhat = estimate(model, repr, p_ref, j_star, h, result.mask, obf,
                               cfg.distortion, cfg.samples,
                               static_cast<std::uint64_t>(step), cfg.alg1_square, &grad);
        double l1 = 0.0;
        for (double s : result.mask)
            l1 += s;
        result.loss_trace.push_back(dhat + lambda * l1);
        result.distortion_trace.push_back(dhat);
        result.l1_trace.push_back(l1);

        double bc1 = 1.0 - std::pow(cfg.adam_beta1, step + 1);
        double bc2 = 1.0 - std::pow(cfg.adam_beta2, step + 1);
        for (std::size_t i = 0; i < k; ++i) {
            double g = grad[i] + lambda;
            adam_m[i] = cfg.adam_beta1 * adam_m[i] + (1.0 - cfg.adam_beta1) * g;
            adam_v[i] = cfg.adam_beta2 * adam_v[i] + (1.0 - cfg.adam_beta2) * g * g;
            double mhat = adam_m[i] / bc1;
            double vhat = adam_v[i] / bc2;
            double s = result.mask[i] - cfg.learning_rate * mhat /
                                            (std::sqrt(vhat) + cfg.adam_epsilon);
            result.mask[i] = std::clamp(s, 0.0, 1.0);
        }
    }

    result.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

std::vector<std::uint8_t> exact_rde_mask(const Model& model, const Representation& repr,
                                         const Image& x, int sparsity,
                                         const Obfuscator& obf, DistortionKind d,
                                         int sample_budget, std::uint64_t stream) {
    std::size_t k = repr.coefficient_count();
    if (k > 20)
        throw DomainError("exact_rde_mask: refusing k = " + std::to_string(k) +
                          " > 20 (exhaustive search)");
    if (sparsity < 0 || static_cast<std::size_t>(sparsity) > k)
        throw DomainError("exact_rde_mask: sparsity out of range");
    if (sample_budget < 1)
        throw DomainError("exact_rde_mask: need at least one sample");

    std::vector<double> p_ref = model.predict(x);
    int j_star = argmax_index(p_ref);
    Coefficients h = repr.encode(x.data);

    // Common random numbers: one fixed draw set evaluates every candidate.
    std::vector<Coefficients> draws = sample(obf, sample_budget, stream);

    std::vector<double> mask(k);
    std::vector<std::uint8_t> best;
    double best_score = std::numeric_limits<double>::infinity();
    bool have_best = false;

    // Ascending code with bit (k-1-j) holding s[j] walks masks in
    // lexicographic order, so strict improvement keeps the smallest tie.
    for (std::uint64_t code = 0; code < (1ULL << k); ++code) {
        if (std::popcount(code) > sparsity)
            continue;
        for (std::size_t j = 0; j < k; ++j)
            mask[j] = (code >> (k - 1 - j)) & 1ULL ? 1.0 : 0.0;

        double acc = 0.0;
        for (const auto& noise : draws) {
            Coefficients z(k, h.channels);
            for (int ch = 0; ch < h.channels; ++ch)
                for (std::size_t pos = 0; pos < k; ++pos)
                    z.at(ch, pos) = mask[pos] * h.at(ch, pos) +
                                    (1.0 - mask[pos]) * noise.at(ch, pos);
            std::vector<double> y = repr.decode(z);
            for (auto& v : y)
                v = std::clamp(v, 0.0, 1.0);
            std::vector<double> p = model.predict(image_from_grid(model, std::move(y)));
            acc += distortion(d, p_ref, p, j_star);
        }
        double score = acc / sample_budget;
        if (!have_best || score < best_score) {
            have_best = true;
            best_score = score;
            best.assign(k, 0);
            for (std::size_t j = 0; j < k; ++j)
                best[j] = (code >> (k - 1 - j)) & 1ULL;
        }
    }
    return best;
}

} // namespace rde
