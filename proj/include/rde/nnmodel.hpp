#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rde/image.hpp"

namespace rde {

// The differentiable classifier contract: forward evaluation to post-softmax
// probabilities plus vector-Jacobian products w.r.t. the input pixels.
// Implementations must be safe for concurrent read-only evaluation.
class Model {
public:
    virtual ~Model() = default;

    virtual int class_count() const = 0;
    virtual int in_channels() const = 0;
    virtual int in_height() const = 0;
    virtual int in_width() const = 0;

    virtual std::vector<double> predict(const Image& img) const = 0;

    // Gradient of upstream . predict(img) w.r.t. the input grid,
    // channel-major like Image::data.
    virtual std::vector<double> input_vjp(const Image& img,
                                          std::span<const double> upstream) const = 0;
};

struct TrainConfig {
    int epochs = 1;
    int batch_size = 16;
    double learning_rate = 0.05;
    std::uint64_t seed = 0;
};

// Two conv blocks and a dense head, weights in 64-bit throughout:
// conv 8@3x3 / relu / maxpool2 / conv 16@3x3 / relu / maxpool2 / dense / softmax.
class ReferenceCnn : public Model {
public:
    // Glorot-uniform init from the seed; biases start at zero.
    ReferenceCnn(int classes, int channels, int height, int width, std::uint64_t seed);

    int class_count() const override { return m_; }
    int in_channels() const override { return c_; }
    int in_height() const override { return h_; }
    int in_width() const override { return w_; }

    std::vector<double> predict(const Image& img) const override;
    std::vector<double> input_vjp(const Image& img,
                                  std::span<const double> upstream) const override;

    // Minibatch SGD on cross-entropy; returns per-epoch mean loss.
    // Deterministic given the seed: fixed shuffle, fixed-order reductions.
    std::vector<double> train(const LabeledDataset& ds, const TrainConfig& cfg);

    // Fraction of correctly predicted labels.
    double accuracy(const LabeledDataset& ds) const;

    void save_weights(const std::string& path) const;
    static ReferenceCnn load_weights(const std::string& path);

    // Flat views over all parameters, declaration order; used by tests.
    std::vector<double*> parameter_tensors();
    std::vector<std::size_t> parameter_sizes() const;

private:
    struct Activations;
    void forward(const Image& img, Activations& act) const;
    struct Gradients;
    void backward(const Image& img, const Activations& act, std::span<const double> upstream,
                  std::vector<double>* input_grad, Gradients* param_grad) const;

    int m_, c_, h_, w_;
    int conv1_out_ = 8;
    int conv2_out_ = 16;
    std::vector<double> conv1_w_, conv1_b_;
    std::vector<double> conv2_w_, conv2_b_;
    std::vector<double> dense_w_, dense_b_;
};

// Numerically stabilized softmax (max subtraction).
std::vector<double> softmax(std::span<const double> logits);

} // namespace rde
