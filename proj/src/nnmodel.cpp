#include "rde/nnmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "rde/errors.hpp"
#include "rde/kernels.hpp"
#include "rde/rng.hpp"

namespace rde {

namespace {

void check_shape(const Model& model, const Image& img) {
    if (img.channels != model.in_channels() || img.height != model.in_height() ||
        img.width != model.in_width())
        throw DomainError("model: input shape mismatch");
}

void fill_glorot(std::vector<double>& w, std::size_t fan_in, std::size_t fan_out,
                 std::uint64_t key) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = bound * (2.0 * rng::uniform(key, i) - 1.0);
}

void write_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void write_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void write_f64_tensor(std::string& out, const std::vector<double>& t) {
    write_u64(out, t.size());
    for (double d : t) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        write_u64(out, bits);
    }
}

std::uint32_t read_u32(std::istream& in, const char* field) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in)
        throw FormatError(std::string("weights: truncated ") + field);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& in, const char* field) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in)
        throw FormatError(std::string("weights: truncated ") + field);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
        v = (v << 8) | b[i];
    return v;
}

void read_f64_tensor(std::istream& in, std::vector<double>& t, const char* field) {
    std::uint64_t count = read_u64(in, field);
    if (count != t.size())
        throw FormatError(std::string("weights: element-count mismatch for ") + field +
                          ": expected " + std::to_string(t.size()) + ", got " +
                          std::to_string(count));
    for (auto& d : t) {
        std::uint64_t bits = read_u64(in, field);
        std::memcpy(&d, &bits, 8);
    }
}

} // namespace

std::vector<double> softmax(std::span<const double> logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (auto& v : p)
        v /= sum;
    return p;
}

struct ReferenceCnn::Activations {
    std::vector<double> conv1_pre;   // 8 x h x w
    std::vector<double> relu1;       // 8 x h x w
    std::vector<double> pool1;       // 8 x h/2 x w/2
    std::vector<std::int32_t> arg1;
    std::vector<double> conv2_pre;   // 16 x h/2 x w/2
    std::vector<double> relu2;       // 16 x h/2 x w/2
    std::vector<double> pool2;       // 16 x h/4 x w/4
    std::vector<std::int32_t> arg2;
    std::vector<double> logits;      // m
    std::vector<double> probs;       // m
};

struct ReferenceCnn::Gradients {
    std::vector<double> conv1_w, conv1_b, conv2_w, conv2_b, dense_w, dense_b;
};

ReferenceCnn::ReferenceCnn(int classes, int channels, int height, int width,
                           std::uint64_t seed)
    : m_(classes), c_(channels), h_(height), w_(width) {
    if (classes < 2)
        throw DomainError("cnn: need at least 2 classes");
    if (height % 4 != 0 || width % 4 != 0)
        throw DomainError("cnn: input height and width must be divisible by 4");
    std::size_t dense_in = static_cast<std::size_t>(conv2_out_) * (h_ / 4) * (w_ / 4);
    conv1_w_.resize(static_cast<std::size_t>(conv1_out_) * c_ * 9);
    conv1_b_.assign(conv1_out_, 0.0);
    conv2_w_.resize(static_cast<std::size_t>(conv2_out_) * conv1_out_ * 9);
    conv2_b_.assign(conv2_out_, 0.0);
    dense_w_.resize(dense_in * m_);
    dense_b_.assign(m_, 0.0);

    fill_glorot(conv1_w_, static_cast<std::size_t>(c_) * 9,
                static_cast<std::size_t>(conv1_out_) * 9, rng::derive(seed, 1));
    fill_glorot(conv2_w_, static_cast<std::size_t>(conv1_out_) * 9,
                static_cast<std::size_t>(conv2_out_) * 9, rng::derive(seed, 2));
    fill_glorot(dense_w_, dense_in, m_, rng::derive(seed, 3));
}

void ReferenceCnn::forward(const Image& img, Activations& act) const {
    check_shape(*this, img);
    int h2 = h_ / 2, w2 = w_ / 2, h4 = h_ / 4, w4 = w_ / 4;
    act.conv1_pre.resize(static_cast<std::size_t>(conv1_out_) * h_ * w_);
    kernels::conv3x3_forward(img.data.data(), c_, h_, w_, conv1_w_.data(), conv1_b_.data(),
                             conv1_out_, act.conv1_pre.data());
    act.relu1 = act.conv1_pre;
    for (auto& v : act.relu1)
        v = std::max(0.0, v);
    act.pool1.resize(static_cast<std::size_t>(conv1_out_) * h2 * w2);
    act.arg1.resize(act.pool1.size());
    kernels::maxpool2_forward(act.relu1.data(), conv1_out_, h_, w_, act.pool1.data(),
                              act.arg1.data());
    act.conv2_pre.resize(static_cast<std::size_t>(conv2_out_) * h2 * w2);
    kernels::conv3x3_forward(act.pool1.data(), conv1_out_, h2, w2, conv2_w_.data(),
                             conv2_b_.data(), conv2_out_, act.conv2_pre.data());
    act.relu2 = act.conv2_pre;
    for (auto& v : act.relu2)
        v = std::max(0.0, v);
    act.pool2.resize(static_cast<std::size_t>(conv2_out_) * h4 * w4);
    act.arg2.resize(act.pool2.size());
    kernels::maxpool2_forward(act.relu2.data(), conv2_out_, h2, w2, act.pool2.data(),
                              act.arg2.data());
    act.logits.resize(m_);
    kernels::dense_forward(act.pool2.data(), static_cast<int>(act.pool2.size()),
                           dense_w_.data(), dense_b_.data(), m_, act.logits.data());
    act.probs = softmax(act.logits);
}

std::vector<double> ReferenceCnn::predict(const Image& img) const {
    Activations act;
    forward(img, act);
    return act.probs;
}

void ReferenceCnn::backward(const Image& img, const Activations& act,
                            std::span<const double> upstream,
                            std::vector<double>* input_grad, Gradients* param_grad) const {
    if (static_cast<int>(upstream.size()) != m_)
        throw DomainError("model: upstream length mismatch");
    int h2 = h_ / 2, w2 = w_ / 2;

    // softmax vjp: g_logits = p .* (u - <u, p>)
    double dot = 0.0;
    for (int j = 0; j < m_; ++j)
        dot += upstream[j] * act.probs[j];
    std::vector<double> glogits(m_);
    for (int j = 0; j < m_; ++j)
        glogits[j] = act.probs[j] * (upstream[j] - dot);

    int dense_in = static_cast<int>(act.pool2.size());
    if (param_grad) {
        kernels::dense_backward_params(act.pool2.data(), dense_in, glogits.data(), m_,
                                       param_grad->dense_w.data(),
                                       param_grad->dense_b.data());
    }
    std::vector<double> gpool2(dense_in);
    kernels::dense_backward_input(glogits.data(), m_, dense_w_.data(), dense_in,
                                  gpool2.data());

    std::vector<double> grelu2(act.relu2.size());
    kernels::maxpool2_backward(gpool2.data(), conv2_out_, h2, w2, act.arg2.data(),
                               grelu2.data());
    for (std::size_t i = 0; i < grelu2.size(); ++i)
        if (act.conv2_pre[i] <= 0.0)
            grelu2[i] = 0.0;

    if (param_grad) {
        kernels::conv3x3_backward_params(act.pool1.data(), conv1_out_, grelu2.data(),
                                         conv2_out_, h2, w2, param_grad->conv2_w.data(),
                                         param_grad->conv2_b.data());
    }
    std::vector<double> gpool1(act.pool1.size());
    kernels::conv3x3_backward_input(grelu2.data(), conv2_out_, h2, w2, conv2_w_.data(),
                                    conv1_out_, gpool1.data());

    std::vector<double> grelu1(act.relu1.size());
    kernels::maxpool2_backward(gpool1.data(), conv1_out_, h_, w_, act.arg1.data(),
                               grelu1.data());
    for (std::size_t i = 0; i < grelu1.size(); ++i)
        if (act.conv1_pre[i] <= 0.0)
            grelu1[i] = 0.0;

    if (param_grad) {
        kernels::conv3x3_backward_params(img.data.data(), c_, grelu1.data(), conv1_out_,
                                         h_, w_, param_grad->conv1_w.data(),
                                         param_grad->conv1_b.data());
    }
    if (input_grad) {
        input_grad->resize(static_cast<std::size_t>(c_) * h_ * w_);
        kernels::conv3x3_backward_input(grelu1.data(), conv1_out_, h_, w_, conv1_w_.data(),
                                        c_, input_grad->data());
    }
}

std::vector<double> ReferenceCnn::input_vjp(const Image& img,
                                            std::span<const double> upstream) const {
    Activations act;
    forward(img, act);
    std::vector<double> grad;
    backward(img, act, upstream, &grad, nullptr);
    return grad;
}

std::vector<double> ReferenceCnn::train(const LabeledDataset& ds, const TrainConfig& cfg) {
    if (ds.images.empty())
        throw DomainError("train: empty dataset");
    if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.learning_rate < 0.0)
        throw DomainError("train: invalid config");
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        check_shape(*this, ds.images[i]);
        if (ds.labels[i] < 0 || ds.labels[i] >= m_)
            throw DomainError("train: label out of range at item " + std::to_string(i));
    }

    std::size_t n = ds.images.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> epoch_losses;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates from the per-epoch subseed.
        rng::Stream shuffle(rng::derive(cfg.seed, 0x5u, static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[shuffle.next_below(i)]);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            std::size_t stop = std::min(n, start + cfg.batch_size);
            std::size_t bsz = stop - start;

            // Per-item gradients land in their own slots; the reduction below
            // runs in fixed index order so results are thread-count invariant.
            std::vector<Gradients> slots(bsz);
            std::vector<double> losses(bsz);
            for (auto& g : slots) {
                g.conv1_w.assign(conv1_w_.size(), 0.0);
                g.conv1_b.assign(conv1_b_.size(), 0.0);
                g.conv2_w.assign(conv2_w_.size(), 0.0);
                g.conv2_b.assign(conv2_b_.size(), 0.0);
                g.dense_w.assign(dense_w_.size(), 0.0);
                g.dense_b.assign(dense_b_.size(), 0.0);
            }
#pragma omp parallel for schedule(dynamic)
            for (std::size_t bi = 0; bi < bsz; ++bi) {
                const Image& img = ds.images[order[start + bi]];
                int label = ds.labels[order[start + bi]];
                Activations act;
                forward(img, act);
                losses[bi] = -std::log(std::max(act.probs[label], 1e-300));
                // d loss / d probs for cross-entropy on post-softmax outputs
                std::vector<double> upstream(m_, 0.0);
                upstream[label] = -1.0 / std::max(act.probs[label], 1e-300);
                backward(img, act, upstream, nullptr, &slots[bi]);
            }

            double scale = cfg.learning_rate / static_cast<double>(bsz);
            auto apply = [&](std::vector<double>& w, auto member) {
                for (std::size_t bi = 0; bi < bsz; ++bi) {
                    const auto& g = slots[bi].*member;
                    for (std::size_t i = 0; i < w.size(); ++i)
                        w[i] -= scale * g[i];
                }
            };
            apply(conv1_w_, &Gradients::conv1_w);
            apply(conv1_b_, &Gradients::conv1_b);
            apply(conv2_w_, &Gradients::conv2_w);
            apply(conv2_b_, &Gradients::conv2_b);
            apply(dense_w_, &Gradients::dense_w);
            apply(dense_b_, &Gradients::dense_b);
            for (std::size_t bi = 0; bi < bsz; ++bi)
                loss_sum += losses[bi];
        }
        epoch_losses.push_back(loss_sum / static_cast<double>(n));
    }
    return epoch_losses;
}

double ReferenceCnn::accuracy(const LabeledDataset& ds) const {
    if (ds.images.empty())
        throw DomainError("accuracy: empty dataset");
    std::size_t hits = 0;
    std::vector<std::size_t> correct(ds.size(), 0);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto p = predict(ds.images[i]);
        int arg = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        correct[i] = (arg == ds.labels[i]) ? 1 : 0;
    }
    for (std::size_t i = 0; i < ds.size(); ++i)
        hits += correct[i];
    return static_cast<double>(hits) / static_cast<double>(ds.size());
}

void ReferenceCnn::save_weights(const std::string& path) const {
    std::string out;
    out += "RDEW";
    write_u32(out, 1);
    write_u32(out, static_cast<std::uint32_t>(m_));
    write_u32(out, static_cast<std::uint32_t>(c_));
    write_u32(out, static_cast<std::uint32_t>(h_));
    write_u32(out, static_cast<std::uint32_t>(w_));
    write_f64_tensor(out, conv1_w_);
    write_f64_tensor(out, conv1_b_);
    write_f64_tensor(out, conv2_w_);
    write_f64_tensor(out, conv2_b_);
    write_f64_tensor(out, dense_w_);
    write_f64_tensor(out, dense_b_);
    atomic_write_file(path, out);
}

ReferenceCnn ReferenceCnn::load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open weights file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "RDEW", 4) != 0)
        throw FormatError("weights: bad magic, expected RDEW");
    std::uint32_t version = read_u32(in, "version");
    if (version != 1)
        throw FormatError("weights: unsupported version " + std::to_string(version));
    std::uint32_t m = read_u32(in, "class count");
    std::uint32_t c = read_u32(in, "channels");
    std::uint32_t h = read_u32(in, "height");
    std::uint32_t w = read_u32(in, "width");
    ReferenceCnn model(static_cast<int>(m), static_cast<int>(c), static_cast<int>(h),
                       static_cast<int>(w), 0);
    read_f64_tensor(in, model.conv1_w_, "conv1 weights");
    read_f64_tensor(in, model.conv1_b_, "conv1 bias");
    read_f64_tensor(in, model.conv2_w_, "conv2 weights");
    read_f64_tensor(in, model.conv2_b_, "conv2 bias");
    read_f64_tensor(in, model.dense_w_, "dense weights");
    read_f64_tensor(in, model.dense_b_, "dense bias");
    return model;
}

std::vector<double*> ReferenceCnn::parameter_tensors() {
    return {conv1_w_.data(), conv1_b_.data(), conv2_w_.data(),
            conv2_b_.data(), dense_w_.data(), dense_b_.data()};
}

std::vector<std::size_t> ReferenceCnn::parameter_sizes() const {
    return {conv1_w_.size(), conv1_b_.size(), conv2_w_.size(),
            conv2_b_.size(), dense_w_.size(), dense_b_.size()};
}

} // namespace rde
