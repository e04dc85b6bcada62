#include "support/testdata.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rde/errors.hpp"
#include "rde/nnmodel.hpp"
#include "rde/rng.hpp"

namespace rde::testdata {

namespace {

// Seven-segment layout inside a 20x12 glyph box:
// A top, G middle, D bottom bars; F/B upper sides, E/C lower sides.
struct Seg {
    int r0, r1, c0, c1;
};
constexpr Seg kSegments[7] = {
    {0, 2, 1, 11},   // A
    {1, 10, 10, 12}, // B
    {10, 19, 10, 12},// C
    {18, 20, 1, 11}, // D
    {10, 19, 0, 2},  // E
    {1, 10, 0, 2},   // F
    {9, 11, 1, 11},  // G
};
constexpr const char* kDigitSegments[10] = {
    "ABCDEF", "BC", "ABGED", "ABGCD", "FGBC",
    "AFGCD",  "AFGEDC", "ABC", "ABCDEFG", "ABCDFG",
};

} // namespace

LabeledDataset make_glyph_dataset(std::size_t count, std::uint64_t seed) {
    LabeledDataset ds;
    ds.images.reserve(count);
    ds.labels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        rng::Stream stream(rng::derive(seed, 0xD1u, i));
        int digit = static_cast<int>(stream.next_below(10));
        int dr = 2 + static_cast<int>(stream.next_below(5)); // glyph box origin
        int dc = 4 + static_cast<int>(stream.next_below(9));
        double ink = 0.75 + 0.2 * stream.next_uniform();

        Image img(1, 28, 28);
        for (const char* s = kDigitSegments[digit]; *s; ++s) {
            const Seg& seg = kSegments[*s - 'A'];
            for (int r = seg.r0; r < seg.r1; ++r)
                for (int c = seg.c0; c < seg.c1; ++c)
                    img.at(0, dr + r, dc + c) = ink;
        }
        for (auto& v : img.data)
            v = std::clamp(v + 0.08 * stream.next_normal(), 0.0, 1.0);
        ds.images.push_back(std::move(img));
        ds.labels.push_back(digit);
    }
    return ds;
}

void write_idx_pair(const LabeledDataset& ds, const std::string& images_path,
                    const std::string& labels_path) {
    auto put_u32 = [](std::string& out, std::uint32_t v) {
        for (int i = 3; i >= 0; --i)
            out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    const Image& first = ds.images.at(0);
    std::string imgs;
    put_u32(imgs, 0x00000803u);
    put_u32(imgs, static_cast<std::uint32_t>(ds.size()));
    put_u32(imgs, static_cast<std::uint32_t>(first.height));
    put_u32(imgs, static_cast<std::uint32_t>(first.width));
    for (const Image& img : ds.images)
        for (double v : img.data)
            imgs.push_back(static_cast<char>(
                static_cast<unsigned char>(std::floor(v * 255.0 + 0.5))));

    std::string labs;
    put_u32(labs, 0x00000801u);
    put_u32(labs, static_cast<std::uint32_t>(ds.size()));
    for (int label : ds.labels)
        labs.push_back(static_cast<char>(static_cast<unsigned char>(label)));

    atomic_write_file(images_path, imgs);
    atomic_write_file(labels_path, labs);
}

Image random_image(int channels, int height, int width, std::uint64_t seed) {
    Image img(channels, height, width);
    std::uint64_t key = rng::derive(seed, 0x17u);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = rng::uniform(key, i);
    return img;
}

SingleCoordModel::SingleCoordModel(int channels, int height, int width, std::size_t coord,
                                   double gain, double pivot)
    : c_(channels), h_(height), w_(width), coord_(coord), gain_(gain), pivot_(pivot) {
    if (coord >= static_cast<std::size_t>(channels) * height * width)
        throw DomainError("SingleCoordModel: coordinate out of range");
}

std::vector<double> SingleCoordModel::predict(const Image& img) const {
    double logits[2] = {gain_ * (img.data[coord_] - pivot_), 0.0};
    return softmax(std::span<const double>(logits, 2));
}

std::vector<double> SingleCoordModel::input_vjp(const Image& img,
                                                std::span<const double> upstream) const {
    auto p = predict(img);
    // d p / d logit0 = (p0 (1-p0), -p0 p1); logit0 depends on the coordinate.
    double dlogit = p[0] * (upstream[0] - (upstream[0] * p[0] + upstream[1] * p[1]));
    std::vector<double> g(img.size(), 0.0);
    g[coord_] = gain_ * dlogit;
    return g;
}

WeightedSumModel::WeightedSumModel(int channels, int height, int width,
                                   std::vector<double> weights)
    : c_(channels), h_(height), w_(width), weights_(std::move(weights)) {
    if (weights_.size() != static_cast<std::size_t>(channels) * height * width)
        throw DomainError("WeightedSumModel: weight length mismatch");
}

std::vector<double> WeightedSumModel::predict(const Image& img) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i)
        acc += weights_[i] * img.data[i];
    double logits[2] = {acc, 0.0};
    return softmax(std::span<const double>(logits, 2));
}

std::vector<double> WeightedSumModel::input_vjp(const Image& img,
                                                std::span<const double> upstream) const {
    auto p = predict(img);
    double dlogit = p[0] * (upstream[0] - (upstream[0] * p[0] + upstream[1] * p[1]));
    std::vector<double> g(img.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = weights_[i] * dlogit;
    return g;
}

WaveletCoordModel::WaveletCoordModel(int height, int width, const WaveletSpec& spec,
                                     std::size_t coord, double gain, double pivot)
    : h_(height), w_(width), spec_(spec), coord_(coord), gain_(gain), pivot_(pivot) {
    // The coefficient is linear in the pixels; its gradient is the decode of
    // the matching unit coefficient (analysis and synthesis are transposes).
    std::vector<double> zeros(static_cast<std::size_t>(height) * width, 0.0);
    WaveletPyramid unit = dwt2(zeros, 1, height, width, spec);
    std::size_t k = unit.positions_per_channel();
    if (coord >= k)
        throw DomainError("WaveletCoordModel: coordinate out of range");
    std::vector<double> e(k, 0.0);
    e[coord] = 1.0;
    unit.unflatten_channel(0, e);
    coord_row_ = idwt2(unit);
}

double WaveletCoordModel::coefficient(const Image& img) const {
    WaveletPyramid pyr = dwt2(img, spec_);
    std::vector<double> flat(pyr.positions_per_channel());
    pyr.flatten_channel(0, flat);
    return flat[coord_];
}

std::vector<double> WaveletCoordModel::predict(const Image& img) const {
    double logits[2] = {gain_ * (coefficient(img) - pivot_), 0.0};
    return softmax(std::span<const double>(logits, 2));
}

std::vector<double> WaveletCoordModel::input_vjp(const Image& img,
                                                 std::span<const double> upstream) const {
    auto p = predict(img);
    double dlogit = p[0] * (upstream[0] - (upstream[0] * p[0] + upstream[1] * p[1]));
    std::vector<double> g(coord_row_.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = gain_ * dlogit * coord_row_[i];
    return g;
}

std::vector<double> AngleModel::predict(const Image& img) const {
    double logits[2] = {gain_ * std::atan2(img.data[1], img.data[0]), 0.0};
    return softmax(std::span<const double>(logits, 2));
}

std::vector<double> AngleModel::input_vjp(const Image& img,
                                          std::span<const double> upstream) const {
    auto p = predict(img);
    double dlogit = p[0] * (upstream[0] - (upstream[0] * p[0] + upstream[1] * p[1]));
    double x = img.data[0], y = img.data[1];
    double r2 = x * x + y * y;
    std::vector<double> g(2, 0.0);
    if (r2 > 0.0) {
        g[0] = gain_ * dlogit * (-y / r2);
        g[1] = gain_ * dlogit * (x / r2);
    }
    return g;
}

void UniformPolarObfuscator::sample_into(std::uint64_t stream, std::uint64_t index,
                                         Coefficients& out) const {
    out.k = 2;
    out.channels = 1;
    out.v.resize(2);
    std::uint64_t key = rng::derive(seed_, stream, index);
    out.v[0] = std::numbers::pi * (2.0 * rng::uniform(key, 0) - 1.0);
    out.v[1] = rng::uniform(key, 1);
}

TempDir::TempDir(const std::string& tag) {
    auto base = std::filesystem::temp_directory_path();
    for (std::uint64_t nonce = 0;; ++nonce) {
        auto candidate = base / ("rde-" + tag + "-" + std::to_string(::getpid()) + "-" +
                                 std::to_string(nonce));
        std::error_code ec;
        if (std::filesystem::create_directory(candidate, ec)) {
            path_ = candidate;
            return;
        }
        if (nonce > 1000)
            throw IoError("TempDir: cannot create scratch directory");
    }
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace rde::testdata
