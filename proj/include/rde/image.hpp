#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rde {

// Pixel grid with values in [0,1], stored channel-major: data[ch*H*W + r*W + c].
struct Image {
    int channels = 0; // 1 or 3
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Image() = default;
    Image(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w),
          data(static_cast<std::size_t>(c) * h * w, fill) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
    std::size_t size() const { return data.size(); }

    double& at(int ch, int r, int c) {
        return data[(static_cast<std::size_t>(ch) * height + r) * width + c];
    }
    double at(int ch, int r, int c) const {
        return data[(static_cast<std::size_t>(ch) * height + r) * width + c];
    }
};

struct LabeledDataset {
    std::vector<Image> images;
    std::vector<int> labels;

    std::size_t size() const { return images.size(); }
};

// Binary PGM (P5) / PPM (P6), maxval 255 only. Byte b maps to b/255.
Image load_image(const std::string& path);

// Round half up to bytes; written atomically (temp file + rename).
void save_image(const Image& img, const std::string& path);

// c=1 passes through; c=3 collapses to 0.299 R + 0.587 G + 0.114 B.
Image to_greyscale(const Image& img);

// IDX pair as in the MNIST distribution (big-endian dims, ubyte payload).
LabeledDataset load_idx_dataset(const std::string& images_path,
                                const std::string& labels_path);

// Minimal CSV emitter: comma separator, '\n' line ends, no quoting.
// Cells must not contain commas or newlines.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);

    void add_row(std::vector<std::string> cells);
    void write(const std::string& path) const;

    std::size_t row_count() const { return rows_.size(); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

// Fixed numeric cell format, 12 significant digits.
std::string csv_num(double v);
std::string csv_num(std::int64_t v);

// Write-then-rename so failed runs leave no partial outputs behind.
void atomic_write_file(const std::string& path, const std::string& bytes);

} // namespace rde
