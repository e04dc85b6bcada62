#include "rde/image.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rde/errors.hpp"

namespace rde {

namespace {

// Reads one whitespace-delimited ASCII token from a binary stream.
std::string next_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF && std::isspace(ch)) {
    }
    while (ch != EOF && !std::isspace(ch)) {
        tok.push_back(static_cast<char>(ch));
        ch = in.get();
    }
    return tok;
}

int parse_header_int(std::istream& in, const char* field) {
    std::string tok = next_token(in);
    if (tok.empty())
        throw FormatError(std::string("pnm header: missing ") + field);
    for (char c : tok)
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw FormatError(std::string("pnm header: non-numeric ") + field + " '" + tok + "'");
    return std::stoi(tok);
}

std::uint32_t read_u32_be(std::istream& in, const char* field) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in)
        throw FormatError(std::string("idx: truncated ") + field);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

} // namespace

Image load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open image file: " + path);

    std::string magic = next_token(in);
    int channels;
    if (magic == "P5")
        channels = 1;
    else if (magic == "P6")
        channels = 3;
    else
        throw FormatError("pnm header: unsupported magic '" + magic + "'");

    int width = parse_header_int(in, "width");
    int height = parse_header_int(in, "height");
    int maxval = parse_header_int(in, "maxval");
    if (width <= 0 || height <= 0)
        throw FormatError("pnm header: non-positive dimensions");
    if (maxval != 255)
        throw FormatError("pnm header: unsupported maxval " + std::to_string(maxval));

    // Exactly one whitespace byte separates the header from the payload;
    // next_token already consumed it.
    std::size_t n = static_cast<std::size_t>(channels) * height * width;
    std::vector<unsigned char> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw FormatError("pnm payload: truncated, expected " + std::to_string(n) +
                          " bytes, got " + std::to_string(in.gcount()));

    // File payload is pixel-interleaved; Image storage is channel-major.
    Image img(channels, height, width);
    std::size_t hw = img.pixel_count();
    for (std::size_t p = 0; p < hw; ++p)
        for (int ch = 0; ch < channels; ++ch)
            img.data[ch * hw + p] = raw[p * channels + ch] / 255.0;
    return img;
}

void save_image(const Image& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        throw DomainError("save_image: channel count must be 1 or 3");

    std::string bytes;
    bytes += (img.channels == 1) ? "P5" : "P6";
    bytes += "\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";

    std::size_t hw = img.pixel_count();
    bytes.reserve(bytes.size() + hw * img.channels);
    for (std::size_t p = 0; p < hw; ++p)
        for (int ch = 0; ch < img.channels; ++ch) {
            double v = img.data[ch * hw + p];
            // round half up
            int b = static_cast<int>(std::floor(v * 255.0 + 0.5));
            if (b < 0) b = 0;
            if (b > 255) b = 255;
            bytes.push_back(static_cast<char>(static_cast<unsigned char>(b)));
        }
    atomic_write_file(path, bytes);
}

Image to_greyscale(const Image& img) {
    if (img.channels == 1)
        return img;
    if (img.channels != 3)
        throw DomainError("to_greyscale: channel count must be 1 or 3");

    Image out(1, img.height, img.width);
    std::size_t hw = img.pixel_count();
    for (std::size_t p = 0; p < hw; ++p)
        out.data[p] = 0.299 * img.data[p] + 0.587 * img.data[hw + p] + 0.114 * img.data[2 * hw + p];
    return out;
}

LabeledDataset load_idx_dataset(const std::string& images_path,
                                const std::string& labels_path) {
    std::ifstream fi(images_path, std::ios::binary);
    if (!fi)
        throw IoError("cannot open idx images file: " + images_path);
    std::ifstream fl(labels_path, std::ios::binary);
    if (!fl)
        throw IoError("cannot open idx labels file: " + labels_path);

    std::uint32_t magic_i = read_u32_be(fi, "images magic");
    if (magic_i != 0x00000803u)
        throw FormatError("idx images magic: expected 0x00000803, got 0x" +
                          [&] { std::ostringstream o; o << std::hex << magic_i; return o.str(); }());
    std::uint32_t count_i = read_u32_be(fi, "image count");
    std::uint32_t rows = read_u32_be(fi, "image rows");
    std::uint32_t cols = read_u32_be(fi, "image cols");

    std::uint32_t magic_l = read_u32_be(fl, "labels magic");
    if (magic_l != 0x00000801u)
        throw FormatError("idx labels magic: expected 0x00000801, got 0x" +
                          [&] { std::ostringstream o; o << std::hex << magic_l; return o.str(); }());
    std::uint32_t count_l = read_u32_be(fl, "label count");
    if (count_i != count_l)
        throw FormatError("idx count mismatch: " + std::to_string(count_i) + " images vs " +
                          std::to_string(count_l) + " labels");

    LabeledDataset ds;
    ds.images.reserve(count_i);
    ds.labels.reserve(count_i);
    std::size_t hw = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> raw(hw);
    for (std::uint32_t i = 0; i < count_i; ++i) {
        fi.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(hw));
        if (static_cast<std::size_t>(fi.gcount()) != hw)
            throw FormatError("idx images payload: truncated at item " + std::to_string(i));
        Image img(1, static_cast<int>(rows), static_cast<int>(cols));
        for (std::size_t p = 0; p < hw; ++p)
            img.data[p] = raw[p] / 255.0;
        ds.images.push_back(std::move(img));

        int lab = fl.get();
        if (lab == EOF)
            throw FormatError("idx labels payload: truncated at item " + std::to_string(i));
        ds.labels.push_back(lab);
    }
    return ds;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvWriter::add_row(std::vector<std::string> cells) {
    if (cells.size() != header_.size())
        throw DomainError("csv: row width " + std::to_string(cells.size()) +
                          " does not match header width " + std::to_string(header_.size()));
    rows_.push_back(std::move(cells));
}

void CsvWriter::write(const std::string& path) const {
    std::string out;
    auto emit_line = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out.push_back(',');
            out += cells[i];
        }
        out.push_back('\n');
    };
    emit_line(header_);
    for (const auto& row : rows_)
        emit_line(row);
    atomic_write_file(path, out);
}

std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string csv_num(std::int64_t v) {
    return std::to_string(v);
}

void atomic_write_file(const std::string& path, const std::string& bytes) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot open for writing: " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw IoError("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw IoError("rename failed: " + path);
    }
}

} // namespace rde
