#include "memroute/netpbm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace memroute {

namespace {

std::uint8_t to_byte(double v) {
    const double s = std::llround(std::min(1.0, std::max(0.0, v)) * 255.0);
    return static_cast<std::uint8_t>(s);
}

struct PnmHeader {
    std::size_t width = 0, height = 0;
};

PnmHeader read_header(std::ifstream& in, const char* magic, const std::string& path) {
    std::string tag;
    in >> tag;
    if (tag != magic)
        throw IoError(path + ": expected " + magic + " header, got '" + tag + "'");
    auto next_token = [&]() {
        std::string t;
        while (in >> t) {
            if (t[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return t;
        }
        throw IoError(path + ": truncated header");
    };
    PnmHeader h;
    h.width = std::stoul(next_token());
    h.height = std::stoul(next_token());
    const unsigned long maxval = std::stoul(next_token());
    if (maxval != 255) throw IoError(path + ": only maxval 255 is supported");
    in.get();  // single whitespace before binary data
    return h;
}

}  // namespace

template <typename T>
void write_ppm(const std::filesystem::path& path, const Tensor<T>& image) {
    if (image.ndim() != 3 || image.dim(0) != 3)
        throw ShapeError("write_ppm: expected [3,H,W], got " + shape_str(image.shape()));
    const std::size_t H = image.dim(1), W = image.dim(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "P6\n" << W << " " << H << "\n255\n";
    const auto v = image.data();
    std::vector<std::uint8_t> row(W * 3);
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                row[x * 3 + c] = to_byte(static_cast<double>(v[(c * H + y) * W + x]));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("failed writing " + path.string());
}

template <typename T>
Tensor<T> read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const PnmHeader h = read_header(in, "P6", path.string());
    Tensor<T> img = Tensor<T>::zeros({3, h.height, h.width});
    auto v = img.mut_data();
    std::vector<std::uint8_t> row(h.width * 3);
    for (std::size_t y = 0; y < h.height; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!in) throw IoError(path.string() + ": truncated pixel data");
        for (std::size_t x = 0; x < h.width; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                v[(c * h.height + y) * h.width + x] =
                    static_cast<T>(row[x * 3 + c] / 255.0);
    }
    return img;
}

template <typename T>
void write_pgm(const std::filesystem::path& path, const Tensor<T>& gray) {
    if (gray.ndim() != 2)
        throw ShapeError("write_pgm: expected [H,W], got " + shape_str(gray.shape()));
    const std::size_t H = gray.dim(0), W = gray.dim(1);
    std::vector<std::uint8_t> bytes(H * W);
    const auto v = gray.data();
    for (std::size_t i = 0; i < bytes.size(); ++i)
        bytes[i] = to_byte(static_cast<double>(v[i]));
    write_pgm_bytes(path, bytes.data(), W, H);
}

template <typename T>
Tensor<T> read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const PnmHeader h = read_header(in, "P5", path.string());
    Tensor<T> img = Tensor<T>::zeros({h.height, h.width});
    std::vector<std::uint8_t> bytes(h.height * h.width);
    in.read(reinterpret_cast<char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!in) throw IoError(path.string() + ": truncated pixel data");
    auto v = img.mut_data();
    for (std::size_t i = 0; i < bytes.size(); ++i) v[i] = static_cast<T>(bytes[i] / 255.0);
    return img;
}

void write_pgm_bytes(const std::filesystem::path& path, const std::uint8_t* data,
                     std::size_t width, std::size_t height) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(width * height));
    if (!out) throw IoError("failed writing " + path.string());
}

template void write_ppm<float>(const std::filesystem::path&, const Tensor<float>&);
template void write_ppm<double>(const std::filesystem::path&, const Tensor<double>&);
template Tensor<float> read_ppm<float>(const std::filesystem::path&);
template Tensor<double> read_ppm<double>(const std::filesystem::path&);
template void write_pgm<float>(const std::filesystem::path&, const Tensor<float>&);
template void write_pgm<double>(const std::filesystem::path&, const Tensor<double>&);
template Tensor<float> read_pgm<float>(const std::filesystem::path&);
template Tensor<double> read_pgm<double>(const std::filesystem::path&);

}  // namespace memroute
