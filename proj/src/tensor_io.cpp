#include "memroute/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace memroute {

static_assert(std::endian::native == std::endian::little,
              "MRT1 I/O assumes a little-endian host");

namespace {
constexpr char kMagic[4] = {'M', 'R', 'T', '1'};
}

template <typename T>
void write_mrt(const std::filesystem::path& path, const Tensor<T>& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(kMagic, 4);
    const std::uint8_t dtype = static_cast<std::uint8_t>(dtype_of<T>());
    const std::uint8_t ndim = static_cast<std::uint8_t>(t.ndim());
    out.put(static_cast<char>(dtype));
    out.put(static_cast<char>(ndim));
    for (std::size_t d : t.shape()) {
        const std::uint64_t v = d;
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    out.write(reinterpret_cast<const char*>(t.data().data()), t.size() * sizeof(T));
    if (!out) throw IoError("failed writing " + path.string());
}

template <typename T>
Tensor<T> read_mrt(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError(path.string() + " is not an MRT1 tensor file");
    const int dtype = in.get();
    const int ndim = in.get();
    if (dtype < 0 || ndim < 0) throw IoError(path.string() + ": truncated header");
    if (static_cast<DType>(dtype) != dtype_of<T>())
        throw IoError(path.string() + ": dtype code " + std::to_string(dtype) +
                      " does not match requested scalar type");
    Shape shape(static_cast<std::size_t>(ndim));
    for (auto& d : shape) {
        std::uint64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        d = static_cast<std::size_t>(v);
    }
    std::vector<T> values(numel(shape));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(T)));
    if (!in) throw IoError(path.string() + ": truncated tensor data");
    return Tensor<T>::from(std::move(shape), std::move(values));
}

DType peek_mrt_dtype(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError(path.string() + " is not an MRT1 tensor file");
    const int dtype = in.get();
    if (dtype != 0 && dtype != 1)
        throw IoError(path.string() + ": unknown dtype code " + std::to_string(dtype));
    return static_cast<DType>(dtype);
}

template void write_mrt<float>(const std::filesystem::path&, const Tensor<float>&);
template void write_mrt<double>(const std::filesystem::path&, const Tensor<double>&);
template Tensor<float> read_mrt<float>(const std::filesystem::path&);
template Tensor<double> read_mrt<double>(const std::filesystem::path&);

}  // namespace memroute
