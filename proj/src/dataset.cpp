#include "memroute/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "memroute/netpbm.hpp"
#include "memroute/tensor_io.hpp"

namespace memroute {

namespace {

std::string sample_dir_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%04zu", i);
    return buf;
}

}  // namespace

void write_dataset(const std::filesystem::path& out_dir, std::size_t count,
                   std::size_t size, Difficulty difficulty, std::uint64_t seed) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir))
        throw IoError("cannot create output directory " + out_dir.string());
    Rng master(seed);
    nlohmann::json index;
    index["count"] = count;
    index["size"] = size;
    index["difficulty"] = difficulty == Difficulty::easy ? "easy" : "hard";
    index["seed"] = seed;
    index["samples"] = nlohmann::json::array();
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng = master.fork(i);  // per-sample stream keyed by index
        auto sample = gen_toy_sample<float>(rng, size, difficulty);
        const std::string name = sample_dir_name(i);
        const auto dir = out_dir / name;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("cannot create " + dir.string());
        write_ppm(dir / "image.ppm", sample.image);
        write_ppm(dir / "fg.ppm", sample.fg);
        write_ppm(dir / "bg.ppm", sample.bg);
        write_pgm(dir / "alpha.pgm", sample.alpha);
        write_mrt(dir / "alpha.mrt", sample.alpha);
        nlohmann::json entry;
        entry["dir"] = name;
        entry["seed"] = i;
        index["samples"].push_back(entry);
    }
    std::ofstream out(out_dir / "index.json");
    if (!out) throw IoError("cannot write " + (out_dir / "index.json").string());
    out << index.dump(2) << "\n";
}

DatasetIndex read_dataset_index(const std::filesystem::path& dir) {
    std::ifstream in(dir / "index.json");
    if (!in) throw IoError("cannot open " + (dir / "index.json").string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("invalid dataset index: " + std::string(e.what()));
    }
    DatasetIndex idx;
    idx.count = j.at("count").get<std::size_t>();
    idx.size = j.at("size").get<std::size_t>();
    idx.difficulty = j.at("difficulty").get<std::string>();
    idx.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("samples")) {
        DatasetIndexEntry entry;
        entry.dir = e.at("dir").get<std::string>();
        entry.seed = e.at("seed").get<std::uint64_t>();
        idx.samples.push_back(std::move(entry));
    }
    return idx;
}

template <typename T>
std::vector<LoadedSample<T>> load_dataset(const std::filesystem::path& dir) {
    const DatasetIndex idx = read_dataset_index(dir);
    std::vector<LoadedSample<T>> out;
    out.reserve(idx.samples.size());
    for (const auto& entry : idx.samples) {
        LoadedSample<T> s;
        s.image = read_ppm<T>(dir / entry.dir / "image.ppm");
        if constexpr (sizeof(T) == 4) {
            s.alpha = read_mrt<float>(dir / entry.dir / "alpha.mrt");
        } else {
            // float on disk, widened for f64 runs
            auto a32 = read_mrt<float>(dir / entry.dir / "alpha.mrt");
            s.alpha = Tensor<T>::zeros(a32.shape());
            auto dst = s.alpha.mut_data();
            const auto src = a32.data();
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<T>(src[i]);
        }
        out.push_back(std::move(s));
    }
    return out;
}

template std::vector<LoadedSample<float>> load_dataset<float>(
    const std::filesystem::path&);
template std::vector<LoadedSample<double>> load_dataset<double>(
    const std::filesystem::path&);

}  // namespace memroute
