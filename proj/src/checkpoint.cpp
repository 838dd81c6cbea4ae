#include "memroute/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "memroute/tensor_io.hpp"

namespace memroute {

namespace {

nlohmann::json read_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("cannot open " + (dir / "manifest.json").string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("invalid checkpoint manifest: " + std::string(e.what()));
    }
    if (!j.contains("format") || j.at("format").get<std::string>() != kCheckpointFormat)
        throw IoError("checkpoint " + dir.string() + " has unsupported format tag");
    return j;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const RunConfig& cfg,
                     ModelWeights<T>& weights, const std::string& kind) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw IoError("cannot create checkpoint directory " + dir.string());
    nlohmann::json manifest;
    manifest["format"] = kCheckpointFormat;
    manifest["kind"] = kind;
    manifest["config"] = nlohmann::json::parse(run_config_to_json(cfg));
    nlohmann::json params = nlohmann::json::object();
    visit_params<T>(weights, [&](const std::string& name, Tensor<T>& t) {
        const std::string file = name + ".mrt";
        write_mrt(dir / file, t);
        params[name] = file;
    });
    manifest["params"] = std::move(params);
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + dir.string());
    out << manifest.dump(2) << "\n";
}

RunConfig read_checkpoint_config(const std::filesystem::path& dir) {
    const auto manifest = read_manifest(dir);
    return parse_run_config(manifest.at("config").dump());
}

std::string read_checkpoint_kind(const std::filesystem::path& dir) {
    return read_manifest(dir).at("kind").get<std::string>();
}

template <typename T>
ModelWeights<T> load_checkpoint(const std::filesystem::path& dir, const RunConfig& cfg) {
    const auto manifest = read_manifest(dir);
    const auto& params = manifest.at("params");
    const std::string kind = manifest.at("kind").get<std::string>();
    Rng scratch(0);
    ModelWeights<T> w = init_teacher<T>(cfg.encoder, scratch);
    if (kind != "teacher") {
        ModelWeights<T> teacher = std::move(w);
        w = init_student<T>(cfg.encoder, teacher, scratch);
    }
    std::size_t loaded = 0;
    visit_params<T>(w, [&](const std::string& name, Tensor<T>& t) {
        if (!params.contains(name))
            throw IoError("checkpoint " + dir.string() + " is missing parameter \"" + name +
                          "\"");
        const auto file = dir / params.at(name).get<std::string>();
        Tensor<T> stored = read_mrt<T>(file);
        if (stored.shape() != t.shape())
            throw IoError("checkpoint parameter \"" + name + "\" has shape " +
                          shape_str(stored.shape()) + ", expected " + shape_str(t.shape()));
        t = stored;
        ++loaded;
    });
    if (loaded != params.size())
        throw IoError("checkpoint " + dir.string() + " contains " +
                      std::to_string(params.size()) + " parameters, model expects " +
                      std::to_string(loaded));
    return w;
}

template void save_checkpoint<float>(const std::filesystem::path&, const RunConfig&,
                                     ModelWeights<float>&, const std::string&);
template void save_checkpoint<double>(const std::filesystem::path&, const RunConfig&,
                                      ModelWeights<double>&, const std::string&);
template ModelWeights<float> load_checkpoint<float>(const std::filesystem::path&,
                                                    const RunConfig&);
template ModelWeights<double> load_checkpoint<double>(const std::filesystem::path&,
                                                      const RunConfig&);

}  // namespace memroute
