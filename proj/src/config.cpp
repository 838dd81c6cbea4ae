#include "memroute/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace memroute {

namespace {

using nlohmann::json;

const std::set<std::string> kKnownKeys = {
    "img-size",      "patch-size",    "in-channels",  "embed-dim",
    "heads",         "depth",         "mlp-ratio",    "rho",
    "tau",           "max-tokens",    "routed-blocks", "dtype",
    "optimizer",     "learning-rate", "beta1",        "beta2",
    "momentum",      "batch-size",    "distill-per-channel-mean",
    "loss-weight-matting", "loss-weight-distill", "loss-weight-compress",
};

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!kKnownKeys.count(key))
            throw ConfigError("config: unknown key \"" + key + "\"");

    RunConfig cfg;
    try {
        if (j.contains("img-size")) {
            const auto& v = j.at("img-size");
            if (v.is_array() && v.size() == 2) {
                cfg.encoder.img_h = v[0].get<std::size_t>();
                cfg.encoder.img_w = v[1].get<std::size_t>();
            } else if (v.is_number_unsigned()) {
                cfg.encoder.img_h = cfg.encoder.img_w = v.get<std::size_t>();
            } else {
                throw ConfigError("config: img-size must be an integer or [H,W]");
            }
        }
        if (j.contains("patch-size")) cfg.encoder.patch = j.at("patch-size").get<std::size_t>();
        if (j.contains("in-channels"))
            cfg.encoder.in_channels = j.at("in-channels").get<std::size_t>();
        if (j.contains("embed-dim")) cfg.encoder.dim = j.at("embed-dim").get<std::size_t>();
        if (j.contains("heads")) cfg.encoder.heads = j.at("heads").get<std::size_t>();
        if (j.contains("depth")) cfg.encoder.depth = j.at("depth").get<std::size_t>();
        if (j.contains("mlp-ratio")) cfg.encoder.mlp_ratio = j.at("mlp-ratio").get<std::size_t>();
        if (j.contains("rho")) cfg.encoder.routing.rho = j.at("rho").get<double>();
        if (j.contains("tau")) cfg.encoder.routing.tau = j.at("tau").get<double>();
        if (j.contains("max-tokens")) {
            const auto& v = j.at("max-tokens");
            if (v.is_null())
                cfg.encoder.routing.max_tokens.reset();
            else
                cfg.encoder.routing.max_tokens = v.get<std::size_t>();
        }
        if (j.contains("routed-blocks")) {
            const auto& v = j.at("routed-blocks");
            if (v.is_null()) {
                cfg.encoder.routed_blocks.reset();
            } else if (v.is_array()) {
                std::set<std::size_t> blocks;
                for (const auto& e : v) blocks.insert(e.get<std::size_t>());
                cfg.encoder.routed_blocks = std::move(blocks);
            } else {
                throw ConfigError("config: routed-blocks must be an array or null");
            }
        }
        if (j.contains("dtype")) {
            const std::string d = j.at("dtype").get<std::string>();
            if (d == "f32")
                cfg.dtype = DType::f32;
            else if (d == "f64")
                cfg.dtype = DType::f64;
            else
                throw ConfigError("config: dtype must be \"f32\" or \"f64\", got \"" + d +
                                  "\"");
        }
        if (j.contains("optimizer")) {
            const std::string o = j.at("optimizer").get<std::string>();
            if (o == "adam")
                cfg.optim.kind = OptimizerKind::adam;
            else if (o == "sgd")
                cfg.optim.kind = OptimizerKind::sgd;
            else
                throw ConfigError("config: optimizer must be \"adam\" or \"sgd\", got \"" +
                                  o + "\"");
        }
        if (j.contains("learning-rate")) cfg.optim.lr = j.at("learning-rate").get<double>();
        if (j.contains("beta1")) cfg.optim.beta1 = j.at("beta1").get<double>();
        if (j.contains("beta2")) cfg.optim.beta2 = j.at("beta2").get<double>();
        if (j.contains("momentum")) cfg.optim.momentum = j.at("momentum").get<double>();
        if (j.contains("batch-size")) cfg.batch_size = j.at("batch-size").get<std::size_t>();
        if (j.contains("distill-per-channel-mean"))
            cfg.distill_per_channel_mean = j.at("distill-per-channel-mean").get<bool>();
        if (j.contains("loss-weight-matting"))
            cfg.loss_weights.matting = j.at("loss-weight-matting").get<double>();
        if (j.contains("loss-weight-distill"))
            cfg.loss_weights.distill = j.at("loss-weight-distill").get<double>();
        if (j.contains("loss-weight-compress"))
            cfg.loss_weights.compress = j.at("loss-weight-compress").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (cfg.batch_size == 0) throw ConfigError("config: batch-size must be positive");
    cfg.encoder.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["img-size"] = {cfg.encoder.img_h, cfg.encoder.img_w};
    j["patch-size"] = cfg.encoder.patch;
    j["in-channels"] = cfg.encoder.in_channels;
    j["embed-dim"] = cfg.encoder.dim;
    j["heads"] = cfg.encoder.heads;
    j["depth"] = cfg.encoder.depth;
    j["mlp-ratio"] = cfg.encoder.mlp_ratio;
    j["rho"] = cfg.encoder.routing.rho;
    j["tau"] = cfg.encoder.routing.tau;
    if (cfg.encoder.routing.max_tokens)
        j["max-tokens"] = *cfg.encoder.routing.max_tokens;
    else
        j["max-tokens"] = nullptr;
    if (cfg.encoder.routed_blocks)
        j["routed-blocks"] = *cfg.encoder.routed_blocks;
    else
        j["routed-blocks"] = nullptr;
    j["dtype"] = cfg.dtype == DType::f32 ? "f32" : "f64";
    j["optimizer"] = cfg.optim.kind == OptimizerKind::adam ? "adam" : "sgd";
    j["learning-rate"] = cfg.optim.lr;
    j["beta1"] = cfg.optim.beta1;
    j["beta2"] = cfg.optim.beta2;
    j["momentum"] = cfg.optim.momentum;
    j["batch-size"] = cfg.batch_size;
    j["distill-per-channel-mean"] = cfg.distill_per_channel_mean;
    j["loss-weight-matting"] = cfg.loss_weights.matting;
    j["loss-weight-distill"] = cfg.loss_weights.distill;
    j["loss-weight-compress"] = cfg.loss_weights.compress;
    return j.dump(2);
}

}  // namespace memroute
