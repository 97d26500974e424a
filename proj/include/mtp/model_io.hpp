#pragma once

#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "mtp/error.hpp"
#include "mtp/model.hpp"

namespace mtp {

// Metadata attached to generated target models.
struct TargetMeta {
    std::string objective;  // "subpop_error" | "overall_error"
    double required_error = 0.0;
    double achieved_error = 0.0;
    double clean_loss = 0.0;  // empirical loss of the target on the clean training set
    bool objective_met = false;
    int flips = 0;
    int copies = 0;
};

// A model plus its training context, as stored on disk:
// {"weights": [...], "bias": r, "loss": "hinge"|"logistic", "c_r": r}
// with an optional "meta" block for generated targets.
struct ModelFile {
    LinearModel model;
    LossKind loss = LossKind::Hinge;
    double c_r = 0.0;
    std::optional<TargetMeta> meta;
};

inline nlohmann::json model_to_json(const ModelFile& mf) {
    nlohmann::json j;
    j["weights"] = mf.model.weights;
    j["bias"] = mf.model.bias;
    j["loss"] = loss_name(mf.loss);
    j["c_r"] = mf.c_r;
    if (mf.meta) {
        j["meta"] = {{"objective", mf.meta->objective},
                     {"required_error", mf.meta->required_error},
                     {"achieved_error", mf.meta->achieved_error},
                     {"clean_loss", mf.meta->clean_loss},
                     {"objective_met", mf.meta->objective_met},
                     {"flips", mf.meta->flips},
                     {"copies", mf.meta->copies}};
    }
    return j;
}

inline ModelFile model_from_json(const nlohmann::json& j) {
    ModelFile mf;
    try {
        mf.model.weights = j.at("weights").get<Vec>();
        mf.model.bias = j.at("bias").get<double>();
        mf.loss = loss_from_name(j.at("loss").get<std::string>());
        mf.c_r = j.at("c_r").get<double>();
        if (j.contains("meta")) {
            const auto& m = j.at("meta");
            TargetMeta meta;
            meta.objective = m.at("objective").get<std::string>();
            meta.required_error = m.at("required_error").get<double>();
            meta.achieved_error = m.at("achieved_error").get<double>();
            meta.clean_loss = m.at("clean_loss").get<double>();
            meta.objective_met = m.at("objective_met").get<bool>();
            meta.flips = m.at("flips").get<int>();
            meta.copies = m.at("copies").get<int>();
            mf.meta = meta;
        }
    } catch (const nlohmann::json::exception& e) {
        throw MtpError("model_parse", std::string("model json: ") + e.what());
    }
    return mf;
}

inline void save_model(const ModelFile& mf, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MtpError("io", "cannot write '" + path + "'");
    out << model_to_json(mf).dump(2) << "\n";
}

inline ModelFile load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MtpError("io", "cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw MtpError("model_parse", std::string("model json: ") + e.what());
    }
    return model_from_json(j);
}

}  // namespace mtp
