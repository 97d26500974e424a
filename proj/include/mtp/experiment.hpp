#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtp/attack.hpp"
#include "mtp/certify.hpp"
#include "mtp/dataset_io.hpp"
#include "mtp/error.hpp"
#include "mtp/kmeans.hpp"
#include "mtp/model_io.hpp"
#include "mtp/subpop.hpp"
#include "mtp/synthetic.hpp"
#include "mtp/target.hpp"
#include "mtp/trace_io.hpp"
#include "mtp/train.hpp"

namespace mtp {

inline constexpr const char* kConfigSchema = "mtp-experiment-v1";

// Seed streams hanging off the experiment master seed; every random choice in
// a run draws from exactly one of these.
enum : std::uint64_t {
    kSeedSyntheticTrain = 1,
    kSeedSyntheticTest = 2,
    kSeedCluster = 3,
    kSeedTarget = 4,
    kSeedApproxOracle = 5,
    kSeedLabelFlip = 6,
};

struct DatasetBlock {
    std::string format;  // "synthetic" | "csv" | "libsvm" | "idx-pair"

    // synthetic
    std::size_t n = 200, test_n = 0;
    double sigma = 0.15;
    Vec mean_pos = {0.65, 0.65}, mean_neg = {0.35, 0.35};

    // file-backed formats
    std::string path, test_path;
    std::string label_column;  // csv
    LabelMap labels;           // csv
    bool normalize = true;     // csv
    std::size_t dim = 0;       // libsvm
    std::string images, labels_file, test_images, test_labels;  // idx-pair
    int digit_pos = 1, digit_neg = 7;                           // idx-pair
};

struct ScenarioBlock {
    std::string kind = "indiscriminate";  // or "subpop"
    int k = 20;
    int label_filter = 1;
    int top_m = 1;
    int cluster_index = 0;  // position in the ranked selection
};

struct TargetBlock {
    TargetSpec spec;
    std::string path;  // load instead of generating when set
};

struct AttackBlock {
    StopCriterion stop = StopCriterion::budget_of(100);
    long copies_per_iter = 1;
    OracleMode oracle = OracleMode::Exact;
    ApproxOracleConfig approx;
    long baseline_budget = -1;   // label-flip baseline size; -1 = take from budget_from
    std::string budget_from;     // summary JSON of a prior run
};

struct CertifyBlock {
    std::string model_path;  // model whose poisoning cost is being certified
    double eps = -1.0;       // >= 0 switches to the relaxed variant
    double r = 0.0, q = 0.0; // closeness-constant radii for the relaxed variant
    double r_star = -1.0;    // model-regularizer radius; -1 = 1/c_r
};

struct OutputBlock {
    std::string dir = "out";
    std::string trace = "trace.csv";
    std::string poison = "poison.libsvm";
    std::string summary = "summary.json";
    std::string clean_model = "clean_model.json";
    std::string target_model = "target_model.json";
    std::string final_model = "final_model.json";
    std::string certificate = "certificate.json";
    std::string clusters = "clusters.json";
    std::string metrics = "metrics.json";
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    DatasetBlock dataset;
    LossKind loss = LossKind::Hinge;
    TrainConfig train_cfg;
    std::string model_path;  // stored model consumed by `evaluate`
    ScenarioBlock scenario;
    TargetBlock target;
    AttackBlock attack;
    CertifyBlock certify;
    OutputBlock output;
};

namespace exp_detail {

using nlohmann::json;

inline void expect_object(const json& j, const char* where) {
    if (!j.is_object()) throw MtpError("config_schema", std::string(where) + " must be an object");
}

inline void expect_keys(const json& j, const char* where,
                        std::initializer_list<const char*> allowed) {
    expect_object(j, where);
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw MtpError("config_schema",
                           std::string("unknown key '") + it.key() + "' in " + where);
    }
}

template <class T>
T require(const json& j, const char* where, const char* key) {
    if (!j.contains(key))
        throw MtpError("config_schema", std::string(where) + " is missing '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw MtpError("config_schema", std::string("bad value for '") + key + "' in " + where);
    }
}

template <class T>
T get_or(const json& j, const char* where, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw MtpError("config_schema", std::string("bad value for '") + key + "' in " + where);
    }
}

inline DatasetBlock parse_dataset(const json& j) {
    DatasetBlock b;
    b.format = require<std::string>(j, "dataset", "format");
    if (b.format == "synthetic") {
        expect_keys(j, "dataset", {"format", "n", "test_n", "sigma", "mean_pos", "mean_neg"});
        b.n = require<std::size_t>(j, "dataset", "n");
        b.test_n = get_or<std::size_t>(j, "dataset", "test_n", 0);
        b.sigma = get_or<double>(j, "dataset", "sigma", 0.15);
        b.mean_pos = get_or<Vec>(j, "dataset", "mean_pos", {0.65, 0.65});
        b.mean_neg = get_or<Vec>(j, "dataset", "mean_neg", {0.35, 0.35});
        if (b.mean_pos.size() != 2 || b.mean_neg.size() != 2)
            throw MtpError("config_schema", "dataset: blob means must have two coordinates");
    } else if (b.format == "csv") {
        expect_keys(j, "dataset",
                    {"format", "path", "test_path", "label_column", "labels", "normalize"});
        b.path = require<std::string>(j, "dataset", "path");
        b.test_path = get_or<std::string>(j, "dataset", "test_path", "");
        b.label_column = require<std::string>(j, "dataset", "label_column");
        const json& lm = j.contains("labels") ? j.at("labels") : json::object();
        expect_object(lm, "dataset.labels");
        for (auto it = lm.begin(); it != lm.end(); ++it) {
            int v;
            try {
                v = it.value().get<int>();
            } catch (const json::exception&) {
                throw MtpError("config_schema", "dataset.labels values must be +1 or -1");
            }
            if (v != 1 && v != -1)
                throw MtpError("config_schema", "dataset.labels values must be +1 or -1");
            b.labels[it.key()] = v;
        }
        if (b.labels.empty())
            throw MtpError("config_schema", "dataset: csv format needs a 'labels' mapping");
        b.normalize = get_or<bool>(j, "dataset", "normalize", true);
    } else if (b.format == "libsvm") {
        expect_keys(j, "dataset", {"format", "path", "test_path", "dim"});
        b.path = require<std::string>(j, "dataset", "path");
        b.test_path = get_or<std::string>(j, "dataset", "test_path", "");
        b.dim = require<std::size_t>(j, "dataset", "dim");
    } else if (b.format == "idx-pair") {
        expect_keys(j, "dataset",
                    {"format", "images", "labels", "test_images", "test_labels", "digit_pos",
                     "digit_neg"});
        b.images = require<std::string>(j, "dataset", "images");
        b.labels_file = require<std::string>(j, "dataset", "labels");
        b.test_images = get_or<std::string>(j, "dataset", "test_images", "");
        b.test_labels = get_or<std::string>(j, "dataset", "test_labels", "");
        b.digit_pos = require<int>(j, "dataset", "digit_pos");
        b.digit_neg = require<int>(j, "dataset", "digit_neg");
    } else {
        throw MtpError("config_schema", "dataset: unknown format '" + b.format + "'");
    }
    return b;
}

inline StopCriterion parse_stop(const json& j) {
    expect_object(j, "attack.stop");
    const auto kind = require<std::string>(j, "attack.stop", "kind");
    if (kind == "budget") {
        expect_keys(j, "attack.stop", {"kind", "budget"});
        return StopCriterion::budget_of(require<long>(j, "attack.stop", "budget"));
    }
    if (kind == "epsilon") {
        expect_keys(j, "attack.stop", {"kind", "eps"});
        return StopCriterion::epsilon_close(require<double>(j, "attack.stop", "eps"));
    }
    if (kind == "accuracy") {
        expect_keys(j, "attack.stop", {"kind", "scope", "threshold"});
        const auto scope = require<std::string>(j, "attack.stop", "scope");
        if (scope != "overall" && scope != "subpop")
            throw MtpError("config_schema", "attack.stop: scope must be overall or subpop");
        return StopCriterion::accuracy_goal(scope == "overall",
                                            require<double>(j, "attack.stop", "threshold"));
    }
    throw MtpError("config_schema", "attack.stop: unknown kind '" + kind + "'");
}

}  // namespace exp_detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    using exp_detail::expect_keys;
    using exp_detail::get_or;
    using exp_detail::require;

    expect_keys(j, "config",
                {"schema", "seed", "dataset", "model", "scenario", "target", "attack", "certify",
                 "output"});
    if (require<std::string>(j, "config", "schema") != kConfigSchema)
        throw MtpError("config_schema", std::string("schema must be '") + kConfigSchema + "'");

    ExperimentConfig cfg;
    cfg.seed = get_or<std::uint64_t>(j, "config", "seed", 0);
    if (!j.contains("dataset")) throw MtpError("config_schema", "config is missing 'dataset'");
    cfg.dataset = exp_detail::parse_dataset(j.at("dataset"));

    if (!j.contains("model")) throw MtpError("config_schema", "config is missing 'model'");
    {
        const auto& m = j.at("model");
        expect_keys(m, "model", {"loss", "c_r", "use_bias", "tolerance", "max_iters", "path"});
        cfg.loss = loss_from_name(require<std::string>(m, "model", "loss"));
        cfg.train_cfg.c_r = require<double>(m, "model", "c_r");
        cfg.train_cfg.use_bias = get_or<bool>(m, "model", "use_bias", true);
        cfg.train_cfg.tolerance = get_or<double>(m, "model", "tolerance", 1e-8);
        cfg.train_cfg.max_iters = get_or<long>(m, "model", "max_iters", 100000);
        cfg.model_path = get_or<std::string>(m, "model", "path", "");
    }

    if (j.contains("scenario")) {
        const auto& s = j.at("scenario");
        const auto kind = require<std::string>(s, "scenario", "kind");
        if (kind == "subpop") {
            expect_keys(s, "scenario", {"kind", "k", "label_filter", "top_m", "cluster_index"});
            cfg.scenario.kind = kind;
            cfg.scenario.k = require<int>(s, "scenario", "k");
            cfg.scenario.label_filter = get_or<int>(s, "scenario", "label_filter", 1);
            cfg.scenario.top_m = get_or<int>(s, "scenario", "top_m", 1);
            cfg.scenario.cluster_index = get_or<int>(s, "scenario", "cluster_index", 0);
            if (cfg.scenario.label_filter != 1 && cfg.scenario.label_filter != -1)
                throw MtpError("config_schema", "scenario: label_filter must be +1 or -1");
            if (cfg.scenario.cluster_index < 0 ||
                cfg.scenario.cluster_index >= cfg.scenario.top_m)
                throw MtpError("config_schema",
                               "scenario: cluster_index must index into the top_m selection");
        } else if (kind == "indiscriminate") {
            expect_keys(s, "scenario", {"kind"});
            cfg.scenario.kind = kind;
        } else {
            throw MtpError("config_schema", "scenario: unknown kind '" + kind + "'");
        }
    }

    if (j.contains("target")) {
        const auto& t = j.at("target");
        expect_keys(t, "target",
                    {"objective", "required_error", "quantiles", "copies", "adaptive", "path"});
        const auto obj = get_or<std::string>(t, "target", "objective",
                                             cfg.scenario.kind == "subpop" ? "subpop-error"
                                                                          : "overall-error");
        if (obj == "subpop-error")
            cfg.target.spec.objective = TargetObjective::SubpopError;
        else if (obj == "overall-error")
            cfg.target.spec.objective = TargetObjective::OverallError;
        else
            throw MtpError("config_schema", "target: unknown objective '" + obj + "'");
        cfg.target.spec.required_error = get_or<double>(t, "target", "required_error", 1.0);
        cfg.target.spec.quantile_grid =
            get_or<std::vector<double>>(t, "target", "quantiles", cfg.target.spec.quantile_grid);
        cfg.target.spec.copy_grid =
            get_or<std::vector<int>>(t, "target", "copies", cfg.target.spec.copy_grid);
        cfg.target.spec.adaptive = get_or<bool>(t, "target", "adaptive", false);
        cfg.target.path = get_or<std::string>(t, "target", "path", "");
        if (cfg.target.path.empty()) cfg.target.spec.validate();
    } else if (cfg.scenario.kind == "subpop") {
        cfg.target.spec.objective = TargetObjective::SubpopError;
    } else {
        cfg.target.spec.objective = TargetObjective::OverallError;
    }

    if (j.contains("attack")) {
        const auto& a = j.at("attack");
        expect_keys(a, "attack",
                    {"stop", "copies_per_iter", "oracle", "approx", "baseline_budget",
                     "budget_from"});
        if (a.contains("stop")) cfg.attack.stop = exp_detail::parse_stop(a.at("stop"));
        cfg.attack.copies_per_iter = get_or<long>(a, "attack", "copies_per_iter", 1);
        const auto mode = get_or<std::string>(a, "attack", "oracle", "exact");
        if (mode == "exact")
            cfg.attack.oracle = OracleMode::Exact;
        else if (mode == "approx")
            cfg.attack.oracle = OracleMode::Approx;
        else
            throw MtpError("config_schema", "attack: unknown oracle '" + mode + "'");
        if (a.contains("approx")) {
            const auto& ap = a.at("approx");
            expect_keys(ap, "attack.approx", {"restarts", "steps", "step_size"});
            cfg.attack.approx.restarts = get_or<int>(ap, "attack.approx", "restarts", 10);
            cfg.attack.approx.steps = get_or<int>(ap, "attack.approx", "steps", 1000);
            cfg.attack.approx.step_size = get_or<double>(ap, "attack.approx", "step_size", 0.01);
        }
        cfg.attack.baseline_budget = get_or<long>(a, "attack", "baseline_budget", -1);
        cfg.attack.budget_from = get_or<std::string>(a, "attack", "budget_from", "");
    }

    if (j.contains("certify")) {
        const auto& c = j.at("certify");
        expect_keys(c, "certify", {"model", "eps", "r", "q", "r_star"});
        cfg.certify.model_path = get_or<std::string>(c, "certify", "model", "");
        cfg.certify.eps = get_or<double>(c, "certify", "eps", -1.0);
        cfg.certify.r = get_or<double>(c, "certify", "r", 0.0);
        cfg.certify.q = get_or<double>(c, "certify", "q", 0.0);
        cfg.certify.r_star = get_or<double>(c, "certify", "r_star", -1.0);
    }

    if (j.contains("output")) {
        const auto& o = j.at("output");
        expect_keys(o, "output",
                    {"dir", "trace", "poison", "summary", "clean_model", "target_model",
                     "final_model", "certificate", "clusters", "metrics"});
        cfg.output.dir = get_or<std::string>(o, "output", "dir", cfg.output.dir);
        cfg.output.trace = get_or<std::string>(o, "output", "trace", cfg.output.trace);
        cfg.output.poison = get_or<std::string>(o, "output", "poison", cfg.output.poison);
        cfg.output.summary = get_or<std::string>(o, "output", "summary", cfg.output.summary);
        cfg.output.clean_model =
            get_or<std::string>(o, "output", "clean_model", cfg.output.clean_model);
        cfg.output.target_model =
            get_or<std::string>(o, "output", "target_model", cfg.output.target_model);
        cfg.output.final_model =
            get_or<std::string>(o, "output", "final_model", cfg.output.final_model);
        cfg.output.certificate =
            get_or<std::string>(o, "output", "certificate", cfg.output.certificate);
        cfg.output.clusters = get_or<std::string>(o, "output", "clusters", cfg.output.clusters);
        cfg.output.metrics = get_or<std::string>(o, "output", "metrics", cfg.output.metrics);
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MtpError("io", "cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw MtpError("config_schema", std::string("config json: ") + e.what());
    }
    return parse_config(j);
}

// --seed and --out command-line overrides; --out falls back to MTP_OUT_DIR.
inline void apply_overrides(ExperimentConfig& cfg, const std::string& out_dir,
                            const std::uint64_t* seed) {
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) {
        cfg.output.dir = out_dir;
    } else if (const char* env = std::getenv("MTP_OUT_DIR"); env && *env) {
        cfg.output.dir = env;
    }
}

namespace exp_detail {

inline std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.output.dir) / name).string();
}

inline void ensure_out_dir(const ExperimentConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.output.dir, ec);
    if (ec) throw MtpError("io", "cannot create output directory '" + cfg.output.dir + "'");
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MtpError("io", "cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

struct LoadedData {
    Dataset train;
    std::optional<Dataset> test;
};

inline LoadedData load_data(const ExperimentConfig& cfg) {
    const auto& d = cfg.dataset;
    LoadedData out;
    if (d.format == "synthetic") {
        TwoGaussianSpec spec;
        spec.n = d.n;
        spec.sigma = d.sigma;
        spec.mean_pos_x = d.mean_pos[0];
        spec.mean_pos_y = d.mean_pos[1];
        spec.mean_neg_x = d.mean_neg[0];
        spec.mean_neg_y = d.mean_neg[1];
        out.train = make_two_gaussians(spec, mix_seed(cfg.seed, kSeedSyntheticTrain));
        if (d.test_n > 0) {
            spec.n = d.test_n;
            out.test = make_two_gaussians(spec, mix_seed(cfg.seed, kSeedSyntheticTest));
        }
    } else if (d.format == "csv") {
        NormStats stats;
        out.train = load_csv(d.path, d.label_column, d.labels, d.normalize, nullptr, &stats);
        if (!d.test_path.empty())
            out.test = load_csv(d.test_path, d.label_column, d.labels, d.normalize, &stats);
    } else if (d.format == "libsvm") {
        out.train = load_libsvm(d.path, d.dim);
        if (!d.test_path.empty()) out.test = load_libsvm(d.test_path, d.dim);
    } else {  // idx-pair
        out.train = load_idx_pair(d.images, d.labels_file, d.digit_pos, d.digit_neg);
        if (!d.test_images.empty())
            out.test = load_idx_pair(d.test_images, d.test_labels, d.digit_pos, d.digit_neg);
    }
    return out;
}

struct ScenarioContext {
    KMeansResult clusters;
    SubpopulationSpec selection;
    int cluster_id = -1;
    std::vector<std::size_t> train_members;  // rows of the training data
    std::vector<std::size_t> eval_members;   // rows of the evaluation data
    bool subpop = false;
};

inline ScenarioContext resolve_scenario(const ExperimentConfig& cfg, const LoadedData& data,
                                        const LinearModel& clean_model) {
    ScenarioContext ctx;
    if (cfg.scenario.kind != "subpop") return ctx;
    ctx.subpop = true;
    ctx.clusters =
        cluster_kmeans(data.train, cfg.scenario.k, mix_seed(cfg.seed, kSeedCluster));
    ctx.selection = select_subpopulations(ctx.clusters.assignments, data.train,
                                          cfg.scenario.label_filter, clean_model,
                                          cfg.scenario.top_m);
    if (std::size_t(cfg.scenario.cluster_index) >= ctx.selection.selected.size())
        throw MtpError("invalid_request",
                       "scenario: fewer eligible clusters than cluster_index");
    ctx.cluster_id = ctx.selection.selected[std::size_t(cfg.scenario.cluster_index)];
    ctx.train_members = ctx.selection.member_indices[std::size_t(cfg.scenario.cluster_index)];
    if (data.test)
        ctx.eval_members =
            resolve_members(*data.test, ctx.clusters, ctx.cluster_id, cfg.scenario.label_filter);
    else
        ctx.eval_members = ctx.train_members;
    return ctx;
}

inline nlohmann::json metrics_json(const Metrics& m) {
    nlohmann::json j;
    j["overall_acc"] = m.overall_accuracy;
    if (m.subpop_accuracy) j["subpop_acc"] = *m.subpop_accuracy;
    return j;
}

// Evaluation scope shared by all commands: the test split when present,
// otherwise the training data.
inline const Dataset& eval_scope(const LoadedData& data) {
    return data.test ? *data.test : data.train;
}

inline Metrics eval_model(const LinearModel& m, const LoadedData& data,
                          const ScenarioContext& ctx) {
    const auto* members = ctx.subpop ? &ctx.eval_members : nullptr;
    return evaluate(m, eval_scope(data), members);
}

inline TargetResult obtain_target(const ExperimentConfig& cfg, const LoadedData& data,
                                  const ScenarioContext& ctx, const LinearModel& clean_model) {
    if (!cfg.target.path.empty()) {
        ModelFile mf = load_model(cfg.target.path);
        if (mf.model.weights.size() != data.train.dim())
            throw MtpError("dimension_mismatch", "target model does not match the dataset");
        TargetResult res;
        res.model = mf.model;
        res.clean_loss = empirical_loss(cfg.loss, mf.model, data.train);
        if (mf.meta) {
            res.achieved_error = mf.meta->achieved_error;
            res.objective_met = mf.meta->objective_met;
            res.flips = mf.meta->flips;
            res.copies = mf.meta->copies;
        }
        return res;
    }
    TargetSpec spec = cfg.target.spec;
    spec.seed = mix_seed(cfg.seed, kSeedTarget);
    const auto* members = ctx.subpop ? &ctx.train_members : nullptr;
    const Dataset* eval_data = data.test ? &*data.test : nullptr;
    const auto* eval_members = (data.test && ctx.subpop) ? &ctx.eval_members : nullptr;
    return gen_target(cfg.loss, data.train, clean_model, cfg.train_cfg, spec, members, eval_data,
                      eval_members);
}

inline void save_target(const ExperimentConfig& cfg, const TargetResult& target,
                        const std::string& path) {
    ModelFile mf;
    mf.model = target.model;
    mf.loss = cfg.loss;
    mf.c_r = cfg.train_cfg.c_r;
    TargetMeta meta;
    meta.objective = cfg.target.spec.objective == TargetObjective::SubpopError ? "subpop_error"
                                                                               : "overall_error";
    meta.required_error = cfg.target.spec.required_error;
    meta.achieved_error = target.achieved_error;
    meta.clean_loss = target.clean_loss;
    meta.objective_met = target.objective_met;
    meta.flips = target.flips;
    meta.copies = target.copies;
    mf.meta = meta;
    save_model(mf, path);
}

inline void save_plain_model(const ExperimentConfig& cfg, const LinearModel& m,
                             const std::string& path) {
    ModelFile mf;
    mf.model = m;
    mf.loss = cfg.loss;
    mf.c_r = cfg.train_cfg.c_r;
    save_model(mf, path);
}

inline ApproxOracleConfig oracle_config(const ExperimentConfig& cfg) {
    ApproxOracleConfig ocfg = cfg.attack.approx;
    ocfg.seed = mix_seed(cfg.seed, kSeedApproxOracle);
    return ocfg;
}

// Certificate over an attack trace; traces without a single valid snapshot
// (approx-oracle runs, pre-satisfied stops) get an explicit invalid marker.
inline void write_certificate(const ExperimentConfig& cfg, const AttackTrace& trace,
                              const LinearModel& theta_p, const Dataset& data,
                              const std::string& path) {
    try {
        LowerBoundCertificate cert;
        if (cfg.certify.eps >= 0.0) {
            const double k = bidirectional_constant(cfg.certify.r, cfg.certify.q);
            const double r_star =
                cfg.certify.r_star >= 0.0 ? cfg.certify.r_star : 1.0 / cfg.train_cfg.c_r;
            cert = best_lower_bound_eps(trace, theta_p, data, cfg.train_cfg.c_r, cfg.certify.eps,
                                        k, r_star);
        } else {
            cert = best_lower_bound(trace, theta_p, data, cfg.train_cfg.c_r, data.domain);
        }
        save_certificate(cert, path);
    } catch (const MtpError&) {
        nlohmann::json j;
        j["valid"] = false;
        j["variant"] = cfg.certify.eps >= 0.0 ? "epsilon_relaxed" : "exact";
        write_json(j, path);
    }
}

}  // namespace exp_detail

// Clustered subpopulations with per-cluster clean accuracies.
inline void cmd_cluster(const ExperimentConfig& cfg) {
    if (cfg.scenario.kind != "subpop")
        throw MtpError("invalid_request", "cluster: scenario kind must be subpop");
    exp_detail::ensure_out_dir(cfg);
    auto data = exp_detail::load_data(cfg);
    const LinearModel clean = train(cfg.loss, data.train, cfg.train_cfg);
    const auto ctx = exp_detail::resolve_scenario(cfg, data, clean);

    nlohmann::json j;
    j["k"] = cfg.scenario.k;
    j["label_filter"] = cfg.scenario.label_filter;
    j["assignments"] = ctx.clusters.assignments;
    nlohmann::json sel = nlohmann::json::array();
    for (std::size_t s = 0; s < ctx.selection.selected.size(); ++s) {
        const auto& members = ctx.selection.member_indices[s];
        std::size_t correct = 0;
        for (std::size_t i : members)
            if (clean.predict(data.train.row(i)) == data.train.labels[i]) ++correct;
        nlohmann::json e;
        e["cluster"] = ctx.selection.selected[s];
        e["size"] = members.size();
        e["clean_acc"] = members.empty() ? 0.0 : double(correct) / double(members.size());
        e["members"] = members;
        sel.push_back(e);
    }
    j["selected"] = sel;
    exp_detail::write_json(j, exp_detail::out_path(cfg, cfg.output.clusters));
}

// Clean-model training with metrics on the evaluation scope.
inline void cmd_train(const ExperimentConfig& cfg) {
    exp_detail::ensure_out_dir(cfg);
    auto data = exp_detail::load_data(cfg);
    const LinearModel clean = train(cfg.loss, data.train, cfg.train_cfg);
    const auto ctx = exp_detail::resolve_scenario(cfg, data, clean);
    exp_detail::save_plain_model(cfg, clean, exp_detail::out_path(cfg, cfg.output.clean_model));

    nlohmann::json j;
    j["clean"] = exp_detail::metrics_json(exp_detail::eval_model(clean, data, ctx));
    exp_detail::write_json(j, exp_detail::out_path(cfg, cfg.output.metrics));
}

inline void cmd_gen_target(const ExperimentConfig& cfg) {
    exp_detail::ensure_out_dir(cfg);
    auto data = exp_detail::load_data(cfg);
    const LinearModel clean = train(cfg.loss, data.train, cfg.train_cfg);
    const auto ctx = exp_detail::resolve_scenario(cfg, data, clean);
    const auto target = exp_detail::obtain_target(cfg, data, ctx, clean);
    exp_detail::save_target(cfg, target, exp_detail::out_path(cfg, cfg.output.target_model));
}

// The full pipeline: load, cluster, train, target, attack, certify, evaluate.
inline AttackTrace cmd_attack(const ExperimentConfig& cfg) {
    exp_detail::ensure_out_dir(cfg);
    auto data = exp_detail::load_data(cfg);
    const LinearModel clean = train(cfg.loss, data.train, cfg.train_cfg);
    const auto ctx = exp_detail::resolve_scenario(cfg, data, clean);
    exp_detail::save_plain_model(cfg, clean, exp_detail::out_path(cfg, cfg.output.clean_model));

    const auto target = exp_detail::obtain_target(cfg, data, ctx, clean);
    exp_detail::save_target(cfg, target, exp_detail::out_path(cfg, cfg.output.target_model));

    const auto* eval_members = ctx.subpop ? &ctx.eval_members : nullptr;
    AttackTrace trace =
        run_attack(data.train, target.model, cfg.loss, cfg.train_cfg, data.train.domain,
                   cfg.attack.stop, cfg.attack.copies_per_iter, cfg.attack.oracle,
                   exp_detail::eval_scope(data), eval_members, exp_detail::oracle_config(cfg));

    write_trace(trace, exp_detail::out_path(cfg, cfg.output.trace),
                exp_detail::out_path(cfg, cfg.output.poison));
    write_summary(trace, exp_detail::out_path(cfg, cfg.output.summary));
    exp_detail::save_plain_model(cfg, trace.final_model,
                                 exp_detail::out_path(cfg, cfg.output.final_model));
    exp_detail::write_certificate(cfg, trace, target.model, data.train,
                                  exp_detail::out_path(cfg, cfg.output.certificate));

    nlohmann::json metrics;
    metrics["clean"] = exp_detail::metrics_json(exp_detail::eval_model(clean, data, ctx));
    metrics["poisoned"] = exp_detail::metrics_json(trace.final_metrics);
    metrics["target"] =
        exp_detail::metrics_json(exp_detail::eval_model(target.model, data, ctx));
    exp_detail::write_json(metrics, exp_detail::out_path(cfg, cfg.output.metrics));
    return trace;
}

// Label-flip baseline at a fixed budget, reusing the trace schema so the two
// attacks compare row for row.
inline void cmd_baseline(const ExperimentConfig& cfg) {
    exp_detail::ensure_out_dir(cfg);
    auto data = exp_detail::load_data(cfg);
    const LinearModel clean = train(cfg.loss, data.train, cfg.train_cfg);
    const auto ctx = exp_detail::resolve_scenario(cfg, data, clean);

    long budget = cfg.attack.baseline_budget;
    nlohmann::json reference;
    if (budget < 0) {
        if (cfg.attack.budget_from.empty())
            throw MtpError("config_schema",
                           "baseline: needs baseline_budget or budget_from");
        std::ifstream in(cfg.attack.budget_from);
        if (!in) throw MtpError("io", "cannot open '" + cfg.attack.budget_from + "'");
        nlohmann::json prior;
        try {
            in >> prior;
        } catch (const nlohmann::json::exception& e) {
            throw MtpError("config_schema", std::string("budget_from json: ") + e.what());
        }
        if (!prior.contains("n_p"))
            throw MtpError("config_schema", "baseline: budget_from summary lacks n_p");
        budget = prior.at("n_p").get<long>();
        if (prior.contains("final")) reference = prior.at("final");
    }

    std::vector<std::size_t> pool;
    if (ctx.subpop) {
        pool = ctx.train_members;
    } else {
        pool.resize(data.train.size());
        std::iota(pool.begin(), pool.end(), std::size_t(0));
    }
    auto points = label_flip_attack(data.train, pool, budget, mix_seed(cfg.seed, kSeedLabelFlip));
    const LinearModel poisoned = target_from_attack(
        cfg.loss, data.train, poison_to_dataset(points, data.train.domain), cfg.train_cfg);

    const Metrics clean_metrics = exp_detail::eval_model(clean, data, ctx);
    const Metrics final_metrics = exp_detail::eval_model(poisoned, data, ctx);
    const double final_clean_loss = empirical_loss(cfg.loss, poisoned, data.train);

    write_baseline_trace(points, final_metrics, final_clean_loss,
                         exp_detail::out_path(cfg, cfg.output.trace),
                         exp_detail::out_path(cfg, cfg.output.poison));
    exp_detail::save_plain_model(cfg, poisoned,
                                 exp_detail::out_path(cfg, cfg.output.final_model));

    nlohmann::json j;
    j["n_p"] = budget;
    j["stop_reason"] = "budget_exhausted";
    j["clean"] = exp_detail::metrics_json(clean_metrics);
    nlohmann::json fin = exp_detail::metrics_json(final_metrics);
    fin["clean_loss"] = final_clean_loss;
    j["final"] = fin;
    if (!reference.is_null()) j["reference_final"] = reference;
    exp_detail::write_json(j, exp_detail::out_path(cfg, cfg.output.summary));
}

// Certifies a stored model by attacking it with the exact oracle and taking
// the strongest per-iteration bound along the run.
inline LowerBoundCertificate cmd_certify(const ExperimentConfig& cfg) {
    if (cfg.certify.model_path.empty())
        throw MtpError("config_schema", "certify: needs a model path in the certify block");
    if (cfg.attack.oracle != OracleMode::Exact)
        throw MtpError("invalid_request", "certify: lower bounds require the exact oracle");
    exp_detail::ensure_out_dir(cfg);
    auto data = exp_detail::load_data(cfg);
    ModelFile mf = load_model(cfg.certify.model_path);
    if (mf.model.weights.size() != data.train.dim())
        throw MtpError("dimension_mismatch", "certify: model does not match the dataset");

    const LinearModel clean = train(cfg.loss, data.train, cfg.train_cfg);
    const auto ctx = exp_detail::resolve_scenario(cfg, data, clean);
    const auto* eval_members = ctx.subpop ? &ctx.eval_members : nullptr;
    AttackTrace trace =
        run_attack(data.train, mf.model, cfg.loss, cfg.train_cfg, data.train.domain,
                   cfg.attack.stop, cfg.attack.copies_per_iter, OracleMode::Exact,
                   exp_detail::eval_scope(data), eval_members, exp_detail::oracle_config(cfg));

    LowerBoundCertificate cert;
    if (cfg.certify.eps >= 0.0) {
        const double k = bidirectional_constant(cfg.certify.r, cfg.certify.q);
        const double r_star =
            cfg.certify.r_star >= 0.0 ? cfg.certify.r_star : 1.0 / cfg.train_cfg.c_r;
        cert = best_lower_bound_eps(trace, mf.model, data.train, cfg.train_cfg.c_r,
                                    cfg.certify.eps, k, r_star);
    } else {
        cert = best_lower_bound(trace, mf.model, data.train, cfg.train_cfg.c_r,
                                data.train.domain);
    }
    save_certificate(cert, exp_detail::out_path(cfg, cfg.output.certificate));
    return cert;
}

// Metrics for a stored model (model.path), or the freshly trained clean model.
inline void cmd_evaluate(const ExperimentConfig& cfg) {
    exp_detail::ensure_out_dir(cfg);
    auto data = exp_detail::load_data(cfg);
    const LinearModel clean = train(cfg.loss, data.train, cfg.train_cfg);
    const auto ctx = exp_detail::resolve_scenario(cfg, data, clean);

    LinearModel subject = clean;
    if (!cfg.model_path.empty()) {
        ModelFile mf = load_model(cfg.model_path);
        if (mf.model.weights.size() != data.train.dim())
            throw MtpError("dimension_mismatch", "evaluate: model does not match the dataset");
        subject = mf.model;
    }

    nlohmann::json j;
    j["model"] = exp_detail::metrics_json(exp_detail::eval_model(subject, data, ctx));
    j["train_loss"] = empirical_loss(cfg.loss, subject, data.train);
    exp_detail::write_json(j, exp_detail::out_path(cfg, cfg.output.metrics));
}

}  // namespace mtp
