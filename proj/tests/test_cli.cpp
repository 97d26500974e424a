#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

// spawn the real binary through the shell; output captured via a temp file
RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    const fs::path log = fs::temp_directory_path() / ("mtp_cli_log_" + std::to_string(counter++));
    const std::string cmd =
        env_prefix + std::string(MTP_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult res;
    res.exit_code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::ostringstream buf;
    buf << in.rdbuf();
    res.output = buf.str();
    fs::remove(log);
    return res;
}

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("mtp_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write_config(const TempDir& dir, const json& j, const std::string& name = "exp.json") {
    std::ofstream out(dir.file(name));
    out << j.dump(2);
    return dir.file(name);
}

json base_config(const TempDir& dir, const std::string& out_sub = "out") {
    json j;
    j["schema"] = "mtp-experiment-v1";
    j["seed"] = 7;
    j["dataset"] = {{"format", "synthetic"}, {"n", 40}, {"test_n", 40}};
    j["model"] = {{"loss", "hinge"}, {"c_r", 0.05}};
    j["scenario"] = {{"kind", "subpop"}, {"k", 3},      {"label_filter", 1},
                     {"top_m", 2},       {"cluster_index", 0}};
    j["target"] = {{"objective", "subpop-error"},
                   {"required_error", 0.5},
                   {"quantiles", {0.3, 0.5}},
                   {"copies", {1, 2}}};
    j["attack"] = {{"stop", {{"kind", "budget"}, {"budget", 5}}}, {"oracle", "exact"}};
    j["output"] = {{"dir", dir.file(out_sub)}};
    return j;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    json j;
    in >> j;
    return j;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::size_t trace_rows(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#' && line.rfind("iter,", 0) != 0) ++rows;
    return rows;
}

}  // namespace

TEST_CASE("attack subcommand runs the whole pipeline") {
    TempDir dir;
    const auto cfg_path = write_config(dir, base_config(dir));
    const auto res = run_cli("attack --config " + cfg_path);
    INFO(res.output);
    REQUIRE(res.exit_code == 0);

    const auto out = dir.file("out");
    for (const char* f : {"trace.csv", "poison.libsvm", "summary.json", "clean_model.json",
                          "target_model.json", "final_model.json", "certificate.json",
                          "metrics.json"})
        CHECK(fs::exists(fs::path(out) / f));

    CHECK(trace_rows(out + "/trace.csv") == 5);
    const auto summary = read_json(out + "/summary.json");
    CHECK(summary.at("n_p").get<long>() == 5);
    CHECK(summary.at("stop_reason").get<std::string>() == "budget_exhausted");
    CHECK(summary.at("final").contains("subpop_acc"));

    const auto cert = read_json(out + "/certificate.json");
    CHECK(cert.at("valid").get<bool>());
    CHECK(cert.at("bound_ceil").get<long>() >= 0);

    const auto metrics = read_json(out + "/metrics.json");
    CHECK(metrics.contains("clean"));
    CHECK(metrics.contains("poisoned"));
    CHECK(metrics.contains("target"));

    SECTION("identical configs give byte-identical outputs") {
        auto cfg2 = base_config(dir, "out2");
        const auto path2 = write_config(dir, cfg2, "exp2.json");
        REQUIRE(run_cli("attack --config " + path2).exit_code == 0);
        CHECK(read_file(out + "/trace.csv") == read_file(dir.file("out2") + "/trace.csv"));
        CHECK(read_file(out + "/summary.json") == read_file(dir.file("out2") + "/summary.json"));
        CHECK(read_file(out + "/final_model.json") ==
              read_file(dir.file("out2") + "/final_model.json"));
    }

    SECTION("--seed changes the run, repeating a seed does not") {
        REQUIRE(run_cli("attack --config " + cfg_path + " --seed 3 --out " + dir.file("s3"))
                    .exit_code == 0);
        REQUIRE(run_cli("attack --config " + cfg_path + " --seed 3 --out " + dir.file("s3b"))
                    .exit_code == 0);
        REQUIRE(run_cli("attack --config " + cfg_path + " --seed 4 --out " + dir.file("s4"))
                    .exit_code == 0);
        CHECK(read_file(dir.file("s3") + "/trace.csv") ==
              read_file(dir.file("s3b") + "/trace.csv"));
        CHECK(read_file(dir.file("s3") + "/trace.csv") !=
              read_file(dir.file("s4") + "/trace.csv"));
    }
}

TEST_CASE("attacking toward the clean model stops immediately") {
    TempDir dir;
    // stage 1: store the clean model
    auto train_cfg = base_config(dir, "clean");
    const auto train_path = write_config(dir, train_cfg, "train.json");
    REQUIRE(run_cli("train --config " + train_path).exit_code == 0);

    // stage 2: attack toward it under an epsilon stop
    auto atk = base_config(dir, "atk");
    atk["target"] = {{"path", dir.file("clean") + "/clean_model.json"}};
    atk["attack"] = {{"stop", {{"kind", "epsilon"}, {"eps", 0.001}}}, {"oracle", "exact"}};
    const auto atk_path = write_config(dir, atk, "atk.json");
    const auto res = run_cli("attack --config " + atk_path);
    INFO(res.output);
    REQUIRE(res.exit_code == 0);

    const auto summary = read_json(dir.file("atk") + "/summary.json");
    CHECK(summary.at("n_p").get<long>() == 0);
    CHECK(summary.at("stop_reason").get<std::string>() == "epsilon_close");
    CHECK(trace_rows(dir.file("atk") + "/trace.csv") == 0);
}

TEST_CASE("cluster subcommand reports ranked subpopulations") {
    TempDir dir;
    auto cfg = base_config(dir);
    const auto res = run_cli("cluster --config " + write_config(dir, cfg));
    INFO(res.output);
    REQUIRE(res.exit_code == 0);

    const auto report = read_json(dir.file("out") + "/clusters.json");
    CHECK(report.at("k").get<int>() == 3);
    CHECK(report.at("assignments").size() == 40);
    REQUIRE(report.at("selected").size() == 2);
    for (const auto& sel : report.at("selected")) {
        CHECK(sel.at("size").get<std::size_t>() == sel.at("members").size());
        const double acc = sel.at("clean_acc").get<double>();
        CHECK(acc >= 0.0);
        CHECK(acc <= 1.0);
    }
    // ranked by clean accuracy, best first
    CHECK(report.at("selected")[0].at("clean_acc").get<double>() >=
          report.at("selected")[1].at("clean_acc").get<double>());

    SECTION("a single cluster covers every filtered row") {
        auto one = base_config(dir, "one");
        one["scenario"]["k"] = 1;
        one["scenario"]["top_m"] = 1;
        REQUIRE(run_cli("cluster --config " + write_config(dir, one, "one.json")).exit_code == 0);
        const auto r1 = read_json(dir.file("one") + "/clusters.json");
        REQUIRE(r1.at("selected").size() == 1);
        CHECK(r1.at("selected")[0].at("cluster").get<int>() == 0);
        CHECK(r1.at("selected")[0].at("size").get<long>() == 20);  // the positive half
    }
}

TEST_CASE("gen-target stores the searched model with its context") {
    TempDir dir;
    const auto res = run_cli("gen-target --config " + write_config(dir, base_config(dir)));
    INFO(res.output);
    REQUIRE(res.exit_code == 0);
    const auto mf = read_json(dir.file("out") + "/target_model.json");
    CHECK(mf.contains("weights"));
    CHECK(mf.contains("bias"));
    REQUIRE(mf.contains("meta"));
    CHECK(mf.at("meta").at("objective").get<std::string>() == "subpop_error");
    CHECK(mf.at("meta").contains("objective_met"));
    CHECK(mf.at("meta").at("flips").get<int>() >= 1);
}

TEST_CASE("baseline subcommand") {
    TempDir dir;

    SECTION("explicit budget") {
        auto cfg = base_config(dir);
        cfg["attack"] = {{"baseline_budget", 3}};
        const auto res = run_cli("baseline --config " + write_config(dir, cfg));
        INFO(res.output);
        REQUIRE(res.exit_code == 0);
        CHECK(trace_rows(dir.file("out") + "/trace.csv") == 3);
        const auto summary = read_json(dir.file("out") + "/summary.json");
        CHECK(summary.at("n_p").get<long>() == 3);
        CHECK(summary.contains("clean"));
        CHECK(summary.contains("final"));
    }

    SECTION("budget zero leaves the clean model untouched") {
        auto cfg = base_config(dir);
        cfg["attack"] = {{"baseline_budget", 0}};
        REQUIRE(run_cli("baseline --config " + write_config(dir, cfg)).exit_code == 0);
        const auto summary = read_json(dir.file("out") + "/summary.json");
        CHECK(summary.at("clean").at("overall_acc") == summary.at("final").at("overall_acc"));
        CHECK(summary.at("clean").at("subpop_acc") == summary.at("final").at("subpop_acc"));
    }

    SECTION("budget taken from a prior run's summary") {
        const auto atk_path = write_config(dir, base_config(dir, "main"), "main.json");
        REQUIRE(run_cli("attack --config " + atk_path).exit_code == 0);
        auto cfg = base_config(dir, "base");
        cfg["attack"] = {{"budget_from", dir.file("main") + "/summary.json"}};
        REQUIRE(run_cli("baseline --config " + write_config(dir, cfg, "base.json")).exit_code == 0);
        const auto summary = read_json(dir.file("base") + "/summary.json");
        CHECK(summary.at("n_p").get<long>() == 5);
        // both attacks' final metrics travel together for comparison
        REQUIRE(summary.contains("reference_final"));
        CHECK(summary.at("reference_final").contains("subpop_acc"));
        CHECK(summary.at("final").contains("subpop_acc"));
    }
}

TEST_CASE("certify subcommand lower-bounds a stored model") {
    TempDir dir;
    const auto atk_path = write_config(dir, base_config(dir, "main"), "main.json");
    REQUIRE(run_cli("attack --config " + atk_path).exit_code == 0);
    const auto n_p = read_json(dir.file("main") + "/summary.json").at("n_p").get<long>();

    auto cfg = base_config(dir, "cert");
    cfg.erase("target");
    cfg["attack"] = {{"stop", {{"kind", "epsilon"}, {"eps", 0.01}}}, {"oracle", "exact"}};
    cfg["certify"] = {{"model", dir.file("main") + "/final_model.json"}};
    const auto res = run_cli("certify --config " + write_config(dir, cfg, "cert.json"));
    INFO(res.output);
    REQUIRE(res.exit_code == 0);

    const auto cert = read_json(dir.file("cert") + "/certificate.json");
    REQUIRE(cert.at("valid").get<bool>());
    CHECK(cert.at("variant").get<std::string>() == "exact");
    // an honest certificate can never exceed the count that induced the model
    CHECK(cert.at("bound_ceil").get<long>() <= n_p);
}

TEST_CASE("evaluate subcommand reports metrics for a stored model") {
    TempDir dir;
    auto train_cfg = base_config(dir, "clean");
    REQUIRE(run_cli("train --config " + write_config(dir, train_cfg, "train.json")).exit_code ==
            0);

    auto cfg = base_config(dir, "eval");
    cfg["model"]["path"] = dir.file("clean") + "/clean_model.json";
    REQUIRE(run_cli("evaluate --config " + write_config(dir, cfg, "eval.json")).exit_code == 0);
    const auto metrics = read_json(dir.file("eval") + "/metrics.json");
    CHECK(metrics.at("model").contains("overall_acc"));
    CHECK(metrics.at("model").contains("subpop_acc"));
    CHECK(metrics.contains("train_loss"));

    // the stored clean model scores exactly like the freshly trained one
    const auto clean_metrics = read_json(dir.file("clean") + "/metrics.json");
    CHECK(metrics.at("model").at("overall_acc") == clean_metrics.at("clean").at("overall_acc"));
}

TEST_CASE("schema violations fail fast with machine-parsable errors") {
    TempDir dir;

    SECTION("unknown top-level key") {
        auto cfg = base_config(dir);
        cfg["bogus"] = 1;
        const auto res = run_cli("train --config " + write_config(dir, cfg));
        CHECK(res.exit_code == 1);
        CHECK(res.output.rfind("error: config_schema:", 0) == 0);
        CHECK(res.output.find('\n') == res.output.size() - 1);  // single line
    }

    SECTION("unknown nested key") {
        auto cfg = base_config(dir);
        cfg["attack"]["stop"]["surprise"] = true;
        const auto res = run_cli("attack --config " + write_config(dir, cfg));
        CHECK(res.exit_code == 1);
        CHECK(res.output.rfind("error: config_schema:", 0) == 0);
    }

    SECTION("wrong schema version") {
        auto cfg = base_config(dir);
        cfg["schema"] = "mtp-experiment-v0";
        const auto res = run_cli("train --config " + write_config(dir, cfg));
        CHECK(res.exit_code == 1);
        CHECK(res.output.rfind("error: config_schema:", 0) == 0);
    }

    SECTION("missing dataset file") {
        auto cfg = base_config(dir);
        cfg["dataset"] = {{"format", "libsvm"}, {"path", dir.file("nope.libsvm")}, {"dim", 2}};
        const auto res = run_cli("train --config " + write_config(dir, cfg));
        CHECK(res.exit_code == 1);
        CHECK(res.output.rfind("error: io:", 0) == 0);
    }

    SECTION("bad stop kind") {
        auto cfg = base_config(dir);
        cfg["attack"]["stop"] = {{"kind", "whenever"}};
        const auto res = run_cli("attack --config " + write_config(dir, cfg));
        CHECK(res.exit_code == 1);
        CHECK(res.output.rfind("error: config_schema:", 0) == 0);
    }

    SECTION("missing required flag") {
        CHECK(run_cli("attack").exit_code != 0);
    }
}

TEST_CASE("output directory overrides") {
    TempDir dir;
    const auto cfg_path = write_config(dir, base_config(dir));

    SECTION("environment variable redirects artifacts") {
        const auto res =
            run_cli("train --config " + cfg_path, "MTP_OUT_DIR=" + dir.file("env_out") + " ");
        INFO(res.output);
        REQUIRE(res.exit_code == 0);
        CHECK(fs::exists(fs::path(dir.file("env_out")) / "clean_model.json"));
        CHECK_FALSE(fs::exists(fs::path(dir.file("out")) / "clean_model.json"));
    }

    SECTION("--out wins over the environment") {
        const auto res = run_cli("train --config " + cfg_path + " --out " + dir.file("flag_out"),
                                 "MTP_OUT_DIR=" + dir.file("env_out") + " ");
        INFO(res.output);
        REQUIRE(res.exit_code == 0);
        CHECK(fs::exists(fs::path(dir.file("flag_out")) / "clean_model.json"));
        CHECK_FALSE(fs::exists(fs::path(dir.file("env_out")) / "clean_model.json"));
    }
}
