#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstdio>

#include "mtp/model.hpp"
#include "mtp/model_io.hpp"
#include "support.hpp"

using mtp::LinearModel;
using mtp::LossKind;
using mtp::Vec;

TEST_CASE("pointwise losses at hand-computed values") {
    LinearModel m{{1.0}, 0.0};
    Vec x{0.5};
    CHECK(mtp::point_loss(LossKind::Hinge, m, x, 1) == Catch::Approx(0.5).margin(1e-15));
    CHECK(mtp::point_loss(LossKind::Hinge, m, x, -1) == Catch::Approx(1.5).margin(1e-15));
    LinearModel zero{{0.0}, 0.0};
    CHECK(mtp::point_loss(LossKind::Logistic, zero, x, 1) ==
          Catch::Approx(std::log(2.0)).margin(1e-15));
    // deep in the confident region the hinge is exactly zero
    LinearModel conf{{10.0}, 0.0};
    CHECK(mtp::point_loss(LossKind::Hinge, conf, x, 1) == 0.0);
    // logistic stays finite and positive for extreme margins
    LinearModel extreme{{1000.0}, 0.0};
    CHECK(mtp::point_loss(LossKind::Logistic, extreme, x, -1) == Catch::Approx(500.0).margin(1e-9));
    CHECK(mtp::point_loss(LossKind::Logistic, extreme, x, 1) >= 0.0);
}

TEST_CASE("empirical loss is an unweighted sum; the objective averages it") {
    auto ds = ref::make_dataset_1d({{0.5, 1}, {-0.25, 1}}, -1.0, 1.0);
    LinearModel m{{1.0}, 0.0};
    CHECK(mtp::empirical_loss(LossKind::Hinge, m, ds) == Catch::Approx(0.5 + 1.25).margin(1e-15));
    const double obj = mtp::training_objective(LossKind::Hinge, m, ds, 0.4);
    CHECK(obj == Catch::Approx(0.875 + 0.4 * 0.5).margin(1e-15));
}

TEST_CASE("the ridge term never sees the intercept") {
    LinearModel m{{3.0}, 7.0};
    CHECK(mtp::regularizer(m) == Catch::Approx(4.5).margin(1e-15));
}

TEST_CASE("decision ties predict +1") {
    LinearModel m{{0.0, 0.0}, 0.0};
    CHECK(m.predict(Vec{0.3, -0.9}) == 1);
}

TEST_CASE("evaluate reports overall and subpopulation accuracy") {
    auto ds = ref::make_dataset_1d({{1.0, 1}, {-1.0, -1}, {0.5, -1}, {-0.5, 1}}, -1.0, 1.0);
    LinearModel m{{1.0}, 0.0};
    std::vector<std::size_t> sub{2, 3};
    auto metrics = mtp::evaluate(m, ds, &sub);
    CHECK(metrics.overall_accuracy == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(metrics.subpop_accuracy.has_value());
    CHECK(*metrics.subpop_accuracy == Catch::Approx(0.0).margin(1e-15));

    std::vector<std::size_t> none;
    CHECK_THROWS_AS(mtp::evaluate(m, ds, &none), mtp::MtpError);
    mtp::Dataset empty = mtp::Dataset::empty(mtp::FeatureDomain{{-1.0}, {1.0}});
    CHECK_THROWS_AS(mtp::evaluate(m, empty), mtp::MtpError);
}

TEST_CASE("model files round-trip exactly") {
    mtp::ModelFile mf;
    mf.model.weights = {0.125, -3.5, 1e-17};
    mf.model.bias = -0.75;
    mf.loss = LossKind::Logistic;
    mf.c_r = 0.05;

    const std::string path = "/tmp/mtp_test_model.json";
    mtp::save_model(mf, path);
    auto back = mtp::load_model(path);
    CHECK(back.model.weights == mf.model.weights);  // bitwise
    CHECK(back.model.bias == mf.model.bias);
    CHECK(back.loss == mf.loss);
    CHECK(back.c_r == mf.c_r);
    CHECK_FALSE(back.meta.has_value());

    mtp::TargetMeta meta;
    meta.objective = "subpop_error";
    meta.required_error = 0.5;
    meta.achieved_error = 0.625;
    meta.clean_loss = 12.25;
    meta.objective_met = true;
    meta.flips = 7;
    meta.copies = 2;
    mf.meta = meta;
    mtp::save_model(mf, path);
    auto back2 = mtp::load_model(path);
    REQUIRE(back2.meta.has_value());
    CHECK(back2.meta->objective == "subpop_error");
    CHECK(back2.meta->achieved_error == 0.625);
    CHECK(back2.meta->objective_met);
    CHECK(back2.meta->flips == 7);
    std::remove(path.c_str());
}

TEST_CASE("model files use the exact documented keys") {
    mtp::ModelFile mf;
    mf.model.weights = {1.0};
    mf.loss = LossKind::Hinge;
    mf.c_r = 0.1;
    auto j = mtp::model_to_json(mf);
    CHECK(j.size() == 4);
    CHECK(j.contains("weights"));
    CHECK(j.contains("bias"));
    CHECK(j.contains("loss"));
    CHECK(j.contains("c_r"));
}

TEST_CASE("model loading failures carry stable error codes") {
    CHECK_THROWS_MATCHES(mtp::load_model("/tmp/definitely_missing_mtp.json"), mtp::MtpError,
                         Catch::Matchers::Predicate<mtp::MtpError>(
                             [](const mtp::MtpError& e) { return e.code() == "io"; }));
    const std::string path = "/tmp/mtp_test_bad_model.json";
    {
        std::ofstream out(path);
        out << "{\"weights\": [1.0]}";
    }
    CHECK_THROWS_MATCHES(mtp::load_model(path), mtp::MtpError,
                         Catch::Matchers::Predicate<mtp::MtpError>(
                             [](const mtp::MtpError& e) { return e.code() == "model_parse"; }));
    {
        std::ofstream out(path);
        out << "not json at all";
    }
    CHECK_THROWS_MATCHES(mtp::load_model(path), mtp::MtpError,
                         Catch::Matchers::Predicate<mtp::MtpError>(
                             [](const mtp::MtpError& e) { return e.code() == "model_parse"; }));
    std::remove(path.c_str());
}

TEST_CASE("unknown loss names are rejected") {
    CHECK_THROWS_AS(mtp::loss_from_name("perceptron"), mtp::MtpError);
    CHECK(mtp::loss_from_name("hinge") == LossKind::Hinge);
    CHECK(mtp::loss_from_name("logistic") == LossKind::Logistic);
}
