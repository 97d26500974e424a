#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <fstream>

#include "mtp/dataset.hpp"
#include "mtp/dataset_io.hpp"
#include "support.hpp"

using mtp::Dataset;
using mtp::FeatureDomain;
using mtp::LabelMap;
using mtp::Vec;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& p, const std::string& content) : path(p) {
        std::ofstream out(path, std::ios::binary);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

bool code_is(const mtp::MtpError& e, const char* code) { return e.code() == code; }

}  // namespace

TEST_CASE("dataset append replicates copies and checks shapes") {
    Dataset ds = Dataset::empty(FeatureDomain{{0.0, 0.0}, {1.0, 1.0}});
    ds.append(Vec{0.25, 0.75}, 1, 3);
    CHECK(ds.size() == 3);
    CHECK(ds.row(2)[1] == 0.75);
    CHECK_THROWS(ds.append(Vec{0.5}, 1));
    CHECK_THROWS(ds.append(Vec{0.5, 0.5}, 0));
    Dataset other = Dataset::empty(FeatureDomain{{0.0, 0.0}, {1.0, 1.0}});
    other.append(Vec{0.1, 0.1}, -1);
    auto joined = mtp::concat(ds, other);
    CHECK(joined.size() == 4);
    CHECK(joined.labels.back() == -1);
}

TEST_CASE("csv loading normalizes continuous columns and passes one-hots through") {
    TempFile f("/tmp/mtp_t_basic.csv",
               "age,member,income\n"
               "20,1,1000\n"
               "40,0,3000\n"
               "60,1,2000\n");
    LabelMap lm{{"1", 1}, {"0", -1}};
    mtp::NormStats stats;
    auto ds = mtp::load_csv(f.path, "member", lm, true, nullptr, &stats);
    REQUIRE(ds.size() == 3);
    REQUIRE(ds.dim() == 2);
    CHECK(ds.labels == std::vector<int>{1, -1, 1});
    // age and income scaled to [0,1] by observed range
    CHECK(ds.row(0)[0] == Catch::Approx(0.0));
    CHECK(ds.row(1)[0] == Catch::Approx(0.5));
    CHECK(ds.row(2)[0] == Catch::Approx(1.0));
    CHECK(ds.row(1)[1] == Catch::Approx(1.0));
    CHECK(ds.domain.lo == Vec{0.0, 0.0});
    CHECK(ds.domain.hi == Vec{1.0, 1.0});

    // a second file reusing the stats lands in the same scale (clamped)
    TempFile g("/tmp/mtp_t_test.csv",
               "age,member,income\n"
               "30,0,4000\n");
    auto ts = mtp::load_csv(g.path, "member", lm, true, &stats);
    CHECK(ts.row(0)[0] == Catch::Approx(0.25));
    CHECK(ts.row(0)[1] == Catch::Approx(1.0));  // beyond the train max: clamped
}

TEST_CASE("csv binary columns are left untouched") {
    TempFile f("/tmp/mtp_t_binary.csv",
               "f1,f2,y\n"
               "0,7,yes\n"
               "1,9,no\n");
    LabelMap lm{{"yes", 1}, {"no", -1}};
    auto ds = mtp::load_csv(f.path, "y", lm);
    CHECK(ds.row(0)[0] == 0.0);
    CHECK(ds.row(1)[0] == 1.0);
    CHECK(ds.row(0)[1] == Catch::Approx(0.0));
    CHECK(ds.row(1)[1] == Catch::Approx(1.0));
}

TEST_CASE("csv loader failure modes") {
    LabelMap lm{{"1", 1}, {"0", -1}};
    CHECK_THROWS_MATCHES(mtp::load_csv("/tmp/missing_mtp.csv", "y", lm), mtp::MtpError,
                         Catch::Matchers::Predicate<mtp::MtpError>(
                             [](const mtp::MtpError& e) { return code_is(e, "io"); }));
    {
        TempFile f("/tmp/mtp_t_nolabel.csv", "a,b\n1,2\n");
        CHECK_THROWS_MATCHES(mtp::load_csv(f.path, "y", lm), mtp::MtpError,
                             Catch::Matchers::Predicate<mtp::MtpError>(
                                 [](const mtp::MtpError& e) { return code_is(e, "data_parse"); }));
    }
    {
        TempFile f("/tmp/mtp_t_badnum.csv", "a,y\nfoo,1\n");
        CHECK_THROWS_MATCHES(mtp::load_csv(f.path, "y", lm), mtp::MtpError,
                             Catch::Matchers::Predicate<mtp::MtpError>(
                                 [](const mtp::MtpError& e) { return code_is(e, "data_parse"); }));
    }
    {
        TempFile f("/tmp/mtp_t_badlabel.csv", "a,y\n1,maybe\n");
        CHECK_THROWS_MATCHES(mtp::load_csv(f.path, "y", lm), mtp::MtpError,
                             Catch::Matchers::Predicate<mtp::MtpError>(
                                 [](const mtp::MtpError& e) { return code_is(e, "label_mapping"); }));
    }
    {
        TempFile f("/tmp/mtp_t_ragged.csv", "a,b,y\n1,2,1\n3,1\n");
        CHECK_THROWS_MATCHES(mtp::load_csv(f.path, "y", lm), mtp::MtpError,
                             Catch::Matchers::Predicate<mtp::MtpError>(
                                 [](const mtp::MtpError& e) { return code_is(e, "data_parse"); }));
    }
    {
        TempFile f("/tmp/mtp_t_empty.csv", "a,y\n");
        CHECK_THROWS_MATCHES(mtp::load_csv(f.path, "y", lm), mtp::MtpError,
                             Catch::Matchers::Predicate<mtp::MtpError>(
                                 [](const mtp::MtpError& e) { return code_is(e, "data_parse"); }));
    }
}

TEST_CASE("libsvm loading fills absent indices with zero") {
    TempFile f("/tmp/mtp_t.libsvm",
               "+1 1:0.5 3:0.25\n"
               "-1 2:1.0\n"
               "# comment line\n"
               "1 1:0.1\n");
    auto ds = mtp::load_libsvm(f.path, 3);
    REQUIRE(ds.size() == 3);
    CHECK(ds.labels == std::vector<int>{1, -1, 1});
    CHECK(ds.row(0)[0] == 0.5);
    CHECK(ds.row(0)[1] == 0.0);
    CHECK(ds.row(0)[2] == 0.25);
    CHECK(ds.row(1)[1] == 1.0);

    TempFile bad("/tmp/mtp_t_bad.libsvm", "+1 4:0.5\n");
    CHECK_THROWS_MATCHES(mtp::load_libsvm(bad.path, 3), mtp::MtpError,
                         Catch::Matchers::Predicate<mtp::MtpError>([](const mtp::MtpError& e) {
                             return code_is(e, "dimension_mismatch");
                         }));
    TempFile odd("/tmp/mtp_t_odd.libsvm", "2 1:0.5\n");
    CHECK_THROWS_MATCHES(mtp::load_libsvm(odd.path, 3), mtp::MtpError,
                         Catch::Matchers::Predicate<mtp::MtpError>(
                             [](const mtp::MtpError& e) { return code_is(e, "label_mapping"); }));
}

TEST_CASE("idx image/label pairs load, filter and scale") {
    // two 2x2 images, labels 3 and 8
    std::string imgs;
    auto be32 = [&](std::uint32_t v) {
        imgs += char((v >> 24) & 0xff);
        imgs += char((v >> 16) & 0xff);
        imgs += char((v >> 8) & 0xff);
        imgs += char(v & 0xff);
    };
    be32(0x803);
    be32(2);
    be32(2);
    be32(2);
    for (unsigned char px : {0, 51, 102, 255, 255, 204, 153, 0}) imgs += char(px);
    std::string labs;
    std::string* tgt = &labs;
    auto be32l = [&](std::uint32_t v) {
        *tgt += char((v >> 24) & 0xff);
        *tgt += char((v >> 16) & 0xff);
        *tgt += char((v >> 8) & 0xff);
        *tgt += char(v & 0xff);
    };
    be32l(0x801);
    be32l(2);
    labs += char(3);
    labs += char(8);

    TempFile fi("/tmp/mtp_t_images.idx", imgs);
    TempFile fl("/tmp/mtp_t_labels.idx", labs);
    auto ds = mtp::load_idx_pair(fi.path, fl.path, 8, 3);
    REQUIRE(ds.size() == 2);
    CHECK(ds.dim() == 4);
    CHECK(ds.labels == std::vector<int>{-1, 1});
    CHECK(ds.row(0)[1] == Catch::Approx(51.0 / 255.0));
    CHECK(ds.row(1)[0] == Catch::Approx(1.0));

    // filtering to digits that never appear is an error
    CHECK_THROWS_MATCHES(mtp::load_idx_pair(fi.path, fl.path, 1, 2), mtp::MtpError,
                         Catch::Matchers::Predicate<mtp::MtpError>(
                             [](const mtp::MtpError& e) { return code_is(e, "data_parse"); }));

    TempFile badmagic("/tmp/mtp_t_badmagic.idx", std::string("\x00\x00\x08\x04", 4));
    CHECK_THROWS_MATCHES(mtp::load_idx_pair(badmagic.path, fl.path, 8, 3), mtp::MtpError,
                         Catch::Matchers::Predicate<mtp::MtpError>(
                             [](const mtp::MtpError& e) { return code_is(e, "data_parse"); }));
}

TEST_CASE("un-normalized csv loading widens the domain to cover the data") {
    TempFile f("/tmp/mtp_t_raw.csv",
               "a,y\n"
               "-3,1\n"
               "5,0\n");
    LabelMap lm{{"1", 1}, {"0", -1}};
    auto ds = mtp::load_csv(f.path, "y", lm, false);
    CHECK(ds.domain.lo[0] <= -3.0);
    CHECK(ds.domain.hi[0] >= 5.0);
    CHECK(ds.row(0)[0] == -3.0);
}
