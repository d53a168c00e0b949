#include <doctest.h>

#include <cmath>
#include <cstring>

#include "helpers.hpp"
#include "smcl/data.hpp"
#include "smcl/errors.hpp"

using namespace smcl;
using testing::TempDir;

namespace {

const char* kHeader = "date,HUFL,HULL,MUFL,MULL,LUFL,LULL,OT\n";

data::TimeSeriesDataset ramp(std::size_t n) {
    data::TimeSeriesDataset ds;
    ds.inputs = RowMatrix(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        ds.timestamps.push_back(static_cast<std::int64_t>(i) * 3600);
        ds.inputs(i, 0) = static_cast<double>(i);
        ds.inputs(i, 1) = std::sin(static_cast<double>(i));
        ds.target.push_back(static_cast<double>(i % 7));
    }
    return ds;
}

}  // namespace

TEST_CASE("well-formed three-row CSV loads with the expected shape") {
    TempDir dir("data");
    testing::write_text(dir / "a.csv", std::string(kHeader) +
                                           "2016-07-01 00:00:00,1,2,3,4,5,6,30.5\n"
                                           "2016-07-01 01:00:00,1,2,3,4,5,6,31\n"
                                           "2016-07-01 02:00:00,1,2,3,4,5,6,29.25\n");
    const auto ds = data::load_ett_csv(dir / "a.csv");
    CHECK(ds.size() == 3);
    CHECK(ds.inputs.rows() == 3);
    CHECK(ds.inputs.cols() == 6);
    CHECK(ds.target == std::vector<double>{30.5, 31.0, 29.25});
    CHECK(ds.inputs(1, 5) == 6.0);
    CHECK(ds.timestamps[1] - ds.timestamps[0] == 3600);
}

TEST_CASE("column order is free and extra columns are ignored") {
    TempDir dir("data");
    testing::write_text(dir / "a.csv",
                        "OT,extra,LULL,LUFL,MULL,MUFL,HULL,HUFL,date\n"
                        "7,x,6,5,4,3,2,1,2016-07-01T00:00\n"
                        "8,y,6,5,4,3,2,1,2016-07-01T01:00\n");
    const auto ds = data::load_ett_csv(dir / "a.csv");
    CHECK(ds.inputs(0, 0) == 1.0);
    CHECK(ds.inputs(0, 5) == 6.0);
    CHECK(ds.target[1] == 8.0);
}

TEST_CASE("schema and parse errors are specific") {
    TempDir dir("data");
    testing::write_text(dir / "a.csv", "date,HUFL,HULL,MUFL,MULL,LUFL,LULL\n2016-07-01 00:00,1,2,3,4,5,6\n");
    try {
        data::load_ett_csv(dir / "a.csv");
        FAIL("missing OT accepted");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("OT") != std::string::npos);
    }
    testing::write_text(dir / "b.csv", std::string(kHeader) +
                                           "2016-07-01 00:00,1,2,3,4,5,6,7\n"
                                           "2016-07-01 01:00,1,2,abc,4,5,6,7\n");
    try {
        data::load_ett_csv(dir / "b.csv");
        FAIL("bad cell accepted");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
    testing::write_text(dir / "c.csv", std::string(kHeader) +
                                           "2016-07-01 00:00,1,2,3,4,5,6,7\n"
                                           "2016-07-01 02:00,1,2,3,4,5,6,7\n");
    CHECK_THROWS_AS(data::load_ett_csv(dir / "c.csv"), DataError);
    CHECK_THROWS_AS(data::load_ett_csv(dir / "missing.csv"), DataError);
}

TEST_CASE("timestamps parse as UTC seconds") {
    CHECK(data::parse_timestamp("1970-01-01 00:00:00") == 0);
    CHECK(data::parse_timestamp("1970-01-02 01:00") == 90000);
    CHECK(data::parse_timestamp("2016-07-01T00:00:00") == 1467331200);
    CHECK_THROWS_AS(data::parse_timestamp("not a date"), DataError);
}

TEST_CASE("normalizer maps target endpoints to the margins and round trips") {
    data::TimeSeriesDataset ds = ramp(10);
    ds.target.assign(10, 5.0);
    ds.target[0] = 0.0;
    ds.target[1] = 10.0;
    const auto stats = data::fit_normalizer(ds);
    const auto fwd = data::forward_target(std::vector<double>{0.0, 10.0}, stats);
    CHECK(fwd[0] == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(fwd[1] == doctest::Approx(0.95).epsilon(1e-14));

    Rng rng(3);
    std::vector<double> y(1000);
    for (double& v : y) v = 30.0 * rng.normal();
    const auto back = data::inverse_target(data::forward_target(y, stats), stats);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(back[i] - y[i]) <= 1e-10);

    const auto norm = data::apply_normalizer(ds, stats);
    for (std::size_t c = 0; c < 2; ++c) {
        double m = 0.0, s = 0.0;
        for (std::size_t i = 0; i < 10; ++i) m += norm.inputs(i, c);
        m /= 10.0;
        for (std::size_t i = 0; i < 10; ++i) s += (norm.inputs(i, c) - m) * (norm.inputs(i, c) - m);
        CHECK(std::abs(m) < 1e-12);
        CHECK(std::sqrt(s / 10.0) == doctest::Approx(1.0));
    }
    for (double v : norm.target) CHECK((v >= 0.05 - 1e-15 && v <= 0.95 + 1e-15));
}

TEST_CASE("standardized column is unchanged by standardization") {
    data::TimeSeriesDataset ds = ramp(4);
    const double col[] = {-1.0, 1.0, -1.0, 1.0};
    for (std::size_t i = 0; i < 4; ++i) ds.inputs(i, 1) = col[i];
    const auto norm = data::apply_normalizer(ds, data::fit_normalizer(ds));
    for (std::size_t i = 0; i < 4; ++i) CHECK(norm.inputs(i, 1) == doctest::Approx(col[i]));
}

TEST_CASE("constant columns are rejected by name") {
    data::TimeSeriesDataset ds = ramp(5);
    ds.target.assign(5, 2.0);
    CHECK_THROWS_AS(data::fit_normalizer(ds), DataError);
    ds = ramp(5);
    for (std::size_t i = 0; i < 5; ++i) ds.inputs(i, 1) = 3.0;
    try {
        data::fit_normalizer(ds);
        FAIL("constant input accepted");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("HULL") != std::string::npos);
    }
}

TEST_CASE("chronological split sizes and errors") {
    const auto s = data::chronological_split(ramp(100), {0.6, 0.2, 0.2});
    CHECK(s.train.size() == 60);
    CHECK(s.val.size() == 20);
    CHECK(s.test.size() == 20);
    CHECK(s.val.timestamps.front() == s.train.timestamps.back() + 3600);
    CHECK(s.test.timestamps.front() == s.val.timestamps.back() + 3600);

    const auto big = data::chronological_split(ramp(500), {0.6, 0.2, 0.2});
    CHECK(big.train.size() == 300);
    CHECK(big.val_begin == 300);
    CHECK(big.test_begin == 400);

    CHECK_THROWS_AS(data::chronological_split(ramp(47), {0.6, 0.2, 0.2}), DataError);
    CHECK_THROWS_AS(data::chronological_split(ramp(47), {0.98, 0.01, 0.01}), DataError);
    CHECK_THROWS_AS(data::chronological_split(ramp(100), {0.6, 0.2, 0.2}, data::kWindowLength), DataError);
    CHECK(data::chronological_split(ramp(240), {0.6, 0.2, 0.2}, data::kWindowLength).test.size() == 48);
    CHECK_THROWS_AS(data::chronological_split(ramp(500), {0.5, 0.2, 0.2}), ConfigError);
    CHECK_THROWS_AS(data::chronological_split(ramp(500), {1.2, -0.1, -0.1}), ConfigError);
}

TEST_CASE("window counts follow floor((T - 48) / stride) + 1") {
    CHECK(data::make_windows(ramp(48), 1).size() == 1);
    CHECK(data::make_windows(ramp(72), 24).size() == 2);
    CHECK(data::make_windows(ramp(47), 1).empty());
    for (std::size_t t : {48u, 60u, 99u, 250u})
        for (std::size_t stride : {1u, 5u, 24u}) CHECK(data::make_windows(ramp(t), stride).size() == (t - 48) / stride + 1);
    const auto ds = ramp(100);
    const auto w = data::make_windows(ds, 7);
    for (const auto& s : w) {
        CHECK(s.length() == 48);
        CHECK(s.inputs.rows() == 48);
        for (std::size_t k = 0; k < 48; ++k) {
            CHECK(s.targets[k] == ds.target[s.start + k]);
            CHECK(s.inputs(k, 0) == ds.inputs(s.start + k, 0));
        }
    }
}

TEST_CASE("windows never straddle split boundaries") {
    const auto s = data::chronological_split(ramp(500), {0.6, 0.2, 0.2});
    for (const auto* seg : {&s.train, &s.val, &s.test})
        for (const auto& w : data::make_windows(*seg, 1)) CHECK(w.start + w.length() <= seg->size());
}

TEST_CASE("feature files round trip bit-exactly and detect stale producers") {
    TempDir dir("feat");
    Rng rng(11);
    data::FeatureSequence f{testing::random_matrix(37, 6, rng), 0x1234abcdULL};
    f.values(3, 2) = -0.0;
    f.values(5, 1) = 1e-310;
    data::save_features(dir / "f.bin", f);
    const auto g = data::load_features(dir / "f.bin", 0x1234abcdULL);
    CHECK(g.model_hash == f.model_hash);
    CHECK(g.values.rows() == 37);
    CHECK(std::memcmp(g.values.values().data(), f.values.values().data(), 37 * 6 * sizeof(double)) == 0);
    CHECK(data::load_features(dir / "f.bin").values == f.values);
    CHECK_THROWS_AS(data::load_features(dir / "f.bin", 0x99ULL), StaleFeatureError);

    const std::string bytes = testing::read_text(dir / "f.bin");
    CHECK(bytes.substr(0, 8) == "SMCLFEAT");
    CHECK(bytes.size() == 40 + 37 * 6 * 8);
    testing::write_text(dir / "t.bin", bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(data::load_features(dir / "t.bin"), DataError);
    testing::write_text(dir / "m.bin", "XXXXXXXX" + bytes.substr(8));
    CHECK_THROWS_AS(data::load_features(dir / "m.bin"), DataError);
}
