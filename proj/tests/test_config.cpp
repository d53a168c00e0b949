#include <doctest.h>

#include "helpers.hpp"
#include "smcl/config.hpp"
#include "smcl/container.hpp"
#include "smcl/errors.hpp"
#include "smcl/io.hpp"

using namespace smcl;

TEST_CASE("defaults mirror the reference experiment and validate") {
    const config::RunConfig c;
    CHECK(c.particles == 100);
    CHECK(c.smcl_batch_size == 32);
    CHECK(c.smcl_epochs == 50);
    CHECK(c.input_epochs == 50);
    CHECK(c.gru_layers == 3);
    CHECK(c.feature_dim == 6);
    CHECK(c.state_dim == 6);
    CHECK(c.hmm_state_dim == 4);
    CHECK(c.paris_k == 2);
    CHECK(c.eval_stride == 24);
    CHECK(c.train_stride == 1);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("INI values override defaults and relative data paths resolve") {
    const auto c = config::parse(
        "[data]\npath = ett.csv\nsplit_train = 0.7\nsplit_val = 0.15\nsplit_test = 0.15\n"
        "[ssm]\nsmoothing = paris\nparticles = 64\n"
        "[input_model]\nlearning_rates = 1e-2, 1e-3\n"
        "[eval]\ntiming = true\n[run]\nseed = 18446744073709551615\n",
        "/data/dir");
    CHECK(c.data_path == std::filesystem::path("/data/dir/ett.csv"));
    CHECK(c.split[0] == 0.7);
    CHECK(c.smoothing == smc::Smoothing::paris);
    CHECK(c.particles == 64);
    CHECK(c.input_learning_rates == std::vector<double>{1e-2, 1e-3});
    CHECK(c.timing);
    CHECK(c.seed == 18446744073709551615ULL);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("unknown keys, unknown sections and bad values are all reported together") {
    try {
        config::parse("[ssm]\nparticels = 5\nsmoothing = ffbs\n[bogus]\nx = 1\n[training]\nepochs = -3\n");
        FAIL("bad config accepted");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("ssm.particels") != std::string::npos);
        CHECK(msg.find("ssm.smoothing") != std::string::npos);
        CHECK(msg.find("[bogus]") != std::string::npos);
        CHECK(msg.find("training.epochs") != std::string::npos);
    }
    CHECK_THROWS_AS(config::parse("[ssm\n"), ConfigError);
    CHECK_THROWS_AS(config::load("/nonexistent/run.ini"), ConfigError);
}

TEST_CASE("semantic validation lists every violation") {
    config::RunConfig c;
    c.split = {0.5, 0.2, 0.2};
    c.particles = 1;
    c.alpha = 0.4;
    c.eval_split = "train";
    c.hmm_inputs = "both";
    try {
        c.validate();
        FAIL("invalid config accepted");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        for (const char* key : {"data.split", "ssm.particles", "recursive.alpha", "eval.split", "hmm.inputs"})
            CHECK(msg.find(key) != std::string::npos);
    }
}

TEST_CASE("io helpers") {
    CHECK(io::fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(io::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(io::hex64(0x1fULL) == "000000000000001f");
    testing::TempDir dir("io");
    io::atomic_write(dir / "sub" / "x.txt", "hello");
    CHECK(io::read_file(dir / "sub" / "x.txt") == "hello");
    CHECK(std::distance(std::filesystem::directory_iterator(dir / "sub"), {}) == 1);
}

TEST_CASE("checkpoints round trip every parameter family") {
    testing::TempDir dir("ckpt");
    const auto im = input_model::InputModel::create(6, 6, 3, 4, 7);
    container::save(dir / "im.ckpt", container::pack(im));
    const auto im2 = container::unpack_input_model(container::load(dir / "im.ckpt"));
    CHECK(im2.gru.values == im.gru.values);
    CHECK(im2.head.values == im.head.values);
    CHECK(im2.gru.hash() == im.gru.hash());

    const auto sp = ssm::SsmParams::random(6, 6, 2);
    container::save(dir / "s.ckpt", container::pack(sp));
    const auto ck = container::load(dir / "s.ckpt");
    CHECK(container::unpack_ssm(ck).values == sp.values);
    CHECK(ck.get("W_gx").rows == 6);
    CHECK_THROWS_AS(container::unpack_hmm(ck), DataError);
    CHECK_THROWS_AS(container::unpack_input_model(ck), DataError);

    const auto hp = baselines::em_initialize(4, 6, std::vector<double>{0.1, 0.4, 0.2, 0.8, 0.5, 0.3}, 3);
    container::save(dir / "h.ckpt", container::pack(hp));
    const auto hp2 = container::unpack_hmm(container::load(dir / "h.ckpt"));
    CHECK(hp2.A == hp.A);
    CHECK(hp2.B == hp.B);
    CHECK(hp2.C == hp.C);
    CHECK(hp2.R == hp.R);

    data::NormStats st{{1.0, 2.0}, {0.5, 0.25}, -3.0, 40.0};
    const auto st2 = container::norm_stats_from_json(container::to_json(st));
    CHECK(st2.input_std == st.input_std);
    CHECK(st2.target_max == 40.0);
}

TEST_CASE("corrupt checkpoints are rejected") {
    testing::TempDir dir("ckpt");
    const std::string bytes = container::serialize(container::pack(ssm::SsmParams::random(2, 2, 1)));
    CHECK(bytes.substr(0, 8) == "SMCLCKPT");
    CHECK_THROWS_AS(container::deserialize(bytes.substr(0, bytes.size() - 1)), DataError);
    CHECK_THROWS_AS(container::deserialize(bytes + "x"), DataError);
    std::string wrong_version = bytes;
    wrong_version[8] = 9;
    CHECK_THROWS_AS(container::deserialize(wrong_version), DataError);
    CHECK_THROWS_AS(container::deserialize("garbage"), DataError);
}
