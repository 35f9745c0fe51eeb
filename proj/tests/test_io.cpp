#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "dyenet/checkpoint.hpp"
#include "dyenet/config.hpp"
#include "dyenet/flow_io.hpp"
#include "dyenet/image_io.hpp"
#include "dyenet/rng.hpp"

using namespace dyenet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "dyenet_test_io";
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("config defaults, parsing, overrides, unknown keys") {
    Config cfg;
    CHECK(cfg.get_double("reid.rho") == doctest::Approx(0.7));
    CHECK(cfg.get_int("reid.embed_dim") == 256);
    CHECK(cfg.get_int("reid.roi_m") == 14);
    CHECK(cfg.get_double("reid.tau") == doctest::Approx(0.1));
    CHECK(cfg.get_double("reid.mu") == doctest::Approx(0.5));
    CHECK(cfg.get_double("remp.theta_abort") == doctest::Approx(0.1));
    CHECK(cfg.get_double("remp.box_margin") == doctest::Approx(0.2));
    CHECK(cfg.get_bool("remp.attention"));
    CHECK(cfg.get_double("link.theta_skip") == doctest::Approx(0.8));
    CHECK(cfg.get_double("link.theta_agree") == doctest::Approx(0.5));
    CHECK(cfg.get_int("infer.max_iters") == 4);
    CHECK(cfg.get_double("train.lambda") == doctest::Approx(1.0));
    CHECK(cfg.get_double("train.momentum") == doctest::Approx(0.9));
    CHECK(cfg.get_double("train.weight_decay") == doctest::Approx(5e-4));
    CHECK(cfg.get_double("train.lr") == doctest::Approx(1e-3));
    CHECK(cfg.get_string("proposals.mode") == "frame-diff");
    CHECK(cfg.get_int_list("proposals.grid_sizes") == std::vector<int>{16, 32});

    auto path = temp_dir() / "cfg.txt";
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "reid.rho = 0.55   # trailing comment\n";
        out << "\n";
        out << "remp.attention=off\n";
    }
    Config loaded = Config::load(path.string());
    CHECK(loaded.get_double("reid.rho") == doctest::Approx(0.55));
    CHECK(!loaded.get_bool("remp.attention"));
    // CLI-style override wins over the file value
    loaded.set("reid.rho", "0.9");
    CHECK(loaded.get_double("reid.rho") == doctest::Approx(0.9));

    CHECK_THROWS_AS(loaded.set("reid.rho_typo", "1"), ContractViolation);
    CHECK_THROWS_AS(loaded.parse_line("not a kv pair", "test"), ContractViolation);
    CHECK_THROWS_AS(Config::load((temp_dir() / "missing.cfg").string()), IoError);
    // every registry key has a parseable default
    for (const auto& e : Config::registry()) CHECK(!Config().get_string(e.key).empty());
}

TEST_CASE("ppm round trip is bit-exact") {
    Rng rng(7);
    TensorF img(Shape{3, 5, 6});
    for (auto& v : img.data)
        v = static_cast<float>(rng.uniform_int(256)) / 255.0f;  // representable exactly
    auto path = (temp_dir() / "rt.ppm").string();
    save_ppm(path, img);
    TensorF back = load_ppm(path);
    REQUIRE(back.shape == img.shape);
    CHECK(back.data == img.data);
}

TEST_CASE("pgm round trip and header comments") {
    InstanceMap m(4, 3);
    m.at(0, 0) = 1;
    m.at(2, 2) = 2;
    m.at(3, 1) = 255;
    auto path = (temp_dir() / "rt.pgm").string();
    save_pgm(path, m);
    InstanceMap back = load_pgm(path);
    CHECK(back == m);

    // hand-written header with comments parses too
    auto cpath = temp_dir() / "comment.pgm";
    {
        std::ofstream out(cpath, std::ios::binary);
        out << "P5\n# a comment\n2 2\n255\n";
        const unsigned char px[4] = {0, 1, 2, 3};
        out.write(reinterpret_cast<const char*>(px), 4);
    }
    InstanceMap c = load_pgm(cpath.string());
    CHECK(c.w == 2);
    CHECK(c.h == 2);
    CHECK(c.at(1, 1) == 3);

    CHECK_THROWS_AS(load_pgm((temp_dir() / "nope.pgm").string()), IoError);
    CHECK_THROWS_AS(load_ppm(cpath.string()), IoError);  // P5 loaded as P6
}

TEST_CASE("dyfl round trip is bit-exact and interleaved little-endian") {
    Rng rng(11);
    TensorF flow(Shape{2, 3, 4});
    for (auto& v : flow.data) v = static_cast<float>(rng.uniform(-8.0, 8.0));
    auto path = (temp_dir() / "rt.dyfl").string();
    save_dyfl(path, flow);
    TensorF back = load_dyfl(path);
    CHECK(back.shape == flow.shape);
    CHECK(back.data == flow.data);

    auto bytes = slurp(path);
    REQUIRE(bytes.size() == 4 + 8 + 3 * 4 * 2 * 4);
    CHECK(bytes[0] == 'D');
    CHECK(bytes[1] == 'Y');
    CHECK(bytes[2] == 'F');
    CHECK(bytes[3] == 'L');
    CHECK(static_cast<unsigned char>(bytes[4]) == 3);  // H little-endian
    CHECK(static_cast<unsigned char>(bytes[8]) == 4);  // W little-endian
    // first pixel: dx then dy
    float dx, dy;
    std::memcpy(&dx, bytes.data() + 12, 4);
    std::memcpy(&dy, bytes.data() + 16, 4);
    CHECK(dx == flow.data[0]);
    CHECK(dy == flow.data[12]);

    auto bad = temp_dir() / "bad.dyfl";
    {
        std::ofstream out(bad, std::ios::binary);
        out << "NOPE";
    }
    CHECK_THROWS_AS(load_dyfl(bad.string()), IoError);
}

TEST_CASE("checkpoint round trip, sorted table, key metadata") {
    Rng rng(13);
    ParamStore<float> store;
    store.add("zeta.w", Shape{2, 3});
    store.add("alpha.b", Shape{4});
    store.add("mid.conv", Shape{2, 1, 3, 3});
    for (auto& kv : store.params)
        for (auto& v : kv.second->data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    auto path = (temp_dir() / "rt.dyck").string();
    save_checkpoint(path, store);
    ParamStore<float> back = load_checkpoint(path);
    REQUIRE(back.params.size() == 3);
    for (const auto& kv : store.params) {
        REQUIRE(back.has(kv.first));
        CHECK(back.at(kv.first)->shape == kv.second->shape);
        CHECK(back.at(kv.first)->data == kv.second->data);
    }

    auto bytes = slurp(path);
    REQUIRE(bytes.size() > 8);
    CHECK(std::string(bytes.data(), 4) == "DYCK");
    CHECK(static_cast<unsigned char>(bytes[4]) == 3);  // count LE
    // first table entry is the lexicographically smallest key
    uint32_t len = static_cast<unsigned char>(bytes[8]);
    CHECK(std::string(bytes.data() + 12, len) == "alpha.b");

    CHECK_THROWS_AS(load_checkpoint((temp_dir() / "nope.dyck").string()), IoError);
}

TEST_CASE("saving then loading twice produces identical bytes") {
    ParamStore<float> store;
    auto w = store.add("w", Shape{3});
    w->data = {0.25f, -1.5f, 3.75f};
    auto p1 = (temp_dir() / "d1.dyck").string();
    auto p2 = (temp_dir() / "d2.dyck").string();
    save_checkpoint(p1, store);
    save_checkpoint(p2, load_checkpoint(p1));
    CHECK(slurp(p1) == slurp(p2));
}
