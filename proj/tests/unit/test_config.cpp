#include <doctest.h>

#include <filesystem>
#include <string>

#include "spingap/config.hpp"

using namespace spingap;

TEST_SUITE("config") {

TEST_CASE("parses a full model config") {
    std::string text = R"(
# comment line
n_spins = 4
mixing = [[2, 0.1], [3, 0.05]]   # trailing comment
eta = [0.1, -0.2, 0.3, 0.0]
seed = 12345
)";
    ParsedConfig cfg = parse_config(text);
    CHECK(cfg.model.n_spins == 4);
    REQUIRE(cfg.model.mixing.size() == 2);
    CHECK(cfg.model.mixing[0].p == 2);
    CHECK(cfg.model.mixing[0].beta_p == 0.1);
    CHECK(cfg.model.mixing[1].p == 3);
    CHECK(cfg.model.external_field[1] == -0.2);
    CHECK(cfg.model.seed == 12345);
    CHECK_FALSE(cfg.experiment.has_value());
}

TEST_CASE("eta defaults to zeros; [model] header accepted") {
    ParsedConfig cfg = parse_config("[model]\nn_spins = 3\nmixing = []\nseed = 1\n");
    CHECK(cfg.model.external_field == std::vector<double>(3, 0.0));
}

TEST_CASE("64-bit seeds survive parsing exactly") {
    ParsedConfig cfg = parse_config("n_spins = 2\nseed = 18446744073709551615\n");
    CHECK(cfg.model.seed == 18446744073709551615ull);
}

TEST_CASE("experiment section") {
    std::string text = R"(
n_spins = 8
mixing = [[2, 1.0]]
seed = 7
[experiment]
beta_scale = [0.02, 0.05, 0.1]
n_realizations = 100
epsilon = 0.1
checks = ["hjid", "smatrix"]
out = "results"
exact_omega = false
omega_samples = 128
)";
    ParsedConfig cfg = parse_config(text);
    REQUIRE(cfg.experiment.has_value());
    CHECK(cfg.experiment->beta_scale == std::vector<double>{0.02, 0.05, 0.1});
    CHECK(cfg.experiment->n_realizations == 100);
    CHECK(cfg.experiment->epsilon == 0.1);
    CHECK(cfg.experiment->checks == std::vector<std::string>{"hjid", "smatrix"});
    CHECK(cfg.experiment->out == "results");
    CHECK(cfg.experiment->omega_samples == 128);
}

TEST_CASE("errors carry the offending line") {
    CHECK_THROWS_WITH_AS(parse_config("mixing = [[2, 0.1]]\n"),
                         doctest::Contains("missing required key n_spins"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config("n_spins = 2\nbogus = 1\n"),
                         doctest::Contains("unknown model key"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config("n_spins = 2\nmixing = [[2 0.1]]\n"),
                         doctest::Contains("not a JSON literal"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config("n_spins = 2\n[bogus]\n"),
                         doctest::Contains("unknown section"), std::invalid_argument);
    // eta length mismatch is a model invariant
    CHECK_THROWS_AS(parse_config("n_spins = 3\neta = [0.0]\n"), std::invalid_argument);
    // strictly increasing p
    CHECK_THROWS_AS(parse_config("n_spins = 3\nmixing = [[3, 0.1], [2, 0.1]]\n"),
                    std::invalid_argument);
}

TEST_CASE("save/load round trip") {
    ModelSpec spec{6, {{2, 0.125}, {4, 0.0625}}, {0.1, -0.25, 0.5, 0.0, 1.0, -0.125}, 987654321};
    auto path = std::filesystem::temp_directory_path() / "spingap_test_model.cfg";
    save_model_config(path, spec);
    ParsedConfig cfg = load_config(path);
    CHECK(cfg.model.n_spins == spec.n_spins);
    REQUIRE(cfg.model.mixing.size() == 2);
    CHECK(cfg.model.mixing[1].p == 4);
    CHECK(cfg.model.mixing[1].beta_p == 0.0625);
    CHECK(cfg.model.external_field == spec.external_field);
    CHECK(cfg.model.seed == spec.seed);
    std::filesystem::remove(path);
}

TEST_CASE("missing file reports as usage error") {
    CHECK_THROWS_AS(load_config("/nonexistent/spingap.cfg"), std::invalid_argument);
}

}  // TEST_SUITE
