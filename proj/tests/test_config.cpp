#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cbc/config.hpp"
#include "cbc/errors.hpp"
#include "cbc/io.hpp"

using namespace cbc;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << text;
    return path;
}

}  // namespace

TEST_CASE("the reference config parses back to the defaults") {
    const auto path = write_temp("cbclab_ref.ini", reference_config_text());
    const ExperimentConfig loaded = load_config(path);
    const ExperimentConfig defaults = default_config();
    CHECK(config_snapshot(loaded) == config_snapshot(defaults));
}

TEST_CASE("unknown keys are rejected") {
    const auto path = write_temp("cbclab_bad.ini", "[rig]\nnatural_frequenzy_hz = 2.5\n");
    CHECK_THROWS_AS(load_config(path), ConfigError);
}

TEST_CASE("malformed values are rejected") {
    const auto path = write_temp("cbclab_bad2.ini", "[rig]\ndamping_ratio = lots\n");
    CHECK_THROWS_AS(load_config(path), ConfigError);
}

TEST_CASE("sysid perturbation inherits the noise amplitude unless set") {
    const auto path = write_temp("cbclab_inherit.ini", "[noise]\namplitude = 0.25\n");
    const ExperimentConfig cfg = load_config(path);
    CHECK(cfg.sysid.perturbation_amplitude == 0.25);
    CHECK(cfg.escape.noise_amplitude == 0.25);

    const auto path2 = write_temp("cbclab_inherit2.ini",
                                  "[noise]\namplitude = 0.25\n[sysid]\nperturbation_amplitude = 0.4\n");
    const ExperimentConfig cfg2 = load_config(path2);
    CHECK(cfg2.sysid.perturbation_amplitude == 0.4);
}

TEST_CASE("frequency and amplitude grids have inclusive endpoints") {
    const ExperimentConfig cfg = default_config();
    const auto freqs = cfg.sweep_frequencies_hz();
    CHECK(freqs.size() == 41);
    CHECK(freqs.front() == doctest::Approx(2.2));
    CHECK(freqs.back() == doctest::Approx(3.2));
    const auto grid = cfg.amplitude_grid();
    CHECK(grid.front() == doctest::Approx(0.004));
    CHECK(grid.back() == doctest::Approx(0.064));
}

TEST_CASE("g17 formatting round-trips doubles") {
    for (double v : {0.1, 1.0 / 3.0, 6.02e23, -1.7e-300}) {
        CHECK(std::stod(format_g17(v)) == v);
    }
}
