#include "dsteer/config.hpp"
#include "dsteer/csv.hpp"
#include "dsteer/errors.hpp"
#include "dsteer/parallel.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

using namespace dsteer;

TEST_CASE("a minimal file fills the documented defaults") {
    const RunConfig c = parse_config_string("preset = ou\n");
    CHECK(c.preset == "ou");
    CHECK(c.seed == 1);
    CHECK(c.paths == 10000);
    CHECK(c.tol_scale == 1.0);
    CHECK(c.omega == 1.5);
    CHECK(c.damping == 0.5);
    CHECK(c.max_iters == 50);
    CHECK(c.tol == 1e-3);
    CHECK_FALSE(c.dx.has_value());
    CHECK(c.echo.size() == 1);
}

TEST_CASE("sections and comments") {
    const RunConfig c = parse_config_string(
        "# run\n[problem]\npreset = lq_steer   ; inline\n\n[grid]\nx_min = -3\nx_max = 3\ndx = 0.05\n[mc]\nseed = 9\n");
    CHECK(c.preset == "lq_steer");
    CHECK(*c.dx == 0.05);
    CHECK(c.seed == 9);
    const Preset p = resolve_preset(c);
    CHECK(p.grid.x_min() == -3.0);
    CHECK(p.grid.size() == 121);
}

TEST_CASE("negative dt is rejected by field") {
    try {
        parse_config_string("preset = ou\n[time]\ndt = -0.1\n");
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.field() == "dt");
        CHECK(e.reason() == "must be positive");
        CHECK(e.kind() == ErrorKind::ValidationError);
    }
}

TEST_CASE("misspelled keys are named with their position") {
    try {
        parse_config_string("preset = ou\n  sigm = 1\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("sigm") != std::string::npos);
        CHECK(e.line() == 2);
        CHECK(e.column() == 3);
    }
}

TEST_CASE("malformed input") {
    CHECK_THROWS_AS(parse_config_string("preset ou\n"), ParseError);
    CHECK_THROWS_AS(parse_config_string("[nowhere]\n"), ParseError);
    CHECK_THROWS_AS(parse_config_string("dx = abc\n"), ParseError);
    CHECK_THROWS_AS(parse_config_string("dx =\n"), ParseError);
    CHECK_THROWS_AS(parse_config_string("preset = nope\n"), ValidationError);
    CHECK_THROWS_AS(parse_config_string("omega = 2.5\n"), ValidationError);
    CHECK_THROWS_AS(parse_config("/nonexistent/run.ini"), Error);
}

TEST_CASE("config files on disk") {
    const auto path = std::filesystem::temp_directory_path() / "dsteer_config_test.ini";
    {
        std::ofstream f(path);
        f << "preset = bm_absorb\nhorizon = 0.5\ndt = 0.01\n";
    }
    const Preset p = resolve_preset(parse_config(path));
    CHECK(p.time_grid.t1() == 0.5);
    CHECK(p.time_grid.steps() == 50);
    std::filesystem::remove(path);
}

TEST_CASE("numbers print with 17 significant digits") {
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(2.0) == "2");
    CHECK(format_number(0.5) == "0.5");
    CHECK(format_number(-1.5e-300) == "-1.5000000000000001e-300");
    CHECK(std::stod(format_number(std::numbers::sqrt2)) == std::numbers::sqrt2);
}

TEST_CASE("csv writer") {
    std::ostringstream os;
    CsvWriter w(os, {"t", "x", "alive"});
    w.row(0.5, -1.25, 1);
    w.row(1.0, 2.0, std::size_t{0});
    CHECK(os.str() == "t,x,alive\n0.5,-1.25,1\n1,2,0\n");
    CHECK(w.columns() == 3);
}

TEST_CASE("worker resolution and deterministic reductions") {
    CHECK(resolve_jobs(3) == 3);
    setenv("DENSITY_STEER_JOBS", "5", 1);
    CHECK(resolve_jobs(0) == 5);
    unsetenv("DENSITY_STEER_JOBS");
    CHECK(resolve_jobs(0) == 1);

    std::vector<double> v(10001);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(static_cast<double>(i));
    std::vector<double> out1(v.size()), out4(v.size());
    parallel_for(v.size(), 1, [&](std::size_t a, std::size_t b) {
        for (std::size_t i = a; i < b; ++i) out1[i] = v[i] * v[i];
    });
    parallel_for(v.size(), 4, [&](std::size_t a, std::size_t b) {
        for (std::size_t i = a; i < b; ++i) out4[i] = v[i] * v[i];
    });
    CHECK(out1 == out4);
    CHECK(pairwise_sum(out1) == pairwise_sum(out4));
}
