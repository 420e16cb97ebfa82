#include "dsteer/bench.hpp"
#include "dsteer/diagnostics.hpp"
#include "dsteer/presets.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

using namespace dsteer;

namespace {

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

const Grid1D kGrid = Grid1D::with_spacing(-8.0, 8.0, 0.01);

}  // namespace

TEST_CASE("Stein identity for the standard normal") {
    const Field rho = Field::sample(kGrid, normal_pdf);
    CHECK(std::abs(stein_residual(rho, [](double) { return 1.0; }, [](double) { return 0.0; })) <= 1e-6);
    CHECK(std::abs(stein_residual(rho, [](double x) { return x; }, [](double) { return 1.0; })) <= 1e-4);
    CHECK(std::abs(stein_residual(rho, [](double x) { return x * x; }, [](double x) { return 2.0 * x; })) <= 1e-4);
}

TEST_CASE("Stein residual is linear in the test function") {
    const Field rho = Field::sample(kGrid, [](double x) { return normal_pdf(x - 0.4) * (1.0 + 0.1 * std::sin(x)); });
    auto z1 = [](double x) { return std::sin(x); };
    auto d1 = [](double x) { return std::cos(x); };
    auto z2 = [](double x) { return x * x * x; };
    auto d2 = [](double x) { return 3.0 * x * x; };
    const double a = 0.7, b = -2.3;
    const double mixed =
        stein_residual(rho, [&](double x) { return a * z1(x) + b * z2(x); }, [&](double x) { return a * d1(x) + b * d2(x); });
    CHECK(std::abs(mixed - (a * stein_residual(rho, z1, d1) + b * stein_residual(rho, z2, d2))) <= 1e-12);
}

TEST_CASE("truncated density leaves the boundary term") {
    const double cut = 1.0;
    const Grid1D g = Grid1D::with_spacing(-8.0, cut, 0.001);
    const Field rho = Field::sample(g, normal_pdf);
    const double boundary_term = normal_pdf(cut) - normal_pdf(-8.0);
    const double r = stein_residual(rho, [](double) { return 1.0; }, [](double) { return 0.0; });
    CHECK(r > 0.1);
    CHECK(std::abs(r / boundary_term - 1.0) <= 0.05);
}

TEST_CASE("check reports") {
    CHECK(CheckReport::make("a", 0.5, 1.0).pass);
    CHECK(CheckReport::make("b", -0.5, 1.0).pass);
    CHECK_FALSE(CheckReport::make("c", 1.5, 1.0).pass);
    CHECK_FALSE(CheckReport::make("d", std::numeric_limits<double>::quiet_NaN(), 1.0).pass);
    const std::vector<CheckReport> reports{CheckReport::make("x", 0.1, 1.0), CheckReport::make("y", 2.0, 1.0, "note")};
    CHECK_FALSE(all_pass(reports));
    const std::string table = format_reports(reports);
    CHECK(table.find("PASS") != std::string::npos);
    CHECK(table.find("FAIL") != std::string::npos);
    std::ostringstream csv;
    write_reports_csv(csv, "demo", reports);
    CHECK(csv.str().rfind("benchmark,check,value,tolerance,pass\n", 0) == 0);
    CHECK(csv.str().find("demo,y,2,1,0") != std::string::npos);
}

TEST_CASE("degenerate diffusion collapses all three representations") {
    const auto reports = run_check("deterministic");
    for (const auto& r : reports) {
        CAPTURE(r.name);
        CHECK(r.pass);
        CHECK(r.tolerance <= 2.0 * 0.01 + 1e-12);
    }
}

TEST_CASE("decomposition report is reproducible") {
    const Preset p = make_preset("ou_cost");
    DecompositionConfig cfg;
    cfg.paths = 4000;
    const CheckReport a = decomposition_report(p, cfg);
    cfg.jobs = 3;
    const CheckReport b = decomposition_report(p, cfg);
    CHECK(a.value == b.value);
    CHECK(a.tolerance == b.tolerance);
    CHECK(a.pass);
}
