#pragma once

#include "dsteer/grid.hpp"
#include "dsteer/model.hpp"
#include "dsteer/presets.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace dsteer {

/// One named numerical certificate; passes when |value| <= tolerance.
struct CheckReport {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string notes;

    static CheckReport make(std::string name, double value, double tolerance, std::string notes = {});
};

bool all_pass(const std::vector<CheckReport>& reports);

/// trapezoid of (zeta score + zeta') rho, with score * rho taken as d/dx rho.
double stein_residual(const Field& rho, const std::function<double(double)>& zeta,
                      const std::function<double(double)>& zeta_prime);

struct MarginalConfig {
    std::vector<double> checkpoints{0.5, 1.0, 2.0};
    std::size_t samples = 100000;
    double mc_dt = 1e-3;
    std::uint64_t seed = 1;
    int jobs = 1;
    double w1_tol = 0.02;
    double mass_tol = 0.02;
};

/// W1 between Monte Carlo, the Fokker-Planck density and the characteristic
/// push-forward at every checkpoint, plus alive-mass agreement when the preset
/// has an absorbing boundary.
std::vector<CheckReport> marginal_equivalence_report(const Preset& preset, const MarginalConfig& cfg);

struct DecompositionConfig {
    std::size_t paths = 20000;
    double mc_dt = 1e-3;
    std::uint64_t seed = 1;
    int jobs = 1;
    double se_multiple = 3.0;
    double relative = 0.02;
};

/// |int V(0, .) d mu0 - Monte Carlo mean cost under the HJB feedback| against 3 SE + 2 %.
CheckReport decomposition_report(const Preset& preset, const DecompositionConfig& cfg);

/// Aligned text table: name, value, tolerance, PASS/FAIL, notes.
std::string format_reports(const std::vector<CheckReport>& reports);

/// CSV with header benchmark,check,value,tolerance,pass.
void write_reports_csv(std::ostream& os, const std::string& benchmark, const std::vector<CheckReport>& reports);

}  // namespace dsteer
