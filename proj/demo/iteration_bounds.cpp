// Builds the iteration certificate for positive bump data, runs the solver
// and checks the lower bounds on the strip functional H(t).
#include <cstdio>

#include "qlwave/solver.hpp"
#include "qlwave/theorem1.hpp"

using namespace qlwave;

int main() {
    const double sigma0 = 0.5;
    const ProblemSpec spec(2.0, 2.0, 0.1, Variant::SpaceDerivative,
                           InitialData(Profile(make_bump_profile(-0.5, 0.5, 1.0)), Profile::zero(), 1.0));
    const auto cert = theorem1::build_certificate(spec, sigma0, Branch::FBranch);
    std::printf("C_f %.6g  B %.6g  D %.6g  E %.6g  T* %.6g\n", cert.Cf_or_Cg, cert.B, cert.D, cert.E, cert.T_star);

    SolverConfig cfg;
    cfg.dx = 4e-3;
    cfg.t_max = 30.0;
    cfg.snapshot_interval = 0.05;
    const RunTrace tr = solve(spec, cfg);
    const double T = tr.blowup ? tr.blowup->detected_time : tr.final_time;
    std::printf("solver stops at t = %.4g (%s)\n", T, tr.blowup ? to_string(tr.blowup->criterion) : "horizon");

    const auto fs = theorem1::compute_functionals(antiderivative_u(tr, spec.variant), spec.data.sigma(), sigma0, spec.p);
    theorem1::VerifyOptions opt;
    opt.t_end = 0.9 * T;
    const auto report = theorem1::verify_bounds(fs, cert, opt);
    for (const auto& e : report.entries)
        std::printf("%-14s %s  margin %.4g\n", e.name.c_str(), e.pass ? "pass" : "FAIL", e.worst_margin);
    return report.all_pass() ? 0 : 1;
}
