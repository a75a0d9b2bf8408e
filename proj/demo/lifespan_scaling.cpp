// Lifespans of simple-wave data: straight-characteristic crossing time against
// the refined solver estimate, and the fitted power law over amplitude.
#include <cmath>
#include <cstdio>

#include "qlwave/oracle.hpp"
#include "qlwave/scaling.hpp"
#include "qlwave/solver.hpp"

using namespace qlwave;

int main() {
    const Profile f(make_bump_profile(0.0, 1.0, 1.0));
    const double p = 2.0, A = 2.0;

    std::vector<scaling::SweepEntry> entries;
    std::printf("%10s %12s %12s %10s\n", "epsilon", "crossing", "solver", "rel");
    for (double eps : {0.1, 0.07, 0.05}) {
        const ProblemSpec spec(p, A, eps, Variant::SpaceDerivative, oracle::simple_wave_data(f, eps, p, A, 1.0));
        const double exact = oracle::crossing_time_exact(oracle::SimpleWaveSetup::from_spec(spec));
        SolverConfig cfg;
        cfg.dx = 4e-3;
        cfg.t_max = 50.0;
        const BlowupEstimate est = estimate_lifespan(spec, cfg, 2);
        std::printf("%10.4g %12.6g %12.6g %10.3g\n", eps, exact, est.T_est, est.T_est / exact - 1.0);
        scaling::SweepEntry e;
        e.epsilon = eps;
        e.T = est.T_est;
        entries.push_back(e);
    }
    const auto fit = scaling::fit_power_law(entries);
    std::printf("T ~ %.4g * eps^%.4f\n", fit.prefactor, fit.slope);
}
