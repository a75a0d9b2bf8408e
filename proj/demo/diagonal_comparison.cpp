// Time-derivative nonlinearity: the diagonal trace U(x) = u(x, x + 1) of a run
// against the explicit lower solution W(x).
#include <cstdio>

#include "qlwave/solver.hpp"
#include "qlwave/theorem2.hpp"

using namespace qlwave;

int main() {
    const double eps = 0.02;
    const ProblemSpec spec(2.0, 2.0, eps, Variant::TimeDerivative,
                           InitialData(Profile(make_bump_profile(-0.5, 0.5, 1.0)), Profile::zero(), 1.0));
    const auto cert = theorem2::build_certificate_t(spec, Branch::FBranch);
    std::printf("F %.6g  C %.6g  x_blow %.6g  lifespan bound %.6g\n", cert.Fconst, cert.Ctilde, cert.x_blow, cert.T_bound);

    SolverConfig cfg;
    cfg.dx = 5e-3;
    cfg.t_max = 8.0;
    cfg.snapshot_interval = 0.02;
    const RunTrace tr = solve(spec, cfg);
    const auto d = theorem2::extract_U(antiderivative_u(tr, spec.variant), cert.sigma);
    for (std::size_t i = 0; i < d.xs.size(); i += d.xs.size() / 8 + 1)
        std::printf("x %6.3f  U %.6g  W %.6g\n", d.xs[i], d.U[i], theorem2::W_closed_form(d.xs[i], cert, eps));
    const auto r = theorem2::verify_comparison(d, cert, eps);
    std::printf("U >= W: %s (worst margin %.4g)\n", theorem2::to_string(r.status), r.worst_margin);
    return r.pass() ? 0 : 1;
}
