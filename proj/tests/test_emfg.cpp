#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "mfglq/emfg.hpp"
#include "mfglq/linalg.hpp"
#include "testutil.hpp"

using namespace mfglq;
using testutil::scalar_model;

namespace {

// Bisects the scan for the horizon where Phi1 vanishes.
double critical_horizon() {
    double lo = 0.30, hi = 0.31;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        CounterexampleScan s = counterexample_scan(lo, hi, 3, 4000);
        if (s.rows[0].phi1 * s.rows[1].phi1 <= 0.0)
            hi = mid;
        else
            lo = mid;
        if (hi - lo < 1e-14) break;
    }
    return 0.5 * (lo + hi);
}

} // namespace

TEST_CASE("zero initial mean gives the zero fixed point") {
    EMFGModel m = load_emfg_model(testutil::data_file("lq_demo.json"));
    m.x0_mean.setZero();
    TimeGrid grid(m.T, 200);
    for (auto method : {MeanFieldMethod::gamma, MeanFieldMethod::shooting}) {
        FBODESolution sol = solve_mean_field(m, grid, method);
        for (int k = 0; k < grid.n_nodes(); ++k) {
            CHECK(sol.xi[k].norm() < 1e-14);
            CHECK(sol.eta[k].norm() < 1e-14);
            CHECK(sol.upsilon[k].norm() < 1e-14);
        }
    }
}

TEST_CASE("classical scalar problem reproduces the cosh profile") {
    auto m = scalar_model<EMFGModel>({{"Q", 1.0}, {"P", 1.0}, {"B", 1.0}, {"x0", 1.0}});
    TimeGrid grid(1.0, 2000);
    for (auto method : {MeanFieldMethod::gamma, MeanFieldMethod::shooting}) {
        FBODESolution sol = solve_mean_field(m, grid, method);
        double worst = 0.0;
        for (int k = 0; k < grid.n_nodes(); ++k)
            worst = std::max(worst, std::abs(sol.xi[k](0) - std::cosh(1.0 - grid.node(k)) /
                                                                std::cosh(1.0)));
        CHECK(worst < 1e-8);
        CHECK(sol.terminal_residual < 1e-8);
    }
}

TEST_CASE("fixed point consistency and method agreement on the demo model") {
    EMFGModel m = load_emfg_model(testutil::data_file("lq_demo.json"));
    TimeGrid grid(m.T, 1000);
    FBODESolution a = solve_mean_field(m, grid, MeanFieldMethod::gamma);
    FBODESolution b = solve_mean_field(m, grid, MeanFieldMethod::shooting);
    ReducedCoefficients rc(m);
    double diff = 0.0, fp = 0.0;
    for (int k = 0; k < grid.n_nodes(); ++k) {
        diff = std::max({diff, (a.xi[k] - b.xi[k]).norm(), (a.eta[k] - b.eta[k]).norm()});
        const double t = grid.node(k);
        const VectorXd expect = -(m.P(t) + rc.Pbar_cal(t)).inverse() *
                                (rc.Sbar_cal(t) * a.xi[k] + m.B(t).transpose() * a.eta[k]);
        fp = std::max(fp, (a.upsilon[k] - expect).norm());
    }
    CHECK(diff < 1e-6);
    CHECK(fp < 1e-9);
    CHECK(a.terminal_residual < 1e-8);
    CHECK(b.terminal_residual < 1e-8);
}

TEST_CASE("shooting matrix is singular at the critical horizon") {
    EMFGModel m = load_emfg_model(testutil::data_file("counterexample_scan.json"));
    const double T0 = critical_horizon();
    CHECK(T0 > 0.30);
    CHECK(T0 < 0.31);
    m.T = T0;
    TimeGrid grid(m.T, 2000);
    CHECK_THROWS_WITH_AS(solve_mean_field(m, grid, MeanFieldMethod::shooting),
                         doctest::Contains("non-existence or non-uniqueness"),
                         std::runtime_error);
    CHECK_THROWS_AS(solve_mean_field(m, grid, MeanFieldMethod::gamma), std::runtime_error);
}

TEST_CASE("both methods agree below the critical horizon") {
    EMFGModel m = load_emfg_model(testutil::data_file("counterexample_scan.json"));
    m.T = 0.29;
    TimeGrid grid(m.T, 2000);
    FBODESolution a = solve_mean_field(m, grid, MeanFieldMethod::gamma);
    FBODESolution b = solve_mean_field(m, grid, MeanFieldMethod::shooting);
    double diff = 0.0;
    for (int k = 0; k < grid.n_nodes(); ++k)
        diff = std::max(diff, (a.xi[k] - b.xi[k]).norm());
    CHECK(diff < 1e-6);
}

TEST_CASE("feedback gains in the classical reductions") {
    SUBCASE("no mean field: LQR gain with cross term") {
        auto m = scalar_model<EMFGModel>({{"Q", 1.0}, {"P", 1.0}, {"B", 1.0}, {"N", 0.2},
                                          {"x0", 1.0}});
        TimeGrid grid(1.0, 400);
        RiccatiSolution xi = solve_xi(m, grid);
        FBODESolution fbode = solve_mean_field(m, grid);
        EquilibriumFeedback fb = build_feedback(m, xi, fbode);
        for (int k = 0; k < grid.n_nodes(); k += 40) {
            const double expect = -(0.2 + xi.path[k](0, 0));
            CHECK(fb.F[k](0, 0) == doctest::Approx(expect).epsilon(1e-12));
            CHECK(fb.G[k].norm() == doctest::Approx(0.0));
            CHECK(std::abs(fb.g[k](0)) < 1e-12);
        }
    }
    SUBCASE("no cross term: pure Riccati gain") {
        auto m = scalar_model<EMFGModel>({{"Q", 1.0}, {"P", 2.0}, {"B", 1.0}, {"x0", 1.0}});
        TimeGrid grid(1.0, 400);
        RiccatiSolution xi = solve_xi(m, grid);
        EquilibriumFeedback fb = build_feedback(m, xi, solve_mean_field(m, grid));
        for (int k = 0; k < grid.n_nodes(); k += 40)
            CHECK(fb.F[k](0, 0) == doctest::Approx(-xi.path[k](0, 0) / 2.0).epsilon(1e-12));
    }
}

TEST_CASE("feedback reconstructs the equilibrium control law pointwise") {
    EMFGModel m = load_emfg_model(testutil::data_file("lq_demo.json"));
    TimeGrid grid(m.T, 500);
    RiccatiSolution xi = solve_xi(m, grid);
    FBODESolution fbode = solve_mean_field(m, grid);
    EquilibriumFeedback fb = build_feedback(m, xi, fbode);
    ReducedCoefficients rc(m);
    double worst = 0.0;
    for (int k = 0; k < grid.n_nodes(); k += 10) {
        const double t = grid.node(k);
        const VectorXd x = VectorXd::Constant(1, 0.3 + 0.001 * k);
        // direct evaluation of the equilibrium law with p = Xi x + zeta
        const MatrixXd ppb_inv = (m.P(t) + m.Pbar(t)).inverse();
        const MatrixXd ppc_inv = (m.P(t) + rc.Pbar_cal(t)).inverse();
        const VectorXd p = xi.path[k] * x + fb.zeta[k];
        const VectorXd direct =
            -ppb_inv *
            (m.N(t).transpose() * x + m.B(t).transpose() * p +
             (m.Pbar(t) * m.R(t) * ppc_inv * rc.Sbar_cal(t) -
              m.N(t).transpose() * m.Sbar(t)) *
                 fbode.xi[k] +
             m.Pbar(t) * m.R(t) * ppc_inv * m.B(t).transpose() * fbode.eta[k]);
        worst = std::max(worst, (fb.control(k, x) - direct).norm());
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("feedback reconstruction on the counterexample at a solvable horizon") {
    EMFGModel m = load_emfg_model(testutil::data_file("counterexample.json"));
    m.T = 0.25;
    TimeGrid grid(m.T, 500);
    RiccatiSolution xi = solve_xi(m, grid);
    REQUIRE(xi.ok());
    FBODESolution fbode = solve_mean_field(m, grid);
    EquilibriumFeedback fb = build_feedback(m, xi, fbode);
    ReducedCoefficients rc(m);
    double worst = 0.0;
    for (int k = 0; k < grid.n_nodes(); k += 20) {
        const double t = grid.node(k);
        VectorXd x(2);
        x << 0.4 - 0.002 * k, -0.3 + 0.001 * k;
        const MatrixXd ppb_inv = (m.P(t) + m.Pbar(t)).inverse();
        const MatrixXd ppc_inv = (m.P(t) + rc.Pbar_cal(t)).inverse();
        const VectorXd p = xi.path[k] * x + fb.zeta[k];
        const VectorXd direct =
            -ppb_inv * (m.N(t).transpose() * x + m.B(t).transpose() * p +
                        (m.Pbar(t) * m.R(t) * ppc_inv * rc.Sbar_cal(t) -
                         m.N(t).transpose() * m.Sbar(t)) *
                            fbode.xi[k] +
                        m.Pbar(t) * m.R(t) * ppc_inv * m.B(t).transpose() * fbode.eta[k]);
        worst = std::max(worst, (fb.control(k, x) - direct).norm());
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("mean-feedback consistency along the fixed point") {
    EMFGModel m = load_emfg_model(testutil::data_file("lq_demo.json"));
    TimeGrid grid(m.T, 800);
    RiccatiSolution xi = solve_xi(m, grid);
    FBODESolution fbode = solve_mean_field(m, grid);
    EquilibriumFeedback fb = build_feedback(m, xi, fbode);
    double worst = 0.0;
    for (int k = 0; k < grid.n_nodes(); ++k)
        worst = std::max(worst, (fb.control(k, fbode.xi[k]) - fbode.upsilon[k]).norm());
    CHECK(worst <= 1e-8);
}

TEST_CASE("noise-free simulation rides the mean path exactly") {
    EMFGModel m = load_emfg_model(testutil::data_file("lq_demo.json"));
    m.sigma = MatrixPath::zero(1, 1);
    m.x0_cov = MatrixXd::Zero(1, 1);
    TimeGrid grid(m.T, 500);
    EquilibriumFeedback fb = build_feedback(m, solve_xi(m, grid), solve_mean_field(m, grid));
    SimulationResult sim = simulate_representative(m, fb, 8, 0);
    CHECK(sim.fixed_point_residual <= 1e-9);
}

TEST_CASE("Monte Carlo error shrinks like one over root paths") {
    EMFGModel m = load_emfg_model(testutil::data_file("lq_demo.json"));
    TimeGrid grid(m.T, 300);
    EquilibriumFeedback fb = build_feedback(m, solve_xi(m, grid), solve_mean_field(m, grid));
    auto mean_se = [&](int paths, uint64_t seed) {
        SimulationResult sim = simulate_representative(m, fb, paths, seed);
        double acc = 0.0;
        for (const auto& se : sim.std_error) acc += se.norm();
        return acc / sim.std_error.size();
    };
    const double ratio = mean_se(4000, 1) / mean_se(2000, 2);
    CHECK(ratio > 0.6);
    CHECK(ratio < 0.82);
}

TEST_CASE("simulation residual within the CLT envelope") {
    EMFGModel m = load_emfg_model(testutil::data_file("lq_demo.json"));
    TimeGrid grid(m.T, 400);
    EquilibriumFeedback fb = build_feedback(m, solve_xi(m, grid), solve_mean_field(m, grid));
    SimulationResult sim = simulate_representative(m, fb, 4000, 3);
    for (int k = 0; k < grid.n_nodes(); ++k)
        CHECK((sim.mean[k] - fb.fbode.xi[k]).norm() <=
              3.0 * sim.std_error[k].norm() + 1e-12);
}

TEST_CASE("simulation is reproducible and thread-count independent") {
    EMFGModel m = load_emfg_model(testutil::data_file("lq_demo.json"));
    TimeGrid grid(m.T, 100);
    EquilibriumFeedback fb = build_feedback(m, solve_xi(m, grid), solve_mean_field(m, grid));
    SimulationResult a = simulate_representative(m, fb, 500, 9);
    setenv("MFGLQ_THREADS", "1", 1);
    SimulationResult b = simulate_representative(m, fb, 500, 9);
    unsetenv("MFGLQ_THREADS");
    for (int k = 0; k < grid.n_nodes(); ++k) CHECK((a.mean[k] - b.mean[k]).norm() == 0.0);
}

TEST_CASE("time-varying coefficients flow through every solver block") {
    EMFGModel m = load_emfg_model(testutil::data_file("lq_demo.json"));
    // ramp the state weight and drift over the horizon
    m.Q = MatrixPath::sampled({0.0, 0.5, 1.0},
                              {testutil::m1(1.0), testutil::m1(1.6), testutil::m1(1.2)});
    m.A = MatrixPath::sampled({0.0, 1.0}, {testutil::m1(0.3), testutil::m1(-0.2)});
    TimeGrid grid(m.T, 1000);

    RiccatiSolution gf = solve_gamma(m, grid, GammaMethod::fundamental);
    RiccatiSolution gd = solve_gamma(m, grid, GammaMethod::direct);
    REQUIRE(gf.ok());
    REQUIRE(gd.ok());
    double worst = 0.0;
    for (int k = 0; k < grid.n_nodes(); ++k)
        worst = std::max(worst, (gf.path[k] - gd.path[k]).norm());
    CHECK(worst < 1e-6);

    FBODESolution a = solve_mean_field(m, grid, MeanFieldMethod::gamma);
    FBODESolution b = solve_mean_field(m, grid, MeanFieldMethod::shooting);
    CHECK(a.terminal_residual < 1e-8);
    double diff = 0.0;
    for (int k = 0; k < grid.n_nodes(); ++k)
        diff = std::max(diff, (a.xi[k] - b.xi[k]).norm());
    CHECK(diff < 1e-6);

    RiccatiSolution xi = solve_xi(m, grid);
    REQUIRE(xi.ok());
    EquilibriumFeedback fb = build_feedback(m, xi, a);
    double fp = 0.0;
    for (int k = 0; k < grid.n_nodes(); ++k)
        fp = std::max(fp, (fb.control(k, a.xi[k]) - a.upsilon[k]).norm());
    CHECK(fp <= 1e-8);
}

TEST_CASE("counterexample scan reproduces the published determinants") {
    CounterexampleScan scan = counterexample_scan(0.29, 0.32, 31, 2000);
    double phi1_030 = 0, phi1_031 = 0;
    for (const auto& r : scan.rows) {
        if (std::abs(r.T - 0.30) < 1e-9) phi1_030 = r.phi1;
        if (std::abs(r.T - 0.31) < 1e-9) phi1_031 = r.phi1;
        CHECK(r.phi2 > 0.0);   // no sign change of Phi2 anywhere in range
    }
    CHECK(std::abs(phi1_030 - 0.0145965) < 5e-4);
    CHECK(std::abs(phi1_031 - (-0.0346916)) < 5e-4);
    REQUIRE(scan.phi1_sign_changes.size() == 1);
    CHECK(scan.phi1_sign_changes[0].first >= 0.30);
    CHECK(scan.phi1_sign_changes[0].second <= 0.31);
}
