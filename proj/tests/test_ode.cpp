#include <doctest.h>

#include <cmath>

#include "mfglq/ode.hpp"

using namespace mfglq;

TEST_CASE("constant rhs keeps the state") {
    auto f = [](double, const VectorXd& y) { return VectorXd::Zero(y.size()).eval(); };
    VectorXd y0 = VectorXd::Constant(3, 4.2);
    OdePath p = rk4_integrate(f, y0, 0.0, 1.0, 50);
    CHECK(!p.blow_up);
    CHECK((p.back_state() - y0).norm() == 0.0);
}

TEST_CASE("exponential growth matches e within 1e-10") {
    auto f = [](double, const VectorXd& y) { return y; };
    OdePath p = rk4_integrate(f, VectorXd::Ones(1), 0.0, 1.0, 1000);
    CHECK(std::abs(p.back_state()(0) - std::exp(1.0)) < 1e-10);
}

TEST_CASE("order-4 convergence on the exponential") {
    auto f = [](double, const VectorXd& y) { return y; };
    auto err = [&](int n) {
        OdePath p = rk4_integrate(f, VectorXd::Ones(1), 0.0, 1.0, n);
        double worst = 0.0;
        for (size_t k = 0; k < p.times.size(); ++k)
            worst = std::max(worst, std::abs(p.states[k](0) - std::exp(p.times[k])));
        return worst;
    };
    const double ratio = err(100) / err(200);
    CHECK(ratio > 12.0);
    CHECK(ratio < 20.0);
}

TEST_CASE("quadratic blow-up reported near the escape time") {
    auto f = [](double, const VectorXd& y) { return (y.array() * y.array()).matrix().eval(); };
    OdePath p = rk4_integrate(f, VectorXd::Constant(1, 2.0), 0.0, 1.0, 2000);
    REQUIRE(p.blow_up.has_value());
    CHECK(*p.blow_up == doctest::Approx(0.5).epsilon(0.02));   // analytic escape at t = 1/2
}

TEST_CASE("backward then forward returns the initial value") {
    MatrixXd a(2, 2);
    a << 0.3, -1.0, 0.7, -0.2;
    auto f = [&](double, const VectorXd& y) { return (a * y).eval(); };
    VectorXd y0(2);
    y0 << 1.0, -2.0;
    OdePath back = rk4_integrate(f, y0, 1.0, 0.0, 1000);
    OdePath fwd = rk4_integrate(f, back.back_state(), 0.0, 1.0, 1000);
    CHECK((fwd.back_state() - y0).norm() < 1e-9);
}

TEST_CASE("fundamental solution of the zero generator is the identity") {
    TimeGrid grid(1.0, 100);
    FundamentalSolution phi([](double) { return MatrixXd::Zero(2, 2); }, 2, grid);
    for (int k : {0, 50, 100})
        CHECK((phi.at_node(k) - MatrixXd::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("nilpotent generator gives the shear flow") {
    MatrixXd m(2, 2);
    m << 0, 1, 0, 0;
    TimeGrid grid(1.0, 200);
    FundamentalSolution phi([&](double) { return m; }, 2, grid);
    for (int k : {40, 120, 200}) {
        MatrixXd expect = MatrixXd::Identity(2, 2);
        expect(0, 1) = grid.node(k);
        CHECK((phi.at_node(k) - expect).norm() < 1e-12);
    }
}

TEST_CASE("scalar generator gives the exponential propagator") {
    const double a = -0.8;
    TimeGrid grid(2.0, 400);
    FundamentalSolution phi([&](double) { return MatrixXd::Constant(1, 1, a); }, 1, grid);
    CHECK(std::abs(phi.evaluate(300, 100)(0, 0) -
                   std::exp(a * (grid.node(300) - grid.node(100)))) < 1e-10);
}

TEST_CASE("cocycle property on grid triples") {
    MatrixXd m(2, 2);
    m << 0.2, 1.0, -0.5, 0.1;
    TimeGrid grid(1.0, 100);
    FundamentalSolution phi([&](double) { return m; }, 2, grid);
    for (int t : {90, 100})
        for (int s : {30, 60})
            for (int r : {0, 10}) {
                const MatrixXd lhs = phi.evaluate(t, s) * phi.evaluate(s, r);
                CHECK((lhs - phi.evaluate(t, r)).norm() < 1e-8);
            }
}
