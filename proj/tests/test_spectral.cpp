#include <doctest.h>

#include <cmath>

#include "mfglq/linalg.hpp"
#include "mfglq/rng.hpp"
#include "mfglq/spectral.hpp"
#include "testutil.hpp"

using namespace mfglq;
using testutil::scalar_model;

namespace {
const TimeGrid kGrid(1.0, 64);
}

TEST_CASE("eigenvalues and singular values of reference matrices") {
    CHECK((eig_sym(MatrixXd::Identity(2, 2)) - VectorXd::Ones(2)).norm() == 0.0);
    CHECK((singular_values(MatrixXd::Identity(2, 2)) - VectorXd::Ones(2)).norm() == 0.0);

    MatrixXd q(2, 2);
    q << 2.1, -0.3, -0.3, 0.2;   // the two-player example's state weight
    VectorXd ev = eig_sym(q);
    CHECK(ev(0) == doctest::Approx((2.3 - std::sqrt(3.97)) / 2.0).epsilon(1e-12));
    CHECK(ev(1) == doctest::Approx((2.3 + std::sqrt(3.97)) / 2.0).epsilon(1e-12));

    MatrixXd shift(2, 2);
    shift << 0, 1, 0, 0;
    VectorXd sv = singular_values(shift);
    CHECK(sv(0) == doctest::Approx(1.0));
    CHECK(sv(1) == doctest::Approx(0.0));
}

TEST_CASE("eig_sym rejects non-symmetric input") {
    MatrixXd m(2, 2);
    m << 1, 2, 0, 1;
    CHECK_THROWS_AS(eig_sym(m), std::invalid_argument);
}

TEST_CASE("PSD matrices: nonnegative spectrum, singular values match moduli") {
    Rng rng(7, 0);
    for (int trial = 0; trial < 50; ++trial) {
        MatrixXd a(3, 3);
        for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = rng.gaussian();
        MatrixXd psd = a * a.transpose();
        VectorXd ev = eig_sym(psd);
        CHECK(ev.minCoeff() >= -1e-12 * std::max(1.0, ev.maxCoeff()));
        VectorXd sv = singular_values(psd);
        for (int i = 0; i < 3; ++i)
            CHECK(sv(i) == doctest::Approx(std::abs(ev(2 - i))).epsilon(1e-9));
    }
}

TEST_CASE("small-time condition on the bare-control model") {
    // only P is nonzero: alpha = beta = 2, certified iff T < ln2/4
    auto m = scalar_model<EMFGModel>({{"P", 1.0}, {"T", 0.1}});
    ConditionReport rep = check_small_time(m, TimeGrid(m.T, 64));
    CHECK(rep.scalars.at("alpha") == doctest::Approx(2.0));
    CHECK(rep.scalars.at("beta") == doctest::Approx(2.0));
    CHECK(rep.holds);

    m.T = 0.2;
    rep = check_small_time(m, TimeGrid(m.T, 64));
    CHECK(rep.scalars.at("exp_growth") == doctest::Approx(std::exp(0.8)));
    CHECK(!rep.holds);

    m.T = 1e-6;
    CHECK(check_small_time(m, TimeGrid(m.T, 8)).holds);
}

TEST_CASE("refined condition: zero mean-field couplings") {
    auto m = scalar_model<EMFGModel>({{"Q", 1.0}, {"P", 1.0}, {"B", 1.0}, {"A", 0.4}});
    ConditionReport rep = check_refined(m, kGrid);
    CHECK(rep.applicable);
    CHECK(rep.scalars.at("condition1_lhs") == doctest::Approx(0.0));
    CHECK(rep.holds);
}

TEST_CASE("refined condition: classical cross-term reduction") {
    auto m = scalar_model<EMFGModel>({{"Q", 1.0}, {"P", 1.0}, {"B", 1.0}, {"N", 0.5}});
    ConditionReport rep = check_refined(m, kGrid);
    // 2 |||B P^{-1} N|||^2 + |||N P^{-1} N|||^2 = 2(0.25) + 0.0625
    CHECK(rep.scalars.at("condition1_lhs") == doctest::Approx(0.5625).epsilon(1e-12));
    CHECK(rep.holds);
}

TEST_CASE("refined condition fails on the counterexample") {
    EMFGModel m = load_emfg_model(testutil::data_file("counterexample.json"));
    ConditionReport rep = check_refined(m, TimeGrid(m.T, 128));
    CHECK(rep.applicable);
    CHECK(rep.scalars.at("condition1_lhs") > 1.0);
    CHECK(!rep.holds);
}

TEST_CASE("refined condition 2 certifies small horizons") {
    auto m = scalar_model<EMFGModel>(
        {{"Q", 1.0}, {"P", 1.0}, {"B", 1.0}, {"Abar", 0.3}, {"T", 0.01}});
    ConditionReport rep = check_refined(m, TimeGrid(m.T, 32), 1.0);
    CHECK(rep.scalars.at("condition2_applicable") == 1.0);
    CHECK(rep.scalars.at("condition2_T_bound") > m.T);
    CHECK(rep.holds);
}

TEST_CASE("refined condition 2 inapplicable when both transfer norms vanish") {
    auto m = scalar_model<EMFGModel>({{"Q", 1.0}, {"P", 1.0}, {"B", 1.0}});
    ConditionReport rep = check_refined(m, kGrid, 0.5);
    CHECK(rep.scalars.at("condition2_applicable") == 0.0);
    CHECK(rep.holds);   // condition 1 still certifies
}

TEST_CASE("K constants of the scalar example") {
    auto m = scalar_model<EMFGModel>(
        {{"Q", 1.0}, {"Qbar", 1.0}, {"P", 1.0}, {"Pbar", 1.0}, {"B", 1.0}});
    KConstants k = compute_K(m, kGrid);
    CHECK(k.K1 == doctest::Approx(2.0));
    CHECK(k.K2 == doctest::Approx(0.5));
    CHECK(k.K3 == doctest::Approx(0.0));
    CHECK(k.K4 == doctest::Approx(0.0));
    CHECK(k.K5 == doctest::Approx(0.0));
    CHECK(check_global(k).holds);
}

TEST_CASE("opposed mean actuation kills K2") {
    auto m = scalar_model<EMFGModel>(
        {{"Q", 1.0}, {"Qbar", 1.0}, {"P", 1.0}, {"B", 1.0}, {"Bbar", -1.0}});
    KConstants k = compute_K(m, kGrid);
    CHECK(k.K2 == doctest::Approx(0.0));
    CHECK(!check_global(k).holds);
}

TEST_CASE("counterexample: K1, K2 positive yet the global condition fails") {
    EMFGModel m = load_emfg_model(testutil::data_file("counterexample.json"));
    KConstants k = compute_K(m, TimeGrid(m.T, 64));
    CHECK(k.K1 > 0.0);
    CHECK(k.K2 > 0.0);
    CHECK(k.K1 == doctest::Approx((2.3 - std::sqrt(3.97)) / 2.0).epsilon(1e-9));
    ConditionReport rep = check_global(k);
    CHECK(!rep.holds);
    CHECK(rep.scalars.at("lhs") > rep.scalars.at("rhs"));
}

TEST_CASE("global condition window") {
    KConstants k;
    k.K1 = 1.0;
    k.K2 = 1.0;
    ConditionReport rep = check_global(k);
    CHECK(rep.holds);
    CHECK(rep.scalars.at("eps_lo") == doctest::Approx(0.0));
    CHECK(rep.scalars.at("eps_hi") == doctest::Approx(1.0));
}

TEST_CASE("global condition implies a non-empty epsilon window") {
    Rng rng(11, 0);
    int holding = 0;
    for (int trial = 0; trial < 200; ++trial) {
        KConstants k;
        k.K1 = 0.1 + std::abs(rng.gaussian());
        k.K2 = 0.1 + std::abs(rng.gaussian());
        k.K3 = 0.3 * std::abs(rng.gaussian());
        k.K4 = 0.3 * std::abs(rng.gaussian());
        k.K5 = 0.3 * std::abs(rng.gaussian());
        ConditionReport rep = check_global(k);
        if (!rep.holds) continue;
        ++holding;
        CHECK(rep.scalars.at("eps_lo") < rep.scalars.at("eps_hi"));
    }
    CHECK(holding > 10);
}

TEST_CASE("weyl: zero couplings pass, strict margins recorded") {
    auto m = scalar_model<EMFGModel>(
        {{"Q", 1.0}, {"Qbar", 1.0}, {"P", 1.0}, {"Pbar", 1.0}, {"B", 1.0}});
    ConditionReport rep = check_weyl(m, kGrid);
    CHECK(rep.applicable);
    CHECK(rep.holds);
}

TEST_CASE("weyl: scalar mean-actuation bound") {
    // sigma_max(Bbar) = 0.6 against the bound 1 (in multiplied form: 1.2 < 2)
    auto m = scalar_model<EMFGModel>({{"Q", 1.0}, {"Qbar", 1.0}, {"P", 1.0}, {"Pbar", 1.0},
                                      {"B", 1.0}, {"Bbar", 0.6}});
    ConditionReport rep = check_weyl(m, kGrid);
    CHECK(rep.scalars.at("min_margin_Bbar") == doctest::Approx(2.0 - 1.2));
    CHECK(rep.holds);
    m.Bbar = MatrixPath::constant(testutil::m1(1.1));
    CHECK(!check_weyl(m, kGrid).holds);
}

TEST_CASE("weyl needs m >= n") {
    EMFGModel m;
    m.n = 2;
    m.m = 1;
    m.T = 1.0;
    m.A = MatrixPath::zero(2, 2);
    m.B = MatrixPath::constant(MatrixXd::Ones(2, 1));
    m.Abar = MatrixPath::zero(2, 2);
    m.Bbar = MatrixPath::zero(2, 1);
    m.sigma = MatrixPath::zero(2, 2);
    m.Q = MatrixPath::constant(MatrixXd::Identity(2, 2));
    m.P = MatrixPath::constant(MatrixXd::Identity(1, 1));
    m.Qbar = MatrixPath::zero(2, 2);
    m.Pbar = MatrixPath::zero(1, 1);
    m.S = MatrixPath::zero(2, 2);
    m.Sbar = MatrixPath::zero(2, 2);
    m.R = MatrixPath::zero(1, 1);
    m.Rbar = MatrixPath::zero(1, 1);
    m.N = MatrixPath::zero(2, 1);
    m.QT = m.QbarT = m.ST = MatrixXd::Zero(2, 2);
    ConditionReport rep = check_weyl(m, kGrid);
    CHECK(!rep.applicable);
}

// Random-instance generator shared with the acceptance suite's soundness
// criterion (smaller count here).
namespace {
EMFGModel random_weyl_candidate(uint64_t seed) {
    Rng rng(seed, 0);
    const int n = 1 + (int)(rng.uniform() * 2.999);
    const int m = n + (int)(rng.uniform() * 1.999);
    auto randm = [&](int r, int c, double scale) {
        MatrixXd a(r, c);
        for (int i = 0; i < r * c; ++i) a(i / c, i % c) = scale * rng.gaussian();
        return a;
    };
    auto rand_psd = [&](int d, double base) {
        MatrixXd a = randm(d, d, 0.5);
        return MatrixXd(a * a.transpose() + base * MatrixXd::Identity(d, d));
    };
    EMFGModel md;
    md.n = n;
    md.m = m;
    md.T = 1.0;
    md.delta = 1e-6;
    md.A = MatrixPath::constant(randm(n, n, 0.5));
    md.B = MatrixPath::constant(
        MatrixXd(randm(n, m, 0.3) + MatrixXd::Identity(n, m)));
    md.Abar = MatrixPath::constant(randm(n, n, 0.2));
    md.Bbar = MatrixPath::constant(randm(n, m, 0.02));
    md.sigma = MatrixPath::constant(rand_psd(n, 0.1));
    md.Q = MatrixPath::constant(rand_psd(n, 0.5));
    md.P = MatrixPath::constant(rand_psd(m, 0.5));
    md.Qbar = MatrixPath::constant(rand_psd(n, 0.2));
    md.Pbar = MatrixPath::constant(rand_psd(m, 0.2));
    md.S = MatrixPath::constant(randm(n, n, 0.05));
    md.Sbar = MatrixPath::constant(randm(n, n, 0.1));
    md.R = MatrixPath::constant(randm(m, m, 0.02));
    md.Rbar = MatrixPath::constant(randm(m, m, 0.1));
    md.N = MatrixPath::constant(randm(n, m, 0.1));
    md.QT = rand_psd(n, 0.1);
    md.QbarT = rand_psd(n, 0.05);
    md.ST = randm(n, n, 0.05);
    md.x0_mean = VectorXd::Ones(n);
    md.x0_cov = MatrixXd::Zero(n, n);
    return md;
}
} // namespace

TEST_CASE("weyl soundness on seeded random instances") {
    TimeGrid grid(1.0, 16);
    int passed = 0;
    for (uint64_t seed = 0; passed < 30 && seed < 400; ++seed) {
        EMFGModel m = random_weyl_candidate(seed);
        ConditionReport rep = check_weyl(m, grid);
        if (!rep.applicable || !rep.holds) continue;
        ++passed;
        KConstants k = compute_K(m, grid);
        CHECK(k.K1 > 0.0);
        CHECK(k.K2 > 0.0);
    }
    CHECK(passed == 30);
}

TEST_CASE("checks are pure: identical reports on repeat") {
    EMFGModel m = load_emfg_model(testutil::data_file("lq_demo.json"));
    KConstants a = compute_K(m, kGrid), b = compute_K(m, kGrid);
    CHECK(a.K1 == b.K1);
    CHECK(a.K3 == b.K3);
    ConditionReport r1 = check_small_time(m, kGrid), r2 = check_small_time(m, kGrid);
    CHECK(r1.scalars.at("alpha") == r2.scalars.at("alpha"));
}
