#include <doctest.h>

#include <fstream>

#include "mfglq/linalg.hpp"
#include "mfglq/model.hpp"
#include "testutil.hpp"

using namespace mfglq;
using testutil::scalar_model;

TEST_CASE("counterexample file loads with its stated structure") {
    EMFGModel m = load_emfg_model(testutil::data_file("counterexample.json"));
    CHECK(m.n == 2);
    CHECK(m.m == 2);
    CHECK((m.S(0.1) - MatrixXd::Identity(2, 2)).norm() == 0.0);
    CHECK((m.R(0.1) - MatrixXd::Identity(2, 2)).norm() == 0.0);
    CHECK((m.B(0.1) - MatrixXd::Identity(2, 2)).norm() == 0.0);
    CHECK(m.Bbar(0.1).norm() == 0.0);
    // the reduced mean weights vanish: Pbar_cal = Qbar_cal = 0
    ReducedCoefficients rc = reduce(m);
    CHECK(rc.Pbar_cal(0.2).norm() == 0.0);
    CHECK(rc.Qbar_cal(0.2).norm() == 0.0);
}

TEST_CASE("negative state weight is rejected") {
    nlohmann::json j = model_to_json(scalar_model<EMFGModel>({{"Q", 1.0}, {"P", 1.0}}),
                                     ModelKind::emfg);
    j["coefficients"]["Q"]["value"][0][0] = -1.0;
    CHECK_THROWS_WITH_AS(parse_emfg_model(j), doctest::Contains("non-PSD weight"),
                         std::runtime_error);
}

TEST_CASE("delta margin is enforced") {
    nlohmann::json j = model_to_json(
        scalar_model<EMFGModel>({{"Q", 1.0}, {"P", 1.0}, {"delta", 0.5}}), ModelKind::emfg);
    j["coefficients"]["P"]["value"][0][0] = 0.25;   // P+Pbar below delta
    CHECK_THROWS_WITH_AS(parse_emfg_model(j), doctest::Contains("delta-margin"),
                         std::runtime_error);
}

TEST_CASE("dimension mismatch is rejected") {
    nlohmann::json j = model_to_json(scalar_model<EMFGModel>({{"Q", 1.0}, {"P", 1.0}}),
                                     ModelKind::emfg);
    j["coefficients"]["B"]["value"] = {{1.0, 0.0}};
    CHECK_THROWS_WITH_AS(parse_emfg_model(j), doctest::Contains("dimension mismatch"),
                         std::runtime_error);
}

TEST_CASE("missing coefficients default to zero matrices of the right shape") {
    nlohmann::json j;
    j["kind"] = "emfg";
    j["n"] = 2;
    j["m"] = 1;
    j["T"] = 1.0;
    j["delta"] = 0.1;
    j["coefficients"] = {{"Q", {{"type", "constant"}, {"value", {{1.0, 0.0}, {0.0, 1.0}}}}},
                         {"P", {{"type", "constant"}, {"value", {{1.0}}}}}};
    EMFGModel m = parse_emfg_model(j);
    CHECK(m.Abar(0.5).rows() == 2);
    CHECK(m.Abar(0.5).norm() == 0.0);
    CHECK(m.N(0.5).rows() == 2);
    CHECK(m.N(0.5).cols() == 1);
    CHECK(m.N(0.5).norm() == 0.0);
    CHECK(m.QT.norm() == 0.0);
    CHECK(m.x0_mean.size() == 2);
}

TEST_CASE("malformed files raise parse errors") {
    CHECK_THROWS_WITH_AS(load_model(testutil::data_file("no_such_file.json")),
                         doctest::Contains("not found"), std::runtime_error);
    const std::string bad = "bad_model_test.json";
    {
        std::ofstream out(bad);
        out << "{ this is not json";
    }
    CHECK_THROWS_WITH_AS(load_model(bad), doctest::Contains("parse error"), std::runtime_error);
}

TEST_CASE("scalar constant model loads with constant paths") {
    EMFGModel m = load_emfg_model(testutil::data_file("scalar_k.json"));
    CHECK(m.n == 1);
    CHECK(m.A.is_constant());
    CHECK(m.Q.is_constant());
    CHECK(m.Q(0.37)(0, 0) == 1.0);
}

TEST_CASE("reduce: plain products") {
    // S = 0 leaves Qbar untouched
    auto m = scalar_model<EMFGModel>({{"Qbar", 2.0}});
    CHECK(reduce(m).Qbar_cal(0.3)(0, 0) == 2.0);
    // R = I kills Pbar_cal
    auto m2 = scalar_model<EMFGModel>({{"Pbar", 3.0}, {"R", 1.0}});
    CHECK(reduce(m2).Pbar_cal(0.3)(0, 0) == 0.0);
}

TEST_CASE("reduce re-evaluates to the defining product on sampled paths") {
    std::vector<double> times{0.0, 0.5, 1.0};
    std::vector<MatrixXd> qbar{testutil::m1(1.0), testutil::m1(2.0), testutil::m1(1.5)};
    std::vector<MatrixXd> s{testutil::m1(0.1), testutil::m1(0.4), testutil::m1(0.2)};
    auto m = scalar_model<EMFGModel>({});
    m.Qbar = MatrixPath::sampled(times, qbar);
    m.S = MatrixPath::sampled(times, s);
    ReducedCoefficients rc = reduce(m);
    for (double t : {0.0, 0.2, 0.5, 0.77, 1.0}) {
        const MatrixXd expect = m.Qbar(t) * (MatrixXd::Identity(1, 1) - m.S(t));
        CHECK((rc.Qbar_cal(t) - expect).norm() == 0.0);
    }
}

TEST_CASE("convexity check: margins of the scalar example") {
    auto m = scalar_model<EMFGModel>(
        {{"Q", 1.0}, {"Qbar", 1.0}, {"P", 1.0}, {"Pbar", 1.0}, {"B", 1.0}, {"delta", 0.1}});
    ConditionReport rep = validate_convexity(m, TimeGrid(1.0, 64));
    CHECK(rep.holds);
    CHECK(rep.scalars.at("min_margin_state") == doctest::Approx(1.9));
    CHECK(rep.scalars.at("min_margin_control") == doctest::Approx(0.4));
}

TEST_CASE("convexity check: large cross term fails with a witness") {
    auto m = scalar_model<EMFGModel>(
        {{"Q", 1.0}, {"Qbar", 1.0}, {"P", 1.0}, {"Pbar", 1.0}, {"B", 1.0}, {"N", 2.0},
         {"delta", 0.1}});
    ConditionReport rep = validate_convexity(m, TimeGrid(1.0, 64));
    CHECK(!rep.holds);
    CHECK(rep.witness_t.has_value());
}

TEST_CASE("convexity check: zero actuation fails the control inequality") {
    auto m = scalar_model<EMFGModel>(
        {{"Q", 1.0}, {"Qbar", 1.0}, {"P", 1.0}, {"Pbar", 1.0}, {"delta", 0.1}});
    ConditionReport rep = validate_convexity(m, TimeGrid(1.0, 64));
    CHECK(!rep.holds);
    CHECK(rep.scalars.at("min_margin_control") < 0.0);
}

TEST_CASE("constant-path models serialize round-trip byte-identically") {
    EMFGModel m = load_emfg_model(testutil::data_file("lq_demo.json"));
    const std::string once = model_to_json(m, ModelKind::emfg).dump();
    EMFGModel again = parse_emfg_model(model_to_json(m, ModelKind::emfg));
    const std::string twice = model_to_json(again, ModelKind::emfg).dump();
    CHECK(once == twice);
}

TEST_CASE("matrix path interpolation is piecewise linear and clamped") {
    std::vector<double> times{0.0, 1.0};
    std::vector<MatrixXd> values{testutil::m1(1.0), testutil::m1(3.0)};
    MatrixPath p = MatrixPath::sampled(times, values);
    CHECK(p(0.25)(0, 0) == doctest::Approx(1.5));
    CHECK(p(-1.0)(0, 0) == 1.0);
    CHECK(p(2.0)(0, 0) == 3.0);
}

TEST_CASE("emftc tilde weights") {
    auto m = scalar_model<EMFTCModel>({{"Qbar", 0.5}, {"S", 0.2}, {"Pbar", 0.3}, {"R", 0.2},
                                       {"Rbar", 0.1}, {"N", 0.1}, {"Sbar", 0.1}});
    CHECK(m.Qtilde(0.0)(0, 0) == doctest::Approx(0.8 * 0.5 * 0.8));
    CHECK(m.Ptilde(0.0)(0, 0) == doctest::Approx(0.8 * 0.3 * 0.8));
    CHECK(m.Ntilde(0.0)(0, 0) == doctest::Approx(0.9 * 0.1 * 0.9));
}
