#pragma once

// Shared builders for the test suites.

#include <map>
#include <string>

#include "mfglq/model.hpp"

namespace testutil {

using namespace mfglq;

inline MatrixXd m1(double v) {
    MatrixXd m(1, 1);
    m(0, 0) = v;
    return m;
}

/// Scalar (n = m = 1) model from a name->value map; unnamed coefficients are
/// zero. Bypasses file loading; validation is the caller's business.
template <class ModelT>
ModelT scalar_model(const std::map<std::string, double>& coeffs) {
    ModelT md;
    md.n = 1;
    md.m = 1;
    auto get = [&](const char* name) {
        auto it = coeffs.find(name);
        return it == coeffs.end() ? 0.0 : it->second;
    };
    md.T = coeffs.count("T") ? coeffs.at("T") : 1.0;
    md.delta = coeffs.count("delta") ? coeffs.at("delta") : 1e-6;
    md.A = MatrixPath::constant(m1(get("A")));
    md.B = MatrixPath::constant(m1(get("B")));
    md.Abar = MatrixPath::constant(m1(get("Abar")));
    md.Bbar = MatrixPath::constant(m1(get("Bbar")));
    md.sigma = MatrixPath::constant(m1(get("sigma")));
    md.Q = MatrixPath::constant(m1(get("Q")));
    md.P = MatrixPath::constant(m1(get("P")));
    md.Qbar = MatrixPath::constant(m1(get("Qbar")));
    md.Pbar = MatrixPath::constant(m1(get("Pbar")));
    md.S = MatrixPath::constant(m1(get("S")));
    md.Sbar = MatrixPath::constant(m1(get("Sbar")));
    md.R = MatrixPath::constant(m1(get("R")));
    md.Rbar = MatrixPath::constant(m1(get("Rbar")));
    md.N = MatrixPath::constant(m1(get("N")));
    md.QT = m1(get("QT"));
    md.QbarT = m1(get("QbarT"));
    md.ST = m1(get("ST"));
    md.x0_mean = VectorXd::Constant(1, coeffs.count("x0") ? coeffs.at("x0") : 0.0);
    md.x0_cov = m1(get("x0_cov"));
    return md;
}

inline std::string data_file(const std::string& name) {
    return std::string(MFGLQ_DATA_DIR) + "/" + name;
}

} // namespace testutil
