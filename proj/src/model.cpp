#include "mfglq/model.hpp"

#include <cstdio>
#include <fstream>
#include <limits>

#include "mfglq/linalg.hpp"

namespace mfglq {

namespace {

MatrixXd parse_matrix(const nlohmann::json& j, const char* name) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw std::runtime_error(std::string("model: ") + name + " must be a 2-d array");
    const size_t rows = j.size(), cols = j[0].size();
    MatrixXd m(rows, cols);
    for (size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols)
            throw std::runtime_error(std::string("model: ragged rows in ") + name);
        for (size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

nlohmann::json matrix_to_json(const MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

MatrixPath parse_path(const nlohmann::json& coeffs, const char* name, int rows, int cols) {
    if (!coeffs.contains(name)) return MatrixPath::zero(rows, cols);
    const auto& j = coeffs.at(name);
    const std::string type = j.value("type", "constant");
    if (type == "constant") {
        MatrixXd v = parse_matrix(j.at("value"), name);
        if (v.rows() != rows || v.cols() != cols)
            throw std::runtime_error(std::string("model: dimension mismatch in ") + name);
        return MatrixPath::constant(v);
    }
    if (type == "samples") {
        std::vector<double> times = j.at("times").get<std::vector<double>>();
        std::vector<MatrixXd> values;
        for (const auto& v : j.at("values")) {
            MatrixXd mv = parse_matrix(v, name);
            if (mv.rows() != rows || mv.cols() != cols)
                throw std::runtime_error(std::string("model: dimension mismatch in ") + name);
            values.push_back(std::move(mv));
        }
        const std::string interp = j.value("interp", "linear");
        if (interp != "linear")
            throw std::runtime_error(std::string("model: unsupported interp for ") + name);
        return MatrixPath::sampled(std::move(times), std::move(values));
    }
    throw std::runtime_error(std::string("model: unknown path type for ") + name);
}

nlohmann::json path_to_json(const MatrixPath& p) {
    nlohmann::json j;
    if (p.is_constant()) {
        j["type"] = "constant";
        j["value"] = matrix_to_json(p.constant_value());
    } else {
        j["type"] = "samples";
        j["times"] = p.sample_times();
        nlohmann::json values = nlohmann::json::array();
        for (const auto& v : p.sample_values()) values.push_back(matrix_to_json(v));
        j["values"] = values;
        j["interp"] = "linear";
    }
    return j;
}

void parse_common(const nlohmann::json& j, LQModelData& md) {
    md.n = j.at("n").get<int>();
    md.m = j.at("m").get<int>();
    md.T = j.at("T").get<double>();
    md.delta = j.value("delta", 1e-6);
    if (md.n < 1 || md.m < 1) throw std::runtime_error("model: n and m must be positive");
    if (!(md.T > 0.0)) throw std::runtime_error("model: T must be positive");
    if (!(md.delta > 0.0)) throw std::runtime_error("model: delta must be positive");

    const auto& coeffs = j.at("coefficients");
    const int n = md.n, m = md.m;
    md.A = parse_path(coeffs, "A", n, n);
    md.B = parse_path(coeffs, "B", n, m);
    md.Abar = parse_path(coeffs, "Abar", n, n);
    md.Bbar = parse_path(coeffs, "Bbar", n, m);
    md.sigma = parse_path(coeffs, "sigma", n, n);
    md.Q = parse_path(coeffs, "Q", n, n);
    md.P = parse_path(coeffs, "P", m, m);
    md.Qbar = parse_path(coeffs, "Qbar", n, n);
    md.Pbar = parse_path(coeffs, "Pbar", m, m);
    md.S = parse_path(coeffs, "S", n, n);
    md.Sbar = parse_path(coeffs, "Sbar", n, n);
    md.R = parse_path(coeffs, "R", m, m);
    md.Rbar = parse_path(coeffs, "Rbar", m, m);
    md.N = parse_path(coeffs, "N", n, m);

    const auto zero_n = MatrixXd::Zero(n, n);
    if (j.contains("terminal")) {
        const auto& t = j.at("terminal");
        md.QT = t.contains("QT") ? parse_matrix(t.at("QT"), "QT") : zero_n;
        md.QbarT = t.contains("QbarT") ? parse_matrix(t.at("QbarT"), "QbarT") : zero_n;
        md.ST = t.contains("ST") ? parse_matrix(t.at("ST"), "ST") : zero_n;
    } else {
        md.QT = md.QbarT = md.ST = zero_n;
    }
    if (md.QT.rows() != n || md.QT.cols() != n || md.QbarT.rows() != n ||
        md.QbarT.cols() != n || md.ST.rows() != n || md.ST.cols() != n)
        throw std::runtime_error("model: terminal matrices must be n x n");

    if (j.contains("x0_mean")) {
        auto v = j.at("x0_mean").get<std::vector<double>>();
        if ((int)v.size() != n) throw std::runtime_error("model: x0_mean must have length n");
        md.x0_mean = Eigen::Map<VectorXd>(v.data(), n);
    } else {
        md.x0_mean = VectorXd::Zero(n);
    }
    if (j.contains("x0_cov")) {
        md.x0_cov = parse_matrix(j.at("x0_cov"), "x0_cov");
        if (md.x0_cov.rows() != n || md.x0_cov.cols() != n)
            throw std::runtime_error("model: x0_cov must be n x n");
    } else {
        md.x0_cov = MatrixXd::Zero(n, n);
    }
}

void check_psd_path(const MatrixPath& p, double T, const char* name) {
    // PSD is checked on the path's own samples plus a uniform probe.
    auto check_at = [&](const MatrixXd& v, double t) {
        if (!is_psd(v)) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "model: non-PSD weight %s at t=%g", name, t);
            throw std::runtime_error(buf);
        }
    };
    if (p.is_constant()) {
        check_at(p.constant_value(), 0.0);
        return;
    }
    for (size_t i = 0; i < p.sample_times().size(); ++i)
        check_at(p.sample_values()[i], p.sample_times()[i]);
    for (int k = 0; k <= 64; ++k) {
        const double t = T * k / 64.0;
        check_at(p(t), t);
    }
}

} // namespace

MatrixXd EMFTCModel::Qtilde(double t) const {
    const MatrixXd I = MatrixXd::Identity(n, n);
    const MatrixXd s = S(t);
    return (I - s.transpose()) * Qbar(t) * (I - s);
}

MatrixXd EMFTCModel::Ptilde(double t) const {
    // reduced with R (the mean-deviation scaling of the control penalty),
    // matching the first-order condition of the mean control
    const MatrixXd I = MatrixXd::Identity(m, m);
    const MatrixXd r = R(t);
    return (I - r.transpose()) * Pbar(t) * (I - r);
}

MatrixXd EMFTCModel::Ntilde(double t) const {
    return (MatrixXd::Identity(n, n) - Sbar(t).transpose()) * N(t) *
           (MatrixXd::Identity(m, m) - Rbar(t));
}

MatrixXd EMFTCModel::QtildeT() const {
    const MatrixXd I = MatrixXd::Identity(n, n);
    return (I - ST.transpose()) * QbarT * (I - ST);
}

MatrixXd ReducedCoefficients::Pbar_cal(double t) const {
    return model_->Pbar(t) * (MatrixXd::Identity(model_->m, model_->m) - model_->R(t));
}
MatrixXd ReducedCoefficients::Qbar_cal(double t) const {
    return model_->Qbar(t) * (MatrixXd::Identity(model_->n, model_->n) - model_->S(t));
}
MatrixXd ReducedCoefficients::Rbar_cal(double t) const {
    return model_->N(t) * (MatrixXd::Identity(model_->m, model_->m) - model_->Rbar(t));
}
MatrixXd ReducedCoefficients::Sbar_cal(double t) const {
    return model_->N(t).transpose() *
           (MatrixXd::Identity(model_->n, model_->n) - model_->Sbar(t));
}
MatrixXd ReducedCoefficients::QbarT_cal() const {
    return model_->QbarT * (MatrixXd::Identity(model_->n, model_->n) - model_->ST);
}

ReducedCoefficients reduce(const EMFGModel& model) { return ReducedCoefficients(model); }

void validate_model(const LQModelData& model) {
    check_psd_path(model.Q, model.T, "Q");
    check_psd_path(model.Qbar, model.T, "Qbar");
    check_psd_path(model.P, model.T, "P");
    check_psd_path(model.Pbar, model.T, "Pbar");
    if (!is_psd(model.QT)) throw std::runtime_error("model: non-PSD weight QT");
    if (!is_psd(model.QbarT)) throw std::runtime_error("model: non-PSD weight QbarT");
    if (!is_psd(model.x0_cov)) throw std::runtime_error("model: x0_cov must be PSD");

    // Q+Qbar >= delta I and P+Pbar >= delta I on a probe grid.
    for (int k = 0; k <= 64; ++k) {
        const double t = model.T * k / 64.0;
        const double mq = lambda_min(model.Q(t) + model.Qbar(t));
        const double mp = lambda_min(model.P(t) + model.Pbar(t));
        if (mq < model.delta - 1e-12 || mp < model.delta - 1e-12) {
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "model: delta-margin violated at t=%g (Q+Qbar margin %g, P+Pbar margin %g)",
                          t, mq, mp);
            throw std::runtime_error(buf);
        }
    }
}

EMFGModel parse_emfg_model(const nlohmann::json& j) {
    EMFGModel m;
    parse_common(j, m);
    validate_model(m);
    return m;
}

EMFTCModel parse_emftc_model(const nlohmann::json& j) {
    EMFTCModel m;
    parse_common(j, m);
    validate_model(m);
    return m;
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("model file not found: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("model parse error in " + path + ": " + e.what());
    }
    const std::string kind = j.value("kind", "emfg");
    if (kind == "emfg") return parse_emfg_model(j);
    if (kind == "emftc") return parse_emftc_model(j);
    throw std::runtime_error("model: unknown kind '" + kind + "' in " + path);
}

EMFGModel load_emfg_model(const std::string& path) {
    auto v = load_model(path);
    if (auto* m = std::get_if<EMFGModel>(&v)) return *m;
    throw std::runtime_error("expected an emfg model: " + path);
}

EMFTCModel load_emftc_model(const std::string& path) {
    auto v = load_model(path);
    if (auto* m = std::get_if<EMFTCModel>(&v)) return *m;
    throw std::runtime_error("expected an emftc model: " + path);
}

nlohmann::json model_to_json(const LQModelData& model, ModelKind kind) {
    nlohmann::json j;
    j["kind"] = kind == ModelKind::emfg ? "emfg" : "emftc";
    j["n"] = model.n;
    j["m"] = model.m;
    j["T"] = model.T;
    j["delta"] = model.delta;
    std::vector<double> x0(model.x0_mean.data(), model.x0_mean.data() + model.n);
    j["x0_mean"] = x0;
    j["x0_cov"] = matrix_to_json(model.x0_cov);
    nlohmann::json coeffs;
    coeffs["A"] = path_to_json(model.A);
    coeffs["B"] = path_to_json(model.B);
    coeffs["Abar"] = path_to_json(model.Abar);
    coeffs["Bbar"] = path_to_json(model.Bbar);
    coeffs["sigma"] = path_to_json(model.sigma);
    coeffs["Q"] = path_to_json(model.Q);
    coeffs["P"] = path_to_json(model.P);
    coeffs["Qbar"] = path_to_json(model.Qbar);
    coeffs["Pbar"] = path_to_json(model.Pbar);
    coeffs["S"] = path_to_json(model.S);
    coeffs["Sbar"] = path_to_json(model.Sbar);
    coeffs["R"] = path_to_json(model.R);
    coeffs["Rbar"] = path_to_json(model.Rbar);
    coeffs["N"] = path_to_json(model.N);
    j["coefficients"] = coeffs;
    j["terminal"] = {{"QT", matrix_to_json(model.QT)},
                     {"QbarT", matrix_to_json(model.QbarT)},
                     {"ST", matrix_to_json(model.ST)}};
    return j;
}

ConditionReport validate_convexity(const LQModelData& model, const TimeGrid& grid) {
    ConditionReport rep;
    rep.theorem_id = "convexity";
    double min_margin_q = std::numeric_limits<double>::infinity();
    double min_margin_b = std::numeric_limits<double>::infinity();
    double worst_t = 0.0;
    for (int k = 0; k < grid.n_nodes(); ++k) {
        const double t = grid.node(k);
        const MatrixXd ppb = model.P(t) + model.Pbar(t);
        if (rcond(ppb) < 1e-10)
            throw std::runtime_error("validate_convexity: P+Pbar singular at t=" + std::to_string(t));
        const MatrixXd ppb_inv = ppb.inverse();
        const MatrixXd nt = model.N(t);
        const MatrixXd bt = model.B(t);
        const double mq =
            lambda_min(model.Q(t) + model.Qbar(t) - nt * ppb_inv * nt.transpose()) - model.delta;
        const double mb = lambda_min(bt * ppb_inv * bt.transpose()) - model.delta;
        const double margin = std::min(mq, mb);
        if (margin < std::min(min_margin_q, min_margin_b)) worst_t = t;
        min_margin_q = std::min(min_margin_q, mq);
        min_margin_b = std::min(min_margin_b, mb);
    }
    rep.scalars["min_margin_state"] = min_margin_q;    // lambda_min(Q+Qbar - N(P+Pbar)^{-1}N^T) - delta
    rep.scalars["min_margin_control"] = min_margin_b;  // lambda_min(B(P+Pbar)^{-1}B^T) - delta
    rep.scalars["delta"] = model.delta;
    rep.holds = min_margin_q > 0.0 && min_margin_b > 0.0;
    if (!rep.holds) rep.witness_t = worst_t;
    return rep;
}

} // namespace mfglq
