#pragma once

#include <string>
#include <variant>

#include "mfglq/report.hpp"
#include "mfglq/types.hpp"

namespace mfglq {

enum class ModelKind { emfg, emftc };

/// Full coefficient set of the linear-quadratic problem. The same layout
/// serves the game (EMFG) and the control (EMFTC) formulation; they differ in
/// which derived coefficients the solvers build from it.
///
/// Dimensions: A, Abar, sigma, Q, Qbar, S, Sbar are n x n; B, Bbar, N are
/// n x m; P, Pbar, R, Rbar are m x m. Terminal QT, QbarT, ST are n x n.
struct LQModelData {
    int n = 0;            // state dimension
    int m = 0;            // control dimension
    double T = 1.0;       // horizon
    double delta = 1e-6;  // convexity margin

    MatrixPath A, B, Abar, Bbar, sigma;
    MatrixPath Q, P, Qbar, Pbar, S, Sbar, R, Rbar, N;
    MatrixXd QT, QbarT, ST;

    VectorXd x0_mean;
    MatrixXd x0_cov;
};

struct EMFGModel : LQModelData {};

struct EMFTCModel : LQModelData {
    // Derived mean-coefficient weights of the control formulation.
    MatrixXd Qtilde(double t) const;                     // (I-S^T) Qbar (I-S)
    MatrixXd Ptilde(double t) const;                     // (I-R^T) Pbar (I-R)
    MatrixXd Ntilde(double t) const;                     // (I-Sbar^T) N (I-Rbar)
    MatrixXd QtildeT() const;                            // built from the terminal matrices
};

/// Reduced coefficients of the expected forward-backward system. Evaluated
/// lazily from the model so they stay consistent with it by construction.
class ReducedCoefficients {
public:
    explicit ReducedCoefficients(const EMFGModel& model) : model_(&model) {}

    MatrixXd Pbar_cal(double t) const;   // Pbar (I-R),      m x m
    MatrixXd Qbar_cal(double t) const;   // Qbar (I-S),      n x n
    MatrixXd Rbar_cal(double t) const;   // N (I-Rbar),      n x m
    MatrixXd Sbar_cal(double t) const;   // N^T (I-Sbar),    m x n
    MatrixXd QbarT_cal() const;          // QbarT (I-ST)

    const EMFGModel& model() const { return *model_; }

private:
    const EMFGModel* model_;
};

ReducedCoefficients reduce(const EMFGModel& model);

using LoadedModel = std::variant<EMFGModel, EMFTCModel>;

/// Parses and fully validates a model file (see README for the JSON schema).
/// Throws std::runtime_error with a one-line message on parse errors,
/// dimension mismatches, non-PSD weights or delta-margin violations.
LoadedModel load_model(const std::string& path);
EMFGModel load_emfg_model(const std::string& path);
EMFTCModel load_emftc_model(const std::string& path);

EMFGModel parse_emfg_model(const nlohmann::json& j);
EMFTCModel parse_emftc_model(const nlohmann::json& j);

nlohmann::json model_to_json(const LQModelData& model, ModelKind kind);

/// Validates the standing assumptions (dimensions, PSD weights, the
/// delta-margins on Q+Qbar and P+Pbar) on a probe grid; throws on violation.
void validate_model(const LQModelData& model);

/// Checks the standing convexity assumption
///   (Q+Qbar) - N (P+Pbar)^{-1} N^T > delta I   and
///   B (P+Pbar)^{-1} B^T > delta I
/// at every grid point; reports the minimum margins and the worst time.
ConditionReport validate_convexity(const LQModelData& model, const TimeGrid& grid);

} // namespace mfglq
