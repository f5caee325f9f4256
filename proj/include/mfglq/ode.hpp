#pragma once

#include <functional>
#include <optional>

#include "mfglq/types.hpp"

namespace mfglq {

/// Right-hand side of d y/dt = f(t, y).
using OdeRhs = std::function<VectorXd(double, const VectorXd&)>;

constexpr double kBlowUpThreshold = 1e12;

struct OdePath {
    std::vector<double> times;       // in integration order (t0 -> t1)
    std::vector<VectorXd> states;    // states[k] at times[k]; truncated on blow-up
    std::optional<double> blow_up;   // last good time before divergence

    const VectorXd& back_state() const { return states.back(); }
};

/// Classical fixed-step RK4 from t0 to t1 (t1 < t0 integrates backward).
/// Aborts with blow_up set when any component leaves [-1e12, 1e12] or turns
/// non-finite; states then hold the samples up to the last good node.
OdePath rk4_integrate(const OdeRhs& f, const VectorXd& y0, double t0, double t1, int n_steps);

/// One RK4 step (exposed for solvers that manage their own node loops).
VectorXd rk4_step(const OdeRhs& f, double t, const VectorXd& y, double h);

inline VectorXd mat_to_vec(const MatrixXd& m) {
    return Eigen::Map<const VectorXd>(m.data(), m.size());
}
inline MatrixXd vec_to_mat(const VectorXd& v, int rows, int cols) {
    return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

/// State-transition matrix of d Phi/dt = M(t) Phi, Phi(0,0) = I, sampled on a
/// grid. evaluate(i, j) composes Phi(t_i, t_j) = Phi(t_i,0) Phi(t_j,0)^{-1}.
class FundamentalSolution {
public:
    using Generator = std::function<MatrixXd(double)>;

    FundamentalSolution(const Generator& generator, int dim, const TimeGrid& grid);

    const TimeGrid& grid() const { return grid_; }
    int dim() const { return dim_; }

    /// Phi(t_k, 0)
    const MatrixXd& at_node(int k) const { return samples_[k]; }

    /// Phi(t_i, t_j) for grid nodes i, j
    MatrixXd evaluate(int i, int j) const;

    /// max over grid triples used by the cocycle test
    double min_sample_rcond() const { return min_rcond_; }

private:
    TimeGrid grid_;
    int dim_;
    std::vector<MatrixXd> samples_;
    std::vector<MatrixXd> inverses_;
    double min_rcond_ = 1.0;
};

} // namespace mfglq
