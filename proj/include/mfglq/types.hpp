#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace mfglq {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Uniform grid on [0, T]. All solvers, norm sups and simulations share it.
struct TimeGrid {
    double t_end = 1.0;
    int n_steps = 2000;

    TimeGrid() = default;
    TimeGrid(double T, int n) : t_end(T), n_steps(n) {
        if (!(T > 0.0)) throw std::invalid_argument("TimeGrid: T must be positive");
        if (n < 2) throw std::invalid_argument("TimeGrid: n_steps must be >= 2");
    }

    double step() const { return t_end / n_steps; }
    int n_nodes() const { return n_steps + 1; }
    double node(int k) const { return t_end * static_cast<double>(k) / n_steps; }

    std::vector<double> nodes() const {
        std::vector<double> t(n_nodes());
        for (int k = 0; k < n_nodes(); ++k) t[k] = node(k);
        return t;
    }
};

/// Time-varying matrix coefficient: either constant or piecewise-linear in
/// user-supplied samples. Evaluation outside the sample range clamps to the
/// nearest endpoint.
class MatrixPath {
public:
    MatrixPath() = default;

    static MatrixPath constant(const MatrixXd& value) {
        MatrixPath p;
        p.constant_ = value;
        p.rows_ = (int)value.rows();
        p.cols_ = (int)value.cols();
        return p;
    }

    static MatrixPath zero(int rows, int cols) {
        return constant(MatrixXd::Zero(rows, cols));
    }

    static MatrixPath sampled(std::vector<double> times, std::vector<MatrixXd> values) {
        if (times.size() != values.size() || times.size() < 2)
            throw std::invalid_argument("MatrixPath: need >= 2 samples, one time per value");
        for (size_t i = 1; i < times.size(); ++i)
            if (!(times[i] > times[i - 1]))
                throw std::invalid_argument("MatrixPath: sample times must be strictly increasing");
        const auto r = values.front().rows(), c = values.front().cols();
        for (const auto& v : values)
            if (v.rows() != r || v.cols() != c)
                throw std::invalid_argument("MatrixPath: all sampled matrices must share dimensions");
        MatrixPath p;
        p.times_ = std::move(times);
        p.values_ = std::move(values);
        p.rows_ = (int)r;
        p.cols_ = (int)c;
        return p;
    }

    bool is_constant() const { return times_.empty(); }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    const std::vector<double>& sample_times() const { return times_; }
    const std::vector<MatrixXd>& sample_values() const { return values_; }
    const MatrixXd& constant_value() const { return constant_; }

    MatrixXd operator()(double t) const {
        if (is_constant()) return constant_;
        if (t <= times_.front()) return values_.front();
        if (t >= times_.back()) return values_.back();
        // binary search for the bracketing interval
        size_t lo = 0, hi = times_.size() - 1;
        while (hi - lo > 1) {
            size_t mid = (lo + hi) / 2;
            if (times_[mid] <= t) lo = mid; else hi = mid;
        }
        const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
        return (1.0 - w) * values_[lo] + w * values_[hi];
    }

private:
    int rows_ = 0, cols_ = 0;
    MatrixXd constant_;              // used when times_ is empty
    std::vector<double> times_;
    std::vector<MatrixXd> values_;
};

} // namespace mfglq
