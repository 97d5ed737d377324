#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace superatom {

struct Bounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    Eigen::VectorXd clamp(const Eigen::VectorXd& x) const;
    bool pinned(const Eigen::VectorXd& x, int i, double rel = 1e-3) const;
};

struct SimplexOptions {
    int max_iterations = 400;
    double f_tol = 1e-10;
    double x_tol = 1e-9;
};

struct SimplexResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Nelder-Mead with candidates projected into the box.
SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                          const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                          const Bounds& bounds, const SimplexOptions& opts = {});

struct GaussNewtonOptions {
    int max_iterations = 60;
    double f_tol = 1e-12;
    double fd_step = 1e-6;  // relative finite-difference step
};

struct GaussNewtonResult {
    Eigen::VectorXd x;
    double loss = 0.0;  // sum of squared residuals
    Eigen::MatrixXd covariance;
    int iterations = 0;
    bool converged = false;
};

// Damped Gauss-Newton on a residual vector with forward-difference
// Jacobian; covariance is sigma^2 (J^T J)^{-1} with sigma^2 from the
// residual variance.
GaussNewtonResult gauss_newton(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals,
    const Eigen::VectorXd& x0, const Bounds& bounds, const GaussNewtonOptions& opts = {});

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_err = 0.0;
    double intercept_err = 0.0;
    double r_squared = 0.0;
};

LinearFit linear_weighted_fit(const std::vector<double>& x, const std::vector<double>& y,
                              const std::vector<double>& w = {});

}  // namespace superatom
