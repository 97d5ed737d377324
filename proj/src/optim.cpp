#include "superatom/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace superatom {

Eigen::VectorXd Bounds::clamp(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out = x;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        out(i) = std::clamp(x(i), lower(i), upper(i));
    return out;
}

bool Bounds::pinned(const Eigen::VectorXd& x, int i, double rel) const {
    const double span = upper(i) - lower(i);
    return x(i) - lower(i) < rel * span || upper(i) - x(i) < rel * span;
}

SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                          const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                          const Bounds& bounds, const SimplexOptions& opts) {
    const int n = static_cast<int>(x0.size());
    std::vector<Eigen::VectorXd> pts(n + 1);
    std::vector<double> vals(n + 1);
    pts[0] = bounds.clamp(x0);
    vals[0] = f(pts[0]);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd p = pts[0];
        p(i) += step(i);
        pts[i + 1] = bounds.clamp(p);
        if ((pts[i + 1] - pts[0]).norm() < 1e-14) {
            p(i) -= 2.0 * step(i);
            pts[i + 1] = bounds.clamp(p);
        }
        vals[i + 1] = f(pts[i + 1]);
    }

    auto order = [&]() {
        std::vector<int> idx(n + 1);
        for (int i = 0; i <= n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return vals[a] < vals[b]; });
        std::vector<Eigen::VectorXd> p2(n + 1);
        std::vector<double> v2(n + 1);
        for (int i = 0; i <= n; ++i) {
            p2[i] = pts[idx[i]];
            v2[i] = vals[idx[i]];
        }
        pts = std::move(p2);
        vals = std::move(v2);
    };

    SimplexResult result;
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        order();
        result.iterations = iter;
        const double fspread = std::abs(vals[n] - vals[0]);
        double xspread = 0.0;
        for (int i = 1; i <= n; ++i) xspread = std::max(xspread, (pts[i] - pts[0]).norm());
        if (fspread < opts.f_tol * (1.0 + std::abs(vals[0])) && xspread < opts.x_tol) {
            result.converged = true;
            break;
        }
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) centroid += pts[i];
        centroid /= n;

        const Eigen::VectorXd xr = bounds.clamp(centroid + (centroid - pts[n]));
        const double fr = f(xr);
        if (fr < vals[0]) {
            const Eigen::VectorXd xe = bounds.clamp(centroid + 2.0 * (centroid - pts[n]));
            const double fe = f(xe);
            if (fe < fr) {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if (fr < vals[n - 1]) {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            const Eigen::VectorXd xc = bounds.clamp(centroid + 0.5 * (pts[n] - centroid));
            const double fc = f(xc);
            if (fc < vals[n]) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for (int i = 1; i <= n; ++i) {
                    pts[i] = bounds.clamp(pts[0] + 0.5 * (pts[i] - pts[0]));
                    vals[i] = f(pts[i]);
                }
            }
        }
    }
    order();
    result.x = pts[0];
    result.value = vals[0];
    return result;
}

GaussNewtonResult gauss_newton(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals,
    const Eigen::VectorXd& x0, const Bounds& bounds, const GaussNewtonOptions& opts) {
    GaussNewtonResult result;
    Eigen::VectorXd x = bounds.clamp(x0);
    Eigen::VectorXd r = residuals(x);
    double loss = r.squaredNorm();
    double lambda = 1e-3;
    const int n = static_cast<int>(x.size());

    Eigen::MatrixXd jt_j;
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        result.iterations = iter;
        Eigen::MatrixXd jac(r.size(), n);
        for (int i = 0; i < n; ++i) {
            const double h = opts.fd_step * std::max(1.0, std::abs(x(i)));
            Eigen::VectorXd xp = x;
            xp(i) = std::min(x(i) + h, bounds.upper(i));
            const double dh = xp(i) - x(i);
            if (dh <= 0.0) {
                xp(i) = std::max(x(i) - h, bounds.lower(i));
                jac.col(i) = (residuals(xp) - r) / (xp(i) - x(i));
            } else {
                jac.col(i) = (residuals(xp) - r) / dh;
            }
        }
        jt_j = jac.transpose() * jac;
        const Eigen::VectorXd jt_r = jac.transpose() * r;
        bool improved = false;
        for (int attempt = 0; attempt < 8; ++attempt) {
            Eigen::MatrixXd damped = jt_j;
            damped.diagonal() += lambda * jt_j.diagonal().cwiseMax(1e-12);
            const Eigen::VectorXd step = damped.ldlt().solve(jt_r);
            const Eigen::VectorXd xn = bounds.clamp(x - step);
            const Eigen::VectorXd rn = residuals(xn);
            const double ln = rn.squaredNorm();
            if (ln < loss) {
                x = xn;
                r = rn;
                const double gain = loss - ln;
                loss = ln;
                lambda = std::max(lambda * 0.3, 1e-12);
                improved = true;
                if (gain < opts.f_tol * (1.0 + loss)) result.converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved || result.converged) break;
    }

    result.x = x;
    result.loss = loss;
    const double dof = std::max<double>(1.0, static_cast<double>(r.size()) - n);
    const double sigma2 = loss / dof;
    Eigen::MatrixXd reg = jt_j;
    reg.diagonal() += 1e-300 * Eigen::VectorXd::Ones(n);
    result.covariance = sigma2 * reg.completeOrthogonalDecomposition().pseudoInverse();
    return result;
}

LinearFit linear_weighted_fit(const std::vector<double>& x, const std::vector<double>& y,
                              const std::vector<double>& w) {
    if (x.size() != y.size() || x.size() < 3)
        throw std::invalid_argument("linear fit needs at least 3 points");
    if (!w.empty() && w.size() != x.size())
        throw std::invalid_argument("weight size mismatch");

    double sw = 0, swx = 0, swxx = 0, swy = 0, swxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double wi = w.empty() ? 1.0 : w[i];
        sw += wi;
        swx += wi * x[i];
        swxx += wi * x[i] * x[i];
        swy += wi * y[i];
        swxy += wi * x[i] * y[i];
    }
    const double det = sw * swxx - swx * swx;
    if (std::abs(det) < 1e-12 * sw * sw)
        throw std::invalid_argument("degenerate abscissae in linear fit");

    LinearFit fit;
    fit.slope = (sw * swxy - swx * swy) / det;
    fit.intercept = (swxx * swy - swx * swxy) / det;

    double ssr = 0.0, sst = 0.0;
    const double ymean = swy / sw;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double wi = w.empty() ? 1.0 : w[i];
        const double pred = fit.intercept + fit.slope * x[i];
        ssr += wi * (y[i] - pred) * (y[i] - pred);
        sst += wi * (y[i] - ymean) * (y[i] - ymean);
    }
    fit.r_squared = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
    const double dof = std::max<double>(1.0, static_cast<double>(x.size()) - 2);
    const double sigma2 = ssr / dof;
    fit.slope_err = std::sqrt(sigma2 * sw / det);
    fit.intercept_err = std::sqrt(sigma2 * swxx / det);
    return fit;
}

}  // namespace superatom
