#include "spsim/lsq.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spsim/errors.hpp"

namespace spsim::lsq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Linearization {
    Eigen::VectorXd residual;  // (y - f) / sigma
    Eigen::MatrixXd jacobian;  // (df/dp) / sigma
    double chi2 = 0.0;
};

bool finite_all(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Linearization linearize(const Model& model, const Data& data, std::span<const double> p) {
    const auto n = static_cast<Eigen::Index>(data.x.size());
    const auto k = static_cast<Eigen::Index>(p.size());
    Linearization lin{Eigen::VectorXd(n), Eigen::MatrixXd(n, k), 0.0};
    std::vector<double> grad(p.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = data.sigma[i];
        const double f = model(data.x[i], p, grad);
        lin.residual[i] = (data.y[i] - f) / s;
        for (Eigen::Index j = 0; j < k; ++j) lin.jacobian(i, j) = grad[j] / s;
    }
    lin.chi2 = lin.residual.squaredNorm();
    return lin;
}

void check_data(const Data& data, std::size_t n_params) {
    if (data.x.size() != data.y.size() || data.x.size() != data.sigma.size()) {
        throw ConfigError("least squares: x, y and sigma differ in length");
    }
    if (data.x.size() < n_params) throw ConfigError("least squares: fewer points than parameters");
    for (const double s : data.sigma) {
        if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("least squares: sigma must be > 0");
    }
}

// Fills standard errors from (J^T J)^-1; returns false when singular.
bool fill_errors(const Model& model, const Data& data, Solution& sol) {
    const auto lin = linearize(model, data, sol.params);
    const Eigen::MatrixXd normal = lin.jacobian.transpose() * lin.jacobian;
    sol.std_errors.assign(sol.params.size(), kNaN);
    if (!normal.allFinite()) return false;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-14) return false;
    // LDLT silently zeroes null pivots, so rank deficiency shows up only here.
    const Eigen::VectorXd pivots = ldlt.vectorD();
    if (!(pivots.minCoeff() > 1e-14 * pivots.cwiseAbs().maxCoeff())) return false;
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(normal.rows(), normal.cols()));
    for (std::size_t j = 0; j < sol.params.size(); ++j) {
        const double v = cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
        if (!(v >= 0.0) || !std::isfinite(v)) return false;
        sol.std_errors[j] = std::sqrt(v);
    }
    return true;
}

bool feasible(const Options& opt, std::span<const double> p) {
    if (!finite_all(p)) return false;
    return !opt.feasible || opt.feasible(p);
}

}  // namespace

double chi_square(const Model& model, const Data& data, std::span<const double> p) {
    double chi2 = 0.0;
    for (std::size_t i = 0; i < data.x.size(); ++i) {
        const double r = (data.y[i] - model(data.x[i], p, {})) / data.sigma[i];
        chi2 += r * r;
    }
    return chi2;
}

Solution levenberg_marquardt(const Model& model, const Data& data, std::vector<double> start,
                             const Options& options) {
    check_data(data, start.size());
    Solution sol;
    sol.params = std::move(start);
    sol.dof = static_cast<int>(data.x.size()) - static_cast<int>(sol.params.size());
    if (!feasible(options, sol.params)) {
        sol.message = "infeasible starting point";
        sol.std_errors.assign(sol.params.size(), kNaN);
        sol.chi2 = kNaN;
        return sol;
    }

    auto lin = linearize(model, data, sol.params);
    double lambda = options.initial_lambda;
    const auto k = static_cast<Eigen::Index>(sol.params.size());

    for (sol.iterations = 1; sol.iterations <= options.max_iterations; ++sol.iterations) {
        const Eigen::MatrixXd normal = lin.jacobian.transpose() * lin.jacobian;
        const Eigen::VectorXd gradient = lin.jacobian.transpose() * lin.residual;
        const Eigen::VectorXd diag = normal.diagonal();
        if (!normal.allFinite() || !gradient.allFinite() || (diag.array() <= 0.0).any()) {
            auto fallback = nelder_mead(model, data, sol.params, options);
            fallback.iterations += sol.iterations;
            return fallback;
        }

        bool accepted = false;
        bool small_step = false;
        while (!accepted) {
            Eigen::MatrixXd damped = normal;
            damped.diagonal() += lambda * diag;
            Eigen::LLT<Eigen::MatrixXd> llt(damped);
            if (llt.info() != Eigen::Success) {
                auto fallback = nelder_mead(model, data, sol.params, options);
                fallback.iterations += sol.iterations;
                return fallback;
            }
            const Eigen::VectorXd step = llt.solve(gradient);
            std::vector<double> trial(sol.params);
            double rel = 0.0;
            for (Eigen::Index j = 0; j < k; ++j) {
                trial[j] += step[j];
                const double scale = std::max(std::abs(sol.params[j]), 1e-300);
                rel = std::max(rel, std::abs(step[j]) / scale);
            }
            small_step = rel < options.relative_tolerance;
            if (feasible(options, trial)) {
                auto trial_lin = linearize(model, data, trial);
                if (std::isfinite(trial_lin.chi2) && trial_lin.chi2 <= lin.chi2) {
                    sol.params = std::move(trial);
                    lin = std::move(trial_lin);
                    lambda = std::max(lambda * 0.1, 1e-12);
                    accepted = true;
                    break;
                }
            }
            if (small_step) break;
            lambda *= 10.0;
            if (lambda > 1e16) break;
        }
        if (small_step) {
            sol.converged = true;
            break;
        }
        if (!accepted) {
            sol.message = "damping exhausted without reducing chi^2";
            break;
        }
    }
    if (sol.iterations > options.max_iterations) {
        sol.iterations = options.max_iterations;
        sol.message = "iteration cap reached";
    }
    sol.chi2 = lin.chi2;
    if (!fill_errors(model, data, sol)) {
        sol.converged = false;
        if (sol.message.empty()) sol.message = "singular normal matrix at the optimum";
    }
    return sol;
}

Solution nelder_mead(const Model& model, const Data& data, std::vector<double> start,
                     const Options& options) {
    check_data(data, start.size());
    const std::size_t n = start.size();
    auto cost = [&](const std::vector<double>& p) {
        if (!feasible(options, p)) return std::numeric_limits<double>::infinity();
        const double c = chi_square(model, data, p);
        return std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
    };

    std::vector<std::vector<double>> simplex(n + 1, start);
    for (std::size_t j = 0; j < n; ++j) {
        simplex[j + 1][j] = start[j] != 0.0 ? start[j] * 1.05 : 1e-3;
    }
    std::vector<double> values(n + 1);
    for (std::size_t i = 0; i <= n; ++i) values[i] = cost(simplex[i]);

    Solution sol;
    sol.used_simplex = true;
    sol.dof = static_cast<int>(data.x.size()) - static_cast<int>(n);
    const int max_evals = 200 * options.max_iterations;
    int evals = static_cast<int>(n + 1);
    std::vector<std::size_t> order(n + 1);

    while (evals < max_evals) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
        const auto best = order.front();
        const auto worst = order.back();
        const auto second = order[n - 1];

        double spread = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double scale = std::max(std::abs(simplex[best][j]), 1e-300);
                spread = std::max(spread, std::abs(simplex[i][j] - simplex[best][j]) / scale);
            }
        }
        ++sol.iterations;
        if (spread < options.relative_tolerance && std::isfinite(values[best])) {
            sol.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);
        }
        auto along = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j) p[j] = centroid[j] + t * (simplex[worst][j] - centroid[j]);
            return p;
        };

        auto reflected = along(-1.0);
        const double fr = cost(reflected);
        ++evals;
        if (fr < values[best]) {
            auto expanded = along(-2.0);
            const double fe = cost(expanded);
            ++evals;
            if (fe < fr) {
                simplex[worst] = std::move(expanded);
                values[worst] = fe;
            } else {
                simplex[worst] = std::move(reflected);
                values[worst] = fr;
            }
        } else if (fr < values[second]) {
            simplex[worst] = std::move(reflected);
            values[worst] = fr;
        } else {
            auto contracted = fr < values[worst] ? along(-0.5) : along(0.5);
            const double fc = cost(contracted);
            ++evals;
            if (fc < std::min(fr, values[worst])) {
                simplex[worst] = std::move(contracted);
                values[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t j = 0; j < n; ++j) {
                        simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
                    }
                    values[i] = cost(simplex[i]);
                    ++evals;
                }
            }
        }
    }

    const auto best = static_cast<std::size_t>(
        std::min_element(values.begin(), values.end()) - values.begin());
    sol.params = simplex[best];
    sol.chi2 = values[best];
    if (!sol.converged) sol.message = "simplex evaluation cap reached";
    if (!fill_errors(model, data, sol)) {
        sol.converged = false;
        if (sol.message.empty()) sol.message = "singular normal matrix at the simplex optimum";
    }
    return sol;
}

}  // namespace spsim::lsq
