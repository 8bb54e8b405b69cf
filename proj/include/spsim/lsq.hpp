#pragma once

// Weighted nonlinear least squares: Levenberg-Marquardt with analytic
// gradients, falling back to a Nelder-Mead simplex on chi^2 when the normal
// matrix becomes singular.

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace spsim::lsq {

/// Model value at abscissa x for parameters p. When `grad` is non-empty it
/// receives df/dp (same length as p).
using Model = std::function<double(double x, std::span<const double> p, std::span<double> grad)>;

/// Parameter vectors outside the model's domain are rejected as trial steps.
using Feasible = std::function<bool(std::span<const double> p)>;

struct Data {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> sigma;  ///< absolute standard errors, > 0
};

struct Options {
    int max_iterations = 500;
    double relative_tolerance = 1e-8;
    double initial_lambda = 1e-3;
    Feasible feasible;
};

struct Solution {
    std::vector<double> params;
    std::vector<double> std_errors;  ///< sqrt(diag((J^T W J)^-1)); NaN when singular
    double chi2 = 0.0;
    int dof = 0;
    int iterations = 0;
    bool converged = false;
    bool used_simplex = false;
    std::string message;
};

double chi_square(const Model& model, const Data& data, std::span<const double> p);

Solution levenberg_marquardt(const Model& model, const Data& data, std::vector<double> start,
                             const Options& options = {});

/// Derivative-free minimization of chi^2; standard errors are filled from the
/// Jacobian at the optimum when it is non-singular.
Solution nelder_mead(const Model& model, const Data& data, std::vector<double> start,
                     const Options& options = {});

}  // namespace spsim::lsq
