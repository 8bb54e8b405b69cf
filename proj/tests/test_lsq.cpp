#include <doctest.h>

#include <cmath>
#include <random>

#include "spsim/errors.hpp"
#include "spsim/lsq.hpp"

using namespace spsim;

namespace {

double line(double x, std::span<const double> p, std::span<double> g) {
    if (!g.empty()) {
        g[0] = 1.0;
        g[1] = x;
    }
    return p[0] + p[1] * x;
}

double expo(double x, std::span<const double> p, std::span<double> g) {
    const double e = std::exp(-x / p[1]);
    if (!g.empty()) {
        g[0] = e;
        g[1] = p[0] * e * x / (p[1] * p[1]);
        g[2] = 1.0;
    }
    return p[0] * e + p[2];
}

}  // namespace

TEST_CASE("weighted straight line matches the closed-form solution") {
    lsq::Data d;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int i = 0; i < 40; ++i) {
        const double x = 0.25 * i;
        const double s = 0.5 + 0.05 * i;
        d.x.push_back(x);
        d.y.push_back(2.0 - 0.7 * x + s * noise(rng));
        d.sigma.push_back(s);
    }
    // Normal equations by hand.
    double S = 0, Sx = 0, Sy = 0, Sxx = 0, Sxy = 0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        const double w = 1.0 / (d.sigma[i] * d.sigma[i]);
        S += w;
        Sx += w * d.x[i];
        Sy += w * d.y[i];
        Sxx += w * d.x[i] * d.x[i];
        Sxy += w * d.x[i] * d.y[i];
    }
    const double det = S * Sxx - Sx * Sx;
    const double a = (Sxx * Sy - Sx * Sxy) / det;
    const double b = (S * Sxy - Sx * Sy) / det;

    const auto sol = lsq::levenberg_marquardt(line, d, {0.0, 0.0});
    REQUIRE(sol.converged);
    CHECK_FALSE(sol.used_simplex);
    CHECK(sol.params[0] == doctest::Approx(a).epsilon(1e-7));
    CHECK(sol.params[1] == doctest::Approx(b).epsilon(1e-7));
    CHECK(sol.std_errors[0] == doctest::Approx(std::sqrt(Sxx / det)).epsilon(1e-6));
    CHECK(sol.std_errors[1] == doctest::Approx(std::sqrt(S / det)).epsilon(1e-6));
    CHECK(sol.dof == 38);
    CHECK(sol.chi2 == doctest::Approx(lsq::chi_square(line, d, sol.params)));
}

TEST_CASE("noiseless exponential is recovered") {
    lsq::Data d;
    for (int i = 0; i < 200; ++i) {
        const double x = 0.1 * i;
        d.x.push_back(x);
        d.y.push_back(500.0 * std::exp(-x / 2.1) + 3.0);
        d.sigma.push_back(1.0);
    }
    const auto sol = lsq::levenberg_marquardt(expo, d, {300.0, 1.0, 0.0});
    REQUIRE(sol.converged);
    CHECK(sol.params[0] == doctest::Approx(500.0).epsilon(1e-6));
    CHECK(sol.params[1] == doctest::Approx(2.1).epsilon(1e-6));
    CHECK(sol.params[2] == doctest::Approx(3.0).epsilon(1e-5));
    CHECK(sol.chi2 < 1e-8);
}

TEST_CASE("simplex fallback when the Jacobian is singular") {
    // The second parameter never enters the model, so J^T J has a zero column.
    lsq::Model m = [](double x, std::span<const double> p, std::span<double> g) {
        if (!g.empty()) {
            g[0] = x;
            g[1] = 0.0;
        }
        return p[0] * x;
    };
    lsq::Data d{{1, 2, 3, 4}, {2, 4, 6, 8}, {1, 1, 1, 1}};
    const auto sol = lsq::levenberg_marquardt(m, d, {1.0, 5.0});
    CHECK(sol.used_simplex);
    CHECK(sol.params[0] == doctest::Approx(2.0).epsilon(1e-6));
    // Errors cannot be computed for an unidentifiable parameter.
    CHECK_FALSE(sol.converged);
}

TEST_CASE("nelder-mead alone reaches the same optimum") {
    lsq::Data d;
    for (int i = 0; i < 50; ++i) {
        d.x.push_back(i * 0.3);
        d.y.push_back(10.0 * std::exp(-i * 0.3 / 1.5) + 1.0);
        d.sigma.push_back(0.1);
    }
    const auto sol = lsq::nelder_mead(expo, d, {8.0, 1.0, 0.5});
    CHECK(sol.used_simplex);
    REQUIRE(sol.converged);
    CHECK(sol.params[1] == doctest::Approx(1.5).epsilon(1e-5));
    CHECK(std::isfinite(sol.std_errors[1]));
}

TEST_CASE("infeasible steps are rejected") {
    lsq::Data d;
    for (int i = 0; i < 30; ++i) {
        d.x.push_back(i);
        d.y.push_back(5.0 * std::exp(-i / 4.0));
        d.sigma.push_back(0.05);
    }
    lsq::Options opt;
    int calls = 0;
    opt.feasible = [&calls](std::span<const double> p) {
        ++calls;
        return p[1] > 0.0;
    };
    const auto sol = lsq::levenberg_marquardt(expo, d, {1.0, 0.5, 0.0}, opt);
    CHECK(sol.converged);
    CHECK(sol.params[1] > 0.0);
    CHECK(calls > 0);

    const auto bad = lsq::levenberg_marquardt(expo, d, {1.0, -1.0, 0.0}, opt);
    CHECK_FALSE(bad.converged);
    CHECK(bad.message == "infeasible starting point");
}

TEST_CASE("iteration cap") {
    lsq::Data d;
    for (int i = 0; i < 100; ++i) {
        d.x.push_back(i * 0.1);
        d.y.push_back(1000.0 * std::exp(-i * 0.1 / 0.9) + 20.0);
        d.sigma.push_back(1.0);
    }
    lsq::Options opt;
    opt.max_iterations = 2;
    const auto sol = lsq::levenberg_marquardt(expo, d, {1.0, 5.0, 0.0}, opt);
    CHECK_FALSE(sol.converged);
    CHECK(sol.iterations == 2);
    CHECK(sol.message == "iteration cap reached");
}

TEST_CASE("malformed data") {
    CHECK_THROWS_AS(lsq::levenberg_marquardt(line, {{1, 2}, {1}, {1, 1}}, {0, 0}), ConfigError);
    CHECK_THROWS_AS(lsq::levenberg_marquardt(line, {{1}, {1}, {1}}, {0, 0}), ConfigError);
    CHECK_THROWS_AS(lsq::levenberg_marquardt(line, {{1, 2}, {1, 2}, {1, 0}}, {0, 0}), ConfigError);
}
