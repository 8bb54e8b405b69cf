#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "spsim/errors.hpp"
#include "spsim/model.hpp"

using namespace spsim;

TEST_CASE("blinking peak model at the fitted dwell times") {
    // 1 + (7.0/9.1) * exp(-(1/9.1 + 1/7.0) us^-1 * 0.05 us), evaluated offline.
    CHECK(eval_cn_model(1, 9.1, 7.0, 0.05) == doctest::Approx(1.7595708873224856).epsilon(1e-13));
    CHECK(eval_cn_model(-1, 9.1, 7.0, 0.05) == eval_cn_model(1, 9.1, 7.0, 0.05));
    CHECK(eval_cn_model(2, 9.1, 7.0, 0.05) == doctest::Approx(1.7500323127282285).epsilon(1e-13));
}

TEST_CASE("blinking peak model limits") {
    SUBCASE("excess vanishes at long delays") {
        const double t_on = 9.1, t_off = 7.0, theta = 0.05;
        const long m = static_cast<long>(100.0 * t_on / theta);
        CHECK(eval_cn_model(m, t_on, t_off, theta) - 1.0 < 1e-10);
    }
    SUBCASE("symmetric dwell times") {
        const double tau = 3.0, theta = 0.05;
        CHECK(eval_cn_model(1, tau, tau, theta) ==
              doctest::Approx(1.0 + std::exp(-2.0 * theta / tau)).epsilon(1e-14));
    }
    SUBCASE("the central peak is outside the model") {
        CHECK_THROWS_AS(eval_cn_model(0, 9.1, 7.0, 0.05), DomainError);
        CHECK_THROWS_AS(eval_cn_model(1, -1.0, 7.0, 0.05), DomainError);
    }
    SUBCASE("small-delay limit is the bunching plateau") {
        CHECK(eval_cn_model(1, 9.1, 7.0, 1e-12) == doctest::Approx(bunching_plateau(9.1, 7.0)).epsilon(1e-10));
        CHECK(bunching_plateau(9.1, 7.0) == doctest::Approx(1.0 + 7.0 / 9.1));
    }
}

TEST_CASE("saturation law") {
    const SaturationParams sat{35e3, 66.0};
    CHECK(eval_saturation(66.0, sat) == doctest::Approx(17500.0).epsilon(1e-15));
    CHECK(eval_saturation(50.0, sat) == doctest::Approx(15086.206896551725).epsilon(1e-13));
    CHECK(eval_saturation(0.0, sat) == 0.0);
    CHECK(eval_saturation(std::numeric_limits<double>::infinity(), sat) == 35e3);
    CHECK(eval_saturation(66.0, sat) == eval_saturation(std::numeric_limits<double>::infinity(), sat) / 2);
    CHECK_THROWS_AS(eval_saturation(-1.0, sat), DomainError);
}

TEST_CASE("saturated rate from detection efficiency and duty cycle") {
    DetectionParams det;
    det.overall_efficiency = 0.0035;
    EmitterParams e{2.1, 9.1, 7.0, 0.0};
    CHECK(predicted_saturated_rate(det, e, 50.0) == doctest::Approx(39565.217391304344).epsilon(1e-12));

    EmitterParams always_on = e;
    always_on.t_off_us = 0.0;
    CHECK(predicted_saturated_rate(det, always_on, 50.0) == doctest::Approx(0.0035 / 50e-9));

    det.overall_efficiency = 0.0;
    CHECK(predicted_saturated_rate(det, e, 50.0) == 0.0);
}

TEST_CASE("decay rate grows linearly with pump power") {
    EmitterParams e{2.0, 9.1, 7.0, 0.6};
    CHECK(decay_rate_at_power(0.0, e) == doctest::Approx(0.5));
    CHECK(decay_rate_at_power(100.0, e) > decay_rate_at_power(0.0, e));
    for (double p : {1.0, 37.5, 400.0, 2000.0}) {
        const double step1 = decay_rate_at_power(2 * p, e) - decay_rate_at_power(p, e);
        const double step0 = decay_rate_at_power(p, e) - decay_rate_at_power(0, e);
        CHECK(step1 == doctest::Approx(step0).epsilon(1e-12));
    }
}

TEST_CASE("default pump coefficient doubles 1/T at the saturation power") {
    const double k = default_pump_coefficient(2.0, 66.0);
    EmitterParams e{2.0, 9.1, 7.0, k};
    CHECK(decay_rate_at_power(66.0, e) == doctest::Approx(2.0 * decay_rate_at_power(0.0, e)));
    CHECK(excitation_prob_from_power(66.0, 66.0) == doctest::Approx(0.5));
}

TEST_CASE("parameter validation") {
    EmitterParams e;
    CHECK_NOTHROW(e.validate());
    e.radiative_lifetime_ns = 8000.0;  // longer than t_off
    CHECK_THROWS_AS(e.validate(), ConfigError);
    e = EmitterParams{};
    e.t_on_us = 0.0;
    CHECK_THROWS_AS(e.validate(), ConfigError);

    DetectionParams d;
    d.overall_efficiency = 1.5;
    CHECK_THROWS_AS(d.validate(), ConfigError);
    d = DetectionParams{};
    d.jitter_sigma_ps = -1.0;
    CHECK_THROWS_AS(d.validate(), ConfigError);

    ExcitationPulsed p{50.0, 1.2};
    CHECK_THROWS_AS(p.validate(), ConfigError);

    PLETable t{{{700, 1, 1}}};
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t.rows.push_back({700, 2, 1});
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t.rows.back().wavelength_nm = 710;
    CHECK_NOTHROW(t.validate());
}

TEST_CASE("model properties over random parameters") {
    std::mt19937_64 rng(7);
    // Ranges keep the excess above double rounding so strict inequalities hold.
    std::uniform_real_distribution<double> dwell(1.0, 50.0);
    std::uniform_real_distribution<double> period(0.001, 0.02);
    std::uniform_int_distribution<long> peak(1, 300);
    for (int trial = 0; trial < 2000; ++trial) {
        const double t_on = dwell(rng), t_off = dwell(rng), theta = period(rng);
        const long m = peak(rng);
        const double v = eval_cn_model(m, t_on, t_off, theta);
        INFO("t_on=" << t_on << " t_off=" << t_off << " theta=" << theta << " m=" << m);
        CHECK(v == eval_cn_model(-m, t_on, t_off, theta));
        CHECK(v > 1.0);
        CHECK(v <= bunching_plateau(t_on, t_off));
        CHECK(eval_cn_model(m + 1, t_on, t_off, theta) < v);

        DetectionParams det;
        det.overall_efficiency = 0.01;
        const double c = dwell(rng);
        const EmitterParams a{0.001, t_on, t_off, 0.0};
        const EmitterParams b{0.001, c * t_on, c * t_off, 0.0};
        CHECK(predicted_saturated_rate(det, a, 50.0) ==
              doctest::Approx(predicted_saturated_rate(det, b, 50.0)).epsilon(1e-13));

        const SaturationParams sat{dwell(rng) * 1e3, dwell(rng)};
        const double p1 = dwell(rng), p2 = p1 + dwell(rng);
        CHECK(eval_saturation(p2, sat) > eval_saturation(p1, sat));
        // concavity: the midpoint lies above the chord
        CHECK(eval_saturation(0.5 * (p1 + p2), sat) >=
              0.5 * (eval_saturation(p1, sat) + eval_saturation(p2, sat)));
    }
}
