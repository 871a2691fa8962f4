#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "arw/robust.hpp"
#include "arw/rng.hpp"
#include "oracles.hpp"

using arw::DivergenceKind;
using arw::LocalSample;
using arw::UncertaintySpec;

namespace {

struct Instance {
    LocalSample sample;
    arw::NominalWeights nominal;
};

Instance random_instance(arw::Rng& rng, int n, int d = 2) {
    Instance inst;
    inst.sample.center.resize(d);
    for (double& x : inst.sample.center) x = rng.normal();
    inst.sample.points.assign(n, std::vector<double>(d));
    inst.sample.responses.resize(n);
    for (int i = 0; i < n; ++i) {
        for (double& x : inst.sample.points[i]) x = rng.normal();
        inst.sample.responses[i] = rng.uniform(0.5, 3.0);
    }
    inst.nominal = arw::gram_nominal({arw::KernelFamily::Gaussian, 2.0, std::nullopt},
                                     inst.sample.center, inst.sample.points);
    inst.sample.weights = inst.nominal.weights;
    return inst;
}

double worst_objective(const Instance& inst, const UncertaintySpec& spec, double beta) {
    const std::vector<double> losses = arw::squared_losses(beta, inst.sample.responses);
    return arw::worst_case(inst.nominal.omega_hat, arw::ArrowheadLoss::from_losses(losses), spec)
        .value;
}

}  // namespace

TEST_CASE("rho zero recovers the nominal estimators") {
    arw::Rng rng(71);
    for (DivergenceKind kind : {DivergenceKind::LogDet, DivergenceKind::BuresW}) {
        for (int trial = 0; trial < 10; ++trial) {
            const Instance inst = random_instance(rng, 3 + static_cast<int>(rng.below(8)));
            const arw::RobustScalarFit fit =
                arw::robust_nw(inst.sample, inst.nominal, UncertaintySpec{kind, 0.0});
            CHECK(fit.beta == Catch::Approx(arw::nw_estimate(inst.sample)).margin(1e-8));
            CHECK(std::isinf(fit.inner.gamma_star));

            const arw::RobustFit lfit = arw::robust_estimate_generic(
                arw::llr_loss_family(inst.sample, inst.nominal.weights), inst.nominal,
                UncertaintySpec{kind, 0.0});
            const arw::LlrFit nominal_llr = arw::llr_estimate(inst.sample);
            CHECK(lfit.beta[0] ==
                  Catch::Approx(nominal_llr.coefficients.intercept).margin(1e-8));
            for (size_t j = 0; j + 1 < lfit.beta.size(); ++j)
                CHECK(lfit.beta[j + 1] ==
                      Catch::Approx(nominal_llr.coefficients.slope[j]).margin(1e-8));
        }
    }
}

TEST_CASE("robust fit matches a golden-section scan of the scalar objective") {
    arw::Rng rng(73);
    for (DivergenceKind kind : {DivergenceKind::LogDet, DivergenceKind::BuresW}) {
        for (int trial = 0; trial < 5; ++trial) {
            const Instance inst = random_instance(rng, 4 + static_cast<int>(rng.below(6)));
            const UncertaintySpec spec{kind, 0.1};
            const arw::RobustScalarFit fit = arw::robust_nw(inst.sample, inst.nominal, spec);

            const auto [lo_it, hi_it] = std::minmax_element(inst.sample.responses.begin(),
                                                            inst.sample.responses.end());
            const double beta_ref = oracle::golden_section_min(
                [&](double b) { return worst_objective(inst, spec, b); }, *lo_it - 1.0,
                *hi_it + 1.0, 1e-12);

            INFO(arw::divergence_name(kind) << " trial " << trial);
            CHECK(fit.beta == Catch::Approx(beta_ref).margin(1e-6));
            CHECK(fit.objective ==
                  Catch::Approx(worst_objective(inst, spec, beta_ref)).margin(1e-8));
            CHECK(fit.trace.converged);
        }
    }
}

TEST_CASE("worst-case objective is convex in beta") {
    arw::Rng rng(79);
    const Instance inst = random_instance(rng, 6);
    for (DivergenceKind kind : {DivergenceKind::LogDet, DivergenceKind::BuresW}) {
        const UncertaintySpec spec{kind, 0.5};
        for (int trial = 0; trial < 20; ++trial) {
            const double a = rng.uniform(-1.0, 4.0);
            const double b = rng.uniform(-1.0, 4.0);
            const double fa = worst_objective(inst, spec, a);
            const double fb = worst_objective(inst, spec, b);
            const double fm = worst_objective(inst, spec, 0.5 * (a + b));
            CHECK(fm <= 0.5 * (fa + fb) + 1e-9 * (1.0 + fa + fb));
        }
    }
}

TEST_CASE("danskin gradient matches central finite differences in beta") {
    arw::Rng rng(83);
    for (DivergenceKind kind : {DivergenceKind::LogDet, DivergenceKind::BuresW}) {
        for (int trial = 0; trial < 10; ++trial) {
            const Instance inst = random_instance(rng, 3 + static_cast<int>(rng.below(6)));
            const UncertaintySpec spec{kind, rng.uniform(0.05, 1.0)};
            const double beta = rng.uniform(-0.5, 3.5);

            const std::vector<double> losses =
                arw::squared_losses(beta, inst.sample.responses);
            const arw::WorstCaseSolution sol = arw::worst_case(
                inst.nominal.omega_hat, arw::ArrowheadLoss::from_losses(losses), spec);
            std::vector<std::vector<double>> grads(losses.size());
            for (size_t i = 0; i < losses.size(); ++i)
                grads[i] = {2.0 * (beta - inst.sample.responses[i])};
            const double analytic = arw::robust_gradient(sol, grads)[0];

            const double fd = oracle::central_difference(
                [&](double b) { return worst_objective(inst, spec, b); }, beta, 1e-5);
            CHECK(analytic == Catch::Approx(fd).margin(1e-5 * (1.0 + std::abs(fd))));
        }
    }
}

TEST_CASE("accepted steps decrease the objective monotonically") {
    arw::Rng rng(89);
    const Instance inst = random_instance(rng, 8);
    arw::OuterConfig cfg;
    cfg.init = std::vector<double>{10.0};  // start far from the minimizer
    const arw::RobustScalarFit fit =
        arw::robust_nw(inst.sample, inst.nominal, {DivergenceKind::LogDet, 0.2}, cfg);
    REQUIRE(fit.trace.iterations.size() > 1);
    for (size_t k = 1; k < fit.trace.iterations.size(); ++k)
        CHECK(fit.trace.iterations[k].objective <=
              fit.trace.iterations[k - 1].objective + 1e-12);
    CHECK(fit.trace.converged);
}

TEST_CASE("fixed step rule still approaches the minimizer") {
    arw::Rng rng(97);
    const Instance inst = random_instance(rng, 5);
    const UncertaintySpec spec{DivergenceKind::BuresW, 0.1};
    arw::OuterConfig cfg;
    cfg.step_rule = arw::StepRule::Fixed;
    cfg.fixed_step = 5e-3;
    cfg.max_iterations = 2000;
    const arw::RobustScalarFit fixed = arw::robust_nw(inst.sample, inst.nominal, spec, cfg);
    const arw::RobustScalarFit line = arw::robust_nw(inst.sample, inst.nominal, spec);
    CHECK(fixed.beta == Catch::Approx(line.beta).margin(1e-3));
}

TEST_CASE("robust objective dominates the nominal one") {
    arw::Rng rng(101);
    const Instance inst = random_instance(rng, 6);
    const double nominal_best =
        arw::robust_nw(inst.sample, inst.nominal, {DivergenceKind::LogDet, 0.0}).objective;
    double prev = nominal_best;
    for (double rho : {0.01, 0.1, 1.0}) {
        const double cur =
            arw::robust_nw(inst.sample, inst.nominal, {DivergenceKind::LogDet, rho}).objective;
        CHECK(cur >= prev - 1e-9 * (1.0 + prev));
        prev = cur;
    }
}

TEST_CASE("configuration and input validation") {
    arw::Rng rng(103);
    const Instance inst = random_instance(rng, 4);
    arw::OuterConfig bad;
    bad.max_iterations = 0;
    CHECK_THROWS_AS(arw::robust_nw(inst.sample, inst.nominal, {DivergenceKind::LogDet, 0.1}, bad),
                    arw::invalid_input_error);
    arw::OuterConfig wrong_init;
    wrong_init.init = std::vector<double>{1.0, 2.0};
    CHECK_THROWS_AS(
        arw::robust_nw(inst.sample, inst.nominal, {DivergenceKind::LogDet, 0.1}, wrong_init),
        arw::invalid_input_error);

    // Singular nominal is rejected for LogDet at the fit level.
    arw::NominalWeights singular;
    singular.omega_hat = arw::SymmetricMatrix::from_rows({{1.0, 1.0}, {1.0, 1.0}});
    singular.weights = {1.0};
    LocalSample one;
    one.center = {0.0};
    one.points = {{1.0}};
    one.responses = {2.0};
    one.weights = {1.0};
    CHECK_THROWS_AS(arw::robust_nw(one, singular, {DivergenceKind::LogDet, 0.1}),
                    arw::not_psd_error);
    CHECK_NOTHROW(arw::robust_nw(one, singular, {DivergenceKind::BuresW, 0.1}));
}
