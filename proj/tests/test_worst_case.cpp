#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "arw/divergences.hpp"
#include "arw/kernel.hpp"
#include "arw/rng.hpp"
#include "arw/worst_case.hpp"
#include "oracles.hpp"

using arw::ArrowheadLoss;
using arw::DivergenceKind;
using arw::SymmetricMatrix;
using arw::UncertaintySpec;
using arw::WorstCaseSolution;

namespace {

// Random doubly non-negative PD nominal: Gram of distinct Gaussian points.
arw::NominalWeights random_gram(arw::Rng& rng, int n, int d = 2) {
    std::vector<double> z0(d);
    for (double& x : z0) x = rng.normal();
    std::vector<std::vector<double>> pts(n, std::vector<double>(d));
    for (auto& p : pts)
        for (double& x : p) x = rng.normal();
    return arw::gram_nominal({arw::KernelFamily::Gaussian, 2.0, std::nullopt}, z0, pts);
}

std::vector<double> random_losses(arw::Rng& rng, int n, double hi = 2.0) {
    std::vector<double> l(n);
    for (double& x : l) x = rng.uniform(0.0, hi);
    return l;
}

}  // namespace

TEST_CASE("identity nominal single loss: dual values in closed form") {
    // omega_hat = I_2, one loss v. The log-det dual is
    // g(gamma) = gamma rho - gamma log(1 - v^2 / gamma^2), and the
    // Bures-Wasserstein dual is
    // h(gamma) = gamma (rho - 2) + gamma^2 (1/(gamma - v) + 1/(gamma + v)).
    const SymmetricMatrix id = SymmetricMatrix::identity(2);
    const ArrowheadLoss v = ArrowheadLoss::from_losses({2.0});

    const arw::DualPoint g = arw::dual_objective_logdet(3.0, id, v, 0.3);
    CHECK(g.value == Catch::Approx(0.9 - 3.0 * std::log(1.0 - 4.0 / 9.0)).epsilon(1e-13));

    const arw::DualPoint h = arw::dual_objective_bures(3.0, id, v, 0.5);
    CHECK(h.value == Catch::Approx(6.3).epsilon(1e-13));

    CHECK_THROWS_AS(arw::dual_objective_logdet(1.9, id, v, 0.3), arw::out_of_domain_error);
    CHECK_THROWS_AS(arw::dual_objective_bures(2.0, id, v, 0.5), arw::out_of_domain_error);
}

TEST_CASE("dual derivatives match central finite differences") {
    arw::Rng rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(6));
        const arw::NominalWeights nom = random_gram(rng, n);
        const ArrowheadLoss v = ArrowheadLoss::from_losses(random_losses(rng, n));
        const double rho = rng.uniform(0.05, 1.0);
        const SymmetricMatrix sqrt_omega = arw::psd_sqrt(nom.omega_hat);

        // A gamma safely inside both domains.
        const Eigen::MatrixXd svs = oracle::to_dense(sqrt_omega) *
                                    oracle::dense_arrowhead(v.losses()) *
                                    oracle::to_dense(sqrt_omega);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(svs, Eigen::EigenvaluesOnly);
        const double pole = std::max(es.eigenvalues().maxCoeff(), v.spectral_norm());
        const double gamma = 1.5 * pole + 0.5;
        const double step = 1e-5 * gamma;

        const arw::DualPoint gl = arw::dual_objective_logdet(gamma, sqrt_omega, v, rho);
        const double fd_l = oracle::central_difference(
            [&](double g) { return arw::dual_objective_logdet(g, sqrt_omega, v, rho).value; },
            gamma, step);
        CHECK(gl.derivative == Catch::Approx(fd_l).margin(1e-6 * (1.0 + std::abs(fd_l))));
        const double fd2_l = oracle::central_difference(
            [&](double g) { return arw::dual_objective_logdet(g, sqrt_omega, v, rho).derivative; },
            gamma, step);
        CHECK(gl.second_derivative == Catch::Approx(fd2_l).margin(1e-5 * (1.0 + std::abs(fd2_l))));

        const arw::DualPoint gb = arw::dual_objective_bures(gamma, nom.omega_hat, v, rho);
        const double fd_b = oracle::central_difference(
            [&](double g) { return arw::dual_objective_bures(g, nom.omega_hat, v, rho).value; },
            gamma, step);
        CHECK(gb.derivative == Catch::Approx(fd_b).margin(1e-6 * (1.0 + std::abs(fd_b))));
        const double fd2_b = oracle::central_difference(
            [&](double g) { return arw::dual_objective_bures(g, nom.omega_hat, v, rho).derivative; },
            gamma, step);
        CHECK(gb.second_derivative == Catch::Approx(fd2_b).margin(1e-5 * (1.0 + std::abs(fd2_b))));
    }
}

TEST_CASE("duals are convex in gamma") {
    arw::Rng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(5));
        const arw::NominalWeights nom = random_gram(rng, n);
        const ArrowheadLoss v = ArrowheadLoss::from_losses(random_losses(rng, n));
        const SymmetricMatrix sqrt_omega = arw::psd_sqrt(nom.omega_hat);
        const double rho = 0.2;

        const Eigen::MatrixXd svs = oracle::to_dense(sqrt_omega) *
                                    oracle::dense_arrowhead(v.losses()) *
                                    oracle::to_dense(sqrt_omega);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(svs, Eigen::EigenvaluesOnly);
        const double pole = std::max(es.eigenvalues().maxCoeff(), v.spectral_norm());

        for (double base : {1.05, 1.5, 3.0, 10.0}) {
            const double g0 = base * pole + 0.2;
            const double dg = 0.01 * g0;
            const double ld = arw::dual_objective_logdet(g0 - dg, sqrt_omega, v, rho).value -
                              2.0 * arw::dual_objective_logdet(g0, sqrt_omega, v, rho).value +
                              arw::dual_objective_logdet(g0 + dg, sqrt_omega, v, rho).value;
            CHECK(ld >= -1e-8);
            const double bd = arw::dual_objective_bures(g0 - dg, nom.omega_hat, v, rho).value -
                              2.0 * arw::dual_objective_bures(g0, nom.omega_hat, v, rho).value +
                              arw::dual_objective_bures(g0 + dg, nom.omega_hat, v, rho).value;
            CHECK(bd >= -1e-8);
        }
    }
}

TEST_CASE("worst case solution matches the projected gradient primal oracle") {
    arw::Rng rng(43);
    for (DivergenceKind kind : {DivergenceKind::LogDet, DivergenceKind::BuresW}) {
        for (int trial = 0; trial < 2; ++trial) {
            const int n = 2;
            const arw::NominalWeights nom = random_gram(rng, n);
            const std::vector<double> losses = random_losses(rng, n, 1.5);
            const ArrowheadLoss v = ArrowheadLoss::from_losses(losses);
            const double rho = 0.1;

            const WorstCaseSolution sol =
                arw::worst_case(nom.omega_hat, v, UncertaintySpec{kind, rho});
            const double primal =
                oracle::primal_worst_case_oracle(nom.omega_hat, losses, kind, rho);
            INFO(arw::divergence_name(kind) << " trial " << trial);
            CHECK(sol.value == Catch::Approx(primal).margin(1e-4));
            CHECK(sol.value >= primal - 1e-6);  // dual upper-bounds the primal
        }
    }
}

TEST_CASE("worst case maximizer is doubly non-negative and spends at most rho") {
    arw::Rng rng(47);
    for (DivergenceKind kind : {DivergenceKind::LogDet, DivergenceKind::BuresW}) {
        for (double rho : {0.01, 0.1, 1.0, 10.0}) {
            for (int trial = 0; trial < 5; ++trial) {
                const int n = 1 + static_cast<int>(rng.below(12));
                const arw::NominalWeights nom = random_gram(rng, n);
                const ArrowheadLoss v = ArrowheadLoss::from_losses(random_losses(rng, n));
                const WorstCaseSolution sol =
                    arw::worst_case(nom.omega_hat, v, UncertaintySpec{kind, rho});

                const auto report = arw::is_doubly_nonnegative(sol.omega_star, 1e-8);
                INFO(arw::divergence_name(kind) << " rho " << rho << " min entry "
                                                << report.min_entry << " min eig "
                                                << report.min_eigenvalue);
                CHECK(report.ok);

                const double direct = kind == DivergenceKind::LogDet
                                          ? arw::logdet_divergence(sol.omega_star, nom.omega_hat)
                                          : arw::bures_divergence(sol.omega_star, nom.omega_hat);
                CHECK(direct <= rho * (1.0 + 1e-6));
                // Envelope accounting agrees with the recomputed divergence.
                CHECK(direct == Catch::Approx(sol.divergence_value)
                                    .margin(1e-6 * (1.0 + rho)));
                // The attained objective matches the returned value.
                CHECK(arw::inner(sol.omega_star, v.densify()) ==
                      Catch::Approx(sol.value).margin(1e-8 * (1.0 + std::abs(sol.value))));
            }
        }
    }
}

TEST_CASE("resolvent factors at the solved gamma are entrywise non-negative") {
    arw::Rng rng(53);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(8));
        const arw::NominalWeights nom = random_gram(rng, n);
        const ArrowheadLoss v = ArrowheadLoss::from_losses(random_losses(rng, n));

        const WorstCaseSolution bures =
            arw::worst_case(nom.omega_hat, v, {DivergenceKind::BuresW, 0.5});
        const SymmetricMatrix resolvent = arw::woodbury_resolvent(bures.gamma_star, v);
        CHECK(resolvent.min_entry() >= -1e-10 * std::max(1.0, resolvent.max_abs()));

        const WorstCaseSolution logdet =
            arw::worst_case(nom.omega_hat, v, {DivergenceKind::LogDet, 0.5});
        const int p = v.dim();
        const Eigen::MatrixXd factor =
            (Eigen::MatrixXd::Identity(p, p) -
             oracle::to_dense(nom.omega_hat) * oracle::dense_arrowhead(v.losses()) /
                 logdet.gamma_star)
                .inverse();
        CHECK(factor.minCoeff() >= -1e-10 * std::max(1.0, factor.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("rho zero and zero losses short-circuit to the nominal") {
    arw::Rng rng(59);
    const arw::NominalWeights nom = random_gram(rng, 4);
    const ArrowheadLoss v = ArrowheadLoss::from_losses({1.0, 0.5, 0.25, 2.0});

    const WorstCaseSolution at_zero =
        arw::worst_case(nom.omega_hat, v, {DivergenceKind::LogDet, 0.0});
    CHECK(at_zero.value ==
          Catch::Approx(arw::inner(nom.omega_hat, v.densify())).epsilon(1e-12));
    CHECK(std::isinf(at_zero.gamma_star));
    CHECK(at_zero.divergence_value == 0.0);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) CHECK(at_zero.omega_star(i, j) == nom.omega_hat(i, j));

    const ArrowheadLoss zero = ArrowheadLoss::from_losses({0.0, 0.0, 0.0, 0.0});
    const WorstCaseSolution flat =
        arw::worst_case(nom.omega_hat, zero, {DivergenceKind::BuresW, 1.0});
    CHECK(flat.value == 0.0);
    CHECK(std::isinf(flat.gamma_star));
}

TEST_CASE("worst case value is nondecreasing in rho") {
    arw::Rng rng(61);
    for (DivergenceKind kind : {DivergenceKind::LogDet, DivergenceKind::BuresW}) {
        for (int trial = 0; trial < 5; ++trial) {
            const int n = 1 + static_cast<int>(rng.below(6));
            const arw::NominalWeights nom = random_gram(rng, n);
            const ArrowheadLoss v = ArrowheadLoss::from_losses(random_losses(rng, n));
            double prev = arw::worst_case(nom.omega_hat, v, {kind, 0.0}).value;
            for (double rho : {0.01, 0.1, 0.5, 1.0, 4.0, 10.0}) {
                const double cur = arw::worst_case(nom.omega_hat, v, {kind, rho}).value;
                CHECK(cur >= prev - 1e-8 * (1.0 + std::abs(prev)));
                prev = cur;
            }
        }
    }
}

TEST_CASE("solution is invariant under symmetric permutation") {
    arw::Rng rng(67);
    for (DivergenceKind kind : {DivergenceKind::LogDet, DivergenceKind::BuresW}) {
        for (int trial = 0; trial < 5; ++trial) {
            const int n = 2 + static_cast<int>(rng.below(6));
            const int p = n + 1;
            const arw::NominalWeights nom = random_gram(rng, n);
            const ArrowheadLoss v = ArrowheadLoss::from_losses(random_losses(rng, n));

            std::vector<int> perm(p);
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle(perm);

            SymmetricMatrix omega_p(p);
            for (int i = 0; i < p; ++i)
                for (int j = i; j < p; ++j)
                    omega_p.set(perm[i], perm[j], nom.omega_hat(i, j));
            const arw::RankTwoSpectral vp = v.spectral().permuted(perm);

            const WorstCaseSolution base =
                arw::worst_case(nom.omega_hat, v, UncertaintySpec{kind, 0.3});
            const WorstCaseSolution moved =
                arw::worst_case_spectral(omega_p, vp, UncertaintySpec{kind, 0.3});
            CHECK(moved.value == Catch::Approx(base.value).margin(1e-8 * (1.0 + base.value)));
            CHECK(moved.gamma_star ==
                  Catch::Approx(base.gamma_star).margin(1e-7 * (1.0 + base.gamma_star)));
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < p; ++j)
                    CHECK(moved.omega_star(perm[i], perm[j]) ==
                          Catch::Approx(base.omega_star(i, j)).margin(1e-8));
        }
    }
}

TEST_CASE("logdet ball requires a positive definite nominal, bures does not") {
    const SymmetricMatrix singular = SymmetricMatrix::from_rows({{1.0, 1.0}, {1.0, 1.0}});
    const ArrowheadLoss v = ArrowheadLoss::from_losses({1.0});
    CHECK_THROWS_AS(arw::worst_case(singular, v, {DivergenceKind::LogDet, 0.1}),
                    arw::not_psd_error);

    const WorstCaseSolution sol = arw::worst_case(singular, v, {DivergenceKind::BuresW, 0.1});
    CHECK(arw::is_doubly_nonnegative(sol.omega_star, 1e-8).ok);
    CHECK(arw::bures_divergence(sol.omega_star, singular) <= 0.1 * (1.0 + 1e-6));
    CHECK(sol.value >= arw::inner(singular, v.densify()));
}

TEST_CASE("iteration cap raises a convergence error") {
    const SymmetricMatrix id = SymmetricMatrix::identity(3);
    const ArrowheadLoss v = ArrowheadLoss::from_losses({1.0, 1.0});
    CHECK_THROWS_AS(arw::worst_case(id, v, {DivergenceKind::LogDet, 10.0}, {1}),
                    arw::convergence_error);
}

TEST_CASE("danskin gradient accumulates weighted loss gradients") {
    WorstCaseSolution sol;
    sol.first_row_weights = {0.5, 0.25};
    const std::vector<std::vector<double>> grads{{1.0, 2.0}, {3.0, 4.0}};
    const std::vector<double> g = arw::robust_gradient(sol, grads);
    REQUIRE(g.size() == 2);
    CHECK(g[0] == Catch::Approx(2.5).epsilon(1e-15));
    CHECK(g[1] == Catch::Approx(4.0).epsilon(1e-15));
    CHECK_THROWS_AS(arw::robust_gradient(sol, {{1.0}}), arw::invalid_input_error);
    CHECK_THROWS_AS(arw::robust_gradient(sol, {{1.0}, {1.0, 2.0}}), arw::invalid_input_error);
}
