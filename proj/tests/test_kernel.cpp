#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "arw/kernel.hpp"
#include "arw/rng.hpp"
#include "arw/symmetric_matrix.hpp"

using arw::KernelFamily;
using arw::KernelSpec;
using arw::SymmetricMatrix;

namespace {
KernelSpec gauss(double h2) { return {KernelFamily::Gaussian, h2, std::nullopt}; }
}  // namespace

TEST_CASE("kernel values at distance 0 and at the bandwidth") {
    const std::vector<double> z0{0.0}, z1{1.0};
    // Gaussian with h^2 = 1 at distance 1: exp(-1).
    CHECK(arw::eval_kernel(gauss(1.0), z0, z1) ==
          Catch::Approx(0.36787944117144233).epsilon(1e-15));
    CHECK(arw::eval_kernel(gauss(1.0), z0, z0) == 1.0);

    const KernelSpec lap{KernelFamily::Laplacian, 4.0, std::nullopt};
    CHECK(arw::eval_kernel(lap, z0, z1) == Catch::Approx(std::exp(-0.5)).epsilon(1e-15));

    const KernelSpec cau{KernelFamily::Cauchy, 1.0, std::nullopt};
    CHECK(arw::eval_kernel(cau, z0, z1) == Catch::Approx(0.5).epsilon(1e-15));

    const KernelSpec rq{KernelFamily::RationalQuadratic, 1.0, std::nullopt};
    CHECK(arw::eval_kernel(rq, z0, z1) == Catch::Approx(1.0 / (1.25 * 1.25)).epsilon(1e-15));
}

TEST_CASE("mahalanobis kernel uses the metric") {
    KernelSpec spec{KernelFamily::MahalanobisGaussian, 1.0,
                    SymmetricMatrix::from_rows({{2.0, 0.0}, {0.0, 1.0}})};
    const std::vector<double> z0{0.0, 0.0}, z1{1.0, 1.0};
    CHECK(arw::eval_kernel(spec, z0, z1) == Catch::Approx(std::exp(-3.0)).epsilon(1e-14));

    KernelSpec missing{KernelFamily::MahalanobisGaussian, 1.0, std::nullopt};
    CHECK_THROWS_AS(arw::eval_kernel(missing, z0, z1), arw::invalid_input_error);
}

TEST_CASE("kernel input validation") {
    CHECK_THROWS_AS(arw::eval_kernel(gauss(0.0), std::vector<double>{0.0},
                                     std::vector<double>{1.0}),
                    arw::invalid_input_error);
    CHECK_THROWS_AS(arw::eval_kernel(gauss(1.0), std::vector<double>{0.0},
                                     std::vector<double>{1.0, 2.0}),
                    arw::invalid_input_error);
    CHECK_THROWS_AS(arw::kernel_family_from_name("triangle"), arw::invalid_input_error);
    CHECK(arw::kernel_family_from_name("gaussian") == KernelFamily::Gaussian);
}

TEST_CASE("single point at distance h gives the two by two gram") {
    // N = 1, ||z0 - z1|| = h: Gram is [[1, e^-1], [e^-1, 1]].
    const std::vector<double> z0{0.0};
    const arw::NominalWeights nom = arw::gram_nominal(gauss(4.0), z0, {{2.0}});
    REQUIRE(nom.omega_hat.dim() == 2);
    CHECK(nom.omega_hat(0, 0) == 1.0);
    CHECK(nom.omega_hat(1, 1) == 1.0);
    CHECK(nom.omega_hat(0, 1) == Catch::Approx(0.36787944117144233).epsilon(1e-15));
    CHECK(nom.weights.size() == 1);
    CHECK(nom.weights[0] == nom.omega_hat(0, 1));
    CHECK(nom.duplicates_collapsed == 0);
    CHECK(nom.jitter_applied == 0.0);
}

TEST_CASE("gram collapses duplicate points") {
    const std::vector<double> z0{0.5};
    const arw::NominalWeights nom =
        arw::gram_nominal(gauss(1.0), z0, {{0.0}, {0.0}, {1.0}, {1.0}, {2.0}});
    CHECK(nom.duplicates_collapsed == 2);
    CHECK(nom.kept_indices == std::vector<int>{0, 2, 4});
    CHECK(nom.omega_hat.dim() == 4);
    CHECK_NOTHROW(arw::logdet(nom.omega_hat));  // PD after collapsing
}

TEST_CASE("gram jitters when the query coincides with a sample point") {
    const std::vector<double> z0{1.0};
    const arw::NominalWeights nom = arw::gram_nominal(gauss(1.0), z0, {{1.0}, {0.0}});
    CHECK(nom.jitter_applied > 0.0);
    CHECK_NOTHROW(arw::logdet(nom.omega_hat));
}

TEST_CASE("gram is positive definite on random distinct points") {
    arw::Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 3 + static_cast<int>(rng.below(20));
        const int d = 1 + static_cast<int>(rng.below(4));
        std::vector<double> z0(d);
        for (double& x : z0) x = rng.normal();
        std::vector<std::vector<double>> pts(n, std::vector<double>(d));
        for (auto& p : pts)
            for (double& x : p) x = rng.normal();
        const arw::NominalWeights nom = arw::gram_nominal(gauss(2.0), z0, pts);
        const auto report = arw::is_doubly_nonnegative(nom.omega_hat);
        CHECK(report.ok);  // kernel values are positive and the Gram is PSD
    }
}

TEST_CASE("arrowhead nominal worked example: weight 1, slack 2") {
    const arw::NominalWeights nom = arw::arrowhead_nominal({1.0}, 2.0);
    REQUIRE(nom.omega_hat.dim() == 2);
    CHECK(nom.omega_hat(0, 0) == Catch::Approx(2.0).margin(1e-15));
    CHECK(nom.omega_hat(0, 1) == Catch::Approx(1.0).margin(1e-15));
    CHECK(nom.omega_hat(1, 1) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("arrowhead nominal leading minors are strictly positive") {
    // Independent oracle: dense determinants of every leading block. The
    // minimal-times-slack recursion grows the minors geometrically, so the
    // dense check is only meaningful while they fit a double comfortably.
    arw::Rng rng(29);
    for (int n : {1, 3, 6, 10, 12}) {
        std::vector<double> w(n);
        for (double& x : w) x = rng.uniform(0.0, 1.0);
        if (n > 2) w[0] = 0.0;  // zero weights hit the floor branch
        const arw::NominalWeights nom = arw::arrowhead_nominal(w);
        REQUIRE(nom.omega_hat.dim() == n + 1);
        for (int i = 0; i < n; ++i) CHECK(nom.omega_hat(0, i + 1) == w[i]);
        const Eigen::MatrixXd dense = nom.omega_hat.as_eigen();
        for (int k = 1; k <= n + 1; ++k)
            CHECK(dense.topLeftCorner(k, k).determinant() > 0.0);
        CHECK(arw::is_doubly_nonnegative(nom.omega_hat).ok);
        CHECK_NOTHROW(arw::logdet(nom.omega_hat));
    }
}

TEST_CASE("arrowhead nominal passes strict checks on a two-weight example") {
    const arw::NominalWeights nom = arw::arrowhead_nominal({1.0, 2.0}, 1.5);
    const auto report = arw::is_doubly_nonnegative(nom.omega_hat, 0.0);
    CHECK(report.ok);
    CHECK_NOTHROW(arw::logdet(nom.omega_hat));
}

TEST_CASE("arrowhead nominal stays finite and doubly non-negative when large") {
    // At this size the construction spans so many orders of magnitude that
    // strict positive definiteness is below double precision relative to the
    // largest entry; the doubly-non-negative certificate is the contract.
    arw::Rng rng(31);
    for (int n : {30, 60}) {
        std::vector<double> w(n);
        for (double& x : w) x = rng.uniform(0.0, 1.0);
        w[0] = 0.0;
        const arw::NominalWeights nom = arw::arrowhead_nominal(w);
        for (int i = 0; i < n; ++i) CHECK(nom.omega_hat(0, i + 1) == w[i]);
        CHECK(std::isfinite(nom.omega_hat.max_abs()));
        CHECK(nom.omega_hat.min_entry() >= 0.0);
        CHECK(arw::is_doubly_nonnegative(nom.omega_hat).ok);
    }
}

TEST_CASE("arrowhead nominal validates input") {
    CHECK_THROWS_AS(arw::arrowhead_nominal({1.0}, 1.0), arw::invalid_input_error);
    CHECK_THROWS_AS(arw::arrowhead_nominal({-1.0}), arw::invalid_input_error);
}
