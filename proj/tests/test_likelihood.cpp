#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mvblearn/likelihood.hpp"
#include "oracles.hpp"

using namespace mvb;

TEST_CASE("augmented response is the subset product")
{
    ModelConfig config(3, 3, 0);
    VectorXd y(3);
    y << 1, 0, 1;
    VectorXd aug = augment_response(config, y);
    VectorXd expected(7);
    expected << 1, 0, 1, 0, 1, 0, 0; // order: 1,2,3,12,13,23,123
    REQUIRE(aug == expected);

    REQUIRE(augment_response(config, VectorXd::Zero(3)).isZero());
    REQUIRE(augment_response(config, VectorXd::Ones(3)).isApprox(VectorXd::Ones(7)));

    VectorXd bad(3);
    bad << 1, 0.5, 0;
    REQUIRE_THROWS_AS(augment_response(config, bad), std::invalid_argument);
    REQUIRE_THROWS_AS(augment_response(config, VectorXd::Zero(2)), std::invalid_argument);
}

TEST_CASE("augmented response is monotone under subset inclusion")
{
    ModelConfig config(4, 4, 0);
    std::mt19937_64 rng(11);
    std::bernoulli_distribution coin;
    for (int rep = 0; rep < 20; ++rep) {
        VectorXd y(4);
        for (int i = 0; i < 4; ++i) y[i] = coin(rng) ? 1.0 : 0.0;
        const VectorXd aug = augment_response(config, y);
        for (int a = 0; a < config.q(); ++a)
            for (int b = 0; b < config.q(); ++b) {
                const SubsetMask wa = config.subset(a), wb = config.subset(b);
                if ((wa & wb) == wa) REQUIRE(aug[b] <= aug[a]);
            }
    }
}

TEST_CASE("linear predictor matches per-block dot products")
{
    ModelConfig config(3, 3, 4);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss;

    SECTION("zero coefficients")
    {
        VectorXd x(4);
        x << 1, -2, 0.5, 3;
        REQUIRE(linear_predictor(config, VectorXd::Zero(config.dim()), x).isZero());
    }
    SECTION("intercept-only coefficients ignore x")
    {
        VectorXd c = VectorXd::Zero(config.dim());
        for (int j = 0; j < config.q(); ++j) c[j * config.block_size()] = j + 0.5;
        VectorXd x(4);
        x << 2, -1, 4, 0;
        const VectorXd f = linear_predictor(config, c, x);
        for (int j = 0; j < config.q(); ++j) REQUIRE(f[j] == j + 0.5);
    }
    SECTION("random coefficients against scalar recomputation")
    {
        VectorXd c(config.dim()), x(4);
        for (int i = 0; i < c.size(); ++i) c[i] = gauss(rng);
        for (int i = 0; i < 4; ++i) x[i] = gauss(rng);
        const VectorXd f = linear_predictor(config, c, x);
        for (int j = 0; j < config.q(); ++j) {
            double expect = c[j * 5];
            for (int feat = 0; feat < 4; ++feat) expect += c[j * 5 + 1 + feat] * x[feat];
            REQUIRE(f[j] == Catch::Approx(expect).epsilon(1e-12));
        }
    }
    SECTION("dimension checks")
    {
        REQUIRE_THROWS_AS(linear_predictor(config, VectorXd::Zero(3), VectorXd::Zero(4)),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(linear_predictor(config, VectorXd::Zero(config.dim()), VectorXd::Zero(2)),
                          std::invalid_argument);
    }
}

TEST_CASE("subset sums: known values and lattice recursion vs naive sum")
{
    SECTION("K=2 worked example")
    {
        ModelConfig config(2, 2, 0);
        VectorXd f(3);
        f << 1, 2, 3;
        const VectorXd s = s_values(config, f);
        REQUIRE(s[0] == Catch::Approx(1.0));
        REQUIRE(s[1] == Catch::Approx(2.0));
        REQUIRE(s[2] == Catch::Approx(6.0));
    }
    SECTION("zero f gives zero S, singleton S equals f")
    {
        ModelConfig config(4, 4, 0);
        REQUIRE(s_values(config, VectorXd::Zero(config.q())).isZero());
        std::mt19937_64 rng(17);
        const VectorXd f = oracle::random_natural_params(config, rng);
        const VectorXd s = s_values(config, f);
        for (int i = 0; i < 4; ++i) REQUIRE(s[i] == f[i]);
    }
    SECTION("matches naive subset summation on K<=4")
    {
        std::mt19937_64 rng(23);
        for (int K = 1; K <= 4; ++K) {
            ModelConfig config(K, K, 0);
            const VectorXd f = oracle::random_natural_params(config, rng);
            const VectorXd s = s_values(config, f);
            for (int j = 0; j < config.q(); ++j) {
                const SubsetMask w = config.subset(j);
                double naive = 0.0;
                for (int i = 0; i < config.q(); ++i)
                    if ((config.subset(i) & w) == config.subset(i)) naive += f[i];
                REQUIRE(s[j] == Catch::Approx(naive).margin(1e-12));
            }
        }
    }
}

TEST_CASE("log partition")
{
    SECTION("uniform model: b = K log 2")
    {
        for (int K = 1; K <= 6; ++K) {
            ModelConfig config(K, K, 0);
            REQUIRE(log_partition(config, VectorXd::Zero(config.q())) ==
                    Catch::Approx(K * std::log(2.0)).epsilon(1e-12));
        }
    }
    SECTION("matches brute-force outcome enumeration")
    {
        std::mt19937_64 rng(31);
        for (int K = 2; K <= 4; ++K) {
            ModelConfig config(K, K, 0);
            for (int rep = 0; rep < 5; ++rep) {
                const VectorXd f = oracle::random_natural_params(config, rng);
                REQUIRE(log_partition(config, f) ==
                        Catch::Approx(oracle::log_partition(config, f)).epsilon(1e-12));
            }
        }
    }
    SECTION("overflow-safe for large entries")
    {
        ModelConfig config(3, 3, 0);
        VectorXd f = VectorXd::Constant(7, 500.0);
        const double b = log_partition(config, f);
        REQUIRE(std::isfinite(b));
        REQUIRE(b == Catch::Approx(3500.0).epsilon(1e-9)); // dominated by S^{123} = 7 * 500
    }
}

TEST_CASE("log prob")
{
    SECTION("uniform model assigns -K log 2 to every outcome")
    {
        ModelConfig config(3, 3, 0);
        VectorXd y(3);
        y << 1, 0, 1;
        REQUIRE(log_prob(config, y, VectorXd::Zero(7)) ==
                Catch::Approx(-3 * std::log(2.0)).epsilon(1e-12));
    }
    SECTION("all-zero outcome has log prob -b")
    {
        ModelConfig config(3, 3, 0);
        std::mt19937_64 rng(37);
        const VectorXd f = oracle::random_natural_params(config, rng);
        REQUIRE(log_prob(config, VectorXd::Zero(3), f) ==
                Catch::Approx(-log_partition(config, f)).epsilon(1e-12));
    }
    SECTION("probabilities over all outcomes sum to one")
    {
        std::mt19937_64 rng(41);
        for (int K = 2; K <= 4; ++K) {
            ModelConfig config(K, K, 0);
            const VectorXd f = oracle::random_natural_params(config, rng);
            double total = 0.0;
            for (SubsetMask s = 0; s < (SubsetMask{1} << K); ++s) {
                VectorXd y(K);
                for (int i = 0; i < K; ++i) y[i] = (s >> i) & 1u;
                total += std::exp(log_prob(config, y, f));
            }
            REQUIRE(total == Catch::Approx(1.0).margin(1e-9));
        }
    }
    SECTION("exp(S) identity: exp(S^w - b) is the probability of pattern w")
    {
        ModelConfig config(2, 2, 0);
        std::mt19937_64 rng(43);
        const VectorXd f = oracle::random_natural_params(config, rng);
        const auto probs = oracle::probability_table(config, f);
        MomentTable table;
        table.compute(config, f);
        REQUIRE(std::exp(table.subset_sum(0b11) - table.log_partition()) ==
                Catch::Approx(probs[0b11]).epsilon(1e-10));
        // Lemma form: exp(S^w) = p(pattern w) / p(all zeros)
        REQUIRE(std::exp(table.subset_sum(0b11)) ==
                Catch::Approx(probs[0b11] / probs[0]).epsilon(1e-10));
    }
}

TEST_CASE("mean of the augmented response")
{
    SECTION("uniform model: mu = 2^{-|kappa|}")
    {
        ModelConfig config(3, 3, 0);
        const VectorXd mu = mean_mu(config, VectorXd::Zero(7));
        REQUIRE(mu[0] == Catch::Approx(0.5));
        REQUIRE(mu[config.index_of(0b011)] == Catch::Approx(0.25));
        REQUIRE(mu[config.index_of(0b111)] == Catch::Approx(0.125));
    }
    SECTION("matches brute-force expectation, lies in (0,1), monotone")
    {
        std::mt19937_64 rng(47);
        for (int K = 2; K <= 4; ++K) {
            ModelConfig config(K, K, 0);
            const VectorXd f = oracle::random_natural_params(config, rng);
            const VectorXd mu = mean_mu(config, f);
            const VectorXd ref = oracle::mean(config, f);
            REQUIRE((mu - ref).lpNorm<Eigen::Infinity>() < 1e-12);
            for (int j = 0; j < config.q(); ++j) {
                REQUIRE(mu[j] > 0.0);
                REQUIRE(mu[j] < 1.0);
            }
            for (int a = 0; a < config.q(); ++a)
                for (int b = 0; b < config.q(); ++b)
                    if ((config.subset(a) & config.subset(b)) == config.subset(a))
                        REQUIRE(mu[b] <= mu[a] + 1e-15);
        }
    }
    SECTION("mu equals the gradient of the log partition")
    {
        ModelConfig config(3, 3, 0);
        std::mt19937_64 rng(53);
        const VectorXd f = oracle::random_natural_params(config, rng, 2.0);
        const VectorXd mu = mean_mu(config, f);
        for (int j = 0; j < config.q(); ++j) {
            const double fd = oracle::central_difference(
                [&](const VectorXd& g) { return log_partition(config, g); }, f, j, 1e-5);
            REQUIRE(std::abs(fd - mu[j]) < 1e-6);
        }
    }
}

TEST_CASE("covariance of the augmented response")
{
    SECTION("uniform K=2 worked values")
    {
        ModelConfig config(2, 2, 0);
        const MatrixXd w = covariance_w(config, VectorXd::Zero(3));
        REQUIRE(w(0, 0) == Catch::Approx(0.25));
        REQUIRE(w(0, 1) == Catch::Approx(0.0).margin(1e-15));
        REQUIRE(w(0, 2) == Catch::Approx(0.125));
        REQUIRE(w(2, 2) == Catch::Approx(3.0 / 16.0));
    }
    SECTION("diagonal is the Bernoulli variance of each augmented entry")
    {
        ModelConfig config(4, 4, 0);
        std::mt19937_64 rng(59);
        const VectorXd f = oracle::random_natural_params(config, rng);
        const VectorXd mu = mean_mu(config, f);
        const MatrixXd w = covariance_w(config, f);
        for (int j = 0; j < config.q(); ++j)
            REQUIRE(w(j, j) == Catch::Approx(mu[j] * (1.0 - mu[j])).epsilon(1e-10));
    }
    SECTION("matches brute-force covariance and is PSD")
    {
        std::mt19937_64 rng(61);
        for (int K = 2; K <= 4; ++K) {
            ModelConfig config(K, K, 0);
            const VectorXd f = oracle::random_natural_params(config, rng);
            const MatrixXd w = covariance_w(config, f);
            REQUIRE((w - oracle::covariance(config, f)).lpNorm<Eigen::Infinity>() < 1e-12);
            REQUIRE(w.isApprox(w.transpose(), 1e-14));
            Eigen::SelfAdjointEigenSolver<MatrixXd> eig(w);
            REQUIRE(eig.eigenvalues().minCoeff() > -1e-12);
        }
    }
    SECTION("W equals finite differences of mu")
    {
        ModelConfig config(3, 3, 0);
        std::mt19937_64 rng(67);
        const VectorXd f = oracle::random_natural_params(config, rng, 2.0);
        const MatrixXd w = covariance_w(config, f);
        for (int b = 0; b < config.q(); ++b) {
            VectorXd up = f, down = f;
            up[b] += 1e-5;
            down[b] -= 1e-5;
            const VectorXd col = (mean_mu(config, up) - mean_mu(config, down)) / 2e-5;
            for (int a = 0; a < config.q(); ++a) {
                const double rel = std::abs(col[a] - w(a, b)) / std::max(1e-8, std::abs(w(a, b)));
                REQUIRE(rel < 1e-5);
            }
        }
    }
}

TEST_CASE("truncated models treat absent interactions as zero")
{
    // m = 1 with K = 2: only main effects, outcomes still range over 2^K
    ModelConfig trunc(2, 1, 0);
    ModelConfig full(2, 2, 0);
    VectorXd f1(2);
    f1 << 0.7, -0.4;
    VectorXd f2(3);
    f2 << 0.7, -0.4, 0.0;
    REQUIRE(log_partition(trunc, f1) == Catch::Approx(log_partition(full, f2)).epsilon(1e-14));
    const VectorXd mu_t = mean_mu(trunc, f1);
    const VectorXd mu_f = mean_mu(full, f2);
    REQUIRE(mu_t[0] == Catch::Approx(mu_f[0]).epsilon(1e-14));
    REQUIRE(mu_t[1] == Catch::Approx(mu_f[1]).epsilon(1e-14));

    // with independent mains, the implied pair mean factorizes
    MomentTable table;
    table.compute(trunc, f1);
    REQUIRE(table.tail_prob(0b11) == Catch::Approx(mu_t[0] * mu_t[1]).epsilon(1e-12));
}
