#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mvblearn/subsets.hpp"

namespace mvb {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Augmented response: values[omega] = prod_{i in omega} y_i for every
/// enumerated subset omega.
inline VectorXd augment_response(const ModelConfig& config, const Eigen::Ref<const VectorXd>& y)
{
    if (y.size() != config.k()) throw std::invalid_argument("response length != K");
    SubsetMask support = 0;
    for (int i = 0; i < config.k(); ++i) {
        if (y[i] != 0.0 && y[i] != 1.0) throw std::invalid_argument("response entries must be 0 or 1");
        if (y[i] == 1.0) support |= SubsetMask{1} << i;
    }
    VectorXd out(config.q());
    for (int j = 0; j < config.q(); ++j) {
        const SubsetMask w = config.subset(j);
        out[j] = ((w & support) == w) ? 1.0 : 0.0;
    }
    return out;
}

/// Natural parameters f[omega] = c0^omega + sum_j c_j^omega x_j from the
/// concatenated coefficient vector.
inline VectorXd linear_predictor(const ModelConfig& config, const Eigen::Ref<const VectorXd>& c,
                                 const Eigen::Ref<const VectorXd>& x)
{
    if (c.size() != config.dim()) throw std::invalid_argument("coefficient vector length != (p+1)q");
    if (x.size() != config.p()) throw std::invalid_argument("feature vector length != p");
    const int bs = config.block_size();
    VectorXd f(config.q());
    for (int j = 0; j < config.q(); ++j) {
        const auto block = c.segment(j * bs, bs);
        f[j] = block[0] + block.tail(config.p()).dot(x);
    }
    return f;
}

namespace detail {

/// In-place subset-sum (zeta) transform over the full lattice:
/// on exit a[mask] = sum_{sub subseteq mask} a_in[sub].
inline void zeta_subsets(std::vector<double>& a, int K)
{
    const std::size_t size = std::size_t{1} << K;
    for (int bit = 0; bit < K; ++bit) {
        const std::size_t step = std::size_t{1} << bit;
        for (std::size_t mask = 0; mask < size; ++mask)
            if (mask & step) a[mask] += a[mask ^ step];
    }
}

/// Inverse of zeta_subsets (Moebius transform):
/// on exit a[mask] = sum_{sub subseteq mask} (-1)^{|mask|-|sub|} a_in[sub].
inline void moebius_subsets(std::vector<double>& a, int K)
{
    const std::size_t size = std::size_t{1} << K;
    for (int bit = 0; bit < K; ++bit) {
        const std::size_t step = std::size_t{1} << bit;
        for (std::size_t mask = 0; mask < size; ++mask)
            if (mask & step) a[mask] -= a[mask ^ step];
    }
}

/// In-place superset-sum transform: on exit a[mask] = sum_{sup supseteq mask} a_in[sup].
inline void zeta_supersets(std::vector<double>& a, int K)
{
    const std::size_t size = std::size_t{1} << K;
    for (int bit = 0; bit < K; ++bit) {
        const std::size_t step = std::size_t{1} << bit;
        for (std::size_t mask = 0; mask < size; ++mask)
            if (!(mask & step)) a[mask] += a[mask ^ step];
    }
}

} // namespace detail

/// Exact moments of the distribution at one natural-parameter vector f.
/// Per evaluation this runs two O(K 2^K) lattice transforms; the tables give
/// S^omega for every outcome support, the log partition b, outcome
/// probabilities, and tail sums P(support(Y) >= mask) from which the mean and
/// covariance of the augmented response are read off. Reusable across samples
/// to avoid reallocation.
class MomentTable {
public:
    void compute(const ModelConfig& config, const Eigen::Ref<const VectorXd>& f)
    {
        if (f.size() != config.q()) throw std::invalid_argument("natural parameter length != q");
        if (!f.allFinite()) throw std::invalid_argument("natural parameters must be finite");
        config_ = &config;
        const std::size_t size = std::size_t{1} << config.k();
        s_.assign(size, 0.0);
        for (int j = 0; j < config.q(); ++j) s_[config.subset(j)] = f[j];
        detail::zeta_subsets(s_, config.k());

        // log partition via log-sum-exp over all outcome supports (S of the
        // empty support is 0, giving the "1 +" term).
        double smax = 0.0;
        for (double v : s_) smax = std::max(smax, v);
        double acc = 0.0;
        for (double v : s_) acc += std::exp(v - smax);
        b_ = smax + std::log(acc);

        tail_.resize(size);
        for (std::size_t mask = 0; mask < size; ++mask) tail_[mask] = std::exp(s_[mask] - b_);
        detail::zeta_supersets(tail_, config.k());
    }

    double log_partition() const { return b_; }

    /// S^mask = sum of f over nonempty enumerated subsets of mask.
    double subset_sum(SubsetMask mask) const { return s_[mask]; }

    /// Probability of the outcome whose support is exactly `mask`.
    double outcome_prob(SubsetMask mask) const { return std::exp(s_[mask] - b_); }

    /// P(support(Y) contains mask) = mu at that mask.
    double tail_prob(SubsetMask mask) const { return tail_[mask]; }

    /// Mean of the augmented response over the enumerated subsets.
    VectorXd mean() const
    {
        VectorXd mu(config_->q());
        for (int j = 0; j < config_->q(); ++j) mu[j] = tail_[config_->subset(j)];
        return mu;
    }

    void mean_into(Eigen::Ref<VectorXd> mu) const
    {
        for (int j = 0; j < config_->q(); ++j) mu[j] = tail_[config_->subset(j)];
    }

    double covariance(int a, int b) const
    {
        const SubsetMask wa = config_->subset(a);
        const SubsetMask wb = config_->subset(b);
        return tail_[wa | wb] - tail_[wa] * tail_[wb];
    }

    /// Full q x q covariance of the augmented response.
    MatrixXd covariance() const
    {
        const int q = config_->q();
        MatrixXd w(q, q);
        for (int a = 0; a < q; ++a)
            for (int b = 0; b <= a; ++b) {
                const double v = covariance(a, b);
                w(a, b) = v;
                w(b, a) = v;
            }
        return w;
    }

private:
    const ModelConfig* config_ = nullptr;
    std::vector<double> s_;    // S^mask over the full lattice
    std::vector<double> tail_; // P(support >= mask)
    double b_ = 0.0;
};

/// S^omega = sum_{kappa subseteq omega, kappa nonempty} f^kappa for every
/// enumerated omega.
inline VectorXd s_values(const ModelConfig& config, const Eigen::Ref<const VectorXd>& f)
{
    MomentTable table;
    table.compute(config, f);
    VectorXd s(config.q());
    for (int j = 0; j < config.q(); ++j) s[j] = table.subset_sum(config.subset(j));
    return s;
}

/// b(f) = log(1 + sum_omega exp S^omega), overflow-safe.
inline double log_partition(const ModelConfig& config, const Eigen::Ref<const VectorXd>& f)
{
    MomentTable table;
    table.compute(config, f);
    return table.log_partition();
}

/// log p(y | f) = Y(y)^T f - b(f).
inline double log_prob(const ModelConfig& config, const Eigen::Ref<const VectorXd>& y,
                       const Eigen::Ref<const VectorXd>& f)
{
    MomentTable table;
    table.compute(config, f);
    SubsetMask support = 0;
    if (y.size() != config.k()) throw std::invalid_argument("response length != K");
    for (int i = 0; i < config.k(); ++i) {
        if (y[i] != 0.0 && y[i] != 1.0) throw std::invalid_argument("response entries must be 0 or 1");
        if (y[i] == 1.0) support |= SubsetMask{1} << i;
    }
    return table.subset_sum(support) - table.log_partition();
}

/// mu[kappa] = E[Y^kappa | f] over the enumerated subsets.
inline VectorXd mean_mu(const ModelConfig& config, const Eigen::Ref<const VectorXd>& f)
{
    MomentTable table;
    table.compute(config, f);
    return table.mean();
}

/// W[alpha, beta] = cov(Y^alpha, Y^beta | f), symmetric positive semidefinite.
inline MatrixXd covariance_w(const ModelConfig& config, const Eigen::Ref<const VectorXd>& f)
{
    MomentTable table;
    table.compute(config, f);
    return table.covariance();
}

} // namespace mvb
