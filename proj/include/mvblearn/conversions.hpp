#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mvblearn/likelihood.hpp"
#include "mvblearn/subsets.hpp"

namespace mvb {

/// Potential table of the single-clique graphical-model parameterization:
/// one strictly positive value per binary outcome pattern (indexed by its
/// support mask), with the all-zeros pattern fixed to 1 for identifiability.
struct PotentialTable {
    int k = 0;
    std::vector<double> values; // size 2^k, values[0] == 1

    void validate() const
    {
        if (k < 1 || k > kMaxNodes) throw std::invalid_argument("potential table: bad node count");
        if (values.size() != (std::size_t{1} << k))
            throw std::invalid_argument("potential table: size != 2^K");
        for (double v : values)
            if (!(v > 0.0) || !std::isfinite(v))
                throw std::invalid_argument("potential table: values must be strictly positive");
        if (values[0] != 1.0)
            throw std::invalid_argument("potential table: all-zeros pattern must have value 1");
    }
};

/// Graphical-model side of the conversion: potentials plus log normalizer.
struct GmParameterization {
    PotentialTable potentials;
    double log_z = 0.0;
};

/// Natural parameters from a full outcome-probability table via the odd-even
/// partition: f^omega is the alternating-parity log-product of the pattern
/// probabilities over all subsets of omega, i.e. the subset Moebius transform
/// of log p.
inline VectorXd mvb_from_table(const ModelConfig& config, const std::vector<double>& probs,
                               double normalization_tol = 1e-9)
{
    if (config.m() != config.k())
        throw std::invalid_argument("mvb_from_table requires the full model (m = K)");
    const std::size_t size = std::size_t{1} << config.k();
    if (probs.size() != size) throw std::invalid_argument("probability table: size != 2^K");
    double total = 0.0;
    for (double v : probs) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument("probability table: entries must be strictly positive");
        total += v;
    }
    if (std::abs(total - 1.0) > normalization_tol)
        throw std::invalid_argument("probability table: entries must sum to 1");

    std::vector<double> logp(size);
    for (std::size_t mask = 0; mask < size; ++mask) logp[mask] = std::log(probs[mask]);
    detail::moebius_subsets(logp, config.k());

    VectorXd f(config.q());
    for (int j = 0; j < config.q(); ++j) f[j] = logp[config.subset(j)];
    return f;
}

/// Conditional log odds ratios of the graphical model with the general clique
/// {1..K}: the same alternating-parity product applied to the potentials. The
/// normalizer cancels, so the potentials need not be normalized.
inline VectorXd mvb_from_gm(const ModelConfig& config, const PotentialTable& potentials)
{
    potentials.validate();
    if (potentials.k != config.k()) throw std::invalid_argument("potential table: node count != K");
    if (config.m() != config.k())
        throw std::invalid_argument("mvb_from_gm requires the full model (m = K)");

    const std::size_t size = std::size_t{1} << config.k();
    std::vector<double> logphi(size);
    for (std::size_t mask = 0; mask < size; ++mask) logphi[mask] = std::log(potentials.values[mask]);
    detail::moebius_subsets(logphi, config.k());

    VectorXd f(config.q());
    for (int j = 0; j < config.q(); ++j) f[j] = logphi[config.subset(j)];
    return f;
}

/// Single-clique parameterization of the graphical model equivalent to f:
/// Phi(pattern omega) = exp(S^omega), Z = exp(b(f)). Only defined for the
/// full model; a truncated enumeration cannot represent all 2^K - 1 patterns.
inline GmParameterization gm_from_mvb(const ModelConfig& config, const Eigen::Ref<const VectorXd>& f)
{
    if (config.m() != config.k())
        throw std::invalid_argument("gm_from_mvb requires the full model (m = K)");
    MomentTable table;
    table.compute(config, f);

    GmParameterization gm;
    gm.potentials.k = config.k();
    const std::size_t size = std::size_t{1} << config.k();
    gm.potentials.values.resize(size);
    gm.potentials.values[0] = 1.0;
    for (std::size_t mask = 1; mask < size; ++mask)
        gm.potentials.values[mask] = std::exp(table.subset_sum(static_cast<SubsetMask>(mask)));
    gm.log_z = table.log_partition();
    return gm;
}

/// Outcome probabilities of the model at f, indexed by support mask. This is
/// the forward map inverted by mvb_from_table.
inline std::vector<double> probability_table(const ModelConfig& config,
                                             const Eigen::Ref<const VectorXd>& f)
{
    MomentTable table;
    table.compute(config, f);
    const std::size_t size = std::size_t{1} << config.k();
    std::vector<double> probs(size);
    for (std::size_t mask = 0; mask < size; ++mask)
        probs[mask] = table.outcome_prob(static_cast<SubsetMask>(mask));
    return probs;
}

} // namespace mvb
