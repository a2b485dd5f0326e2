#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mvblearn/subsets.hpp"

namespace mvb {

using Eigen::VectorXd;

/// Overlapping penalty groups guided by the subset lattice: one group per
/// enumerated root v, containing every enumerated omega with v subseteq omega.
/// Weight defaults to 1/|T_v|.
struct GroupStructure {
    /// members[v] = enumeration indices of the subsets in T_v, ascending.
    std::vector<std::vector<std::int32_t>> members;
    /// p_v per root, aligned with the enumeration order.
    VectorXd weights;
    /// Number of groups covering each enumerated subset; its maximum is the
    /// exact largest eigenvalue of the dual coupling operator.
    std::vector<std::int32_t> cover_count;
    std::int32_t max_cover = 0;

    int group_count() const { return static_cast<int>(members.size()); }
};

inline GroupStructure build_groups(const ModelConfig& config)
{
    const int q = config.q();
    GroupStructure groups;
    groups.members.resize(q);
    groups.weights.resize(q);
    groups.cover_count.assign(q, 0);
    for (int v = 0; v < q; ++v) {
        const SubsetMask root = config.subset(v);
        auto& mem = groups.members[v];
        for (int j = 0; j < q; ++j) {
            const SubsetMask w = config.subset(j);
            if ((w & root) == root) {
                mem.push_back(j);
                ++groups.cover_count[j];
            }
        }
        groups.weights[v] = 1.0 / static_cast<double>(mem.size());
    }
    groups.max_cover = *std::max_element(groups.cover_count.begin(), groups.cover_count.end());
    return groups;
}

inline GroupStructure build_groups(const ModelConfig& config, const VectorXd& weights)
{
    GroupStructure groups = build_groups(config);
    if (weights.size() != groups.weights.size())
        throw std::invalid_argument("group weights: length != q");
    for (int v = 0; v < weights.size(); ++v)
        if (!(weights[v] > 0.0)) throw std::invalid_argument("group weights must be positive");
    groups.weights = weights;
    return groups;
}

/// Euclidean norms of the per-subset coefficient blocks.
inline VectorXd block_norms(const ModelConfig& config, const Eigen::Ref<const VectorXd>& c)
{
    if (c.size() != config.dim()) throw std::invalid_argument("coefficient vector length != (p+1)q");
    const int bs = config.block_size();
    VectorXd norms(config.q());
    for (int j = 0; j < config.q(); ++j) norms[j] = c.segment(j * bs, bs).norm();
    return norms;
}

/// J(c) = sum_v p_v * sqrt(sum_{omega in T_v} ||c^omega||^2).
inline double penalty_value(const ModelConfig& config, const GroupStructure& groups,
                            const Eigen::Ref<const VectorXd>& c)
{
    if (groups.group_count() != config.q()) throw std::invalid_argument("group structure mismatch");
    const int bs = config.block_size();
    VectorXd sq(config.q());
    for (int j = 0; j < config.q(); ++j) sq[j] = c.segment(j * bs, bs).squaredNorm();
    double total = 0.0;
    for (int v = 0; v < groups.group_count(); ++v) {
        double acc = 0.0;
        for (std::int32_t j : groups.members[v]) acc += sq[j];
        total += groups.weights[v] * std::sqrt(acc);
    }
    return total;
}

/// Graph structure read out of a coefficient vector: subsets with block norm
/// above tol, the edges they imply, and the maximal cliques of the resulting
/// graph (size >= 2, found by Bron-Kerbosch; the graphs here are tiny).
struct RecoveredStructure {
    std::vector<SubsetMask> nonzero_subsets;
    std::vector<std::pair<int, int>> edges; // 1-based node labels, s < t
    std::vector<SubsetMask> maximal_cliques;
};

namespace detail {

inline void bron_kerbosch(SubsetMask r, SubsetMask p, SubsetMask x,
                          const std::vector<SubsetMask>& nbr, std::vector<SubsetMask>& out)
{
    if (p == 0 && x == 0) {
        if (subset_order(r) >= 2) out.push_back(r);
        return;
    }
    // pivot on the candidate with most neighbours in p
    SubsetMask px = p | x;
    int pivot = -1, best = -1;
    for (int u = 0; px != 0; ++u, px >>= 1)
        if (px & 1u) {
            const int deg = subset_order(p & nbr[u]);
            if (deg > best) {
                best = deg;
                pivot = u;
            }
        }
    SubsetMask cand = p & ~nbr[pivot];
    for (int v = 0; cand != 0; ++v, cand >>= 1) {
        if (!(cand & 1u)) continue;
        const SubsetMask vbit = SubsetMask{1} << v;
        bron_kerbosch(r | vbit, p & nbr[v], x & nbr[v], nbr, out);
        p &= ~vbit;
        x |= vbit;
    }
}

} // namespace detail

inline RecoveredStructure recovered_structure(const ModelConfig& config,
                                              const Eigen::Ref<const VectorXd>& c, double tol)
{
    if (tol < 0.0) throw std::invalid_argument("tolerance must be >= 0");
    const VectorXd norms = block_norms(config, c);
    RecoveredStructure out;
    std::vector<SubsetMask> nbr(config.k(), 0);
    for (int j = 0; j < config.q(); ++j) {
        if (norms[j] <= tol) continue;
        const SubsetMask w = config.subset(j);
        out.nonzero_subsets.push_back(w);
        for (int s = 0; s < config.k(); ++s) {
            if (!(w & (SubsetMask{1} << s))) continue;
            for (int t = s + 1; t < config.k(); ++t)
                if (w & (SubsetMask{1} << t)) {
                    nbr[s] |= SubsetMask{1} << t;
                    nbr[t] |= SubsetMask{1} << s;
                }
        }
    }
    SubsetMask present = 0;
    for (int s = 0; s < config.k(); ++s) {
        present |= nbr[s] != 0 ? (SubsetMask{1} << s) : 0;
        for (int t = s + 1; t < config.k(); ++t)
            if (nbr[s] & (SubsetMask{1} << t)) out.edges.emplace_back(s + 1, t + 1);
    }
    if (present != 0) detail::bron_kerbosch(0, present, 0, nbr, out.maximal_cliques);
    std::sort(out.maximal_cliques.begin(), out.maximal_cliques.end(),
              [](SubsetMask a, SubsetMask b) {
                  const int oa = subset_order(a), ob = subset_order(b);
                  return oa != ob ? oa < ob : a < b;
              });
    return out;
}

/// Hierarchy check: pairs (omega1, omega2) with omega1 a proper subset of
/// omega2, block omega1 at or below tol while block omega2 is above it. Empty
/// on any exact minimizer of the penalized objective.
inline std::vector<std::pair<SubsetMask, SubsetMask>>
hierarchy_violations(const ModelConfig& config, const Eigen::Ref<const VectorXd>& c, double tol)
{
    if (tol < 0.0) throw std::invalid_argument("tolerance must be >= 0");
    const VectorXd norms = block_norms(config, c);
    std::vector<std::pair<SubsetMask, SubsetMask>> out;
    for (int j = 0; j < config.q(); ++j) {
        if (norms[j] <= tol) continue;
        const SubsetMask w = config.subset(j);
        for (SubsetMask sub = (w - 1) & w; sub != 0; sub = (sub - 1) & w) {
            const std::int32_t idx = config.index_of(sub);
            if (idx >= 0 && norms[idx] <= tol) out.emplace_back(sub, w);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Debug dump of the guiding structure: one line per root with its weight and
/// member subsets.
inline std::string dump_groups(const ModelConfig& config, const GroupStructure& groups)
{
    std::string out;
    for (int v = 0; v < groups.group_count(); ++v) {
        out += format_subset(config.subset(v));
        out += " weight " + std::to_string(groups.weights[v]) + " members";
        for (std::int32_t j : groups.members[v]) {
            out += ' ';
            out += format_subset(config.subset(j));
        }
        out += '\n';
    }
    return out;
}

} // namespace mvb
