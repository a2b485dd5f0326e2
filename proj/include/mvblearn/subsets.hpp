#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvb {

/// A nonempty subset of the node set {1..K}, encoded as a bitmask:
/// node i (1-based) corresponds to bit (i-1).
using SubsetMask = std::uint32_t;

inline int subset_order(SubsetMask mask) { return std::popcount(mask); }

/// Renders a mask as comma-separated ascending 1-based node labels, e.g. "1,3".
inline std::string format_subset(SubsetMask mask)
{
    std::string out;
    for (int i = 0; mask != 0; ++i, mask >>= 1) {
        if (mask & 1u) {
            if (!out.empty()) out += ',';
            out += std::to_string(i + 1);
        }
    }
    return out;
}

/// Parses the format produced by format_subset. Labels must be in [1, max_node].
inline SubsetMask parse_subset(const std::string& text, int max_node)
{
    SubsetMask mask = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t next = text.find(',', pos);
        if (next == std::string::npos) next = text.size();
        const std::string tok = text.substr(pos, next - pos);
        int label = 0;
        try {
            label = std::stoi(tok);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad subset token '" + tok + "'");
        }
        if (label < 1 || label > max_node)
            throw std::invalid_argument("subset label " + std::to_string(label) +
                                        " out of range 1.." + std::to_string(max_node));
        mask |= SubsetMask{1} << (label - 1);
        pos = next + 1;
    }
    if (mask == 0) throw std::invalid_argument("empty subset '" + text + "'");
    return mask;
}

/// Hard cap on K: every exact operation enumerates the 2^K outcome lattice at
/// least once, so beyond this the model is out of reach for this solver anyway.
inline constexpr int kMaxNodes = 20;

/// Canonical enumeration of the nonempty node subsets up to order m, plus the
/// feature dimension shared by every coefficient block. All indexed collections
/// (natural parameters, augmented responses, coefficient blocks, penalty groups)
/// use this ordering: cardinality ascending, mask ascending within a level.
class ModelConfig {
public:
    ModelConfig() = default;

    ModelConfig(int K, int m, int p) : k_(K), m_(m), p_(p)
    {
        if (K < 1 || K > kMaxNodes)
            throw std::invalid_argument("node count K must be in 1.." + std::to_string(kMaxNodes));
        if (m < 1 || m > K)
            throw std::invalid_argument("interaction order m must be in 1..K");
        if (p < 0) throw std::invalid_argument("feature count p must be >= 0");

        const SubsetMask full = full_mask();
        index_of_.assign(std::size_t{1} << K, -1);
        for (int level = 1; level <= m; ++level)
            for (SubsetMask mask = 1; mask <= full; ++mask)
                if (subset_order(mask) == level) {
                    index_of_[mask] = static_cast<std::int32_t>(subsets_.size());
                    subsets_.push_back(mask);
                }
    }

    int k() const { return k_; }
    int m() const { return m_; }
    int p() const { return p_; }

    /// Number of enumerated subsets, q = sum_{k=1..m} C(K,k).
    int q() const { return static_cast<int>(subsets_.size()); }

    /// Coefficient block length: intercept plus p feature weights.
    int block_size() const { return p_ + 1; }

    /// Total coefficient dimension (p+1)*q.
    int dim() const { return q() * block_size(); }

    SubsetMask full_mask() const { return (SubsetMask{1} << k_) - 1; }

    const std::vector<SubsetMask>& subsets() const { return subsets_; }
    SubsetMask subset(int index) const { return subsets_[static_cast<std::size_t>(index)]; }

    /// Enumeration index of a mask, or -1 when the mask is not enumerated
    /// (empty, or order above m).
    std::int32_t index_of(SubsetMask mask) const
    {
        return mask < index_of_.size() ? index_of_[mask] : -1;
    }

    int block_offset(int subset_index) const { return subset_index * block_size(); }

    bool operator==(const ModelConfig& other) const
    {
        return k_ == other.k_ && m_ == other.m_ && p_ == other.p_;
    }

private:
    int k_ = 0;
    int m_ = 0;
    int p_ = 0;
    std::vector<SubsetMask> subsets_;
    std::vector<std::int32_t> index_of_;
};

/// Canonical subset enumeration on its own, without the feature dimension.
inline std::vector<SubsetMask> enumerate_subsets(int K, int m)
{
    return ModelConfig(K, m, 0).subsets();
}

} // namespace mvb
