#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mvblearn/groups.hpp"
#include "mvblearn/likelihood.hpp"
#include "mvblearn/loss.hpp"
#include "mvblearn/solver.hpp"
#include "mvblearn/subsets.hpp"

namespace mvb {

/// Hessian of lambda * J at a point with at least one active group:
///   lambda * sum_{v: ||c^{T_v}|| != 0} p_v R_v(||R_v c||^2 I - c c^T)R_v / ||R_v c||^3,
/// where R_v selects the coordinates of the blocks in T_v. Positive
/// semidefinite; degree -1 homogeneous in c.
inline MatrixXd penalty_hessian(const ModelConfig& config, const GroupStructure& groups,
                                const Eigen::Ref<const VectorXd>& c, double lambda)
{
    if (c.size() != config.dim()) throw std::invalid_argument("penalty hessian: dimension mismatch");
    const int bs = config.block_size();
    VectorXd sq(config.q());
    for (int j = 0; j < config.q(); ++j) sq[j] = c.segment(j * bs, bs).squaredNorm();

    MatrixXd hess = MatrixXd::Zero(config.dim(), config.dim());
    bool any_active = false;
    VectorXd rv(config.dim());
    for (int v = 0; v < groups.group_count(); ++v) {
        double normsq = 0.0;
        for (auto j : groups.members[v]) normsq += sq[j];
        if (normsq == 0.0) continue;
        any_active = true;
        const double norm = std::sqrt(normsq);
        rv.setZero();
        for (auto j : groups.members[v]) rv.segment(j * bs, bs) = c.segment(j * bs, bs);
        const double scale = lambda * groups.weights[v] / (normsq * norm);
        for (auto j : groups.members[v]) {
            const int off = j * bs;
            for (int t = 0; t < bs; ++t) hess(off + t, off + t) += scale * normsq;
        }
        hess.noalias() -= scale * rv * rv.transpose();
    }
    if (!any_active)
        throw std::invalid_argument("penalty hessian: undefined when every group is zero");
    return hess;
}

/// Compound-symmetric q x q matrix (delta - gamma) I + gamma e e^T, the shape
/// of the generalized averages; closed under products and inversion.
struct CompoundSymmetric {
    double delta = 0.0;
    double gamma = 0.0;
    int q = 0;

    double diagonal() const { return delta; }
    double off_diagonal() const { return gamma; }

    MatrixXd dense() const
    {
        MatrixXd m = MatrixXd::Constant(q, q, gamma);
        m.diagonal().setConstant(delta);
        return m;
    }

    bool invertible(double tol = 1e-12) const
    {
        const double scale = std::max({std::abs(delta), std::abs(gamma), 1.0});
        return std::abs(delta - gamma) > tol * scale &&
               std::abs(delta + (q - 1) * gamma) > tol * scale;
    }

    /// Sherman-Morrison closed form.
    CompoundSymmetric inverse() const
    {
        const double a = delta - gamma;
        const double trace_term = delta + (q - 1) * gamma;
        const double inv_gamma = -gamma / (a * trace_term);
        return {1.0 / a + inv_gamma, inv_gamma, q};
    }

    /// Product of two compound-symmetric matrices is compound-symmetric.
    CompoundSymmetric operator*(const CompoundSymmetric& other) const
    {
        const double a = delta - gamma, b = gamma;
        const double cdiag = other.delta - other.gamma, d = other.gamma;
        // (aI + b ee^T)(cI + d ee^T) = ac I + (ad + bc + q b d) ee^T
        const double off = a * d + b * cdiag + static_cast<double>(q) * b * d;
        return {a * cdiag + off, off, q};
    }
};

/// Generalized average of per-sample q x q matrices:
/// delta = (1/(nq)) sum_i tr(M(i)), gamma = (1/(nq(q-1))) sum_i [e^T M(i) e - tr(M(i))];
/// gamma = 0 when q = 1.
inline CompoundSymmetric generalized_average(const std::vector<MatrixXd>& blocks)
{
    if (blocks.empty()) throw std::invalid_argument("generalized average: no blocks");
    const int q = static_cast<int>(blocks.front().rows());
    const double n = static_cast<double>(blocks.size());
    double trace_sum = 0.0, cross_sum = 0.0;
    for (const auto& m : blocks) {
        if (m.rows() != q || m.cols() != q)
            throw std::invalid_argument("generalized average: block shape mismatch");
        const double tr = m.trace();
        trace_sum += tr;
        cross_sum += m.sum() - tr;
    }
    CompoundSymmetric out;
    out.q = q;
    out.delta = trace_sum / (n * q);
    out.gamma = q > 1 ? cross_sum / (n * q * (q - 1)) : 0.0;
    return out;
}

namespace detail {

/// Active-set geometry and the factorized penalized Hessian shared by the
/// influence computations: A = D~^T W D~ + lambda * penalty curvature, on the
/// nonzero coordinates of c.
class InfluenceContext {
public:
    InfluenceContext(const ModelConfig& config, const GroupStructure& groups, const MvbLoss& loss,
                     const Eigen::Ref<const VectorXd>& c, double lambda)
        : config_(config), loss_(loss), c_(c)
    {
        if (c.size() != config.dim()) throw std::invalid_argument("influence: dimension mismatch");
        const int bs = config.block_size();

        for (int j = 0; j < config.q(); ++j) {
            std::vector<int> local;
            for (int t = 0; t < bs; ++t)
                if (c[j * bs + t] != 0.0) local.push_back(t);
            if (local.empty()) continue;
            block_of_.push_back(j);
            local_coords_.push_back(std::move(local));
        }
        n_active_blocks_ = static_cast<int>(block_of_.size());
        offsets_.resize(n_active_blocks_ + 1, 0);
        for (int a = 0; a < n_active_blocks_; ++a)
            offsets_[a + 1] = offsets_[a] + static_cast<int>(local_coords_[a].size());
        n_ = offsets_.back();
        if (n_ == 0) throw std::invalid_argument("influence: active set is empty");

        // A = sum_i D~(i)^T W(i) D~(i) + lambda-penalty curvature on the active set
        MatrixXd a = MatrixXd::Zero(n_, n_);
        MomentTable table;
        VectorXd f(config.q());
        MatrixXd wsub(n_active_blocks_, n_active_blocks_);
        for (int i = 0; i < loss.n(); ++i) {
            f = loss.predictor(c, i);
            table.compute(config, f);
            for (int ba = 0; ba < n_active_blocks_; ++ba)
                for (int bb = 0; bb <= ba; ++bb) {
                    const double w = table.covariance(block_of_[ba], block_of_[bb]);
                    wsub(ba, bb) = w;
                    wsub(bb, ba) = w;
                }
            accumulate_sample(a, wsub, loss.design().row(i));
        }
        const MatrixXd jpen = penalty_hessian(config, groups, c, lambda);
        for (int ra = 0; ra < n_; ++ra)
            for (int rb = 0; rb < n_; ++rb) a(ra, rb) += jpen(global_coord(ra), global_coord(rb));

        factorize(a);
    }

    int active_count() const { return n_; }
    int active_block_count() const { return n_active_blocks_; }
    const std::vector<int>& active_blocks() const { return block_of_; }

    /// Design entries of sample i over the active coordinates of active block a.
    VectorXd design_slice(int i, int a) const
    {
        const auto& local = local_coords_[a];
        VectorXd out(local.size());
        for (std::size_t t = 0; t < local.size(); ++t) out[t] = loss_.design()(i, local[t]);
        return out;
    }

    /// H(i,i) restricted to active blocks (q_a x q_a).
    MatrixXd h_sub(int i) const
    {
        MatrixXd g = MatrixXd::Zero(n_, n_active_blocks_);
        for (int a = 0; a < n_active_blocks_; ++a)
            g.block(offsets_[a], a, offsets_[a + 1] - offsets_[a], 1) = design_slice(i, a);
        const MatrixXd solved = solve(g);
        return g.transpose() * solved;
    }

    void moments(int i, MomentTable& table) const { table.compute(config_, loss_.predictor(c_, i)); }

    /// W(i) restricted to active blocks, plus full row sums over all
    /// enumerated subsets, from a precomputed moment table.
    void w_sub(const MomentTable& table, MatrixXd& wsub, VectorXd& row_sums) const
    {
        wsub.resize(n_active_blocks_, n_active_blocks_);
        for (int a = 0; a < n_active_blocks_; ++a)
            for (int b = 0; b <= a; ++b) {
                const double w = table.covariance(block_of_[a], block_of_[b]);
                wsub(a, b) = w;
                wsub(b, a) = w;
            }
        row_sums.resize(n_active_blocks_);
        for (int a = 0; a < n_active_blocks_; ++a) {
            const SubsetMask wa = config_.subset(block_of_[a]);
            const double ta = table.tail_prob(wa);
            double acc = 0.0;
            for (int b = 0; b < config_.q(); ++b) {
                const SubsetMask wb = config_.subset(b);
                acc += table.tail_prob(wa | wb) - ta * table.tail_prob(wb);
            }
            row_sums[a] = acc;
        }
    }

    /// Embeds the active-block H into the full q x q layout.
    MatrixXd h_full(int i) const
    {
        const MatrixXd sub = h_sub(i);
        MatrixXd h = MatrixXd::Zero(config_.q(), config_.q());
        for (int a = 0; a < n_active_blocks_; ++a)
            for (int b = 0; b < n_active_blocks_; ++b) h(block_of_[a], block_of_[b]) = sub(a, b);
        return h;
    }

    MatrixXd solve(const MatrixXd& rhs) const { return ldlt_.solve(rhs); }

private:
    int global_coord(int r) const
    {
        const int a = static_cast<int>(
            std::upper_bound(offsets_.begin(), offsets_.end(), r) - offsets_.begin() - 1);
        return block_of_[a] * config_.block_size() + local_coords_[a][r - offsets_[a]];
    }

    void accumulate_sample(MatrixXd& a, const MatrixXd& wsub, const Eigen::Ref<const Eigen::RowVectorXd>& design)
    {
        for (int ba = 0; ba < n_active_blocks_; ++ba)
            for (int bb = 0; bb <= ba; ++bb) {
                for (std::size_t ta = 0; ta < local_coords_[ba].size(); ++ta)
                    for (std::size_t tb = 0; tb < local_coords_[bb].size(); ++tb) {
                        const double val = wsub(ba, bb) * design[local_coords_[ba][ta]] *
                                           design[local_coords_[bb][tb]];
                        const int ra = offsets_[ba] + static_cast<int>(ta);
                        const int rb = offsets_[bb] + static_cast<int>(tb);
                        a(ra, rb) += val;
                        if (ra != rb) a(rb, ra) += val;
                    }
            }
    }

    void factorize(MatrixXd a)
    {
        ldlt_.compute(a);
        if (!usable()) {
            a.diagonal().array() += 1e-10;
            ldlt_.compute(a);
            if (!usable())
                throw std::runtime_error("influence: penalized Hessian is singular on the active set");
        }
    }

    bool usable() const
    {
        if (ldlt_.info() != Eigen::Success) return false;
        const VectorXd d = ldlt_.vectorD();
        const double dmax = d.cwiseAbs().maxCoeff();
        return d.cwiseAbs().minCoeff() > 1e-14 * std::max(dmax, 1.0);
    }

    const ModelConfig& config_;
    const MvbLoss& loss_;
    VectorXd c_;
    std::vector<int> block_of_;
    std::vector<std::vector<int>> local_coords_;
    std::vector<int> offsets_;
    int n_active_blocks_ = 0;
    int n_ = 0;
    Eigen::LDLT<MatrixXd> ldlt_;
};

} // namespace detail

/// Per-sample diagonal blocks H(i,i) of the influence matrix,
/// H = D~ (D~^T W D~ + lambda sum p_v J_v)^{-1} D~^T, materialized as full
/// q x q matrices. Desk-scale helper; the GACV scores stream the same
/// quantities without materializing anything per sample.
inline std::vector<MatrixXd> influence_diagonal(const ModelConfig& config,
                                                const GroupStructure& groups, const MvbLoss& loss,
                                                const Eigen::Ref<const VectorXd>& c, double lambda)
{
    detail::InfluenceContext ctx(config, groups, loss, c, lambda);
    std::vector<MatrixXd> blocks;
    blocks.reserve(loss.n());
    for (int i = 0; i < loss.n(); ++i) blocks.push_back(ctx.h_full(i));
    return blocks;
}

struct TuningDiagnostics {
    double obs = 0.0;
    double df = 0.0;
    double gacv = std::numeric_limits<double>::infinity();
    double bgacv = std::numeric_limits<double>::infinity();
    int active_count = 0;
    /// False when the generalized-average matrix was singular and the scores
    /// are meaningless (+inf, grid point skipped).
    bool valid = false;
};

/// GACV and BGACV scores of a fitted coefficient vector:
///   OBS = L(c)/n,  df = sum_i Y(i)^T Qbar^{-1} Hbar (Y(i) - mu(i)),
///   GACV = OBS + df/n,  BGACV = OBS + (log n / 2) df/n.
/// Qbar, Hbar are the generalized averages of I - H(i,i)W(i) and H(i,i); the
/// compound-symmetric algebra keeps the whole computation streaming.
inline TuningDiagnostics gacv_scores(const ModelConfig& config, const GroupStructure& groups,
                                     const MvbLoss& loss, const Eigen::Ref<const VectorXd>& c,
                                     double lambda)
{
    const int n = loss.n();
    const int q = config.q();
    TuningDiagnostics out;
    out.obs = loss.value(c) / n;
    out.active_count = static_cast<int>((c.array() != 0.0).count());

    if (out.active_count == 0) { // fully sparse: no curvature, df = 0
        out.df = 0.0;
        out.gacv = out.obs;
        out.bgacv = out.obs;
        out.valid = true;
        return out;
    }

    detail::InfluenceContext ctx(config, groups, loss, c, lambda);
    const int nb = ctx.active_block_count();

    double tr_h = 0.0, sum_h = 0.0, tr_q = 0.0, sum_q = 0.0;
    double dot_term = 0.0, cross_term = 0.0;
    MatrixXd wsub;
    VectorXd wrow;
    MomentTable table;
    VectorXd mu(q);
    for (int i = 0; i < n; ++i) {
        const MatrixXd h = ctx.h_sub(i);
        ctx.w_sub(i, wsub, wrow);
        tr_h += h.trace();
        sum_h += h.sum();
        const double tr_hw = h.cwiseProduct(wsub).sum(); // both symmetric
        double sum_hw = 0.0;
        for (int a = 0; a < nb; ++a) sum_hw += h.row(a).dot(wrow);
        tr_q += q - tr_hw;
        sum_q += q - sum_hw;

        table.compute(config, loss.predictor(c, i));
        table.mean_into(mu);
        const auto y = loss.augmented().row(i);
        const VectorXd resid = y.transpose() - mu;
        dot_term += y.dot(resid);
        cross_term += y.sum() * resid.sum();
    }

    CompoundSymmetric qbar;
    qbar.q = q;
    qbar.delta = tr_q / (static_cast<double>(n) * q);
    qbar.gamma = q > 1 ? (sum_q - tr_q) / (static_cast<double>(n) * q * (q - 1)) : 0.0;
    CompoundSymmetric hbar;
    hbar.q = q;
    hbar.delta = tr_h / (static_cast<double>(n) * q);
    hbar.gamma = q > 1 ? (sum_h - tr_h) / (static_cast<double>(n) * q * (q - 1)) : 0.0;

    if (!qbar.invertible()) return out; // scores stay +inf, caller skips

    const CompoundSymmetric m = qbar.inverse() * hbar;
    const double a_coef = m.delta - m.gamma;
    out.df = a_coef * dot_term + m.gamma * cross_term;
    out.gacv = out.obs + out.df / n;
    out.bgacv = out.obs + 0.5 * std::log(static_cast<double>(n)) * out.df / n;
    out.valid = std::isfinite(out.df);
    if (!out.valid) {
        out.gacv = std::numeric_limits<double>::infinity();
        out.bgacv = std::numeric_limits<double>::infinity();
    }
    return out;
}

enum class Criterion { GACV, BGACV };

struct TuneEntry {
    double lambda = 0.0;
    FitResult fit;
    TuningDiagnostics diagnostics;
};

struct TuneResult {
    double best_lambda = 0.0;
    int best_index = -1;
    std::vector<TuneEntry> path;
};

/// Log-spaced grid from lambda_max down to lambda_max/ratio.
inline std::vector<double> default_lambda_grid(double lambda_max, int count = 30,
                                               double ratio = 100.0)
{
    if (!(lambda_max > 0.0)) throw std::invalid_argument("lambda grid: need lambda_max > 0");
    if (count < 1 || !(ratio > 1.0)) throw std::invalid_argument("lambda grid: bad shape");
    std::vector<double> grid(count);
    if (count == 1) {
        grid[0] = lambda_max;
        return grid;
    }
    const double step = std::log(ratio) / (count - 1);
    for (int i = 0; i < count; ++i) grid[i] = lambda_max * std::exp(-step * i);
    return grid;
}

/// Warm-started descending-lambda path with per-point scores; returns the
/// grid point minimizing the chosen criterion, ties broken toward the larger
/// lambda (the grid must be sorted descending).
inline TuneResult tune(const ModelConfig& config, const GroupStructure& groups, const MvbLoss& loss,
                       const std::vector<double>& grid, Criterion criterion,
                       const FitOptions& opts = {})
{
    if (grid.empty()) throw std::invalid_argument("tune: empty grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0)) throw std::invalid_argument("tune: grid must be positive");
        if (i > 0 && grid[i] >= grid[i - 1])
            throw std::invalid_argument("tune: grid must be sorted descending");
    }

    TuneResult result;
    VectorXd warm = VectorXd::Zero(config.dim());
    DualState duals;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        TuneEntry entry;
        entry.lambda = grid[i];
        entry.fit = fit(config, groups, loss, grid[i], opts, warm, &duals);
        warm = entry.fit.c;
        entry.diagnostics = gacv_scores(config, groups, loss, entry.fit.c, grid[i]);
        const double score =
            criterion == Criterion::GACV ? entry.diagnostics.gacv : entry.diagnostics.bgacv;
        if (entry.diagnostics.valid && score < best_score) {
            best_score = score;
            result.best_index = static_cast<int>(i);
            result.best_lambda = grid[i];
        }
        result.path.push_back(std::move(entry));
    }
    if (result.best_index < 0) throw std::runtime_error("tune: every grid point was skipped");
    return result;
}

} // namespace mvb
