#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mvblearn/groups.hpp"
#include "mvblearn/loss.hpp"
#include "mvblearn/prox.hpp"
#include "mvblearn/subsets.hpp"

namespace mvb {

template <class L>
concept SmoothLoss = requires(const L& loss, const VectorXd& c, VectorXd& grad) {
    { loss.value(c) } -> std::convertible_to<double>;
    { loss.value_and_gradient(c, grad) } -> std::convertible_to<double>;
};

struct FitOptions {
    double alpha0 = 1.0;
    double alpha_min = 1e-8;
    double alpha_max = 1e8;
    double zeta = 2.0;
    /// Outer stop on the decrease of the last accepted step; <= 0 selects
    /// 1e-8 * (1 + |I(c0)|).
    double tol = -1.0;
    int max_outer = 500;
    /// Duality-gap tolerance for the subproblem; <= 0 selects
    /// 1e-9 * (1 + |I(c0)|).
    double inner_tol = -1.0;
    int inner_max = 5000;
    /// After the outer stop fires, iteration continues with a much tighter
    /// subproblem gap until the decrease falls below polish_tol (<= 0 selects
    /// 1e-13 * (1 + |I(c0)|)) or polish_rounds more steps were taken. This
    /// resolves the zero blocks of the prox output below zero_snap; blocks at
    /// or below that norm are then snapped to exact zeros.
    int polish_rounds = 40;
    double polish_tol = -1.0;
    double zero_snap = 1e-7;

    void validate() const
    {
        if (!(alpha_min <= alpha0 && alpha0 <= alpha_max))
            throw std::invalid_argument("fit options: need alpha_min <= alpha0 <= alpha_max");
        if (!(alpha_min > 0.0)) throw std::invalid_argument("fit options: alpha_min must be > 0");
        if (!(zeta > 1.0)) throw std::invalid_argument("fit options: zeta must be > 1");
        if (max_outer < 1 || inner_max < 1)
            throw std::invalid_argument("fit options: iteration caps must be >= 1");
        if (zero_snap < 0.0) throw std::invalid_argument("fit options: zero_snap must be >= 0");
    }
};

struct OuterStep {
    double alpha = 0.0;     // value that produced the accepted step
    double delta = 0.0;     // objective decrease of the accepted step
    double step_norm = 0.0; // ||d_k||
    double gap = 0.0;       // certified subproblem gap at acceptance
    double objective = 0.0; // I_lambda after the step
    int backtracks = 0;
    int inner_iterations = 0;
    bool polish = false;
};

struct FitResult {
    VectorXd c;
    double lambda = 0.0;
    double objective = 0.0;              // I_lambda at the returned c
    std::vector<double> objective_trace; // I at c0, then after each accepted step
    std::vector<OuterStep> steps;
    bool converged = false;
    double tol_used = 0.0;
    double inner_tol_used = 0.0;
    int snapped_blocks = 0;
};

namespace detail {

inline void check_finite_objective(double value)
{
    if (!std::isfinite(value))
        throw std::runtime_error("objective is not finite; check data scaling");
}

} // namespace detail

/// Proximal linearization: repeatedly minimize the linearized loss plus
/// (alpha_k/2)||c - c_k||^2 plus the untouched penalty, enlarging alpha_k by
/// zeta until the decrease delta_k beats ||d_k||^3, then relaxing it by zeta.
/// Stops when the decrease of an accepted step falls below tol. Dual variables
/// are warm-started across outer steps (and across calls via `warm_duals`), so
/// near a fixed point the subproblem solutions sharpen to the exact zero
/// pattern; a final snap zeroes blocks whose norm is numerical residue.
template <SmoothLoss L>
FitResult minimize_penalized(const L& loss, const ModelConfig& config, const GroupStructure& groups,
                             double lambda, const FitOptions& opts, const VectorXd& c0,
                             DualState* warm_duals = nullptr)
{
    opts.validate();
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    if (c0.size() != config.dim()) throw std::invalid_argument("c0 length != (p+1)q");

    FitResult result;
    result.lambda = lambda;
    result.c = c0;

    VectorXd grad(config.dim());
    double objective =
        loss.value_and_gradient(result.c, grad) + lambda * penalty_value(config, groups, result.c);
    detail::check_finite_objective(objective);
    result.objective_trace.push_back(objective);

    result.tol_used = opts.tol > 0.0 ? opts.tol : 1e-8 * (1.0 + std::abs(objective));
    result.inner_tol_used = opts.inner_tol > 0.0 ? opts.inner_tol : 1e-9 * (1.0 + std::abs(objective));
    const double polish_tol =
        opts.polish_tol > 0.0 ? opts.polish_tol : 1e-13 * (1.0 + std::abs(objective));

    DualState local_duals;
    DualState& duals = warm_duals != nullptr ? *warm_duals : local_duals;

    constexpr int kBacktrackLimit = 100;
    double alpha = opts.alpha0;
    bool stopped = false;
    int polish_left = opts.polish_rounds;

    for (int outer = 0; outer < opts.max_outer; ++outer) {
        alpha = std::clamp(alpha, opts.alpha_min, opts.alpha_max);

        const bool polishing = stopped;
        double gap_tol = result.inner_tol_used;
        if (polishing) {
            const double snap_gap = 0.5 * alpha * (0.25 * opts.zero_snap) * (0.25 * opts.zero_snap);
            gap_tol = std::min(gap_tol, std::max(snap_gap, 1e-15 * (1.0 + std::abs(objective))));
        }

        OuterStep step;
        ProxResult prox =
            solve_prox(config, groups, result.c, grad, alpha, lambda, gap_tol, opts.inner_max, duals);
        step.inner_iterations = prox.iterations;

        VectorXd trial = result.c + prox.step;
        double trial_objective = loss.value(trial) + lambda * penalty_value(config, groups, trial);
        detail::check_finite_objective(trial_objective);
        double delta = objective - trial_objective;
        double dnorm = prox.step.norm();

        while (delta < dnorm * dnorm * dnorm && step.backtracks < kBacktrackLimit) {
            alpha = std::max(opts.alpha_min, opts.zeta * alpha);
            prox = solve_prox(config, groups, result.c, grad, alpha, lambda, gap_tol, opts.inner_max,
                              duals);
            step.inner_iterations += prox.iterations;
            ++step.backtracks;
            trial = result.c + prox.step;
            trial_objective = loss.value(trial) + lambda * penalty_value(config, groups, trial);
            detail::check_finite_objective(trial_objective);
            delta = objective - trial_objective;
            dnorm = prox.step.norm();
        }
        if (delta < dnorm * dnorm * dnorm) break; // backtrack limit; return best iterate

        result.c = trial;
        objective = trial_objective;
        step.alpha = alpha;
        step.delta = delta;
        step.step_norm = dnorm;
        step.gap = prox.gap;
        step.objective = objective;
        step.polish = polishing;
        result.steps.push_back(step);
        result.objective_trace.push_back(objective);

        alpha /= opts.zeta;

        if (!stopped && delta < result.tol_used) {
            stopped = true;
            result.converged = true;
            if (polish_left <= 0) break;
        } else if (stopped && (delta < polish_tol || --polish_left <= 0)) {
            break;
        }

        if (outer + 1 < opts.max_outer) loss.value_and_gradient(result.c, grad);
    }

    // snap numerically-zero blocks, provided doing so stays within the
    // convergence slack of the objective
    if (opts.zero_snap > 0.0) {
        const VectorXd norms = block_norms(config, result.c);
        VectorXd snapped = result.c;
        int count = 0;
        const int bs = config.block_size();
        for (int j = 0; j < config.q(); ++j)
            if (norms[j] != 0.0 && norms[j] <= opts.zero_snap) {
                snapped.segment(j * bs, bs).setZero();
                ++count;
            }
        if (count > 0) {
            const double snapped_objective =
                loss.value(snapped) + lambda * penalty_value(config, groups, snapped);
            const double slack = std::max(1e-12, 1e-10 * (1.0 + std::abs(objective)));
            if (snapped_objective <= objective + slack) {
                result.c = std::move(snapped);
                objective = snapped_objective;
                result.snapped_blocks = count;
            }
        }
    }

    result.objective = objective;
    return result;
}

/// Penalized maximum likelihood fit of the model on a dataset.
inline FitResult fit(const ModelConfig& config, const GroupStructure& groups, const MvbLoss& loss,
                     double lambda, const FitOptions& opts = {},
                     const VectorXd& c0 = VectorXd(), DualState* warm_duals = nullptr)
{
    const VectorXd start = c0.size() == 0 ? VectorXd::Zero(config.dim()) : c0;
    return minimize_penalized(loss, config, groups, lambda, opts, start, warm_duals);
}

inline FitResult fit(const ModelConfig& config, const GroupStructure& groups, const Dataset& data,
                     double lambda, const FitOptions& opts = {})
{
    return fit(config, groups, MvbLoss(config, data), lambda, opts);
}

/// Smallest penalty level guaranteed to zero the whole model:
/// max_v ||grad L(0) restricted to T_v|| / p_v. Sufficient, not tight, for
/// overlapping groups.
template <SmoothLoss L>
double lambda_upper_bound(const ModelConfig& config, const GroupStructure& groups, const L& loss)
{
    VectorXd grad(config.dim());
    loss.value_and_gradient(VectorXd::Zero(config.dim()), grad);
    const int bs = config.block_size();
    VectorXd sq(config.q());
    for (int j = 0; j < config.q(); ++j) sq[j] = grad.segment(j * bs, bs).squaredNorm();
    double bound = 0.0;
    for (int v = 0; v < groups.group_count(); ++v) {
        double acc = 0.0;
        for (std::int32_t j : groups.members[v]) acc += sq[j];
        bound = std::max(bound, std::sqrt(acc) / groups.weights[v]);
    }
    return bound;
}

} // namespace mvb
