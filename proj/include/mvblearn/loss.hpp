#pragma once

#include <stdexcept>

#include <Eigen/Dense>

#include "mvblearn/dataset.hpp"
#include "mvblearn/likelihood.hpp"
#include "mvblearn/subsets.hpp"

namespace mvb {

/// Negative log-likelihood of the model over a dataset,
///   L(c) = sum_i [ -Y(i)^T f(x(i)) + b(f(x(i))) ],
/// with f = linear predictor of the coefficient blocks. Stores the design with
/// a leading 1-column and the augmented responses, so the per-sample cost is
/// the two lattice transforms plus a q x (p+1) product.
///
/// The augmented responses are kept as reals: the tuning diagnostics perturb
/// them off the lattice.
class MvbLoss {
public:
    MvbLoss(const ModelConfig& config, const Dataset& data) : config_(config)
    {
        data.validate();
        if (data.k() != config.k()) throw std::invalid_argument("dataset K != model K");
        if (data.p() != config.p()) throw std::invalid_argument("dataset p != model p");
        const int n = data.n();
        design_.resize(n, config.p() + 1);
        design_.col(0).setOnes();
        design_.rightCols(config.p()) = data.x;
        yaug_.resize(n, config.q());
        for (int i = 0; i < n; ++i)
            yaug_.row(i) = augment_response(config, data.y.row(i).transpose()).transpose();
    }

    /// Raw constructor for tests and diagnostics: x without the 1-column,
    /// yaug already augmented (need not be 0/1).
    MvbLoss(const ModelConfig& config, const MatrixXd& x, const MatrixXd& yaug) : config_(config)
    {
        if (x.cols() != config.p()) throw std::invalid_argument("feature matrix p mismatch");
        if (yaug.cols() != config.q()) throw std::invalid_argument("augmented response q mismatch");
        if (x.rows() != yaug.rows()) throw std::invalid_argument("row count mismatch");
        design_.resize(x.rows(), config.p() + 1);
        design_.col(0).setOnes();
        design_.rightCols(config.p()) = x;
        yaug_ = yaug;
    }

    const ModelConfig& config() const { return config_; }
    int n() const { return static_cast<int>(design_.rows()); }

    /// Design row with the leading intercept column.
    const MatrixXd& design() const { return design_; }
    const MatrixXd& augmented() const { return yaug_; }

    /// Natural parameters for sample i at coefficients reshaped as q x (p+1).
    VectorXd predictor(const Eigen::Ref<const VectorXd>& c, int i) const
    {
        return blocks_view(c) * design_.row(i).transpose();
    }

    double value(const Eigen::Ref<const VectorXd>& c) const
    {
        const auto blocks = blocks_view(c);
        MomentTable table;
        double total = 0.0;
        for (int i = 0; i < n(); ++i) {
            const VectorXd f = blocks * design_.row(i).transpose();
            table.compute(config_, f);
            total += table.log_partition() - yaug_.row(i).dot(f);
        }
        return total;
    }

    double value_and_gradient(const Eigen::Ref<const VectorXd>& c, VectorXd& grad) const
    {
        const auto blocks = blocks_view(c);
        grad.setZero(config_.dim());
        Eigen::Map<MatrixXd> gblocks(grad.data(), config_.block_size(), config_.q());
        MomentTable table;
        VectorXd f(config_.q()), mu(config_.q());
        double total = 0.0;
        for (int i = 0; i < n(); ++i) {
            f.noalias() = blocks * design_.row(i).transpose();
            table.compute(config_, f);
            table.mean_into(mu);
            total += table.log_partition() - yaug_.row(i).dot(f);
            // block (omega, j) accumulates (mu^omega - y^omega) * xj
            gblocks.noalias() +=
                design_.row(i).transpose() * (mu.transpose() - yaug_.row(i));
        }
        return total;
    }

private:
    // coefficients live as q contiguous blocks of size p+1; view them as a
    // (p+1) x q column-major matrix so f = blocks^T xtil
    Eigen::Map<const MatrixXd> blocks_map(const Eigen::Ref<const VectorXd>& c) const
    {
        return Eigen::Map<const MatrixXd>(c.data(), config_.block_size(), config_.q());
    }

    MatrixXd blocks_view(const Eigen::Ref<const VectorXd>& c) const
    {
        if (c.size() != config_.dim())
            throw std::invalid_argument("coefficient vector length != (p+1)q");
        return blocks_map(c).transpose();
    }

    ModelConfig config_;
    MatrixXd design_; // n x (p+1)
    MatrixXd yaug_;   // n x q
};

} // namespace mvb
