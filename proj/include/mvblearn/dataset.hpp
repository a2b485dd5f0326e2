#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mvblearn/subsets.hpp"

namespace mvb {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Observations: binary response rows y(i) in {0,1}^K and feature rows
/// x(i) in R^p.
struct Dataset {
    MatrixXd y; // n x K, entries 0/1
    MatrixXd x; // n x p

    int n() const { return static_cast<int>(y.rows()); }
    int k() const { return static_cast<int>(y.cols()); }
    int p() const { return static_cast<int>(x.cols()); }

    void validate() const
    {
        if (y.rows() != x.rows()) throw std::invalid_argument("dataset: y and x row counts differ");
        if (y.rows() == 0) throw std::invalid_argument("dataset: empty");
        for (Eigen::Index i = 0; i < y.rows(); ++i)
            for (Eigen::Index j = 0; j < y.cols(); ++j)
                if (y(i, j) != 0.0 && y(i, j) != 1.0)
                    throw std::invalid_argument("dataset: responses must be 0 or 1");
    }
};

/// Affine feature transform x -> (x - mean) / scale, with the coefficient
/// maps between the raw and transformed parameterizations.
struct Standardizer {
    VectorXd mean;
    VectorXd scale;

    static Standardizer fit(const MatrixXd& x)
    {
        Standardizer s;
        const double n = static_cast<double>(x.rows());
        s.mean = x.colwise().mean();
        s.scale.resize(x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double var = (x.col(j).array() - s.mean[j]).square().sum() / n;
            s.scale[j] = std::sqrt(var);
            if (s.scale[j] <= 0.0) s.scale[j] = 1.0; // constant column, leave untouched
        }
        return s;
    }

    static Standardizer identity(int p)
    {
        Standardizer s;
        s.mean = VectorXd::Zero(p);
        s.scale = VectorXd::Ones(p);
        return s;
    }

    MatrixXd apply(const MatrixXd& x) const
    {
        return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
    }

    /// Coefficients fitted on standardized features, mapped so that
    /// predictions on raw features are unchanged.
    VectorXd coefficients_to_raw(const ModelConfig& config, const VectorXd& c_std) const
    {
        const int bs = config.block_size();
        VectorXd raw = c_std;
        for (int j = 0; j < config.q(); ++j) {
            auto block = raw.segment(j * bs, bs);
            for (int f = 0; f < config.p(); ++f) {
                block[1 + f] /= scale[f];
                block[0] -= block[1 + f] * mean[f];
            }
        }
        return raw;
    }

    /// Inverse of coefficients_to_raw.
    VectorXd coefficients_to_standardized(const ModelConfig& config, const VectorXd& c_raw) const
    {
        const int bs = config.block_size();
        VectorXd std = c_raw;
        for (int j = 0; j < config.q(); ++j) {
            auto block = std.segment(j * bs, bs);
            for (int f = 0; f < config.p(); ++f) {
                block[0] += block[1 + f] * mean[f];
                block[1 + f] *= scale[f];
            }
        }
        return std;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

} // namespace detail

/// Reads the delimited dataset format: header y_1,...,y_K,x_1,...,x_p then one
/// row per sample.
inline Dataset read_dataset_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset file is empty: " + path);
    const auto header = detail::split_csv_line(line);

    int k = 0, p = 0;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string& h = header[i];
        if (h.rfind("y_", 0) == 0 && i == static_cast<std::size_t>(k))
            ++k;
        else if (h.rfind("x_", 0) == 0)
            ++p;
        else
            throw std::runtime_error("dataset header: expected y_1..y_K,x_1..x_p, got '" + h + "'");
    }
    if (k == 0) throw std::runtime_error("dataset header: no response columns");
    if (header.size() != static_cast<std::size_t>(k + p))
        throw std::runtime_error("dataset header: response columns must precede feature columns");

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != static_cast<std::size_t>(k + p))
            throw std::runtime_error("dataset row has " + std::to_string(fields.size()) +
                                     " fields, expected " + std::to_string(k + p));
        std::vector<double> row(fields.size());
        for (std::size_t j = 0; j < fields.size(); ++j) {
            try {
                row[j] = std::stod(fields[j]);
            } catch (const std::exception&) {
                throw std::runtime_error("dataset: bad numeric field '" + fields[j] + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("dataset has no data rows: " + path);

    Dataset data;
    data.y.resize(static_cast<Eigen::Index>(rows.size()), k);
    data.x.resize(static_cast<Eigen::Index>(rows.size()), p);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < k; ++j) data.y(static_cast<Eigen::Index>(i), j) = rows[i][j];
        for (int j = 0; j < p; ++j) data.x(static_cast<Eigen::Index>(i), j) = rows[i][k + j];
    }
    data.validate();
    return data;
}

inline void write_dataset_csv(const std::string& path, const Dataset& data)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    for (int j = 0; j < data.k(); ++j) out << (j ? "," : "") << "y_" << (j + 1);
    for (int j = 0; j < data.p(); ++j) out << ",x_" << (j + 1);
    out << '\n';
    char buf[64];
    for (int i = 0; i < data.n(); ++i) {
        for (int j = 0; j < data.k(); ++j) out << (j ? "," : "") << static_cast<int>(data.y(i, j));
        for (int j = 0; j < data.p(); ++j) {
            std::snprintf(buf, sizeof buf, "%.12g", data.x(i, j));
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing dataset file: " + path);
}

} // namespace mvb
