#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cmtr/rng.hpp"

namespace cmtr::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix first_moment;
    Matrix second_moment;

    Parameter() = default;
    Parameter(std::string n, Matrix v)
        : name(std::move(n)),
          value(std::move(v)),
          grad(Matrix::Zero(value.rows(), value.cols())),
          first_moment(Matrix::Zero(value.rows(), value.cols())),
          second_moment(Matrix::Zero(value.rows(), value.cols())) {}

    void zero_grad() { grad.setZero(); }
};

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);
Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng);

// Y = X W + b, X is (n x in), W is (in x out), b is (1 x out).
class Linear {
public:
    Linear() = default;
    Linear(std::string name, Eigen::Index in, Eigen::Index out, Matrix weight);

    Matrix forward(const Matrix& x) const;
    // Accumulates weight/bias gradients and returns dX.
    Matrix backward(const Matrix& x, const Matrix& dy);

    Parameter weight;
    Parameter bias;
};

class LayerNorm {
public:
    struct Cache {
        Matrix normalized;
        Vector inv_std;
    };

    LayerNorm() = default;
    LayerNorm(std::string name, Eigen::Index dim, double eps);

    Matrix forward(const Matrix& x, Cache* cache) const;
    Matrix backward(const Cache& cache, const Matrix& dy);

    Parameter gamma;
    Parameter beta;
    double eps = 1e-12;
};

// Exact (erf) GELU and its derivative.
Matrix gelu(const Matrix& x);
Matrix gelu_grad(const Matrix& x);

// Row-wise numerically stable softmax.
Matrix softmax_rows(const Matrix& logits);
Vector softmax(const Vector& logits);

// Decoupled weight decay Adam: p <- p (1 - lr wd), then the Adam update.
struct AdamWOptions {
    double learning_rate = 5e-5;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class AdamW {
public:
    AdamW(std::vector<Parameter*> params, AdamWOptions options) : params_(std::move(params)), options_(options) {}

    void zero_grad();
    void step();
    std::size_t steps() const { return step_; }

private:
    std::vector<Parameter*> params_;
    AdamWOptions options_;
    std::size_t step_ = 0;
};

// Binary parameter file: magic, JSON header, then (name, rows, cols, data)
// per parameter in little-endian doubles.
void save_parameters(const std::filesystem::path& path, const std::string& header_json,
                     const std::vector<const Parameter*>& params);
// Loads values into params by name; shape mismatches and missing names throw.
// Returns the header JSON.
std::string load_parameters(const std::filesystem::path& path, const std::vector<Parameter*>& params);

}  // namespace cmtr::nn
