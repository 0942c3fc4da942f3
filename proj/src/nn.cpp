#include "cmtr/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "cmtr/error.hpp"

namespace cmtr::nn {

namespace {

constexpr char kMagic[8] = {'C', 'M', 'T', 'R', 'P', 'R', 'M', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw RuntimeError("truncated parameter file");
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const auto n = read_pod<std::uint64_t>(in);
    if (n > (1ULL << 32)) throw RuntimeError("corrupt parameter file");
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw RuntimeError("truncated parameter file");
    return s;
}

}  // namespace

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, stddev);
    return m;
}

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
    return m;
}

Linear::Linear(std::string name, Eigen::Index in, Eigen::Index out, Matrix w)
    : weight(name + ".weight", std::move(w)), bias(name + ".bias", Matrix::Zero(1, out)) {
    if (weight.value.rows() != in || weight.value.cols() != out)
        throw ConfigError("linear layer " + name + " initialized with wrong shape");
}

Matrix Linear::forward(const Matrix& x) const {
    Matrix y = x * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& dy) {
    weight.grad.noalias() += x.transpose() * dy;
    bias.grad.row(0) += dy.colwise().sum();
    return dy * weight.value.transpose();
}

LayerNorm::LayerNorm(std::string name, Eigen::Index dim, double epsilon)
    : gamma(name + ".gamma", Matrix::Ones(1, dim)), beta(name + ".beta", Matrix::Zero(1, dim)), eps(epsilon) {}

Matrix LayerNorm::forward(const Matrix& x, Cache* cache) const {
    const auto n = x.cols();
    Matrix normalized(x.rows(), n);
    Vector inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().sum() / static_cast<double>(n);
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        normalized.row(r) = (x.row(r).array() - mean) * inv_std(r);
    }
    Matrix y = normalized.array().rowwise() * gamma.value.row(0).array();
    y.rowwise() += beta.value.row(0);
    if (cache) {
        cache->normalized = std::move(normalized);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

Matrix LayerNorm::backward(const Cache& cache, const Matrix& dy) {
    const auto n = static_cast<double>(dy.cols());
    gamma.grad.row(0) += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
    beta.grad.row(0) += dy.colwise().sum();
    const Matrix dxhat = dy.array().rowwise() * gamma.value.row(0).array();
    Matrix dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const double sum = dxhat.row(r).sum();
        const double dot = dxhat.row(r).dot(cache.normalized.row(r));
        dx.row(r) = (cache.inv_std(r) / n) *
                    (n * dxhat.row(r).array() - sum - cache.normalized.row(r).array() * dot).matrix();
    }
    return dx;
}

Matrix gelu(const Matrix& x) {
    return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); });
}

Matrix gelu_grad(const Matrix& x) {
    return x.unaryExpr([](double v) {
        const double cdf = 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
        return cdf + v * pdf;
    });
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        const auto e = (logits.row(r).array() - m).exp();
        out.row(r) = e / e.sum();
    }
    return out;
}

Vector softmax(const Vector& logits) {
    const double m = logits.maxCoeff();
    const Eigen::ArrayXd e = (logits.array() - m).exp();
    return (e / e.sum()).matrix();
}

void AdamW::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

void AdamW::step() {
    ++step_;
    const double t = static_cast<double>(step_);
    const double correction1 = 1.0 - std::pow(options_.beta1, t);
    const double correction2 = 1.0 - std::pow(options_.beta2, t);
    for (auto* p : params_) {
        p->value *= 1.0 - options_.learning_rate * options_.weight_decay;
        p->first_moment = options_.beta1 * p->first_moment + (1.0 - options_.beta1) * p->grad;
        p->second_moment =
            options_.beta2 * p->second_moment + (1.0 - options_.beta2) * p->grad.cwiseProduct(p->grad);
        const Matrix denom = ((p->second_moment / correction2).array().sqrt() + options_.epsilon).matrix();
        p->value.array() -= options_.learning_rate * (p->first_moment.array() / correction1) / denom.array();
    }
}

void save_parameters(const std::filesystem::path& path, const std::string& header_json,
                     const std::vector<const Parameter*>& params) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_string(out, header_json);
    write_pod<std::uint64_t>(out, params.size());
    for (const auto* p : params) {
        write_string(out, p->name);
        write_pod<std::int64_t>(out, p->value.rows());
        write_pod<std::int64_t>(out, p->value.cols());
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p->value.size())));
    }
    if (!out) throw RuntimeError("failed writing " + path.string());
}

std::string load_parameters(const std::filesystem::path& path, const std::vector<Parameter*>& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeError("cannot open " + path.string());
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw RuntimeError(path.string() + " is not a parameter file");
    std::string header = read_string(in);

    std::map<std::string, Parameter*> by_name;
    for (auto* p : params) by_name[p->name] = p;
    const auto count = read_pod<std::uint64_t>(in);
    std::size_t loaded = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::string name = read_string(in);
        const auto rows = read_pod<std::int64_t>(in);
        const auto cols = read_pod<std::int64_t>(in);
        Matrix m(rows, cols);
        in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * rows * cols));
        if (!in) throw RuntimeError("truncated parameter file " + path.string());
        auto it = by_name.find(name);
        if (it == by_name.end()) continue;
        if (it->second->value.rows() != rows || it->second->value.cols() != cols)
            throw RuntimeError(path.string() + ": parameter " + name + " has shape " + std::to_string(rows) + "x" +
                               std::to_string(cols) + ", expected " + std::to_string(it->second->value.rows()) + "x" +
                               std::to_string(it->second->value.cols()));
        it->second->value = std::move(m);
        ++loaded;
    }
    if (loaded != params.size())
        throw RuntimeError(path.string() + ": expected " + std::to_string(params.size()) + " parameters, found " +
                           std::to_string(loaded));
    return header;
}

}  // namespace cmtr::nn
