#include "mitd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <Eigen/Core>

#include "mitd/errors.hpp"

namespace mitd {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Tensor& t) {
    return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

MutMap view(Tensor& t) {
    return MutMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

} // namespace

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        s += (i ? " x " : "") + std::to_string(shape[i]);
    }
    return s + "]";
}

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    if (std::find(shape_.begin(), shape_.end(), std::size_t{0}) != shape_.end()) {
        throw ShapeError("tensor: zero-sized dimension in " + shape_string(shape_));
    }
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    if (shape_size(shape_) != data_.size()) {
        throw ShapeError("tensor: shape " + shape_string(shape_) + " does not hold " + std::to_string(data_.size()) +
                         " values");
    }
}

std::size_t Tensor::rows() const {
    return shape_.size() <= 1 ? 1 : shape_[0];
}

std::size_t Tensor::cols() const {
    if (shape_.empty()) {
        return 0;
    }
    return shape_.size() == 1 ? shape_[0] : data_.size() / shape_[0];
}

void Tensor::fill(double v) {
    std::fill(data_.begin(), data_.end(), v);
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
        return Tensor(std::move(shape), to_vector());   // lets the constructor report the mismatch
    }
    Tensor out = *this;
    out.shape_ = std::move(shape);
    return out;
}

Tensor& Tensor::operator+=(const Tensor& other) {
    require_shape(other, shape_, "tensor +=");
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] += other.data_[i];
    }
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (auto& v : data_) {
        v *= s;
    }
    return *this;
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::require_finite(std::string_view where) const {
    if (!all_finite()) {
        throw InputError(std::string(where) + ": non-finite value in tensor " + shape_string(shape_));
    }
}

void require_shape(const Tensor& t, const Shape& expected, std::string_view where) {
    if (t.shape() != expected) {
        throw ShapeError(std::string(where) + ": expected shape " + shape_string(expected) + ", got " +
                         shape_string(t.shape()));
    }
}

void zero_grads(const ParameterList& params) {
    for (auto* p : params) {
        p->zero_grad();
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + shape_string(a.shape()) + " * " + shape_string(b.shape()));
    }
    Tensor out = Tensor::matrix(a.rows(), b.cols());
    view(out).noalias() = view(a) * view(b);
    return out;
}

void add_matmul_tn(const Tensor& a, const Tensor& b, Tensor& out) {
    if (a.rows() != b.rows() || out.rows() != a.cols() || out.cols() != b.cols()) {
        throw ShapeError("matmul_tn: " + shape_string(a.shape()) + "^T * " + shape_string(b.shape()) + " -> " +
                         shape_string(out.shape()));
    }
    view(out).noalias() += view(a).transpose() * view(b);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: " + shape_string(a.shape()) + " * " + shape_string(b.shape()) + "^T");
    }
    Tensor out = Tensor::matrix(a.rows(), b.rows());
    view(out).noalias() = view(a) * view(b).transpose();
    return out;
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    return x > 30.0 ? x : std::log1p(std::exp(x));
}

} // namespace mitd
