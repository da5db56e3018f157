#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mitd {

using Shape = std::vector<std::size_t>;

/// Eigen picks its vectorized peeling from each buffer's runtime address, so the
/// rounding of a kernel can change with where malloc put the data. Fixed 64-byte
/// alignment makes results independent of heap layout.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept {
        return true;
    }
};

using AlignedVector = std::vector<double, AlignedAllocator<double>>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major f64 array.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape()); }
    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) { return Tensor({rows, cols}, fill); }
    static Tensor vector(std::size_t n, double fill = 0.0) { return Tensor({n}, fill); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    /// Leading dimension and product of the rest; a rank-1 tensor is one row.
    std::size_t rows() const;
    std::size_t cols() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    std::vector<double> to_vector() const { return {data_.begin(), data_.end()}; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

    void fill(double v);
    /// Same data, new shape of equal size.
    Tensor reshaped(Shape shape) const;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(double s);

    bool all_finite() const;
    /// Throws InputError naming `where` if any element is NaN/Inf.
    void require_finite(std::string_view where) const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    AlignedVector data_;
};

/// Throws ShapeError naming both shapes when they differ.
void require_shape(const Tensor& t, const Shape& expected, std::string_view where);

/// Trainable tensor with an accumulated gradient of the same shape.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)) {}

    void zero_grad() { grad.fill(0.0); }
};

using ParameterList = std::vector<Parameter*>;

void zero_grads(const ParameterList& params);

// Dense kernels over rank-2 views (rank-1 tensors are treated as a single row).

/// out = a * b  ([m x k] * [k x n]).
Tensor matmul(const Tensor& a, const Tensor& b);
/// out += a^T * b  ([k x m]^T * [k x n] -> [m x n]); used for weight gradients.
void add_matmul_tn(const Tensor& a, const Tensor& b, Tensor& out);
/// out = a * b^T  ([m x k] * [n x k]^T -> [m x n]); used for input gradients.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

double sigmoid(double x);
double softplus(double x);

} // namespace mitd
