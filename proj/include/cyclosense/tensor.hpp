#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace cyclosense::nn {

// Eigen kernels peel unaligned heads differently, so the same data at a
// different address can round differently. Fixed alignment keeps results
// reproducible.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};
    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};
using Buffer = std::vector<double, AlignedAllocator<double>>;

// Row-major N-d array of doubles. Image tensors use NHWC (or HWC for a
// single example).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Same element count required.
    void reshape(std::vector<std::size_t> shape);
    void fill(double v);

    // Throws NumericalError naming `where` if any entry is NaN or infinite.
    void check_finite(const std::string& where) const;

    bool operator==(const Tensor&) const = default;

private:
    std::vector<std::size_t> shape_;
    Buffer data_;
};

std::size_t element_count(const std::vector<std::size_t>& shape);
std::string shape_string(const std::vector<std::size_t>& shape);

} // namespace cyclosense::nn
