#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace rffi::nn {

/// Dense row-major tensor of doubles.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0);

    std::size_t size() const { return data.size(); }
    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
    int rank() const { return static_cast<int>(shape.size()); }
    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }
    void fill(double v);
    bool all_finite() const;
    std::string shape_str() const;
};

std::size_t shape_product(const std::vector<int>& s);

/// Rounds every element to the nearest float32 value.
void snap_to_float(std::vector<double>& v);

}  // namespace rffi::nn
