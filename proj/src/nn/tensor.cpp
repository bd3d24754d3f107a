#include "rffi/nn/tensor.hpp"

#include <cmath>

#include "rffi/types.hpp"

namespace rffi::nn {

std::size_t shape_product(const std::vector<int>& s) {
    std::size_t p = 1;
    for (int d : s) {
        if (d < 0) throw InvalidArgument("negative tensor dimension");
        p *= static_cast<std::size_t>(d);
    }
    return p;
}

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)), data(shape_product(shape), fill) {}

void Tensor::fill(double v) {
    for (auto& x : data) x = v;
}

bool Tensor::all_finite() const {
    for (double x : data)
        if (!std::isfinite(x)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

void snap_to_float(std::vector<double>& v) {
    for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
}

}  // namespace rffi::nn
