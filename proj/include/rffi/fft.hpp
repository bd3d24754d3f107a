#pragma once

#include <span>

#include "rffi/types.hpp"

namespace rffi {

/// X(k) = sum_n x(n) e^{-j2pi nk/N}; ifft uses +j and 1/N. Backed by FFTW.
ComplexVec fft(std::span<const Complex> x);
ComplexVec ifft(std::span<const Complex> x);

}  // namespace rffi
