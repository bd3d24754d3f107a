#include "rffi/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace rffi {

namespace {

// Planning is not thread-safe in FFTW; execution of an existing plan on new
// arrays is. Plans are unaligned so the same algorithm runs for every buffer.
fftw_plan plan_for(int n, bool inverse) {
    static std::mutex mu;
    static std::map<std::pair<int, bool>, fftw_plan> plans;
    std::lock_guard<std::mutex> lock(mu);
    auto it = plans.find({n, inverse});
    if (it != plans.end()) return it->second;
    ComplexVec in(n), out(n);
    fftw_plan p = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(in.data()),
                                   reinterpret_cast<fftw_complex*>(out.data()), inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) throw InvalidArgument("fftw could not plan a transform of size " + std::to_string(n));
    plans.emplace(std::make_pair(n, inverse), p);
    return p;
}

ComplexVec transform(std::span<const Complex> x, bool inverse) {
    if (x.empty()) throw InvalidArgument("fft of an empty vector");
    const int n = static_cast<int>(x.size());
    ComplexVec in(x.begin(), x.end()), out(x.size());
    fftw_execute_dft(plan_for(n, inverse), reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    if (inverse) {
        const double s = 1.0 / static_cast<double>(n);
        for (auto& c : out) c *= s;
    }
    return out;
}

}  // namespace

ComplexVec fft(std::span<const Complex> x) { return transform(x, false); }

ComplexVec ifft(std::span<const Complex> x) { return transform(x, true); }

}  // namespace rffi
