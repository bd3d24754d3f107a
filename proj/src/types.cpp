#include "rffi/types.hpp"

#include <cmath>

namespace rffi {

namespace {

void validate(const ComplexVec& s, double rate) {
    if (s.empty()) throw InvalidArgument("frame has no samples");
    if (!(rate > 0.0)) throw InvalidArgument("sample rate must be positive");
    for (const auto& c : s)
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
            throw InvalidArgument("frame contains a non-finite sample");
}

}  // namespace

ComplexFrame::ComplexFrame(ComplexVec samples, double sample_rate, FrameOrigin origin)
    : samples_(std::move(samples)), sample_rate_(sample_rate), origin_(origin) {
    validate(samples_, sample_rate_);
}

ComplexFrame ComplexFrame::with_samples(ComplexVec samples, FrameOrigin origin) const {
    return ComplexFrame(std::move(samples), sample_rate_, origin);
}

double ComplexFrame::mean_power() const { return rffi::mean_power(samples_); }

double mean_power(std::span<const Complex> x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& c : x) acc += std::norm(c);
    return acc / static_cast<double>(x.size());
}

ComplexVec normalize_power(std::span<const Complex> x) {
    const double p = mean_power(x);
    if (!(p > 0.0)) throw InvalidArgument("cannot normalize a zero-power signal");
    const double g = 1.0 / std::sqrt(p);
    ComplexVec out(x.begin(), x.end());
    for (auto& c : out) c *= g;
    return out;
}

double wrap_phase(double rad) {
    double w = std::remainder(rad, 2.0 * kPi);
    if (w <= -kPi) w += 2.0 * kPi;
    return w;
}

}  // namespace rffi
