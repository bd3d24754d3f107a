#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rffi {

using Complex = std::complex<double>;
using ComplexVec = std::vector<Complex>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSampleRateHz = 20e6;
inline constexpr double kCarrierHz = 5.765e9;

/// Base of every error raised by the library. Each subclass names one failure
/// mode so the CLI can map it onto an exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define RFFI_DEFINE_ERROR(Name)                 \
    class Name : public Error {                 \
    public:                                     \
        using Error::Error;                     \
    }

RFFI_DEFINE_ERROR(InvalidArgument);
RFFI_DEFINE_ERROR(NotFound);
RFFI_DEFINE_ERROR(OutOfBounds);
RFFI_DEFINE_ERROR(ShapeMismatch);
RFFI_DEFINE_ERROR(EmptyDataset);
RFFI_DEFINE_ERROR(ZeroChallenge);
RFFI_DEFINE_ERROR(InsufficientMatches);
RFFI_DEFINE_ERROR(EmptyList);
RFFI_DEFINE_ERROR(ZeroReference);
RFFI_DEFINE_ERROR(EmptyInput);
RFFI_DEFINE_ERROR(LabelOutOfRange);
RFFI_DEFINE_ERROR(IoError);
RFFI_DEFINE_ERROR(FormatError);

#undef RFFI_DEFINE_ERROR

enum class FrameOrigin { synthesized, received, calibrated };

/// Complex baseband samples plus sample-rate metadata. Construction enforces
/// non-empty, finite samples and a positive rate.
class ComplexFrame {
public:
    ComplexFrame() = default;
    explicit ComplexFrame(ComplexVec samples, double sample_rate = kSampleRateHz,
                          FrameOrigin origin = FrameOrigin::synthesized);

    std::span<const Complex> samples() const { return samples_; }
    const ComplexVec& vec() const { return samples_; }
    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }
    const Complex& operator[](std::size_t i) const { return samples_[i]; }
    double sample_rate() const { return sample_rate_; }
    FrameOrigin origin() const { return origin_; }

    /// Same metadata, new samples (validated).
    ComplexFrame with_samples(ComplexVec samples, FrameOrigin origin) const;
    ComplexFrame with_samples(ComplexVec samples) const { return with_samples(std::move(samples), origin_); }

    double mean_power() const;

    friend bool operator==(const ComplexFrame&, const ComplexFrame&) = default;

private:
    ComplexVec samples_;
    double sample_rate_ = kSampleRateHz;
    FrameOrigin origin_ = FrameOrigin::synthesized;
};

double mean_power(std::span<const Complex> x);

/// Scales x to unit mean power. Throws InvalidArgument on an all-zero input.
ComplexVec normalize_power(std::span<const Complex> x);

/// Wraps an angle onto (-pi, pi].
double wrap_phase(double rad);

}  // namespace rffi
