#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rffi/types.hpp"
#include "rffi/waveform.hpp"

namespace rffi {

struct DetectionConfig {
    double threshold = 0.8;
    int plateau_len = 64;
    int window = 48;
    /// Cross-correlation search half-width around the coarse LTF position.
    int refine_radius = 32;
};

/// Index of the first STF sample. Throws NotFound when no autocorrelation
/// plateau meets the threshold, ShapeMismatch when the frame is shorter than 320.
std::size_t detect_packet(const ComplexFrame& frame, const DetectionConfig& cfg = {});

/// Timing from LTF cross-correlation alone, searched over the whole frame.
std::size_t locate_ltf_xcorr(const ComplexFrame& frame);

struct CfoEstimate {
    double coarse_hz = 0.0;
    double fine_hz = 0.0;  // lag-64 estimate before unwrapping
    double combined_hz = 0.0;
};

CfoEstimate estimate_cfo_detail(const ComplexFrame& frame, std::size_t start);
double estimate_cfo_two_step(const ComplexFrame& frame, std::size_t start);

ComplexFrame correct_cfo(const ComplexFrame& frame, double cfo_hz);

struct SoiVector {
    ComplexVec samples;  // 160
};

SoiVector extract_ltf_soi(const ComplexFrame& frame, std::size_t start);
ComplexVec denoise_ltf(const SoiVector& soi);
ComplexVec spectrum64(std::span<const Complex> denoised);

inline constexpr double kDsqClamp = 10.0;
inline constexpr int kDsqLen = 100;

struct DsqVector {
    ComplexVec quotients;  // 100
    int clamp_count = 0;
    bool degenerate = false;  // some active bin was exactly zero
};

DsqVector compute_dsq(std::span<const Complex> spectrum, const PreambleLayout& layout = {});

enum class RepKind { dsq, rawiq, ciq, fft };

std::string to_string(RepKind k);
RepKind parse_rep_kind(const std::string& s);
int rep_length(RepKind k);

/// 2 x L real matrix stored row-major: I row then Q row. Unit mean power.
struct Representation {
    RepKind kind = RepKind::dsq;
    int length = 0;
    std::vector<double> values;

    double i(int n) const { return values[n]; }
    double q(int n) const { return values[length + n]; }
};

Representation to_representation(RepKind kind, std::span<const Complex> v);

struct FrontendOptions {
    DetectionConfig detection;
    /// When the plateau test fails (low SNR), time the packet by LTF
    /// cross-correlation instead of raising NotFound.
    bool timing_fallback = true;
};

struct FrontendTrace {
    std::size_t start = 0;
    bool used_fallback = false;
    double cfo_hz = 0.0;
    DsqVector dsq;
};

Representation build_representation(const ComplexFrame& frame, RepKind kind, const FrontendOptions& opts = {},
                                    FrontendTrace* trace = nullptr);

/// Detect, CFO-correct, extract, denoise, transform, and take quotients.
DsqVector dsq_pipeline(const ComplexFrame& frame, const FrontendOptions& opts = {}, FrontendTrace* trace = nullptr);

}  // namespace rffi
