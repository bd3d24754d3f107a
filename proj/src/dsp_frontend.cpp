#include "rffi/dsp_frontend.hpp"

#include <cmath>

#include "rffi/fft.hpp"

namespace rffi {

namespace {

constexpr int kStf = 160;
constexpr int kFrameMin = 320;
constexpr int kLtfSymbolOffset = 192;  // first long symbol, relative to packet start

double lag_angle(const ComplexFrame& f, std::size_t from, std::size_t to, std::size_t lag) {
    Complex acc = 0.0;
    for (std::size_t n = from; n < to; ++n) acc += f[n + lag] * std::conj(f[n]);
    return std::arg(acc);
}

double xcorr_mag(const ComplexFrame& f, std::size_t d, const ComplexVec& ref) {
    Complex acc = 0.0;
    for (std::size_t m = 0; m < ref.size(); ++m) acc += f[d + m] * std::conj(ref[m]);
    return std::abs(acc);
}

const ComplexVec& long_symbol() {
    static const ComplexVec s = [] {
        const ComplexFrame ltf = generate_ltf();
        return ComplexVec(ltf.vec().begin() + 32, ltf.vec().begin() + 96);
    }();
    return s;
}

// Scores both long symbols so the peak is unique; one symbol alone matches
// equally well 64 samples later. Needs d + 128 <= f.size().
std::size_t best_xcorr(const ComplexFrame& f, std::size_t lo, std::size_t hi) {
    const auto& ref = long_symbol();
    std::size_t best = lo;
    double best_v = -1.0;
    for (std::size_t d = lo; d <= hi; ++d) {
        const double v = xcorr_mag(f, d, ref) + xcorr_mag(f, d + 64, ref);
        if (v > best_v) {
            best_v = v;
            best = d;
        }
    }
    return best;
}

}  // namespace

std::size_t detect_packet(const ComplexFrame& frame, const DetectionConfig& cfg) {
    const std::size_t n = frame.size();
    if (n < kFrameMin) throw ShapeMismatch("frame shorter than 320 samples");
    const std::size_t w = static_cast<std::size_t>(cfg.window);
    const std::size_t last = n - 16 - w;

    // Sliding sums over the window [i, i+w).
    Complex p = 0.0;
    double e1 = 0.0, e2 = 0.0;
    for (std::size_t m = 0; m < w; ++m) {
        p += frame[m + 16] * std::conj(frame[m]);
        e1 += std::norm(frame[m]);
        e2 += std::norm(frame[m + 16]);
    }
    int run = 0;
    std::size_t run_start = 0;
    std::size_t coarse = n;
    for (std::size_t i = 0;; ++i) {
        const double den = std::sqrt(e1 * e2);
        const double metric = den > 0.0 ? std::abs(p) / den : 0.0;
        if (metric >= cfg.threshold) {
            if (run == 0) run_start = i;
            if (++run >= cfg.plateau_len) {
                coarse = run_start;
                break;
            }
        } else {
            run = 0;
        }
        if (i == last) break;
        p += frame[i + w + 16] * std::conj(frame[i + w]) - frame[i + 16] * std::conj(frame[i]);
        e1 += std::norm(frame[i + w]) - std::norm(frame[i]);
        e2 += std::norm(frame[i + w + 16]) - std::norm(frame[i + 16]);
    }
    if (coarse == n) throw NotFound("no preamble plateau above threshold");

    // Both long symbols must fit behind the candidate.
    const std::size_t max_d = n - 128;
    const std::size_t centre = coarse + kLtfSymbolOffset;
    const std::size_t r = static_cast<std::size_t>(cfg.refine_radius);
    const std::size_t lo = centre > r ? centre - r : 0;
    const std::size_t hi = std::min(centre + r, max_d);
    if (lo > hi) throw NotFound("preamble plateau too close to frame end");
    const std::size_t d = best_xcorr(frame, lo, hi);
    if (d < kLtfSymbolOffset) return 0;
    return d - kLtfSymbolOffset;
}

std::size_t locate_ltf_xcorr(const ComplexFrame& frame) {
    if (frame.size() < kFrameMin) throw ShapeMismatch("frame shorter than 320 samples");
    const std::size_t hi = frame.size() - 128;
    const std::size_t d = best_xcorr(frame, kLtfSymbolOffset, hi);
    return d - kLtfSymbolOffset;
}

CfoEstimate estimate_cfo_detail(const ComplexFrame& frame, std::size_t start) {
    if (start + kFrameMin > frame.size()) throw OutOfBounds("frame does not contain a full preamble");
    const double ts = 1.0 / frame.sample_rate();
    CfoEstimate e;
    // Rotation is e^{-j2pi f n Ts}, so the lag-D product has angle -2pi f D Ts.
    e.coarse_hz = -lag_angle(frame, start + 16, start + 144, 16) / (2.0 * kPi * 16.0 * ts);
    e.fine_hz = -lag_angle(frame, start + 176, start + 256, 64) / (2.0 * kPi * 64.0 * ts);
    const double unit = 1.0 / (64.0 * ts);
    e.combined_hz = e.fine_hz + unit * std::round((e.coarse_hz - e.fine_hz) / unit);
    return e;
}

double estimate_cfo_two_step(const ComplexFrame& frame, std::size_t start) {
    return estimate_cfo_detail(frame, start).combined_hz;
}

ComplexFrame correct_cfo(const ComplexFrame& frame, double cfo_hz) {
    const double ts = 1.0 / frame.sample_rate();
    ComplexVec out(frame.size());
    for (std::size_t n = 0; n < frame.size(); ++n)
        out[n] = frame[n] * std::polar(1.0, 2.0 * kPi * cfo_hz * static_cast<double>(n) * ts);
    return frame.with_samples(std::move(out));
}

SoiVector extract_ltf_soi(const ComplexFrame& frame, std::size_t start) {
    if (start + kFrameMin > frame.size()) throw OutOfBounds("frame too short for the LTF");
    const auto s = frame.samples().subspan(start + kStf, 160);
    return SoiVector{ComplexVec(s.begin(), s.end())};
}

ComplexVec denoise_ltf(const SoiVector& soi) {
    if (soi.samples.size() != 160) throw ShapeMismatch("SOI must have 160 samples");
    ComplexVec out(64);
    for (int n = 0; n < 64; ++n) out[n] = soi.samples[n + 32] + soi.samples[n + 96];
    return out;
}

ComplexVec spectrum64(std::span<const Complex> denoised) {
    if (denoised.size() != 64) throw ShapeMismatch("spectrum64 needs 64 samples");
    return fft(denoised);
}

DsqVector compute_dsq(std::span<const Complex> spectrum, const PreambleLayout& layout) {
    if (spectrum.size() != static_cast<std::size_t>(layout.fft_size)) throw ShapeMismatch("spectrum size");
    DsqVector out;
    out.quotients.reserve(kDsqLen);
    auto quotient = [&](Complex num, Complex den) {
        Complex q;
        if (den == Complex(0.0, 0.0)) {
            out.degenerate = true;
            ++out.clamp_count;
            return num == Complex(0.0, 0.0) ? Complex(1.0, 0.0) : std::polar(kDsqClamp, std::arg(num));
        }
        q = num / den;
        const double m = std::abs(q);
        if (m > kDsqClamp) {
            ++out.clamp_count;
            q *= kDsqClamp / m;
        }
        return q;
    };
    for (int a : PreambleLayout::active_subcarriers()) {
        if (a == -1 || a == 26) continue;
        const Complex ra = spectrum[layout.bin(a)];
        const Complex rb = spectrum[layout.bin(a + 1)];
        out.quotients.push_back(quotient(rb, ra));
        out.quotients.push_back(quotient(ra, rb));
    }
    return out;
}

std::string to_string(RepKind k) {
    switch (k) {
        case RepKind::dsq: return "dsq";
        case RepKind::rawiq: return "rawiq";
        case RepKind::ciq: return "ciq";
        case RepKind::fft: return "fft";
    }
    return "?";
}

RepKind parse_rep_kind(const std::string& s) {
    for (auto k : {RepKind::dsq, RepKind::rawiq, RepKind::ciq, RepKind::fft})
        if (to_string(k) == s) return k;
    throw InvalidArgument("unknown representation: " + s);
}

int rep_length(RepKind k) { return k == RepKind::dsq ? kDsqLen : 128; }

Representation to_representation(RepKind kind, std::span<const Complex> v) {
    const ComplexVec n = normalize_power(v);
    Representation r{kind, static_cast<int>(n.size()), std::vector<double>(2 * n.size())};
    for (std::size_t i = 0; i < n.size(); ++i) {
        r.values[i] = n[i].real();
        r.values[n.size() + i] = n[i].imag();
    }
    return r;
}

namespace {

std::size_t find_start(const ComplexFrame& frame, const FrontendOptions& opts, bool& fallback) {
    fallback = false;
    try {
        return detect_packet(frame, opts.detection);
    } catch (const NotFound&) {
        if (!opts.timing_fallback) throw;
        fallback = true;
        return locate_ltf_xcorr(frame);
    }
}

}  // namespace

DsqVector dsq_pipeline(const ComplexFrame& frame, const FrontendOptions& opts, FrontendTrace* trace) {
    bool fb = false;
    const std::size_t start = find_start(frame, opts, fb);
    const double cfo = estimate_cfo_two_step(frame, start);
    const ComplexFrame c = correct_cfo(frame, cfo);
    DsqVector d = compute_dsq(spectrum64(denoise_ltf(extract_ltf_soi(c, start))));
    if (trace) {
        trace->start = start;
        trace->used_fallback = fb;
        trace->cfo_hz = cfo;
        trace->dsq = d;
    }
    return d;
}

Representation build_representation(const ComplexFrame& frame, RepKind kind, const FrontendOptions& opts,
                                    FrontendTrace* trace) {
    if (kind == RepKind::dsq) return to_representation(kind, dsq_pipeline(frame, opts, trace).quotients);

    bool fb = false;
    const std::size_t start = find_start(frame, opts, fb);
    if (start + kFrameMin > frame.size()) throw OutOfBounds("frame too short for the LTF");
    double cfo = 0.0;
    ComplexFrame src = frame;
    if (kind != RepKind::rawiq) {
        cfo = estimate_cfo_two_step(frame, start);
        src = correct_cfo(frame, cfo);
    }
    const auto seg = src.samples().subspan(start + kLtfSymbolOffset, 128);
    if (trace) {
        trace->start = start;
        trace->used_fallback = fb;
        trace->cfo_hz = cfo;
    }
    if (kind == RepKind::fft) return to_representation(kind, fft(seg));
    return to_representation(kind, seg);
}

}  // namespace rffi
