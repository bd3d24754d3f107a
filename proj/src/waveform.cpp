#include "rffi/waveform.hpp"

#include <cmath>

#include "rffi/fft.hpp"
#include "rffi/rng.hpp"

namespace rffi {

namespace {

const std::array<int, 53> kLtfSeq = {1, 1,  -1, -1, 1,  1,  -1, 1,  -1, 1,  1,  1,  1,  1,  1,  -1, -1, 1,
                                     1, -1, 1,  -1, 1,  1,  1,  1,  0,  1,  -1, -1, 1,  1,  -1, 1,  -1, 1,
                                     -1, -1, -1, -1, -1, 1, 1,  -1, -1, 1,  -1, 1,  -1, 1,  1,  1,  1};

ComplexVec ofdm_symbol(const ComplexVec& spectrum, int cp) {
    ComplexVec t = ifft(spectrum);
    ComplexVec out;
    out.reserve(t.size() + cp);
    out.insert(out.end(), t.end() - cp, t.end());
    out.insert(out.end(), t.begin(), t.end());
    return out;
}

// 48 data subcarriers, pilots at +-7 and +-21.
bool is_pilot(int k) { return k == -21 || k == -7 || k == 7 || k == 21; }

ComplexVec data_symbol(const std::vector<int>& bits, int pilot_polarity) {
    PreambleLayout lay;
    ComplexVec spec(64, 0.0);
    std::size_t b = 0;
    for (int k : PreambleLayout::active_subcarriers()) {
        if (is_pilot(k)) {
            spec[lay.bin(k)] = (k == 21 ? -1.0 : 1.0) * pilot_polarity;
        } else {
            spec[lay.bin(k)] = bits[b++] ? 1.0 : -1.0;
        }
    }
    return ofdm_symbol(spec, 16);
}

}  // namespace

const std::vector<int>& PreambleLayout::active_subcarriers() {
    static const std::vector<int> ks = [] {
        std::vector<int> v;
        for (int k = -26; k <= 26; ++k)
            if (k != 0) v.push_back(k);
        return v;
    }();
    return ks;
}

const ComplexVec& stf_spectrum() {
    static const ComplexVec s = [] {
        ComplexVec v(64, 0.0);
        const double a = std::sqrt(13.0 / 6.0);
        const Complex p{a, a}, m{-a, -a};
        const std::pair<int, Complex> vals[] = {{-24, p}, {-20, m}, {-16, p}, {-12, m}, {-8, m}, {-4, p},
                                                {4, m},   {8, m},   {12, p},  {16, p},  {20, p}, {24, p}};
        for (auto& [k, c] : vals) v[(k + 64) % 64] = c;
        return v;
    }();
    return s;
}

const ComplexVec& ltf_spectrum() {
    static const ComplexVec s = [] {
        ComplexVec v(64, 0.0);
        for (int i = 0; i < 53; ++i) v[(i - 26 + 64) % 64] = kLtfSeq[i];
        return v;
    }();
    return s;
}

ComplexFrame generate_stf() {
    const ComplexVec sym = ifft(stf_spectrum());
    ComplexVec out(160);
    for (int n = 0; n < 160; ++n) out[n] = sym[n % 64];
    return ComplexFrame(normalize_power(out));
}

ComplexFrame generate_ltf() {
    const ComplexVec sym = ifft(ltf_spectrum());
    ComplexVec out;
    out.reserve(160);
    out.insert(out.end(), sym.begin() + 32, sym.end());
    out.insert(out.end(), sym.begin(), sym.end());
    out.insert(out.end(), sym.begin(), sym.end());
    return ComplexFrame(normalize_power(out));
}

ComplexFrame assemble_frame(bool include_sig, int payload_symbols, std::uint64_t payload_seed) {
    if (payload_symbols < 0) throw InvalidArgument("payload_symbols must be >= 0");
    ComplexVec out = generate_stf().vec();
    const ComplexVec ltf = generate_ltf().vec();
    out.insert(out.end(), ltf.begin(), ltf.end());
    if (!include_sig && payload_symbols == 0) return ComplexFrame(std::move(out));

    std::vector<ComplexVec> syms;
    if (include_sig) {
        // RATE=6 Mb/s (1101), reserved 0, LENGTH (12 bits, LSB first), even parity, 6 tail zeros.
        std::vector<int> bits = {1, 1, 0, 1, 0};
        const int length = 3 * payload_symbols;
        for (int i = 0; i < 12; ++i) bits.push_back((length >> i) & 1);
        int parity = 0;
        for (int b : bits) parity ^= b;
        bits.push_back(parity);
        bits.resize(24, 0);
        // Repeat to fill 48 subcarriers (stands in for the rate-1/2 coder).
        std::vector<int> filled;
        for (int b : bits) {
            filled.push_back(b);
            filled.push_back(b);
        }
        syms.push_back(data_symbol(filled, 1));
    }
    Rng rng(payload_seed);
    for (int s = 0; s < payload_symbols; ++s) {
        std::vector<int> bits(48);
        for (auto& b : bits) b = static_cast<int>(rng.below(2));
        syms.push_back(data_symbol(bits, 1));
    }
    for (auto& s : syms) {
        const ComplexVec n = normalize_power(s);
        out.insert(out.end(), n.begin(), n.end());
    }
    return ComplexFrame(std::move(out));
}

}  // namespace rffi
