#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rffi/types.hpp"

namespace rffi {

struct PreambleLayout {
    int stf_len = 160;
    int ltf_len = 160;
    int ltf_cp_len = 32;
    int fft_size = 64;

    /// [-26..-1, 1..26]
    static const std::vector<int>& active_subcarriers();
    /// FFT bin for a signed subcarrier index.
    int bin(int subcarrier) const { return (subcarrier + fft_size) % fft_size; }
};

inline constexpr int kSymbolLen = 80;  // 16-sample CP + 64

/// 64-bin frequency-domain sequences, indexed by FFT bin.
const ComplexVec& stf_spectrum();
const ComplexVec& ltf_spectrum();

ComplexFrame generate_stf();
ComplexFrame generate_ltf();

/// STF || LTF, optionally followed by an L-SIG symbol and `payload_symbols`
/// BPSK OFDM symbols of random bits drawn from `payload_seed`.
ComplexFrame assemble_frame(bool include_sig = false, int payload_symbols = 0,
                            std::uint64_t payload_seed = 0);

}  // namespace rffi
