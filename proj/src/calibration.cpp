#include "rffi/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rffi/dsp_frontend.hpp"
#include "rffi/rng.hpp"
#include "rffi/waveform.hpp"

namespace rffi {

CalibrationDataset CalibrationDataset::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > size()) throw OutOfBounds("calibration slice out of range");
    CalibrationDataset d = *this;
    d.targets.assign(targets.begin() + static_cast<std::ptrdiff_t>(begin), targets.begin() + static_cast<std::ptrdiff_t>(end));
    d.sources.assign(sources.begin() + static_cast<std::ptrdiff_t>(begin), sources.begin() + static_cast<std::ptrdiff_t>(end));
    if (pairs.size() == size())
        d.pairs.assign(pairs.begin() + static_cast<std::ptrdiff_t>(begin), pairs.begin() + static_cast<std::ptrdiff_t>(end));
    return d;
}

ComplexFrame calibration_challenge() { return assemble_frame(false, 0); }

ResponseRecord simulate_response(const ComplexFrame& challenge, const ReceiverProfile& rx, std::uint64_t seed,
                                 const ResponseOptions& opts) {
    Rng rng(derive_seed({seed, 0x9e5}));
    const double phi = rng.phase();
    const double cfo = rng.uniform(-opts.max_residual_cfo_hz, opts.max_residual_cfo_hz);
    ComplexFrame c = apply_cfo_phase(challenge, cfo, phi);
    if (!opts.high_end) c = apply_rx_iq_imbalance(apply_lna(c, rx), rx);
    if (opts.remove_cfo) c = correct_cfo(c, cfo);
    ComplexFrame y = add_awgn(c, opts.snr_db, derive_seed({seed, 0x4015e}));
    ResponseRecord r;
    r.frame = y.with_samples(y.vec(), FrameOrigin::received);
    r.estimated_po_rad = estimate_phase_offset(r.frame, challenge);
    r.receiver_id = rx.id;
    r.residual_cfo_hz = cfo;
    r.true_po_rad = wrap_phase(-phi);
    r.seed = seed;
    return r;
}

double estimate_phase_offset(const ComplexFrame& response, const ComplexFrame& challenge, PoEstimator kind) {
    if (response.size() != challenge.size()) throw ShapeMismatch("response and challenge lengths differ");
    if (!(challenge.mean_power() > 0.0)) throw ZeroChallenge("challenge has no energy");
    if (kind == PoEstimator::circular_mean) {
        Complex acc = 0.0;
        for (std::size_t n = 0; n < response.size(); ++n) acc += response[n] * std::conj(challenge[n]);
        return wrap_phase(std::arg(acc));
    }
    double s = 0.0;
    std::size_t cnt = 0;
    for (std::size_t n = 0; n < response.size(); ++n) {
        if (challenge[n] == Complex(0.0, 0.0)) continue;
        s += wrap_phase(std::arg(response[n]) - std::arg(challenge[n]));
        ++cnt;
    }
    return wrap_phase(s / static_cast<double>(cnt));
}

std::vector<MatchedPair> find_matches(const std::vector<ResponseRecord>& source,
                                      const std::vector<ResponseRecord>& target, double eps) {
    if (!(eps > 0.0)) throw InvalidArgument("epsilon must be positive");
    auto sorted = [](const std::vector<ResponseRecord>& v) {
        std::vector<std::size_t> o(v.size());
        std::iota(o.begin(), o.end(), std::size_t{0});
        std::stable_sort(o.begin(), o.end(),
                         [&](std::size_t a, std::size_t b) { return v[a].estimated_po_rad < v[b].estimated_po_rad; });
        return o;
    };
    const auto os = sorted(source), ot = sorted(target);
    std::vector<char> used_s(source.size(), 0), used_t(target.size(), 0);
    std::vector<MatchedPair> pairs;
    auto diff = [&](std::size_t t, std::size_t s) {
        return wrap_phase(target[t].estimated_po_rad - source[s].estimated_po_rad);
    };

    std::size_t i = 0, j = 0;
    while (i < os.size() && j < ot.size()) {
        const double a = source[os[i]].estimated_po_rad, b = target[ot[j]].estimated_po_rad;
        const double d = diff(ot[j], os[i]);
        if (std::abs(d) <= eps) {
            pairs.push_back({ot[j], os[i], d});
            used_s[os[i]] = used_t[ot[j]] = 1;
            ++i;
            ++j;
        } else if (a < b) {
            ++i;
        } else {
            ++j;
        }
    }
    // Leftovers on opposite sides of the +-pi cut; only a handful of records qualify.
    auto wrap_pass = [&](bool source_high) {
        const auto& hi_order = source_high ? os : ot;
        const auto& lo_order = source_high ? ot : os;
        auto& used_hi = source_high ? used_s : used_t;
        auto& used_lo = source_high ? used_t : used_s;
        const auto& hi_rec = source_high ? source : target;
        const auto& lo_rec = source_high ? target : source;
        for (auto it = hi_order.rbegin(); it != hi_order.rend(); ++it) {
            if (hi_rec[*it].estimated_po_rad < kPi - eps) break;
            if (used_hi[*it]) continue;
            for (std::size_t c : lo_order) {
                if (lo_rec[c].estimated_po_rad > -kPi + eps) break;
                if (used_lo[c]) continue;
                const std::size_t t = source_high ? c : *it, s = source_high ? *it : c;
                const double d = diff(t, s);
                if (std::abs(d) <= eps) {
                    pairs.push_back({t, s, d});
                    used_hi[*it] = used_lo[c] = 1;
                    break;
                }
            }
        }
    };
    wrap_pass(true);
    wrap_pass(false);
    std::stable_sort(pairs.begin(), pairs.end(), [&](const MatchedPair& x, const MatchedPair& y) {
        return source[x.source_index].estimated_po_rad < source[y.source_index].estimated_po_rad;
    });
    return pairs;
}

CalibrationDataset match_response_pairs(const std::vector<ResponseRecord>& source,
                                        const std::vector<ResponseRecord>& target, double epsilon_deg,
                                        std::size_t want) {
    if (!(epsilon_deg > 0.0)) throw InvalidArgument("epsilon must be positive");
    const auto found = find_matches(source, target, epsilon_deg * kPi / 180.0);
    if (found.size() < want || want == 0)
        throw InsufficientMatches("found " + std::to_string(found.size()) + " matched pairs, need " +
                                  std::to_string(want));
    CalibrationDataset d;
    d.epsilon_deg = epsilon_deg;
    d.source_receiver_id = source.empty() ? 0 : source.front().receiver_id;
    d.target_receiver_id = target.empty() ? 0 : target.front().receiver_id;
    // Evenly spaced subset so the kept pairs cover the whole phase circle.
    for (std::size_t k = 0; k < want; ++k) {
        const auto& p = found[k * found.size() / want];
        d.pairs.push_back(p);
        d.targets.push_back(target[p.target_index].frame);
        d.sources.push_back(source[p.source_index].frame);
    }
    return d;
}

double compute_nmse(const std::vector<ComplexFrame>& mapped, const std::vector<ComplexFrame>& reference) {
    if (mapped.empty() || reference.empty()) throw EmptyList("NMSE needs at least one pair");
    if (mapped.size() != reference.size()) throw ShapeMismatch("NMSE list lengths differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < mapped.size(); ++i) {
        if (mapped[i].size() != reference[i].size()) throw ShapeMismatch("NMSE frame lengths differ");
        double err = 0.0, ref = 0.0;
        for (std::size_t j = 0; j < mapped[i].size(); ++j) {
            err += std::norm(mapped[i][j] - reference[i][j]);
            ref += std::norm(reference[i][j]);
        }
        if (!(ref > 0.0)) throw ZeroReference("reference frame has no energy");
        acc += err > 0.0 ? std::max(10.0 * std::log10(err / ref), kNmseFloorDb) : kNmseFloorDb;
    }
    return acc / static_cast<double>(mapped.size());
}

CalibrationDataset build_calibration_dataset(const ReceiverProfile& source, const ReceiverProfile& target,
                                             std::uint64_t seed, const CalibrationBuildOptions& opts) {
    const ComplexFrame challenge = calibration_challenge();
    std::vector<ResponseRecord> src, tgt;
    for (int b = 0; b < opts.max_batches; ++b) {
        for (std::size_t k = 0; k < opts.batch; ++k) {
            const std::uint64_t idx = static_cast<std::uint64_t>(b) * opts.batch + k;
            src.push_back(simulate_response(challenge, source, derive_seed({seed, 0x5, static_cast<std::uint64_t>(source.id), idx}),
                                            opts.source_opts));
            tgt.push_back(simulate_response(challenge, target, derive_seed({seed, 0x7, static_cast<std::uint64_t>(target.id), idx}),
                                            opts.target_opts));
        }
        if (find_matches(src, tgt, opts.epsilon_deg * kPi / 180.0).size() >= opts.want)
            return match_response_pairs(src, tgt, opts.epsilon_deg, opts.want);
    }
    throw InsufficientMatches("calibration matching did not reach the requested pair count");
}

}  // namespace rffi
