#include "sourcecv/signal_prep.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace sourcecv {

std::vector<double> resample_lead(const std::vector<double>& lead, double fs_in, double fs_out) {
    if (!(fs_in > 0) || !(fs_out > 0)) {
        throw std::invalid_argument("resample: sampling frequencies must be > 0");
    }
    if (lead.size() < 2) throw std::invalid_argument("resample: need at least 2 samples");
    if (fs_in == fs_out) return lead;

    const auto n = lead.size();
    const auto m = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) * fs_out / fs_in));
    std::vector<double> out(std::max<std::size_t>(m, 1));
    const double step = fs_in / fs_out;
    for (std::size_t j = 0; j < out.size(); ++j) {
        const double t = static_cast<double>(j) * step;
        if (t >= static_cast<double>(n - 1)) {
            out[j] = lead[n - 1];
            continue;
        }
        const auto i0 = static_cast<std::size_t>(t);
        const double frac = t - static_cast<double>(i0);
        out[j] = lead[i0] + frac * (lead[i0 + 1] - lead[i0]);
    }
    return out;
}

Signal resample(const Signal& signal, double fs_in, double fs_out) {
    Signal out;
    out.reserve(signal.size());
    for (const auto& lead : signal) out.push_back(resample_lead(lead, fs_in, fs_out));
    return out;
}

Signal fit_length(const Signal& signal, int target_len, Rng& rng) {
    if (target_len <= 0) throw std::invalid_argument("fit_length: target_len must be > 0");
    if (signal.empty()) return signal;
    const auto n = signal.front().size();
    for (const auto& lead : signal) {
        if (lead.size() != n) throw std::invalid_argument("fit_length: ragged leads");
    }
    const auto target = static_cast<std::size_t>(target_len);
    if (n == target) return signal;

    Signal out(signal.size());
    if (n > target) {
        const auto offset = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(n - target)));
        for (std::size_t l = 0; l < signal.size(); ++l) {
            out[l].assign(signal[l].begin() + static_cast<std::ptrdiff_t>(offset),
                          signal[l].begin() + static_cast<std::ptrdiff_t>(offset + target));
        }
        return out;
    }

    const std::size_t deficit = target - n;
    const auto left = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(deficit)));
    for (std::size_t l = 0; l < signal.size(); ++l) {
        out[l].assign(target, 0.0);
        std::copy(signal[l].begin(), signal[l].end(),
                  out[l].begin() + static_cast<std::ptrdiff_t>(left));
    }
    return out;
}

Signal normalize_amplitude(const Signal& signal) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& lead : signal) {
        for (const double v : lead) {
            if (!std::isfinite(v)) throw std::invalid_argument("normalize_amplitude: non-finite sample");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    Signal out = signal;
    if (!(hi > lo)) {
        for (auto& lead : out) std::fill(lead.begin(), lead.end(), 0.5);
        return out;
    }
    const double scale = 1.0 / (hi - lo);
    for (auto& lead : out) {
        for (auto& v : lead) v = (v - lo) * scale;
    }
    return out;
}

Demographics encode_demographics(std::optional<double> age, Sex sex, double age_scale_max) {
    Demographics d;
    d.age_scaled = age ? std::clamp(*age / age_scale_max, 0.0, 1.0) : 0.5;
    switch (sex) {
    case Sex::male:
        d.sex_onehot = {1, 0, 0};
        d.sex_numeric = 1.0;
        break;
    case Sex::female:
        d.sex_onehot = {0, 1, 0};
        d.sex_numeric = 0.0;
        break;
    case Sex::unknown:
        d.sex_onehot = {0, 0, 1};
        d.sex_numeric = 0.5;
        break;
    }
    return d;
}

ModelInput prep_model_input(const Signal& signal, double fs_in, std::optional<double> age, Sex sex,
                            const PrepConfig& cfg, Rng& rng) {
    ModelInput input;
    input.signal = normalize_amplitude(
        fit_length(resample(signal, fs_in, cfg.target_fs), cfg.target_len, rng));
    const Demographics d = encode_demographics(age, sex, cfg.age_scale_max);
    input.age_scaled = d.age_scaled;
    input.sex_onehot = d.sex_onehot;
    return input;
}

namespace {

std::vector<double> moving_mean(const std::vector<double>& x, int window) {
    const auto n = static_cast<int>(x.size());
    const int half = std::max(window / 2, 1);
    std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 0.0);
    for (int i = 0; i < n; ++i) prefix[static_cast<std::size_t>(i) + 1] =
        prefix[static_cast<std::size_t>(i)] + x[static_cast<std::size_t>(i)];
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - half);
        const int hi = std::min(n, i + half + 1);
        out[static_cast<std::size_t>(i)] =
            (prefix[static_cast<std::size_t>(hi)] - prefix[static_cast<std::size_t>(lo)]) /
            static_cast<double>(hi - lo);
    }
    return out;
}

// centered sliding maximum via monotonic deque
std::vector<double> moving_max(const std::vector<double>& x, int window) {
    const auto n = static_cast<int>(x.size());
    const int half = std::max(window / 2, 1);
    std::vector<double> out(static_cast<std::size_t>(n));
    std::deque<int> dq;
    int right = -1;
    for (int i = 0; i < n; ++i) {
        const int hi = std::min(n - 1, i + half);
        while (right < hi) {
            ++right;
            while (!dq.empty() && x[static_cast<std::size_t>(dq.back())] <=
                                      x[static_cast<std::size_t>(right)]) {
                dq.pop_back();
            }
            dq.push_back(right);
        }
        const int lo = std::max(0, i - half);
        while (dq.front() < lo) dq.pop_front();
        out[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(dq.front())];
    }
    return out;
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0;
    for (const double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

} // namespace

std::vector<int> detect_r_peaks(const std::vector<double>& lead, double fs) {
    const auto n = static_cast<int>(lead.size());
    if (n < 3) return {};

    const int baseline_win = std::max(3, static_cast<int>(std::lround(0.6 * fs)));
    const auto baseline = moving_mean(lead, baseline_win);
    std::vector<double> y(lead.size());
    std::vector<double> ay(lead.size());
    for (std::size_t i = 0; i < lead.size(); ++i) {
        y[i] = lead[i] - baseline[i];
        ay[i] = std::abs(y[i]);
    }

    const int envelope_win = std::max(3, static_cast<int>(std::lround(2.0 * fs)));
    const auto envelope = moving_max(ay, envelope_win);

    const int refractory = std::max(1, static_cast<int>(std::lround(0.25 * fs)));
    std::vector<int> peaks;
    for (int i = 1; i + 1 < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const double threshold = 0.5 * envelope[ui];
        if (!(y[ui] > threshold) || threshold <= 0) continue;
        if (!(y[ui] > y[ui - 1]) || !(y[ui] >= y[ui + 1])) continue;
        if (!peaks.empty() && i - peaks.back() < refractory) {
            if (y[ui] > y[static_cast<std::size_t>(peaks.back())]) peaks.back() = i;
            continue;
        }
        peaks.push_back(i);
    }
    return peaks;
}

std::array<double, kNumSignalFeatures> lead2_signal_features(const std::vector<double>& lead2,
                                                             double fs, bool* r_peaks_found) {
    if (!(fs > 0)) throw std::invalid_argument("lead2_signal_features: fs must be > 0");
    if (static_cast<double>(lead2.size()) < 2.0 * fs) {
        throw std::invalid_argument("lead2_signal_features: need at least 2 seconds of signal");
    }

    std::array<double, kNumSignalFeatures> f{};
    const auto n = lead2.size();
    const double mean = std::accumulate(lead2.begin(), lead2.end(), 0.0) / static_cast<double>(n);

    const auto peaks = detect_r_peaks(lead2, fs);
    const bool found = peaks.size() >= 2;
    if (r_peaks_found) *r_peaks_found = found;

    const int baseline_win = std::max(3, static_cast<int>(std::lround(0.6 * fs)));
    const auto baseline = moving_mean(lead2, baseline_win);

    if (found) {
        std::vector<double> rr;
        rr.reserve(peaks.size() - 1);
        for (std::size_t i = 1; i < peaks.size(); ++i) {
            rr.push_back(static_cast<double>(peaks[i] - peaks[i - 1]) / fs);
        }
        const double rr_mean = std::accumulate(rr.begin(), rr.end(), 0.0) /
                               static_cast<double>(rr.size());
        f[0] = rr_mean;
        f[1] = median(rr);
        f[2] = sample_std(rr); // SDNN
        double ssd = 0;
        std::size_t nn50 = 0;
        for (std::size_t i = 1; i < rr.size(); ++i) {
            const double d = rr[i] - rr[i - 1];
            ssd += d * d;
            if (std::abs(d) > 0.05) ++nn50;
        }
        f[3] = rr.size() > 1 ? std::sqrt(ssd / static_cast<double>(rr.size() - 1)) : 0.0; // RMSSD
        f[4] = rr.size() > 1 ? static_cast<double>(nn50) / static_cast<double>(rr.size() - 1) : 0.0;
        f[5] = *std::min_element(rr.begin(), rr.end());
        f[6] = *std::max_element(rr.begin(), rr.end());
        f[7] = 60.0 / rr_mean; // mean HR
        std::vector<double> hr(rr.size());
        for (std::size_t i = 0; i < rr.size(); ++i) hr[i] = 60.0 / rr[i];
        f[8] = sample_std(hr);
        f[9] = static_cast<double>(peaks.size());

        std::vector<double> amplitudes;
        std::vector<double> widths;
        amplitudes.reserve(peaks.size());
        widths.reserve(peaks.size());
        const int max_half_width = std::max(1, static_cast<int>(std::lround(0.1 * fs)));
        for (const int p : peaks) {
            const auto up = static_cast<std::size_t>(p);
            const double amp = lead2[up] - baseline[up];
            amplitudes.push_back(amp);
            const double half = 0.5 * amp;
            int left = p;
            while (left > 0 && p - left < max_half_width &&
                   lead2[static_cast<std::size_t>(left - 1)] -
                           baseline[static_cast<std::size_t>(left - 1)] > half) {
                --left;
            }
            int right = p;
            while (right + 1 < static_cast<int>(n) && right - p < max_half_width &&
                   lead2[static_cast<std::size_t>(right + 1)] -
                           baseline[static_cast<std::size_t>(right + 1)] > half) {
                ++right;
            }
            widths.push_back(static_cast<double>(right - left + 1) / fs);
        }
        f[10] = std::accumulate(amplitudes.begin(), amplitudes.end(), 0.0) /
                static_cast<double>(amplitudes.size());
        f[11] = sample_std(amplitudes);
        f[16] = std::accumulate(widths.begin(), widths.end(), 0.0) /
                static_cast<double>(widths.size());
        f[17] = sample_std(widths);
    }

    // whole-signal statistics, peak-independent
    double energy = 0;
    for (const double v : lead2) energy += v * v;
    f[12] = energy / static_cast<double>(n);

    std::size_t crossings = 0;
    double m2 = 0, m3 = 0, m4 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = lead2[i] - mean;
        m2 += c * c;
        m3 += c * c * c;
        m4 += c * c * c * c;
        if (i > 0 && (lead2[i - 1] - mean) * c < 0) ++crossings;
    }
    f[13] = static_cast<double>(crossings) / static_cast<double>(n - 1);
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    if (m2 > 0) {
        f[14] = m3 / std::pow(m2, 1.5);
        f[15] = m4 / (m2 * m2) - 3.0;
    }

    // spectral pair: DFT bins below 0.5 Hz over total centered power
    const double total_power = m2 * static_cast<double>(n);
    if (total_power > 0) {
        double low_power = 0;
        const auto max_bin = static_cast<int>(std::floor(0.5 * static_cast<double>(n) / fs));
        for (int k = 1; k <= max_bin; ++k) {
            const double w = 2.0 * 3.14159265358979323846 * static_cast<double>(k) /
                             static_cast<double>(n);
            double re = 0, im = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double c = lead2[i] - mean;
                re += c * std::cos(w * static_cast<double>(i));
                im -= c * std::sin(w * static_cast<double>(i));
            }
            low_power += 2.0 * (re * re + im * im) / static_cast<double>(n);
        }
        f[18] = std::clamp(low_power / total_power, 0.0, 1.0);

        double diff_power = 0;
        for (std::size_t i = 1; i < n; ++i) {
            const double d = lead2[i] - lead2[i - 1];
            diff_power += d * d;
        }
        f[19] = std::clamp(diff_power / (4.0 * total_power), 0.0, 1.0);
    }

    for (const double v : f) {
        if (!std::isfinite(v)) throw std::logic_error("lead2_signal_features: non-finite feature");
    }
    return f;
}

Lead2Features extract_lead2_features(const std::vector<double>& lead2_at_target_fs,
                                     std::optional<double> age, Sex sex, const PrepConfig& cfg) {
    Lead2Features out;
    const auto sig = lead2_signal_features(lead2_at_target_fs, cfg.target_fs, &out.r_peaks_found);
    std::copy(sig.begin(), sig.end(), out.values.begin());
    const Demographics d = encode_demographics(age, sex, cfg.age_scale_max);
    out.values[kNumSignalFeatures] = d.age_scaled;
    out.values[kNumSignalFeatures + 1] = d.sex_numeric;
    return out;
}

} // namespace sourcecv
