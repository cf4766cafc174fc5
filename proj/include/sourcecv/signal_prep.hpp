#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sourcecv/dataset.hpp"
#include "sourcecv/rng.hpp"

namespace sourcecv {

/// leads x samples
using Signal = std::vector<std::vector<double>>;

struct PrepConfig {
    double target_fs = 250;   // Hz
    int target_len = 4096;    // samples (~16 s at 250 Hz)
    double age_scale_max = 100;
    std::uint64_t rng_seed = 0;
};

/// Linear interpolation onto a uniform grid; output length is
/// round(n * fs_out / fs_in), per lead independently.
std::vector<double> resample_lead(const std::vector<double>& lead, double fs_in, double fs_out);
Signal resample(const Signal& signal, double fs_in, double fs_out);

/// Longer signals are cropped to a contiguous window at a uniformly random
/// offset; shorter ones are zero-padded with the left/right share drawn
/// uniformly. The same draw applies to every lead of a record.
Signal fit_length(const Signal& signal, int target_len, Rng& rng);

/// Joint min-max scaling over all leads to [0,1]; a constant signal maps to
/// 0.5 everywhere. Throws on non-finite input.
Signal normalize_amplitude(const Signal& signal);

struct Demographics {
    double age_scaled = 0.5;            // clamp(age / age_scale_max, 0, 1); unknown -> 0.5
    std::array<double, 3> sex_onehot{}; // (M, F, unknown)
    double sex_numeric = 0.5;           // M = 1, F = 0, unknown = 0.5
};

Demographics encode_demographics(std::optional<double> age, Sex sex, double age_scale_max = 100);

/// Fully prepared network-style input: resampled, length-fitted, normalized
/// signal plus encoded demographics.
struct ModelInput {
    Signal signal;
    double age_scaled = 0.5;
    std::array<double, 3> sex_onehot{};
};

ModelInput prep_model_input(const Signal& signal, double fs_in, std::optional<double> age, Sex sex,
                            const PrepConfig& cfg, Rng& rng);

/// R-peak candidates: local maxima of the baseline-removed signal above a
/// moving-threshold envelope, with a 250 ms refractory window keeping the
/// larger peak. Returns sample indices.
std::vector<int> detect_r_peaks(const std::vector<double>& lead, double fs);

constexpr int kNumSignalFeatures = 20;

/// The 20 lead-II summary features, deterministic in the input signal:
///  1  mean RR (s)                11 R amplitude mean
///  2  median RR                  12 R amplitude std
///  3  SDNN                       13 mean squared amplitude
///  4  RMSSD                      14 zero-crossing rate
///  5  pNN50                      15 skewness
///  6  min RR                     16 excess kurtosis
///  7  max RR                     17 QRS half-max width mean (s)
///  8  mean HR (bpm)              18 QRS half-max width std
///  9  HR std                     19 power fraction below 0.5 Hz
/// 10  R-peak count               20 first-difference power ratio
/// Without detectable R peaks the RR/amplitude/width slots fall back to zero
/// and `r_peaks_found` is cleared. Requires >= 2 seconds of signal.
std::array<double, kNumSignalFeatures> lead2_signal_features(const std::vector<double>& lead2,
                                                             double fs, bool* r_peaks_found = nullptr);

/// 22-vector handed to the tabular classifiers: the 20 signal features plus
/// age_scaled and sex_numeric.
struct Lead2Features {
    std::array<double, kNumSignalFeatures + 2> values{};
    bool r_peaks_found = false;
};

Lead2Features extract_lead2_features(const std::vector<double>& lead2_at_target_fs,
                                     std::optional<double> age, Sex sex, const PrepConfig& cfg);

} // namespace sourcecv
