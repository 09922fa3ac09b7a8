#pragma once

#include <string>
#include <vector>

#include "dskf/filter.hpp"

namespace dskf {

/// ROI-averaged standardized strength over time, with provenance labels.
struct Track {
    std::vector<double> values;
    std::string roi_label;
    std::string method_label;
    double snr_db = 0.0;
    int realization = -1;
};

/// Pointwise ensemble statistics over equally long tracks. Quantiles use
/// linear interpolation between order statistics.
struct EnsembleTrack {
    std::vector<double> median, q10, q90, q25, q75, mean;
    int member_count = 0;
};

/// Linear-interpolation quantile of the values (q in [0, 1]).
double quantile(std::vector<double> values, double q);

/// value[t] = mean over roi of |z_t[j]|, activity entries only (the roi
/// holds source indices, which address the leading block of z).
Track roi_track(const Matrix& z_activity, const std::vector<int>& roi);
Track roi_track(const std::vector<FilterFrame>& frames, const std::vector<int>& roi);
Track roi_track(const std::vector<SmoothedState>& smoothed, const std::vector<int>& roi);

/**
 * @brief Normalized cross-correlation curve over all shifts.
 *
 * (f*g)[s] = sum_n f[n] g[n+s] / (|f| |g|) with zero padding outside the
 * series, for s in [-(T-1), T-1]; the returned curve has length 2T-1 with
 * shift 0 at index T-1. |curve| <= 1 everywhere (Cauchy-Schwarz) and equals
 * 1 at shift 0 for f = g.
 */
std::vector<double> xcorr_normalized(const std::vector<double>& f,
                                     const std::vector<double>& g);

/**
 * @brief L2 distance of two estimated-vs-true correlation curves from the
 * ideal autocorrelation:
 *
 *   sqrt( sum_n (thal[n] - ideal[n])^2 + (somato[n] - ideal[n])^2 ).
 */
double xcorr_error(const std::vector<double>& thal_curve,
                   const std::vector<double>& somato_curve,
                   const std::vector<double>& ideal_curve);

/// a[t] - b[t] after normalizing both tracks by their joint maximum.
double peak_height_difference(const Track& a, const Track& b, int t_peak_index);

/// Pointwise median/quantile/mean statistics over an ensemble of tracks.
EnsembleTrack ensemble(const std::vector<Track>& tracks);

}  // namespace dskf
