#include "dskf/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "dskf/errors.hpp"

namespace dskf {

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw ConfigError("quantile of an empty set");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

Track roi_track(const Matrix& z_activity, const std::vector<int>& roi) {
    if (roi.empty()) throw ConfigError("ROI is empty");
    for (int idx : roi) {
        if (idx < 0 || idx >= z_activity.cols()) {
            throw ConfigError("ROI index " + std::to_string(idx) + " out of range");
        }
    }
    Track track;
    track.values.resize(z_activity.rows());
    for (Eigen::Index t = 0; t < z_activity.rows(); ++t) {
        double sum = 0.0;
        for (int idx : roi) sum += std::abs(z_activity(t, idx));
        track.values[t] = sum / static_cast<double>(roi.size());
    }
    return track;
}

Track roi_track(const std::vector<FilterFrame>& frames, const std::vector<int>& roi) {
    Matrix z(frames.size(), frames.empty() ? 0 : frames[0].z.size());
    for (std::size_t t = 0; t < frames.size(); ++t) z.row(t) = frames[t].z;
    return roi_track(z, roi);
}

Track roi_track(const std::vector<SmoothedState>& smoothed, const std::vector<int>& roi) {
    Matrix z(smoothed.size(), smoothed.empty() ? 0 : smoothed[0].z.size());
    for (std::size_t t = 0; t < smoothed.size(); ++t) z.row(t) = smoothed[t].z;
    return roi_track(z, roi);
}

std::vector<double> xcorr_normalized(const std::vector<double>& f,
                                     const std::vector<double>& g) {
    if (f.size() != g.size()) throw ShapeError("cross-correlation inputs differ in length");
    const int T = static_cast<int>(f.size());
    if (T == 0) throw ShapeError("cross-correlation of empty series");

    double norm_f = 0.0, norm_g = 0.0;
    for (double v : f) norm_f += v * v;
    for (double v : g) norm_g += v * v;
    norm_f = std::sqrt(norm_f);
    norm_g = std::sqrt(norm_g);
    if (norm_f == 0.0 || norm_g == 0.0) {
        throw DegenerateInputError("cross-correlation of a zero-norm series");
    }

    std::vector<double> curve(2 * T - 1, 0.0);
    for (int s = -(T - 1); s <= T - 1; ++s) {
        double acc = 0.0;
        const int lo = std::max(0, -s);
        const int hi = std::min(T, T - s);
        for (int n = lo; n < hi; ++n) acc += f[n] * g[n + s];
        curve[s + T - 1] = acc / (norm_f * norm_g);
    }
    return curve;
}

double xcorr_error(const std::vector<double>& thal_curve,
                   const std::vector<double>& somato_curve,
                   const std::vector<double>& ideal_curve) {
    if (thal_curve.size() != ideal_curve.size() || somato_curve.size() != ideal_curve.size()) {
        throw ShapeError("correlation curves differ in length");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < ideal_curve.size(); ++i) {
        const double dt = thal_curve[i] - ideal_curve[i];
        const double ds = somato_curve[i] - ideal_curve[i];
        acc += dt * dt + ds * ds;
    }
    return std::sqrt(acc);
}

double peak_height_difference(const Track& a, const Track& b, int t_peak_index) {
    if (t_peak_index < 0 || t_peak_index >= static_cast<int>(a.values.size()) ||
        a.values.size() != b.values.size()) {
        throw ShapeError("peak index outside the tracks");
    }
    double norm = 0.0;
    for (double v : a.values) norm = std::max(norm, std::abs(v));
    for (double v : b.values) norm = std::max(norm, std::abs(v));
    if (norm == 0.0) return 0.0;  // both tracks flat zero
    return (a.values[t_peak_index] - b.values[t_peak_index]) / norm;
}

EnsembleTrack ensemble(const std::vector<Track>& tracks) {
    if (tracks.empty()) throw ConfigError("ensemble of zero tracks");
    const std::size_t T = tracks[0].values.size();
    for (const Track& t : tracks) {
        if (t.values.size() != T) throw ShapeError("ensemble tracks differ in length");
    }

    EnsembleTrack out;
    out.member_count = static_cast<int>(tracks.size());
    out.median.resize(T);
    out.q10.resize(T);
    out.q90.resize(T);
    out.q25.resize(T);
    out.q75.resize(T);
    out.mean.resize(T);
    std::vector<double> column(tracks.size());
    for (std::size_t i = 0; i < T; ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < tracks.size(); ++k) {
            column[k] = tracks[k].values[i];
            sum += column[k];
        }
        out.mean[i] = sum / static_cast<double>(tracks.size());
        out.median[i] = quantile(column, 0.5);
        out.q10[i] = quantile(column, 0.10);
        out.q90[i] = quantile(column, 0.90);
        out.q25[i] = quantile(column, 0.25);
        out.q75[i] = quantile(column, 0.75);
    }
    return out;
}

}  // namespace dskf
