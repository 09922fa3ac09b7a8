#pragma once

#include <vector>

#include "dskf/statespace.hpp"

namespace dskf {

/// Tuning knobs for a filter run.
struct FilterConfig {
    /// Standardization exponent. 1 standardizes reconstructed power,
    /// 0.5 standardizes amplitude.
    double p = 1.0;
    /// Initial covariance scale: P0 = theta * I. Default matches a 10-unit
    /// expected peak amplitude (theta = amplitude^2).
    double theta = 100.0;
    /// Relative floor for the standardization diagonal before it is raised
    /// to -p; entries below diag_floor * max(D) are clamped.
    double diag_floor = 1e-12;
};

/// Mean/covariance pair, predicted or posterior.
struct FilterState {
    Vector x;
    Matrix P;
};

/// Everything one filter step produces. Kept whole so the smoother and the
/// metrics layer can consume any part without re-running the filter.
struct FilterFrame {
    int t = 0;      ///< step index, 0-based
    Vector x_pred;
    Matrix P_pred;
    Vector x_post;
    Matrix P_post;
    Matrix K;       ///< gain, state_dim x m
    Matrix S;       ///< innovation covariance, m x m
    Matrix W;       ///< standardization weight, state_dim x state_dim
    Vector z;       ///< standardized state W * x_post
};

/// Smoothed standardized state and covariance at one step.
struct SmoothedState {
    Vector z;
    Matrix P;
};

/// x_pred = A x, P_pred = A P A^T + Q (symmetrized).
FilterState predict(const FilterState& prev, const KinematicModel& model);

struct GainResult {
    Matrix K;
    Matrix S;
};

/**
 * @brief Innovation covariance and Kalman gain.
 *
 * S = H P_pred H^T + R (symmetrized). K = P_pred H^T S^{-1} is obtained by
 * solving S X = H P_pred with a Cholesky factorization and transposing;
 * S^{-1} is never formed. Throws NumericalError (with the step index) if
 * the factorization fails.
 */
GainResult gain(const Matrix& P_pred, const KinematicModel& model, int step = -1);

/**
 * @brief Measurement update.
 *
 * x_post = x_pred + K (y - H x_pred); P_post = P_pred - K S K^T,
 * symmetrized. If symmetrization leaves a negative eigenvalue beyond
 * tolerance, P_post is clipped to PSD with a logged warning.
 */
FilterState update(const FilterState& pred, const Matrix& K, const Matrix& S,
                   const Vector& y, const KinematicModel& model, int step = -1);

struct Standardization {
    Matrix W;
    Vector z;
};

/**
 * @brief Depth-bias-correcting standardization of a posterior mean.
 *
 * With P_pred^{-1/2} the inverse principal square root (eigenvalue-floored),
 * M = P_pred^{-1/2} K S K^T P_pred^{-1/2} and D = Diag(M) floored at
 * diag_floor * max(D):
 *
 *   W = D^{-p} P_pred^{-1/2},   z = W x_post.
 *
 * p = 0.5 standardizes amplitude (unit resolution variance), p = 1
 * standardizes power. Throws NumericalError if the square root cannot be
 * built and DegenerateInputError if D is identically zero.
 */
Standardization standardize(const Matrix& P_pred, const Matrix& K, const Matrix& S,
                            const Vector& x_post, double p, double diag_floor = 1e-12,
                            int step = -1);

/**
 * @brief Full forward pass over a T x m observation matrix.
 *
 * Starts from x0 = 0, P0 = theta * I and emits one FilterFrame per step,
 * in order. Deterministic given inputs. Numerical failures propagate as
 * NumericalError carrying the step index.
 */
std::vector<FilterFrame> run_filter(const KinematicModel& model,
                                    const Matrix& observations,
                                    const FilterConfig& config);

/**
 * @brief Fixed-interval RTS smoother over the standardized sequence.
 *
 * Backward recursion on z_{t|t} = W_t x_{t|t} and the filter covariances:
 *
 *   z^-      = A z_{t|t}
 *   P^-      = A P_{t|t} A^T + Q
 *   C_t      = P_{t|t} A^T (P^-)^{-1}        (PD solve)
 *   zbar_t   = z_{t|t} + C_t (zbar_{t+1} - z^-)
 *   Pbar_t   = P_{t|t} + C_t (Pbar_{t+1} - P^-) C_t^T
 *
 * Note the smoother propagates the standardized state with the raw
 * dynamics; this is deliberate (see run_skf callers) and matches the
 * filter it post-processes.
 */
std::vector<SmoothedState> rts_smooth(const std::vector<FilterFrame>& frames,
                                      const KinematicModel& model);

/**
 * @brief Zero-order baseline: A = I_n, H = L, Q = phi * I_n.
 *
 * Identical to run_filter on the order-0 assembled model; provided as the
 * conventional entry point for the static variant.
 */
std::vector<FilterFrame> run_skf(const LeadField& leadfield, const Matrix& observations,
                                 const Matrix& noise_cov, double phi,
                                 const FilterConfig& config);

}  // namespace dskf
