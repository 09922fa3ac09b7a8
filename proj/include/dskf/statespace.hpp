#pragma once

#include "dskf/linalg.hpp"

namespace dskf {

/**
 * @brief Linear map from source strengths to electrode potentials.
 *
 * One column per source (fixed-orientation scalar sources). Positions are
 * the 3-D source locations in millimetres, used for ROI construction and
 * depth heuristics; they do not enter the forward map itself.
 */
struct LeadField {
    Matrix L;          ///< m x n gain matrix
    Matrix positions;  ///< n x 3 source positions (mm)

    int electrode_count() const { return static_cast<int>(L.rows()); }
    int source_count() const { return static_cast<int>(L.cols()); }

    /// Throws ParameterError if dimensions are inconsistent, m < 2, n < 1,
    /// or any column of L is identically zero.
    void validate() const;
};

/**
 * @brief One assembled linear-Gaussian system of kinematic order s.
 *
 * State layout is [activity; 1st derivative; ...; s-th derivative], each
 * block of length n, so state_dim = (s+1)*n. A is the block upper-triangular
 * constant-derivative transition, Q drives only the highest derivative
 * (full random walk for s = 0), H reads the activity block through the
 * lead field, and R is the measurement noise covariance.
 */
struct KinematicModel {
    int order = 0;      ///< s in {0, 1, 2}
    double dt = 0.0;    ///< time step (> 0; any consistent unit)
    double phi = 0.0;   ///< process noise variance
    Matrix A;           ///< (s+1)n x (s+1)n transition
    Matrix Q;           ///< (s+1)n x (s+1)n process noise covariance
    Matrix H;           ///< m x (s+1)n observation matrix [L 0]
    Matrix R;           ///< m x m measurement noise covariance

    int state_dim() const { return static_cast<int>(A.rows()); }
    int source_count() const { return state_dim() / (order + 1); }
    int observation_dim() const { return static_cast<int>(H.rows()); }
};

/**
 * @brief Transition matrix of the s-order constant-derivative model.
 *
 * Block (i, j), j >= i, equals dt^(j-i)/(j-i)! * I_n; blocks below the
 * diagonal are zero. s = 0 returns I_n.
 */
Matrix build_transition(int order, double dt, int n);

/**
 * @brief Process noise covariance with only the highest derivative driven.
 *
 * All-zero except the bottom-right n x n block, (s/dt^s) * phi * I_n.
 * Requires s in {1, 2}; the zero-order case instead uses a full-rank
 * random-walk covariance phi * I_n (see assemble_model).
 */
Matrix build_process_noise(int order, double dt, double phi, int n);

/// H = [L 0_{m x sn}]; for s = 0 this is L itself.
Matrix build_observation(const LeadField& leadfield, int order);

/**
 * @brief Assemble a full model from a lead field and timing parameters.
 *
 * For order 0 the process noise is the random walk phi * I_n. noise_cov
 * must be m x m symmetric positive definite.
 */
KinematicModel assemble_model(const LeadField& leadfield, int order, double dt,
                              double phi, const Matrix& noise_cov);

}  // namespace dskf
