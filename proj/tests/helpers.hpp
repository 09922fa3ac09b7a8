// Test-only oracles and generators. Everything here is written as an
// independent route to the same quantities the library computes: the
// joint-Gaussian oracle conditions the stacked Gaussian directly with plain
// matrix inverses, and the naive smoother replays the backward recursion
// without any of the library's solve/symmetrization machinery.
#pragma once

#include <random>
#include <vector>

#include "dskf/filter.hpp"
#include "dskf/statespace.hpp"

namespace dskf::test {

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m(r, c) = gauss(rng);
    }
    return m;
}

inline Vector random_vector(std::mt19937_64& rng, int size, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    Vector v(size);
    for (int i = 0; i < size; ++i) v[i] = gauss(rng);
    return v;
}

/// G G^T + ridge I: strictly positive definite.
inline Matrix random_spd(std::mt19937_64& rng, int size, double ridge = 0.1) {
    const Matrix g = random_matrix(rng, size, size);
    return g * g.transpose() + ridge * Matrix::Identity(size, size);
}

inline LeadField random_leadfield(std::mt19937_64& rng, int m, int n) {
    LeadField lf;
    lf.L = random_matrix(rng, m, n);
    lf.positions = random_matrix(rng, n, 3, 10.0);
    lf.validate();
    return lf;
}

struct RandomSystem {
    KinematicModel model;
    double theta = 1.0;
    Matrix observations;  // T x m
};

/// Small random system with arbitrary (not model-consistent) observations;
/// the conditioning identity holds for any observed values.
inline RandomSystem random_system(std::mt19937_64& rng, int n_max = 4, int m_max = 3,
                                  int t_max = 6) {
    std::uniform_int_distribution<int> n_dist(1, n_max);
    std::uniform_int_distribution<int> m_dist(2, m_max);
    std::uniform_int_distribution<int> s_dist(0, 2);
    std::uniform_int_distribution<int> t_dist(1, t_max);
    std::uniform_real_distribution<double> dt_dist(0.05, 1.0);
    std::uniform_real_distribution<double> phi_dist(0.1, 2.0);
    std::uniform_real_distribution<double> theta_dist(0.5, 2.0);

    const int n = n_dist(rng);
    const int m = std::max(2, std::min(m_dist(rng), m_max));
    const int s = s_dist(rng);
    const int T = t_dist(rng);

    RandomSystem sys;
    const LeadField lf = random_leadfield(rng, m, n);
    sys.model = assemble_model(lf, s, dt_dist(rng), phi_dist(rng), random_spd(rng, m, 0.2));
    sys.theta = theta_dist(rng);
    sys.observations = random_matrix(rng, T, m);
    return sys;
}

struct OracleMoments {
    std::vector<Vector> mean;  // posterior mean at each t
    std::vector<Matrix> cov;   // posterior covariance at each t
};

/**
 * Brute-force joint-Gaussian conditioning. Builds the covariance of the
 * stacked vector (x_1..x_T, y_1..y_T) directly from A, Q, H, R, P0 and
 * conditions x_t on y_1..y_t with explicit inverses.
 */
inline OracleMoments joint_gaussian_oracle(const KinematicModel& model, double theta,
                                           const Matrix& observations) {
    const int N = model.state_dim();
    const int m = model.observation_dim();
    const int T = static_cast<int>(observations.rows());

    // Prior covariances of x_i and powers of A.
    std::vector<Matrix> prior(T + 1), a_pow(T + 1);
    prior[0] = theta * Matrix::Identity(N, N);
    a_pow[0] = Matrix::Identity(N, N);
    for (int i = 1; i <= T; ++i) {
        prior[i] = model.A * prior[i - 1] * model.A.transpose() + model.Q;
        a_pow[i] = model.A * a_pow[i - 1];
    }

    // Cov(x_i, x_j) = prior[i] * (A^(j-i))^T for i <= j.
    auto cov_xx = [&](int i, int j) -> Matrix {
        if (i <= j) return prior[i] * a_pow[j - i].transpose();
        return (prior[j] * a_pow[i - j].transpose()).transpose();
    };

    OracleMoments out;
    out.mean.resize(T);
    out.cov.resize(T);
    for (int t = 1; t <= T; ++t) {
        Matrix sigma_yy(t * m, t * m);
        Matrix sigma_xy(N, t * m);
        Vector y_stack(t * m);
        for (int i = 1; i <= t; ++i) {
            y_stack.segment((i - 1) * m, m) = observations.row(i - 1).transpose();
            sigma_xy.middleCols((i - 1) * m, m) = cov_xx(t, i) * model.H.transpose();
            for (int j = 1; j <= t; ++j) {
                Matrix block = model.H * cov_xx(i, j) * model.H.transpose();
                if (i == j) block += model.R;
                sigma_yy.block((i - 1) * m, (j - 1) * m, m, m) = block;
            }
        }
        const Matrix sigma_yy_inv = sigma_yy.inverse();
        out.mean[t - 1] = sigma_xy * sigma_yy_inv * y_stack;
        out.cov[t - 1] = prior[t] - sigma_xy * sigma_yy_inv * sigma_xy.transpose();
    }
    return out;
}

/// Literal backward recursion with plain inverses, kept free of the
/// library's solver and symmetrization choices.
inline std::vector<SmoothedState> naive_rts(const std::vector<FilterFrame>& frames,
                                            const KinematicModel& model) {
    const int T = static_cast<int>(frames.size());
    std::vector<SmoothedState> out(T);
    out[T - 1].z = frames[T - 1].z;
    out[T - 1].P = frames[T - 1].P_post;
    for (int t = T - 2; t >= 0; --t) {
        const Vector z_pred = model.A * frames[t].z;
        const Matrix p_pred =
            model.A * frames[t].P_post * model.A.transpose() + model.Q;
        const Matrix c = frames[t].P_post * model.A.transpose() * p_pred.inverse();
        out[t].z = frames[t].z + c * (out[t + 1].z - z_pred);
        out[t].P = frames[t].P_post + c * (out[t + 1].P - p_pred) * c.transpose();
    }
    return out;
}

inline double rel_frobenius(const Matrix& a, const Matrix& b) {
    const double scale = std::max(1e-300, std::max(a.norm(), b.norm()));
    return (a - b).norm() / scale;
}

inline double rel_norm(const Vector& a, const Vector& b) {
    const double scale = std::max(1e-300, std::max(a.norm(), b.norm()));
    return (a - b).norm() / scale;
}

}  // namespace dskf::test
