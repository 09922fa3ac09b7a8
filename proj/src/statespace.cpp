#include "dskf/statespace.hpp"

#include <string>

#include "dskf/errors.hpp"

namespace dskf {

namespace {

void check_order(int order, int lowest) {
    if (order < lowest || order > 2) {
        throw ParameterError("kinematic order must be in {" + std::to_string(lowest) +
                             ", ..., 2}, got " + std::to_string(order));
    }
}

void check_dt(double dt) {
    if (!(dt > 0.0)) {
        throw ParameterError("time step must be positive, got " + std::to_string(dt));
    }
}

}  // namespace

void LeadField::validate() const {
    const auto m = L.rows();
    const auto n = L.cols();
    if (m < 2) throw ParameterError("lead field needs at least 2 electrodes");
    if (n < 1) throw ParameterError("lead field needs at least 1 source");
    if (positions.rows() != n || positions.cols() != 3) {
        throw ParameterError("lead field positions must be n x 3");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        if (L.col(j).norm() == 0.0) {
            throw ParameterError("lead field column " + std::to_string(j) + " is zero");
        }
    }
}

Matrix build_transition(int order, double dt, int n) {
    check_order(order, 0);
    check_dt(dt);
    if (n < 1) throw ParameterError("source count must be >= 1");

    const int blocks = order + 1;
    Matrix a = Matrix::Zero(static_cast<Eigen::Index>(blocks) * n,
                            static_cast<Eigen::Index>(blocks) * n);
    for (int i = 0; i < blocks; ++i) {
        double coeff = 1.0;  // dt^(j-i)/(j-i)!
        for (int j = i; j < blocks; ++j) {
            if (j > i) coeff *= dt / static_cast<double>(j - i);
            a.block(static_cast<Eigen::Index>(i) * n, static_cast<Eigen::Index>(j) * n, n, n) =
                coeff * Matrix::Identity(n, n);
        }
    }
    return a;
}

Matrix build_process_noise(int order, double dt, double phi, int n) {
    check_order(order, 1);
    check_dt(dt);
    if (!(phi > 0.0)) {
        throw ParameterError("process noise variance must be positive, got " + std::to_string(phi));
    }
    if (n < 1) throw ParameterError("source count must be >= 1");

    const Eigen::Index dim = static_cast<Eigen::Index>(order + 1) * n;
    Matrix q = Matrix::Zero(dim, dim);
    const double coeff = static_cast<double>(order) / std::pow(dt, order) * phi;
    q.bottomRightCorner(n, n) = coeff * Matrix::Identity(n, n);
    return q;
}

Matrix build_observation(const LeadField& leadfield, int order) {
    check_order(order, 0);
    leadfield.validate();
    const Eigen::Index m = leadfield.L.rows();
    const Eigen::Index n = leadfield.L.cols();
    Matrix h = Matrix::Zero(m, static_cast<Eigen::Index>(order + 1) * n);
    h.leftCols(n) = leadfield.L;
    return h;
}

KinematicModel assemble_model(const LeadField& leadfield, int order, double dt,
                              double phi, const Matrix& noise_cov) {
    check_order(order, 0);
    check_dt(dt);
    leadfield.validate();
    const int n = leadfield.source_count();
    const int m = leadfield.electrode_count();
    if (noise_cov.rows() != m || noise_cov.cols() != m) {
        throw ParameterError("measurement noise covariance must be m x m");
    }

    KinematicModel model;
    model.order = order;
    model.dt = dt;
    model.phi = phi;
    model.A = build_transition(order, dt, n);
    if (order == 0) {
        // Random walk on the activity itself; the derivative-driven form
        // degenerates at order 0.
        if (!(phi > 0.0)) {
            throw ParameterError("process noise variance must be positive, got " +
                                 std::to_string(phi));
        }
        model.Q = phi * Matrix::Identity(n, n);
    } else {
        model.Q = build_process_noise(order, dt, phi, n);
    }
    model.H = build_observation(leadfield, order);
    model.R = noise_cov;
    return model;
}

}  // namespace dskf
