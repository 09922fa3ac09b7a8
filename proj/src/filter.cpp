#include "dskf/filter.hpp"

#include <cmath>
#include <string>

#include "dskf/errors.hpp"

namespace dskf {

FilterState predict(const FilterState& prev, const KinematicModel& model) {
    FilterState out;
    out.x = model.A * prev.x;
    out.P = symmetrize(model.A * prev.P * model.A.transpose() + model.Q);
    return out;
}

GainResult gain(const Matrix& P_pred, const KinematicModel& model, int step) {
    GainResult out;
    out.S = symmetrize(model.H * P_pred * model.H.transpose() + model.R);
    Eigen::LLT<Matrix> llt(out.S);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("innovation covariance is not positive definite", step);
    }
    // K = P H^T S^{-1}: solve S X = H P, then K = X^T.
    out.K = llt.solve(model.H * P_pred).transpose();
    return out;
}

FilterState update(const FilterState& pred, const Matrix& K, const Matrix& S,
                   const Vector& y, const KinematicModel& model, int step) {
    if (y.size() != model.observation_dim()) {
        throw ShapeError("observation length " + std::to_string(y.size()) +
                         " does not match model (" + std::to_string(model.observation_dim()) + ")");
    }
    FilterState out;
    out.x = pred.x + K * (y - model.H * pred.x);
    out.P = clip_to_psd(symmetrize(pred.P - K * S * K.transpose()), 1e-10, step);
    return out;
}

Standardization standardize(const Matrix& P_pred, const Matrix& K, const Matrix& S,
                            const Vector& x_post, double p, double diag_floor, int step) {
    if (!(p > 0.0)) {
        throw ParameterError("standardization exponent must be positive, got " + std::to_string(p));
    }
    const Matrix inv_sqrt = symmetric_inverse_sqrt(P_pred, 1e-12, step);

    // diag(M) with M = P^{-1/2} K S K^T P^{-1/2}, via B = P^{-1/2} K:
    // d_i = row_i(B S) . row_i(B). Avoids forming the full M.
    const Matrix b = inv_sqrt * K;
    const Vector d = (b * symmetrize(S)).cwiseProduct(b).rowwise().sum();

    const double d_max = d.maxCoeff();
    if (!(d_max > 0.0)) {
        throw DegenerateInputError("standardization diagonal is identically zero" +
                                   (step >= 0 ? " at step " + std::to_string(step) : ""));
    }
    const double floor = diag_floor * d_max;
    Vector weights(d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        weights[i] = std::pow(std::max(d[i], floor), -p);
    }

    Standardization out;
    out.W = weights.asDiagonal() * inv_sqrt;
    out.z = weights.cwiseProduct(inv_sqrt * x_post);
    return out;
}

std::vector<FilterFrame> run_filter(const KinematicModel& model,
                                    const Matrix& observations,
                                    const FilterConfig& config) {
    const int T = static_cast<int>(observations.rows());
    if (T < 1) throw ParameterError("need at least one observation row");
    if (observations.cols() != model.observation_dim()) {
        throw ShapeError("observations have " + std::to_string(observations.cols()) +
                         " channels, model expects " + std::to_string(model.observation_dim()));
    }
    if (!(config.theta > 0.0)) {
        throw ParameterError("initial covariance scale must be positive");
    }

    FilterState state;
    state.x = Vector::Zero(model.state_dim());
    state.P = config.theta * Matrix::Identity(model.state_dim(), model.state_dim());

    std::vector<FilterFrame> frames;
    frames.reserve(T);
    for (int t = 0; t < T; ++t) {
        FilterFrame frame;
        frame.t = t;

        FilterState pred = predict(state, model);
        GainResult g = gain(pred.P, model, t);
        state = update(pred, g.K, g.S, observations.row(t).transpose(), model, t);
        Standardization std_out =
            standardize(pred.P, g.K, g.S, state.x, config.p, config.diag_floor, t);

        if (!state.x.allFinite() || !std_out.z.allFinite()) {
            throw NumericalError("filter state is not finite", t);
        }

        frame.x_pred = std::move(pred.x);
        frame.P_pred = std::move(pred.P);
        frame.x_post = state.x;
        frame.P_post = state.P;
        frame.K = std::move(g.K);
        frame.S = std::move(g.S);
        frame.W = std::move(std_out.W);
        frame.z = std::move(std_out.z);
        frames.push_back(std::move(frame));
    }
    return frames;
}

std::vector<SmoothedState> rts_smooth(const std::vector<FilterFrame>& frames,
                                      const KinematicModel& model) {
    if (frames.empty()) throw ParameterError("cannot smooth an empty forward pass");
    const int T = static_cast<int>(frames.size());

    std::vector<SmoothedState> out(T);
    out[T - 1] = {frames[T - 1].z, frames[T - 1].P_post};

    for (int t = T - 2; t >= 0; --t) {
        const Matrix& P = frames[t].P_post;
        const Vector z_pred = model.A * frames[t].z;
        const Matrix P_pred = symmetrize(model.A * P * model.A.transpose() + model.Q);

        Eigen::LDLT<Matrix> ldlt(P_pred);
        if (ldlt.info() != Eigen::Success) {
            throw NumericalError("smoother predictive covariance factorization failed", t);
        }
        // C = P A^T P_pred^{-1}: solve P_pred X = A P, then C = X^T.
        const Matrix C = ldlt.solve(model.A * P).transpose();

        out[t].z = frames[t].z + C * (out[t + 1].z - z_pred);
        out[t].P = symmetrize(P + C * (out[t + 1].P - P_pred) * C.transpose());
    }
    return out;
}

std::vector<FilterFrame> run_skf(const LeadField& leadfield, const Matrix& observations,
                                 const Matrix& noise_cov, double phi,
                                 const FilterConfig& config) {
    // dt only scales derivative blocks, which an order-0 model has none of;
    // any positive value yields the same system.
    KinematicModel model = assemble_model(leadfield, 0, 1.0, phi, noise_cov);
    return run_filter(model, observations, config);
}

}  // namespace dskf
