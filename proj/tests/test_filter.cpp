#include <doctest.h>

#include <cmath>

#include "dskf/errors.hpp"
#include "dskf/filter.hpp"
#include "dskf/simulate.hpp"
#include "helpers.hpp"

using namespace dskf;

namespace {

/// 1x1 system with H = [2], R = [1]; all quantities checkable by hand.
KinematicModel scalar_model() {
    KinematicModel model;
    model.order = 0;
    model.dt = 1.0;
    model.phi = 1.0;
    model.A = Matrix::Identity(1, 1);
    model.Q = Matrix::Identity(1, 1);
    model.H = 2.0 * Matrix::Identity(1, 1);
    model.R = Matrix::Identity(1, 1);
    return model;
}

}  // namespace

TEST_CASE("predict propagates mean and covariance") {
    std::mt19937_64 rng(5);
    const LeadField lf = test::random_leadfield(rng, 2, 2);

    SUBCASE("zero state stays zero") {
        const KinematicModel model = assemble_model(lf, 2, 0.3, 1.0, Matrix::Identity(2, 2));
        FilterState state{Vector::Zero(6), test::random_spd(rng, 6)};
        CHECK(predict(state, model).x.norm() == 0.0);
    }
    SUBCASE("identity dynamics add the random walk variance") {
        const KinematicModel model = assemble_model(lf, 0, 1.0, 0.5, Matrix::Identity(2, 2));
        FilterState state{Vector::Zero(2), Matrix::Identity(2, 2)};
        const FilterState pred = predict(state, model);
        CHECK((pred.P - 1.5 * Matrix::Identity(2, 2)).norm() == doctest::Approx(0.0));
    }
    SUBCASE("first-order action: x -> [d + dt v, v]") {
        const KinematicModel model = assemble_model(
            {Matrix::Ones(2, 1), Matrix::Zero(1, 3)}, 1, 0.25, 1.0, Matrix::Identity(2, 2));
        FilterState state{Vector(2), Matrix::Identity(2, 2)};
        state.x << 3.0, -2.0;
        const FilterState pred = predict(state, model);
        CHECK(pred.x[0] == doctest::Approx(3.0 + 0.25 * -2.0));
        CHECK(pred.x[1] == doctest::Approx(-2.0));
    }
}

TEST_CASE("gain matches the scalar oracle") {
    const KinematicModel model = scalar_model();
    const Matrix p_pred = 3.0 * Matrix::Identity(1, 1);
    const GainResult g = gain(p_pred, model);
    CHECK(g.S(0, 0) == doctest::Approx(13.0));       // 2*3*2 + 1
    CHECK(g.K(0, 0) == doctest::Approx(6.0 / 13.0)); // 3*2/13
}

TEST_CASE("gain limiting cases") {
    const KinematicModel model = scalar_model();
    SUBCASE("no prior uncertainty gives zero gain") {
        const GainResult g = gain(Matrix::Zero(1, 1), model);
        CHECK(g.K.norm() == 0.0);
        CHECK((g.S - model.R).norm() == 0.0);
    }
    SUBCASE("uninformative data suppresses the gain") {
        KinematicModel heavy = model;
        heavy.R = 1e12 * Matrix::Identity(1, 1);
        const Matrix p_pred = 3.0 * Matrix::Identity(1, 1);
        const GainResult g = gain(p_pred, heavy);
        CHECK(g.K.norm() <= 1e-6 * (p_pred * heavy.H.transpose()).norm());
    }
    SUBCASE("singular S raises a numerical error with the step index") {
        KinematicModel broken = model;
        broken.R = Matrix::Zero(1, 1);
        try {
            gain(Matrix::Zero(1, 1), broken, 3);
            FAIL("expected NumericalError");
        } catch (const NumericalError& e) {
            CHECK(e.step() == 3);
        }
    }
}

TEST_CASE("update matches the scalar oracle and contracts covariance") {
    const KinematicModel model = scalar_model();
    const Matrix p_pred = 3.0 * Matrix::Identity(1, 1);
    const GainResult g = gain(p_pred, model);

    SUBCASE("scalar posterior mean") {
        FilterState pred{Vector::Zero(1), p_pred};
        Vector y(1);
        y << 1.0;
        const FilterState post = update(pred, g.K, g.S, y, model);
        CHECK(post.x[0] == doctest::Approx(6.0 / 13.0));
    }
    SUBCASE("zero innovation keeps the prediction") {
        FilterState pred{Vector::Constant(1, 0.7), p_pred};
        const Vector y = model.H * pred.x;
        const FilterState post = update(pred, g.K, g.S, y, model);
        CHECK(post.x[0] == doctest::Approx(0.7));
    }
    SUBCASE("trace never grows") {
        std::mt19937_64 rng(17);
        for (int trial = 0; trial < 20; ++trial) {
            const auto sys = test::random_system(rng);
            const Matrix p_pred2 = test::random_spd(rng, sys.model.state_dim());
            const GainResult g2 = gain(p_pred2, sys.model);
            FilterState pred{test::random_vector(rng, sys.model.state_dim()), p_pred2};
            const Vector y = test::random_vector(rng, sys.model.observation_dim());
            const FilterState post = update(pred, g2.K, g2.S, y, sys.model);
            CHECK(post.P.trace() <= pred.P.trace() + 1e-10 * pred.P.trace());
        }
    }
}

TEST_CASE("standardize matches the scalar oracle") {
    // P_pred = 3, K = 6/13, S = 13: M = K S K^T / P = 12/13.
    const Matrix p_pred = 3.0 * Matrix::Identity(1, 1);
    const Matrix k = (6.0 / 13.0) * Matrix::Identity(1, 1);
    const Matrix s = 13.0 * Matrix::Identity(1, 1);
    Vector x(1);
    x << 1.0;
    const Standardization st = standardize(p_pred, k, s, x, 1.0);
    CHECK(st.W(0, 0) == doctest::Approx((13.0 / 12.0) / std::sqrt(3.0)));
    CHECK(st.z[0] == doctest::Approx(st.W(0, 0)));
}

TEST_CASE("standardization identity: diag(W K S K^T W^T) = D^(1-2p)") {
    std::mt19937_64 rng(23);
    for (double p : {0.5, 1.0, 2.0}) {
        for (int trial = 0; trial < 30; ++trial) {
            const int n = 5, m = 3;
            const Matrix p_pred = test::random_spd(rng, n);
            const Matrix k = test::random_matrix(rng, n, m);
            const Matrix s = test::random_spd(rng, m);
            const Vector x = test::random_vector(rng, n);

            const Standardization st = standardize(p_pred, k, s, x, p);
            const Vector lhs =
                (st.W * k * s * k.transpose() * st.W.transpose()).diagonal();

            // Independent route to D via Eigen's own inverse sqrt.
            Eigen::SelfAdjointEigenSolver<Matrix> eig(p_pred);
            const Matrix inv_sqrt = eig.operatorInverseSqrt();
            const Vector d = (inv_sqrt * k * s * k.transpose() * inv_sqrt).diagonal();

            for (int i = 0; i < n; ++i) {
                const double expected = std::pow(d[i], 1.0 - 2.0 * p);
                CHECK(std::abs(lhs[i] - expected) <= 1e-10 * std::max(1.0, std::abs(expected)));
                if (p == 0.5) CHECK(lhs[i] == doctest::Approx(1.0).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("standardize p = 1 is an entrywise D^(-1/2) rescaling of p = 0.5") {
    std::mt19937_64 rng(29);
    const int n = 4, m = 2;
    const Matrix p_pred = test::random_spd(rng, n);
    const Matrix k = test::random_matrix(rng, n, m);
    const Matrix s = test::random_spd(rng, m);
    const Vector x = test::random_vector(rng, n);

    const Standardization half = standardize(p_pred, k, s, x, 0.5);
    const Standardization full = standardize(p_pred, k, s, x, 1.0);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(p_pred);
    const Matrix inv_sqrt = eig.operatorInverseSqrt();
    const Vector d = (inv_sqrt * k * s * k.transpose() * inv_sqrt).diagonal();
    for (int i = 0; i < n; ++i) {
        CHECK(full.z[i] == doctest::Approx(half.z[i] * std::pow(d[i], -0.5)));
    }
}

TEST_CASE("standardize rejects degenerate inputs") {
    const Matrix p_pred = Matrix::Identity(2, 2);
    const Matrix k = Matrix::Zero(2, 1);
    const Matrix s = Matrix::Identity(1, 1);
    CHECK_THROWS_AS(standardize(p_pred, k, s, Vector::Zero(2), 1.0), DegenerateInputError);
    CHECK_THROWS_AS(standardize(p_pred, k, s, Vector::Zero(2), 0.0), ParameterError);
    CHECK_THROWS_AS(standardize(Matrix::Zero(2, 2), k, s, Vector::Zero(2), 1.0), NumericalError);
}

TEST_CASE("run_filter equals brute-force joint-Gaussian conditioning") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const auto sys = test::random_system(rng);
        FilterConfig config;
        config.theta = sys.theta;
        const auto frames = run_filter(sys.model, sys.observations, config);
        const auto oracle = test::joint_gaussian_oracle(sys.model, sys.theta, sys.observations);
        for (std::size_t t = 0; t < frames.size(); ++t) {
            CHECK(test::rel_norm(frames[t].x_post, oracle.mean[t]) < 1e-8);
            CHECK(test::rel_frobenius(frames[t].P_post, oracle.cov[t]) < 1e-8);
        }
    }
}

TEST_CASE("run_filter basics") {
    std::mt19937_64 rng(37);
    const LeadField lf = test::random_leadfield(rng, 3, 2);
    const KinematicModel model = assemble_model(lf, 1, 0.1, 1.0, Matrix::Identity(3, 3));

    SUBCASE("all-zero observations give exactly zero z") {
        const auto frames = run_filter(model, Matrix::Zero(5, 3), FilterConfig{});
        for (const auto& f : frames) CHECK(f.z.norm() == 0.0);
    }
    SUBCASE("deterministic: identical inputs, bit-identical outputs") {
        const Matrix y = test::random_matrix(rng, 4, 3);
        const auto a = run_filter(model, y, FilterConfig{});
        const auto b = run_filter(model, y, FilterConfig{});
        for (std::size_t t = 0; t < a.size(); ++t) {
            CHECK((a[t].z - b[t].z).norm() == 0.0);
            CHECK((a[t].P_post - b[t].P_post).norm() == 0.0);
            CHECK((a[t].W - b[t].W).norm() == 0.0);
        }
    }
    SUBCASE("scaling observations scales z, argmax unchanged") {
        const Matrix y = test::random_matrix(rng, 4, 3);
        const auto base = run_filter(model, y, FilterConfig{});
        const auto scaled = run_filter(model, 3.5 * y, FilterConfig{});
        for (std::size_t t = 0; t < base.size(); ++t) {
            CHECK(test::rel_norm(scaled[t].z, 3.5 * base[t].z) < 1e-12);
            int am_base = 0, am_scaled = 0;
            base[t].z.cwiseAbs().maxCoeff(&am_base);
            scaled[t].z.cwiseAbs().maxCoeff(&am_scaled);
            CHECK(am_base == am_scaled);
        }
    }
    SUBCASE("shape and parameter validation") {
        CHECK_THROWS_AS(run_filter(model, Matrix::Zero(4, 2), FilterConfig{}), ShapeError);
        FilterConfig bad;
        bad.theta = 0.0;
        CHECK_THROWS_AS(run_filter(model, Matrix::Zero(4, 3), bad), ParameterError);
    }
}

TEST_CASE("rts_smooth matches an independent naive recursion") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 8; ++trial) {
        const auto sys = test::random_system(rng, 3, 3, 4);
        FilterConfig config;
        config.theta = sys.theta;
        const auto frames = run_filter(sys.model, sys.observations, config);
        const auto smoothed = rts_smooth(frames, sys.model);
        const auto naive = test::naive_rts(frames, sys.model);
        REQUIRE(smoothed.size() == frames.size());
        for (std::size_t t = 0; t < frames.size(); ++t) {
            CHECK(test::rel_norm(smoothed[t].z, naive[t].z) < 1e-9);
            CHECK(test::rel_frobenius(smoothed[t].P, naive[t].P) < 1e-9);
        }
    }
}

TEST_CASE("rts_smooth edge cases") {
    std::mt19937_64 rng(43);
    const LeadField lf = test::random_leadfield(rng, 2, 2);
    const KinematicModel model = assemble_model(lf, 0, 1.0, 0.4, Matrix::Identity(2, 2));

    SUBCASE("single step: smoothing is the identity") {
        const auto frames = run_filter(model, test::random_matrix(rng, 1, 2), FilterConfig{});
        const auto smoothed = rts_smooth(frames, model);
        CHECK((smoothed[0].z - frames[0].z).norm() == 0.0);
        CHECK((smoothed[0].P - frames[0].P_post).norm() == 0.0);
    }
    SUBCASE("smoothing a noisy constant signal reduces track variance") {
        // Fixed seed: constant activity observed in noise.
        std::mt19937_64 noise_rng(99);
        const Vector d = Vector::Constant(2, 5.0);
        Matrix y(30, 2);
        for (int t = 0; t < 30; ++t) {
            y.row(t) = (lf.L * d + 0.3 * test::random_vector(noise_rng, 2)).transpose();
        }
        const auto frames = run_filter(model, y, FilterConfig{});
        const auto smoothed = rts_smooth(frames, model);
        auto variance_over_time = [](const std::vector<double>& v) {
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            double var = 0.0;
            for (double x : v) var += (x - mean) * (x - mean);
            return var / static_cast<double>(v.size());
        };
        std::vector<double> filtered, smooth;
        for (int t = 0; t < 30; ++t) {
            filtered.push_back(frames[t].z[0]);
            smooth.push_back(smoothed[t].z[0]);
        }
        CHECK(variance_over_time(smooth) <= variance_over_time(filtered));
    }
    SUBCASE("empty forward pass is rejected") {
        CHECK_THROWS_AS(rts_smooth({}, model), ParameterError);
    }
}

TEST_CASE("run_skf is run_filter on the zero-order model") {
    std::mt19937_64 rng(47);
    const LeadField lf = test::random_leadfield(rng, 3, 4);
    const Matrix r = 0.5 * Matrix::Identity(3, 3);
    const Matrix y = test::random_matrix(rng, 5, 3);
    FilterConfig config;

    const auto direct = run_skf(lf, y, r, 0.7, config);
    const auto via_model = run_filter(assemble_model(lf, 0, 1.0, 0.7, r), y, config);
    REQUIRE(direct.size() == via_model.size());
    for (std::size_t t = 0; t < direct.size(); ++t) {
        CHECK((direct[t].z - via_model[t].z).norm() == 0.0);
    }
}

TEST_CASE("zero localization error on noiseless single-dipole data") {
    // Synthetic lead field, one noiseless step, amplitude standardization,
    // wide-open prior: the standardized power must peak at the true source.
    const LeadField lf = synth_leadfield(16, 40, 2, 1.0);
    const Matrix r = 1e-4 * Matrix::Identity(16, 16);
    FilterConfig config;
    config.p = 0.5;
    config.theta = 1e8;

    for (int j = 0; j < lf.source_count(); ++j) {
        const Matrix y = (10.0 * lf.L.col(j)).transpose();
        const auto frames = run_skf(lf, y, r, 1.0, config);
        int argmax = 0;
        frames[0].z.cwiseAbs().maxCoeff(&argmax);
        CHECK(argmax == j);
    }
}
