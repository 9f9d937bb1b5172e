#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "xrumap/baselines.hpp"
#include "xrumap/errors.hpp"
#include "xrumap/rng.hpp"

using namespace xrumap;

namespace {

double frob(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double frob(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * a.data()[i];
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("pca: rank-1 data explains everything in one component") {
    Matrix x(50, 2);
    for (std::size_t i = 0; i < 50; ++i) {
        const double t = static_cast<double>(i) - 25.0;
        x(i, 0) = 3.0 * t;
        x(i, 1) = -4.0 * t;
    }
    const PcaModel model = pca_fit(x, 2);
    CHECK(model.explained_variance_ratio[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(model.explained_variance_ratio[1] ==
          doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("pca: isotropic gaussian splits variance evenly") {
    Rng rng(100);
    Matrix x(4000, 2);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    const PcaModel model = pca_fit(x, 2);

    // Sample-covariance oracle: 2x2 closed-form eigenvalues.
    double m0 = 0, m1 = 0;
    for (std::size_t i = 0; i < 4000; ++i) {
        m0 += x(i, 0);
        m1 += x(i, 1);
    }
    m0 /= 4000;
    m1 /= 4000;
    double c00 = 0, c01 = 0, c11 = 0;
    for (std::size_t i = 0; i < 4000; ++i) {
        c00 += (x(i, 0) - m0) * (x(i, 0) - m0);
        c01 += (x(i, 0) - m0) * (x(i, 1) - m1);
        c11 += (x(i, 1) - m1) * (x(i, 1) - m1);
    }
    c00 /= 3999;
    c01 /= 3999;
    c11 /= 3999;
    const double tr = c00 + c11;
    const double disc = std::sqrt((c00 - c11) * (c00 - c11) + 4 * c01 * c01);
    const double l0 = (tr + disc) / 2, l1 = (tr - disc) / 2;

    CHECK(model.explained_variance_ratio[0] ==
          doctest::Approx(l0 / tr).epsilon(1e-9));
    CHECK(model.explained_variance_ratio[1] ==
          doctest::Approx(l1 / tr).epsilon(1e-9));
    CHECK(model.explained_variance_ratio[0] == doctest::Approx(0.5).epsilon(0.1));
    CHECK(model.explained_variance_ratio[1] == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("pca: full-rank reconstruction is the identity") {
    Rng rng(101);
    Matrix x(80, 6);
    for (std::size_t i = 0; i < x.size(); ++i)
        x.data()[i] = rng.uniform(-2.0, 2.0);
    const PcaModel model = pca_fit(x, 6);
    const Matrix rec = pca_inverse(model, pca_transform(model, x));
    CHECK(frob(rec, x) / frob(x) < 1e-4);
}

TEST_CASE("pca: components are row-orthonormal") {
    Rng rng(102);
    Matrix x(120, 5);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    const PcaModel model = pca_fit(x, 4);
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b) {
            double dot = 0;
            for (std::size_t c = 0; c < 5; ++c)
                dot += model.components(a, c) * model.components(b, c);
            CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-5));
        }
}

TEST_CASE("pca_transform: the mean maps to zero") {
    Rng rng(103);
    Matrix x(30, 3);
    for (std::size_t i = 0; i < x.size(); ++i)
        x.data()[i] = rng.uniform(0.0, 5.0);
    const PcaModel model = pca_fit(x, 2);
    Matrix mean_row(1, 3);
    for (std::size_t c = 0; c < 3; ++c) mean_row(0, c) = model.mean[c];
    const Matrix y = pca_transform(model, mean_row);
    CHECK(y(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(y(0, 1) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("pca_transform: unit step along component 0 projects to e0") {
    Rng rng(104);
    Matrix x(60, 4);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    const PcaModel model = pca_fit(x, 3);
    Matrix probe(1, 4);
    for (std::size_t c = 0; c < 4; ++c)
        probe(0, c) = model.mean[c] + model.components(0, c);
    const Matrix y = pca_transform(model, probe);
    CHECK(y(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(y(0, 1) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(y(0, 2) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("pca_transform matches the dense matmul oracle") {
    Rng rng(105);
    Matrix x(40, 5), probe(9, 5);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    for (std::size_t i = 0; i < probe.size(); ++i)
        probe.data()[i] = rng.uniform(-1.0, 1.0);
    const PcaModel model = pca_fit(x, 3);
    const Matrix y = pca_transform(model, probe);
    for (std::size_t i = 0; i < probe.rows(); ++i)
        for (std::size_t d = 0; d < 3; ++d) {
            double expect = 0.0;
            for (std::size_t c = 0; c < 5; ++c)
                expect += (probe(i, c) - model.mean[c]) *
                          model.components(d, c);
            CHECK(y(i, d) == doctest::Approx(expect).epsilon(1e-5));
        }
}

TEST_CASE("pca: reconstruction error non-increasing in D, ratios sorted") {
    Rng rng(106);
    Matrix x(100, 6);
    for (std::size_t i = 0; i < 100; ++i) {
        const double t = rng.normal(), u = rng.normal();
        for (std::size_t c = 0; c < 6; ++c)
            x(i, c) = t * std::sin(0.5 * c) + 0.3 * u * std::cos(1.1 * c) +
                      0.05 * rng.normal();
    }
    double prev_err = 1e300;
    for (std::size_t d = 1; d <= 6; ++d) {
        const PcaModel model = pca_fit(x, d);
        const Matrix rec = pca_inverse(model, pca_transform(model, x));
        const double err = frob(rec, x);
        CHECK(err <= prev_err + 1e-9);
        prev_err = err;
        for (std::size_t j = 1; j < d; ++j)
            CHECK(model.explained_variance_ratio[j] <=
                  model.explained_variance_ratio[j - 1] + 1e-12);
        double total = 0;
        for (double r : model.explained_variance_ratio) {
            CHECK(r >= 0.0);
            total += r;
        }
        CHECK(total <= 1.0 + 1e-6);
    }
}

TEST_CASE("pca: training projection has uncorrelated columns") {
    Rng rng(107);
    Matrix x(1500, 4);
    for (std::size_t i = 0; i < 1500; ++i) {
        const double t = rng.normal();
        x(i, 0) = t + 0.1 * rng.normal();
        x(i, 1) = -t + 0.2 * rng.normal();
        x(i, 2) = 0.5 * t + rng.normal();
        x(i, 3) = rng.normal();
    }
    const PcaModel model = pca_fit(x, 3);
    const Matrix y = pca_transform(model, x);
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = a + 1; b < 3; ++b) {
            double ma = 0, mb = 0;
            for (std::size_t i = 0; i < y.rows(); ++i) {
                ma += y(i, a);
                mb += y(i, b);
            }
            ma /= y.rows();
            mb /= y.rows();
            double cab = 0, caa = 0, cbb = 0;
            for (std::size_t i = 0; i < y.rows(); ++i) {
                cab += (y(i, a) - ma) * (y(i, b) - mb);
                caa += (y(i, a) - ma) * (y(i, a) - ma);
                cbb += (y(i, b) - mb) * (y(i, b) - mb);
            }
            CHECK(std::abs(cab / std::sqrt(caa * cbb)) < 1e-3);
        }
}

TEST_CASE("pca rejects degenerate shapes") {
    Matrix x(1, 3);
    CHECK_THROWS_AS(pca_fit(x, 1), DataError);
    Matrix y(10, 3, 1.0);
    CHECK_THROWS_AS(pca_fit(y, 4), DataError);
    CHECK_THROWS_AS(pca_fit(y, 0), DataError);
}

TEST_CASE("pca determinism: identical fits") {
    Rng rng(108);
    Matrix x(60, 4);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    const PcaModel a = pca_fit(x, 3);
    const PcaModel b = pca_fit(x, 3);
    CHECK(a.components == b.components);
    CHECK(a.mean == b.mean);
}

TEST_CASE("nmf: exact rank-1 matrix is recovered") {
    Rng rng(200);
    const std::size_t n = 40, c = 12;
    Matrix x(n, c);
    std::vector<double> u(n), v(c);
    for (auto& val : u) val = rng.uniform(0.1, 2.0);
    for (auto& val : v) val = rng.uniform(0.1, 2.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) x(i, j) = u[i] * v[j];

    const NmfFit fit = nmf_fit(x, 1, 500, 1);
    CHECK(fit.model.reconstruction_error < 1e-3 * frob(x));
}

TEST_CASE("nmf: constant matrix at rank 1") {
    Matrix x(20, 8, 0.7);
    const NmfFit fit = nmf_fit(x, 1, 500, 2);
    Matrix rec(20, 8);
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = 0; j < 8; ++j)
            rec(i, j) = fit.weights(i, 0) * fit.model.basis(0, j);
    for (std::size_t i = 0; i < rec.size(); ++i)
        CHECK(rec.data()[i] == doctest::Approx(0.7).epsilon(1e-4));
}

TEST_CASE("nmf: same seed gives identical factors") {
    Rng rng(201);
    Matrix x(25, 9);
    for (std::size_t i = 0; i < x.size(); ++i)
        x.data()[i] = rng.uniform(0.0, 1.0);
    const NmfFit a = nmf_fit(x, 3, 60, 42);
    const NmfFit b = nmf_fit(x, 3, 60, 42);
    CHECK(a.model.basis == b.model.basis);
    CHECK(a.weights == b.weights);
}

TEST_CASE("nmf: objective is non-increasing across iterations") {
    Rng rng(202);
    Matrix x(30, 10);
    for (std::size_t i = 0; i < x.size(); ++i)
        x.data()[i] = rng.uniform(0.0, 2.0);
    const NmfFit fit = nmf_fit(x, 4, 120, 7);
    for (std::size_t i = 1; i < fit.model.error_trace.size(); ++i)
        CHECK(fit.model.error_trace[i] <=
              fit.model.error_trace[i - 1] + 1e-9);
}

TEST_CASE("nmf rejects negative and all-zero input") {
    Matrix neg(4, 4, -1.0);
    CHECK_THROWS_AS(nmf_fit(neg, 2, 10, 0), DataError);
    Matrix zero(4, 4, 0.0);
    CHECK_THROWS_AS(nmf_fit(zero, 2, 10, 0), DataError);
}

TEST_CASE("nmf_transform: recovers known weights") {
    Rng rng(203);
    const std::size_t d = 3, c = 10, n = 15;
    Matrix basis(d, c);
    for (std::size_t i = 0; i < basis.size(); ++i)
        basis.data()[i] = rng.uniform(0.1, 1.0);
    Matrix w(n, d);
    for (std::size_t i = 0; i < w.size(); ++i)
        w.data()[i] = rng.uniform(0.1, 1.5);
    Matrix x(n, c);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < d; ++k) s += w(i, k) * basis(k, j);
            x(i, j) = s;
        }
    NmfModel model;
    model.basis = basis;
    model.rank = d;
    const Matrix recovered = nmf_transform(model, x, 800);
    Matrix rec(n, c);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < d; ++k)
                s += recovered(i, k) * basis(k, j);
            rec(i, j) = s;
        }
    CHECK(frob(rec, x) / frob(x) < 1e-2);
}

TEST_CASE("nmf_transform: zero rows give zero weights") {
    Matrix basis(2, 5, 0.5);
    NmfModel model;
    model.basis = basis;
    model.rank = 2;
    Matrix x(3, 5, 0.0);
    x(0, 0) = 1.0;  // one non-zero row, two zero rows
    const Matrix w = nmf_transform(model, x, 50);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(w(1, k) == 0.0);
        CHECK(w(2, k) == 0.0);
    }
}

TEST_CASE("nmf_transform objective non-increasing per iteration") {
    Rng rng(204);
    Matrix basis(3, 8);
    for (std::size_t i = 0; i < basis.size(); ++i)
        basis.data()[i] = rng.uniform(0.05, 1.0);
    NmfModel model;
    model.basis = basis;
    model.rank = 3;
    Matrix x(12, 8);
    for (std::size_t i = 0; i < x.size(); ++i)
        x.data()[i] = rng.uniform(0.0, 1.0);

    double prev = 1e300;
    for (std::size_t iters = 1; iters <= 30; ++iters) {
        const Matrix w = nmf_transform(model, x, iters);
        Matrix rec(12, 8);
        for (std::size_t i = 0; i < 12; ++i)
            for (std::size_t j = 0; j < 8; ++j) {
                double s = 0;
                for (std::size_t k = 0; k < 3; ++k)
                    s += w(i, k) * basis(k, j);
                rec(i, j) = s;
            }
        const double err = frob(rec, x);
        CHECK(err <= prev + 1e-9);
        prev = err;
    }
}
