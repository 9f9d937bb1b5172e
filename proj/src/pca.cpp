#include <algorithm>
#include <cmath>
#include <numeric>

#include "xrumap/baselines.hpp"
#include "xrumap/errors.hpp"

namespace xrumap {

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns eigenvalues
// in `eigvals` and eigenvectors as columns of `vecs`. Adequate for the band
// counts this project sees (C up to a few hundred).
void jacobi_eigen(Matrix a, std::vector<double>& eigvals, Matrix& vecs) {
    const std::size_t n = a.rows();
    vecs = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) vecs(i, i) = 1.0;

    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) norm += a(i, j) * a(i, j);
    norm = std::sqrt(norm);
    const double tol = std::max(1e-300, norm * 1e-14);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (std::sqrt(2.0 * off) < tol) break;

        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < tol * 1e-3) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) +
                                  std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = vecs(i, p), viq = vecs(i, q);
                    vecs(i, p) = c * vip - s * viq;
                    vecs(i, q) = s * vip + c * viq;
                }
            }
    }

    eigvals.resize(n);
    for (std::size_t i = 0; i < n; ++i) eigvals[i] = a(i, i);
}

void check_finite(const Matrix& x, const char* who) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x.data()[i]))
            throw DataError(std::string(who) + ": non-finite input value");
}

}  // namespace

PcaModel pca_fit(const Matrix& x, std::size_t dim, bool unit_variance) {
    const std::size_t n = x.rows(), c = x.cols();
    if (n < 2) throw DataError("pca_fit: need at least 2 samples");
    if (dim < 1 || dim > std::min(n, c))
        throw DataError("pca_fit: dim must be in [1, min(N, C)]");
    check_finite(x, "pca_fit");

    PcaModel model;
    model.standardized = unit_variance;
    model.mean.assign(c, 0.0);
    model.scale.assign(c, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) model.mean[j] += x(i, j);
    for (std::size_t j = 0; j < c; ++j) model.mean[j] /= static_cast<double>(n);

    if (unit_variance) {
        std::vector<double> var(c, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                const double d = x(i, j) - model.mean[j];
                var[j] += d * d;
            }
        for (std::size_t j = 0; j < c; ++j) {
            const double sd = std::sqrt(var[j] / static_cast<double>(n - 1));
            model.scale[j] = sd > 1e-12 ? sd : 1.0;
        }
    }

    // Covariance of the centered (and possibly scaled) data, C x C.
    Matrix cov(c, c);
    {
        Matrix centered(n, c);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j)
                centered(i, j) = (x(i, j) - model.mean[j]) / model.scale[j];
        const double inv = 1.0 / static_cast<double>(n - 1);
        for (std::size_t a = 0; a < c; ++a)
            for (std::size_t b = a; b < c; ++b) {
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    s += centered(i, a) * centered(i, b);
                cov(a, b) = cov(b, a) = s * inv;
            }
    }

    std::vector<double> eigvals;
    Matrix vecs;
    jacobi_eigen(cov, eigvals, vecs);

    std::vector<std::size_t> order(c);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (eigvals[a] != eigvals[b]) return eigvals[a] > eigvals[b];
        return a < b;
    });

    double total = 0.0;
    for (double v : eigvals) total += std::max(v, 0.0);
    if (total <= 0.0) total = 1.0;

    model.components = Matrix(dim, c);
    model.explained_variance_ratio.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        const std::size_t src = order[d];
        double max_abs = 0.0;
        double sign = 1.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double v = vecs(j, src);
            if (std::abs(v) > max_abs) {
                max_abs = std::abs(v);
                sign = v >= 0.0 ? 1.0 : -1.0;
            }
        }
        for (std::size_t j = 0; j < c; ++j)
            model.components(d, j) = sign * vecs(j, src);
        model.explained_variance_ratio[d] =
            std::max(eigvals[src], 0.0) / total;
    }
    return model;
}

Matrix pca_transform(const PcaModel& model, const Matrix& x) {
    const std::size_t c = model.mean.size();
    if (x.cols() != c)
        throw DataError("pca_transform: column count does not match model");
    const std::size_t d = model.components.rows();
    Matrix out(x.rows(), d);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t k = 0; k < d; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < c; ++j)
                s += (x(i, j) - model.mean[j]) / model.scale[j] *
                     model.components(k, j);
            out(i, k) = s;
        }
    return out;
}

Matrix pca_inverse(const PcaModel& model, const Matrix& y) {
    const std::size_t d = model.components.rows();
    const std::size_t c = model.mean.size();
    if (y.cols() != d)
        throw DataError("pca_inverse: column count does not match model");
    Matrix out(y.rows(), c);
    for (std::size_t i = 0; i < y.rows(); ++i)
        for (std::size_t j = 0; j < c; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k)
                s += y(i, k) * model.components(k, j);
            out(i, j) = s * model.scale[j] + model.mean[j];
        }
    return out;
}

}  // namespace xrumap
