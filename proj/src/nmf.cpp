#include <algorithm>
#include <cmath>

#include "xrumap/baselines.hpp"
#include "xrumap/errors.hpp"
#include "xrumap/rng.hpp"

namespace xrumap {

namespace {

constexpr double kDenomEps = 1e-12;
constexpr double kRelStopTol = 1e-6;

double frobenius_error(const Matrix& x, const Matrix& w, const Matrix& b) {
    double err = 0.0;
    const std::size_t n = x.rows(), c = x.cols(), d = w.cols();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            double rec = 0.0;
            for (std::size_t k = 0; k < d; ++k) rec += w(i, k) * b(k, j);
            const double diff = x(i, j) - rec;
            err += diff * diff;
        }
    return std::sqrt(err);
}

// A * B^T for row-major matrices with matching inner dimension.
Matrix mul_abt(const Matrix& a, const Matrix& bt) {
    Matrix out(a.rows(), bt.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < bt.rows(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * bt(j, k);
            out(i, j) = s;
        }
    return out;
}

Matrix mul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j)
                out(i, j) += aik * b(k, j);
        }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

void check_non_negative(const Matrix& x, const char* who) {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x.data()[i];
        if (!std::isfinite(v) || v < 0.0)
            throw DataError(std::string(who) +
                            ": input must be finite and non-negative");
        sum += v;
    }
    if (sum == 0.0)
        throw DataError(std::string(who) + ": input matrix is all zeros");
}

// W <- W * (X B^T) / (W B B^T), elementwise with epsilon-guarded division.
void update_weights(Matrix& w, const Matrix& x, const Matrix& basis) {
    const Matrix num = mul_abt(x, basis);           // N x D
    const Matrix bbt = mul_abt(basis, basis);       // D x D
    const Matrix den = mul(w, bbt);                 // N x D
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t k = 0; k < w.cols(); ++k)
            w(i, k) *= num(i, k) / (den(i, k) + kDenomEps);
}

}  // namespace

NmfFit nmf_fit(const Matrix& x, std::size_t rank, std::size_t iters,
               std::uint64_t seed) {
    const std::size_t n = x.rows(), c = x.cols();
    if (n == 0 || c == 0) throw DataError("nmf_fit: empty input");
    if (rank < 1 || rank > std::min(n, c))
        throw DataError("nmf_fit: rank must be in [1, min(N, C)]");
    check_non_negative(x, "nmf_fit");

    double mean = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) mean += x.data()[i];
    mean /= static_cast<double>(x.size());
    const double init_scale = mean / static_cast<double>(rank);

    Rng rng(seed);
    Matrix w(n, rank), basis(rank, c);
    for (std::size_t i = 0; i < w.size(); ++i)
        w.data()[i] = (1.0 - rng.uniform()) * init_scale;
    for (std::size_t i = 0; i < basis.size(); ++i)
        basis.data()[i] = (1.0 - rng.uniform()) * init_scale;

    NmfFit fit;
    fit.model.rank = rank;
    double prev_err = frobenius_error(x, w, basis);
    fit.model.error_trace.push_back(prev_err);

    for (std::size_t it = 0; it < iters; ++it) {
        // B <- B * (W^T X) / (W^T W B)
        {
            const Matrix wt = transpose(w);
            const Matrix num = mul(wt, x);           // D x C
            const Matrix wtw = mul(wt, w);           // D x D
            const Matrix den = mul(wtw, basis);      // D x C
            for (std::size_t k = 0; k < rank; ++k)
                for (std::size_t j = 0; j < c; ++j)
                    basis(k, j) *= num(k, j) / (den(k, j) + kDenomEps);
        }
        update_weights(w, x, basis);

        const double err = frobenius_error(x, w, basis);
        fit.model.error_trace.push_back(err);
        const bool converged =
            prev_err > 0.0 && (prev_err - err) / prev_err < kRelStopTol;
        prev_err = err;
        if (converged) break;
    }

    fit.model.basis = std::move(basis);
    fit.model.reconstruction_error = prev_err;
    fit.weights = std::move(w);
    return fit;
}

Matrix nmf_transform(const NmfModel& model, const Matrix& x,
                     std::size_t iters) {
    if (x.cols() != model.basis.cols())
        throw DataError("nmf_transform: column count does not match basis");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x.data()[i]) || x.data()[i] < 0.0)
            throw DataError("nmf_transform: input must be non-negative");

    // Deterministic flat init; rows of zeros collapse to zero weights after
    // the first multiplicative update.
    double mean = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) mean += x.data()[i];
    mean /= std::max<std::size_t>(1, x.size());
    const double init = std::max(mean, 1e-3) / static_cast<double>(model.rank);

    Matrix w(x.rows(), model.rank, init);
    for (std::size_t it = 0; it < iters; ++it)
        update_weights(w, x, model.basis);
    return w;
}

}  // namespace xrumap
