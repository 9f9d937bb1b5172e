#include <algorithm>
#include <cmath>
#include <numeric>

#include "xrumap/errors.hpp"
#include "xrumap/manifold.hpp"
#include "xrumap/rng.hpp"

namespace xrumap {

namespace {

std::size_t count_components(const FuzzySet& fs) {
    std::vector<std::uint32_t> parent(fs.n);
    std::iota(parent.begin(), parent.end(), 0);
    const auto find = [&](std::uint32_t v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    };
    for (const FuzzyEdge& e : fs.edges) {
        const auto a = find(e.i), b = find(e.j);
        if (a != b) parent[a] = b;
    }
    std::size_t components = 0;
    for (std::uint32_t v = 0; v < fs.n; ++v)
        if (find(v) == v) ++components;
    return components;
}

Matrix random_init(std::size_t n, std::size_t d, Rng& rng) {
    Matrix coords(n, d);
    for (std::size_t i = 0; i < coords.size(); ++i)
        coords.data()[i] = rng.uniform(-10.0, 10.0);
    return coords;
}

}  // namespace

Matrix initialize_embedding(const FuzzySet& fs, std::size_t d,
                            std::uint64_t seed, InitMode mode,
                            InitInfo* info) {
    if (fs.n == 0 || fs.edges.empty())
        throw DataError("initialize_embedding: empty fuzzy set");
    if (d < 1) throw DataError("initialize_embedding: dimension must be >= 1");

    Rng rng(seed);
    InitInfo local;
    local.graph_components = count_components(fs);

    if (mode == InitMode::Random) {
        if (info) *info = local;
        return random_init(fs.n, d, rng);
    }

    if (local.graph_components > 10) {
        local.warning = "graph has " +
                        std::to_string(local.graph_components) +
                        " components; using random initialization";
        if (info) *info = local;
        return random_init(fs.n, d, rng);
    }

    const std::size_t n = fs.n;
    std::vector<double> degree(n, 0.0);
    for (const FuzzyEdge& e : fs.edges) {
        degree[e.i] += e.weight;
        degree[e.j] += e.weight;
    }
    std::vector<double> inv_sqrt_deg(n);
    for (std::size_t i = 0; i < n; ++i)
        inv_sqrt_deg[i] = degree[i] > 0.0 ? 1.0 / std::sqrt(degree[i]) : 0.0;

    // Operator M = I + D^{-1/2} W D^{-1/2}; its top eigenvectors beyond the
    // trivial sqrt(degree) one are the smallest nontrivial eigenvectors of
    // the symmetric normalized Laplacian.
    const auto apply = [&](const std::vector<double>& x,
                           std::vector<double>& y) {
        std::copy(x.begin(), x.end(), y.begin());
        for (const FuzzyEdge& e : fs.edges) {
            const double w = e.weight * inv_sqrt_deg[e.i] * inv_sqrt_deg[e.j];
            y[e.i] += w * x[e.j];
            y[e.j] += w * x[e.i];
        }
    };

    std::vector<std::vector<double>> basis;
    {
        std::vector<double> v0(n);
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            v0[i] = std::sqrt(std::max(degree[i], 0.0));
            norm += v0[i] * v0[i];
        }
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (double& v : v0) v /= norm;
        basis.push_back(std::move(v0));
    }

    // Budget scales with graph size; the floor keeps small clean graphs
    // (where the linear rate needs a few hundred steps) from a spurious
    // fallback.
    const std::size_t max_iters = std::max<std::size_t>(5 * n, 1000);
    Matrix coords(n, d);
    std::vector<bool> direction_ok(d, false);
    std::size_t n_converged = 0;
    for (std::size_t m = 0; m < d; ++m) {
        std::vector<double> x(n), next(n);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);

        bool converged = false;
        for (std::size_t it = 0; it < max_iters; ++it) {
            apply(x, next);
            for (const auto& b : basis) {
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i) dot += next[i] * b[i];
                for (std::size_t i = 0; i < n; ++i) next[i] -= dot * b[i];
            }
            double norm = 0.0;
            for (double v : next) norm += v * v;
            norm = std::sqrt(norm);
            if (norm < 1e-12) break;  // degenerate direction
            double delta = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                next[i] /= norm;
                delta += (next[i] - x[i]) * (next[i] - x[i]);
            }
            x.swap(next);
            if (std::sqrt(delta) < 1e-6) {
                converged = true;
                break;
            }
        }
        if (!converged) continue;  // this direction falls back to noise
        direction_ok[m] = true;
        ++n_converged;
        for (std::size_t i = 0; i < n; ++i) coords(i, m) = x[i];
        basis.push_back(std::move(x));
    }

    if (n_converged == 0) {
        local.warning = "spectral initialization did not converge; "
                        "using random initialization";
        if (info) *info = local;
        return random_init(fs.n, d, rng);
    }

    // Per-column rescale to stddev 0.1, plus a little noise to break ties.
    // Directions whose eigensolve failed are filled with noise at the same
    // scale so converged coordinates keep the layout.
    const double fill = 0.1 * 1.7320508075688772;  // uniform with stddev 0.1
    for (std::size_t m = 0; m < d; ++m) {
        if (!direction_ok[m]) {
            for (std::size_t i = 0; i < n; ++i)
                coords(i, m) = rng.uniform(-fill, fill);
            continue;
        }
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += coords(i, m);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dv = coords(i, m) - mean;
            var += dv * dv;
        }
        const double sd = std::sqrt(var / static_cast<double>(n));
        const double scale = sd > 1e-12 ? 0.1 / sd : 1.0;
        for (std::size_t i = 0; i < n; ++i)
            coords(i, m) = coords(i, m) * scale + rng.uniform(-1e-4, 1e-4);
    }

    local.spectral_ok = n_converged == d;
    if (n_converged < d)
        local.warning = "spectral initialization converged for " +
                        std::to_string(n_converged) + " of " +
                        std::to_string(d) +
                        " directions; noise fills the rest";
    if (info) *info = local;
    return coords;
}

}  // namespace xrumap
