#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "xrumap/errors.hpp"
#include "xrumap/manifold.hpp"

namespace xrumap {

FuzzySet fuzzy_simplicial_set(const NeighborGraph& graph) {
    if (graph.rho.size() != graph.n || graph.sigma.size() != graph.n)
        throw DataError("fuzzy_simplicial_set: graph is not calibrated");

    // Directed memberships per unordered pair; first = lower-index direction.
    std::unordered_map<std::uint64_t, std::pair<double, double>> pairs;
    pairs.reserve(graph.n * graph.k);
    for (std::size_t i = 0; i < graph.n; ++i) {
        for (std::size_t m = 0; m < graph.k; ++m) {
            const std::uint32_t j = graph.index(i, m);
            const double d = graph.distance(i, m) - graph.rho[i];
            const double w = d > 0.0 ? std::exp(-d / graph.sigma[i]) : 1.0;
            const std::uint64_t a = std::min<std::uint64_t>(i, j);
            const std::uint64_t b = std::max<std::uint64_t>(i, j);
            auto& entry = pairs[(a << 32) | b];
            if (i == a)
                entry.first = w;
            else
                entry.second = w;
        }
    }

    FuzzySet fs;
    fs.n = graph.n;
    fs.edges.reserve(pairs.size());
    for (const auto& [key, w] : pairs) {
        // Probabilistic t-conorm a + b - ab, in the form that is exact at 1.
        const double sym = 1.0 - (1.0 - w.first) * (1.0 - w.second);
        if (sym <= kWeightDropThreshold) continue;
        FuzzyEdge e;
        e.i = static_cast<std::uint32_t>(key >> 32);
        e.j = static_cast<std::uint32_t>(key & 0xffffffffULL);
        e.weight = sym > 1.0 ? 1.0 : sym;
        fs.edges.push_back(e);
    }
    std::sort(fs.edges.begin(), fs.edges.end(),
              [](const FuzzyEdge& a, const FuzzyEdge& b) {
                  if (a.i != b.i) return a.i < b.i;
                  return a.j < b.j;
              });
    return fs;
}

namespace {

struct CurveSamples {
    std::vector<double> d, target;
};

CurveSamples curve_samples(double min_dist, double spread) {
    CurveSamples s;
    const int n = 300;
    s.d.resize(n);
    s.target.resize(n);
    for (int i = 0; i < n; ++i) {
        const double d = 3.0 * spread * static_cast<double>(i) / (n - 1);
        s.d[i] = d;
        s.target[i] =
            d < min_dist ? 1.0 : std::exp(-(d - min_dist) / spread);
    }
    return s;
}

double curve_sse(const CurveSamples& s, double a, double b) {
    double sse = 0.0;
    for (std::size_t i = 0; i < s.d.size(); ++i) {
        const double f = 1.0 / (1.0 + a * std::pow(s.d[i], 2.0 * b));
        const double r = f - s.target[i];
        sse += r * r;
    }
    return sse;
}

}  // namespace

std::pair<double, double> fit_curve(double min_dist, double spread) {
    if (spread <= 0.0) throw DataError("fit_curve: spread must be positive");
    if (min_dist < 0.0 || min_dist >= 3.0 * spread)
        throw DataError("fit_curve: require 0 <= min_dist < 3*spread");

    const CurveSamples s = curve_samples(min_dist, spread);

    // Coarse log-grid, then damped Gauss-Newton refinement.
    double best_a = 1.0, best_b = 1.0;
    double best = curve_sse(s, best_a, best_b);
    for (int ia = 0; ia <= 24; ++ia)
        for (int ib = 0; ib <= 24; ++ib) {
            const double a = std::exp(-4.0 + 8.0 * ia / 24.0);  // [e^-4, e^4]
            const double b = 0.1 + 4.9 * ib / 24.0;
            const double sse = curve_sse(s, a, b);
            if (sse < best) {
                best = sse;
                best_a = a;
                best_b = b;
            }
        }

    double a = best_a, b = best_b;
    double lambda = 1e-3;
    for (int it = 0; it < 200; ++it) {
        double jaa = 0.0, jab = 0.0, jbb = 0.0, ga = 0.0, gb = 0.0;
        for (std::size_t i = 0; i < s.d.size(); ++i) {
            const double d = s.d[i];
            const double p = std::pow(d, 2.0 * b);
            const double den = 1.0 + a * p;
            const double f = 1.0 / den;
            const double r = f - s.target[i];
            const double dfda = -p / (den * den);
            const double dfdb =
                d > 0.0 ? -2.0 * a * p * std::log(d) / (den * den) : 0.0;
            jaa += dfda * dfda;
            jab += dfda * dfdb;
            jbb += dfdb * dfdb;
            ga += dfda * r;
            gb += dfdb * r;
        }
        const double det =
            (jaa + lambda) * (jbb + lambda) - jab * jab;
        if (det == 0.0) break;
        const double da = -((jbb + lambda) * ga - jab * gb) / det;
        const double db = -((jaa + lambda) * gb - jab * ga) / det;
        const double na = std::max(a + da, 1e-8);
        const double nb = std::clamp(b + db, 1e-3, 10.0);
        const double sse = curve_sse(s, na, nb);
        if (sse < best) {
            best = sse;
            a = na;
            b = nb;
            lambda = std::max(lambda * 0.5, 1e-12);
            if (std::abs(da) < 1e-10 && std::abs(db) < 1e-10) break;
        } else {
            lambda *= 4.0;
            if (lambda > 1e12) break;  // keep the best found so far
        }
    }
    return {a, b};
}

}  // namespace xrumap
