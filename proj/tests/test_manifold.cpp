#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "xrumap/errors.hpp"
#include "xrumap/manifold.hpp"
#include "xrumap/rng.hpp"

using namespace xrumap;

namespace {

Matrix two_clusters(std::size_t per_cluster, std::size_t dims, double gap,
                    std::uint64_t seed) {
    Rng rng(seed);
    Matrix x(2 * per_cluster, dims);
    for (std::size_t i = 0; i < 2 * per_cluster; ++i) {
        const double center = i < per_cluster ? 0.0 : gap;
        for (std::size_t c = 0; c < dims; ++c)
            x(i, c) = center + 0.5 * rng.normal();
    }
    return x;
}

}  // namespace

TEST_CASE("knn: colinear points at 0, 1, 3") {
    Matrix x(3, 1);
    x(0, 0) = 0.0;
    x(1, 0) = 1.0;
    x(2, 0) = 3.0;
    const NeighborGraph g = knn_graph(x, 2);
    CHECK(g.index(0, 0) == 1);
    CHECK(g.index(0, 1) == 2);
    CHECK(g.distance(0, 0) == doctest::Approx(1.0));
    CHECK(g.distance(0, 1) == doctest::Approx(3.0));
    CHECK(g.index(1, 0) == 0);  // tie with point 2 broken by lower index
    CHECK(g.distance(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("knn: duplicated points give zero distances but no self-index") {
    Matrix x(4, 2);
    x(0, 0) = 1.0;
    x(1, 0) = 1.0;  // duplicate of point 0
    x(2, 0) = 5.0;
    x(3, 0) = 5.0;  // duplicate of point 2
    const NeighborGraph g = knn_graph(x, 2);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t m = 0; m < 2; ++m)
            CHECK(g.index(i, m) != i);
    CHECK(g.distance(0, 0) == 0.0);
    CHECK(g.index(0, 0) == 1);
    CHECK(g.distance(2, 0) == 0.0);
    CHECK(g.index(2, 0) == 3);
}

TEST_CASE("knn matches an independent full-sort scan") {
    Rng rng(300);
    const std::size_t n = 200;
    Matrix x(n, 8);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    const int k = 9;
    const NeighborGraph g = knn_graph(x, k);

    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, std::size_t>> all;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double s = 0;
            for (std::size_t c = 0; c < 8; ++c) {
                const double d = x(i, c) - x(j, c);
                s += d * d;
            }
            all.emplace_back(std::sqrt(s), j);
        }
        std::sort(all.begin(), all.end());
        for (int m = 0; m < k; ++m) {
            CHECK(g.index(i, m) == all[m].second);
            CHECK(g.distance(i, m) == doctest::Approx(all[m].first));
        }
    }
}

TEST_CASE("knn output is identical across thread counts") {
    Rng rng(301);
    Matrix x(300, 4);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    const NeighborGraph a = knn_graph(x, 5, 1);
    const NeighborGraph b = knn_graph(x, 5, 4);
    CHECK(a.indices == b.indices);
    CHECK(a.distances == b.distances);
}

TEST_CASE("knn rejects k >= N and non-finite rows") {
    Matrix x(3, 1);
    CHECK_THROWS_AS(knn_graph(x, 3), DataError);
    Matrix y(5, 1);
    y(2, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(knn_graph(y, 2), DataError);
}

TEST_CASE("calibrate: distances 1..4 match the bisection oracle") {
    NeighborGraph g;
    g.n = 1;
    g.k = 4;
    g.indices = {1, 2, 3, 4};
    g.distances = {1.0, 2.0, 3.0, 4.0};
    calibrate_bandwidths(g, 4);
    CHECK(g.rho[0] == doctest::Approx(1.0));
    // Independent scalar bisection on exp(0)+exp(-1/s)+exp(-2/s)+exp(-3/s)=2.
    CHECK(g.sigma[0] == doctest::Approx(1.6410179299).epsilon(1e-4));
}

TEST_CASE("calibrate: equal distances force the sigma floor") {
    NeighborGraph g;
    g.n = 1;
    g.k = 3;
    g.indices = {1, 2, 3};
    g.distances = {0.7, 0.7, 0.7};
    calibrate_bandwidths(g, 3);
    CHECK(g.rho[0] == doctest::Approx(0.7));
    CHECK(g.sigma[0] == kMinSigma);
}

TEST_CASE("calibrate: defining-equation residual below 1e-3") {
    Rng rng(302);
    Matrix x(150, 6);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    const int k = 10;
    NeighborGraph g = knn_graph(x, k);
    calibrate_bandwidths(g, k);
    const double target = std::log2(static_cast<double>(k));
    for (std::size_t i = 0; i < g.n; ++i) {
        if (g.sigma[i] <= kMinSigma || g.sigma[i] >= kMaxSigma) continue;
        double sum = 0;
        for (std::size_t m = 0; m < g.k; ++m) {
            const double d = g.distance(i, m) - g.rho[i];
            sum += d > 0 ? std::exp(-d / g.sigma[i]) : 1.0;
        }
        CHECK(std::abs(sum - target) < 1e-3);
    }
}

TEST_CASE("fuzzy: nearest neighbor carries directed weight exactly 1") {
    Rng rng(303);
    Matrix x(80, 5);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    NeighborGraph g = knn_graph(x, 6);
    calibrate_bandwidths(g, 6);
    const FuzzySet fs = fuzzy_simplicial_set(g);

    // Every point's nearest neighbor pair must appear with weight 1: the
    // t-conorm of 1 with anything is 1.
    for (std::size_t i = 0; i < g.n; ++i) {
        const std::uint32_t nn = g.index(i, 0);
        const std::uint32_t lo = std::min<std::uint32_t>(i, nn);
        const std::uint32_t hi = std::max<std::uint32_t>(i, nn);
        bool found = false;
        for (const FuzzyEdge& e : fs.edges)
            if (e.i == lo && e.j == hi) {
                CHECK(e.weight == 1.0);
                found = true;
                break;
            }
        CHECK(found);
    }
}

TEST_CASE("fuzzy: t-conorm arithmetic on a hand-built graph") {
    // Point 0 lists 1 at d == rho (weight 1) and 2 at a tuned distance
    // (weight 0.5); points 1 and 2 list each other, not 0, so the reverse
    // directions contribute 0.
    NeighborGraph g;
    g.n = 3;
    g.k = 2;
    g.indices = {1, 2, 2, 2, 1, 1};
    g.rho = {1.0, 1.0, 1.0};
    g.sigma = {1.0, 1.0, 1.0};
    const double d_half = 1.0 + std::log(2.0);  // exp(-(d - rho)) = 0.5
    g.distances = {1.0, d_half, 1.0, 1.0, 1.0, 1.0};
    const FuzzySet fs = fuzzy_simplicial_set(g);

    // (0,1): directed 1.0 and 0.0 -> 1.0. (0,2): 0.5 and 0.0 -> 0.5.
    // (1,2): both directions at weight 1 -> 1 + 1 - 1 = 1.
    REQUIRE(fs.edges.size() == 3);
    CHECK(fs.edges[0].i == 0);
    CHECK(fs.edges[0].j == 1);
    CHECK(fs.edges[0].weight == doctest::Approx(1.0));
    CHECK(fs.edges[1].i == 0);
    CHECK(fs.edges[1].j == 2);
    CHECK(fs.edges[1].weight == doctest::Approx(0.5));
    CHECK(fs.edges[2].i == 1);
    CHECK(fs.edges[2].j == 2);
    CHECK(fs.edges[2].weight == doctest::Approx(1.0));
}

TEST_CASE("fuzzy: 0.5/0.5 directed pair symmetrizes to 0.75") {
    // Two points listing each other at the tuned distance.
    NeighborGraph g;
    g.n = 4;
    g.k = 2;
    const double d_half = 1.0 + std::log(2.0);
    g.indices = {1, 2, 0, 3, 0, 3, 1, 2};
    g.distances = {d_half, 99.0, d_half, 99.0, 99.0, 99.0, 99.0, 99.0};
    g.rho = {1.0, 1.0, 1.0, 1.0};
    g.sigma = {1.0, 1.0, 1.0, 1.0};
    const FuzzySet fs = fuzzy_simplicial_set(g);
    for (const FuzzyEdge& e : fs.edges)
        if (e.i == 0 && e.j == 1)
            CHECK(e.weight == doctest::Approx(0.75));
}

TEST_CASE("fuzzy set matches the dense t-conorm oracle") {
    Rng rng(304);
    const std::size_t n = 120;
    Matrix x(n, 4);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    const int k = 6;
    NeighborGraph g = knn_graph(x, k);
    calibrate_bandwidths(g, k);
    const FuzzySet fs = fuzzy_simplicial_set(g);

    std::vector<double> dense(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t m = 0; m < g.k; ++m) {
            const double d = g.distance(i, m) - g.rho[i];
            dense[i * n + g.index(i, m)] =
                d > 0 ? std::exp(-d / g.sigma[i]) : 1.0;
        }
    std::vector<double> sym(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            sym[i * n + j] = dense[i * n + j] + dense[j * n + i] -
                             dense[i * n + j] * dense[j * n + i];

    // Exact symmetry of the oracle and agreement edge by edge.
    std::size_t checked = 0;
    for (const FuzzyEdge& e : fs.edges) {
        CHECK(e.i < e.j);
        CHECK(e.weight > 0.0);
        CHECK(e.weight <= 1.0);
        CHECK(e.weight == doctest::Approx(sym[e.i * n + e.j]).epsilon(1e-7));
        ++checked;
    }
    CHECK(checked == fs.edges.size());
    std::size_t expected_edges = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (sym[i * n + j] > 1e-9) ++expected_edges;
    CHECK(fs.edges.size() == expected_edges);
}

TEST_CASE("fit_curve: default setting matches the frozen least-squares oracle") {
    const auto [a, b] = fit_curve(0.1, 1.0);
    CHECK(a == doctest::Approx(1.5769434603).epsilon(0.05));
    CHECK(b == doctest::Approx(0.8950608779).epsilon(0.05));
}

TEST_CASE("fit_curve: min_dist 0.5 (the Stones setting)") {
    const auto [a, b] = fit_curve(0.5, 1.0);
    CHECK(a == doctest::Approx(0.5830300203).epsilon(0.05));
    CHECK(b == doctest::Approx(1.3341669924).epsilon(0.05));
}

TEST_CASE("fit_curve: fitted curve tracks the target at defaults") {
    const auto [a, b] = fit_curve(0.1, 1.0);
    double max_err = 0.0;
    for (int i = 0; i < 300; ++i) {
        const double d = 3.0 * i / 299.0;
        const double target =
            d < 0.1 ? 1.0 : std::exp(-(d - 0.1) / 1.0);
        const double f = 1.0 / (1.0 + a * std::pow(d, 2.0 * b));
        max_err = std::max(max_err, std::abs(f - target));
    }
    CHECK(max_err < 0.08);
}

TEST_CASE("fit_curve rejects invalid ranges") {
    CHECK_THROWS_AS(fit_curve(3.5, 1.0), DataError);
    CHECK_THROWS_AS(fit_curve(-0.1, 1.0), DataError);
    CHECK_THROWS_AS(fit_curve(0.1, 0.0), DataError);
}

namespace {

FuzzySet two_cliques(std::size_t size_a, std::size_t size_b) {
    FuzzySet fs;
    fs.n = size_a + size_b;
    for (std::size_t i = 0; i < size_a; ++i)
        for (std::size_t j = i + 1; j < size_a; ++j)
            fs.edges.push_back({static_cast<std::uint32_t>(i),
                                static_cast<std::uint32_t>(j), 1.0});
    for (std::size_t i = size_a; i < fs.n; ++i)
        for (std::size_t j = i + 1; j < fs.n; ++j)
            fs.edges.push_back({static_cast<std::uint32_t>(i),
                                static_cast<std::uint32_t>(j), 1.0});
    return fs;
}

}  // namespace

TEST_CASE("init: random mode is deterministic and in range") {
    const FuzzySet fs = two_cliques(5, 5);
    const Matrix a = initialize_embedding(fs, 3, 9, InitMode::Random);
    const Matrix b = initialize_embedding(fs, 3, 9, InitMode::Random);
    CHECK(a == b);
    CHECK(a.rows() == 10);
    CHECK(a.cols() == 3);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.data()[i] >= -10.0);
        CHECK(a.data()[i] <= 10.0);
    }
}

TEST_CASE("init: spectral separates two cliques by sign") {
    const FuzzySet fs = two_cliques(7, 6);
    InitInfo info;
    const Matrix coords =
        initialize_embedding(fs, 2, 11, InitMode::Spectral, &info);
    CHECK(info.spectral_ok);
    CHECK(info.graph_components == 2);
    // All of clique A on one side of zero in coordinate 0, clique B on the
    // other.
    const double sign_a = coords(0, 0) > 0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < 7; ++i)
        CHECK(coords(i, 0) * sign_a > 0.0);
    for (std::size_t i = 7; i < 13; ++i)
        CHECK(coords(i, 0) * sign_a < 0.0);
}

TEST_CASE("init: many components fall back to random with a warning") {
    FuzzySet fs;
    fs.n = 24;  // 12 disjoint pairs
    for (std::uint32_t i = 0; i < 24; i += 2)
        fs.edges.push_back({i, i + 1u, 1.0});
    InitInfo info;
    const Matrix coords =
        initialize_embedding(fs, 2, 3, InitMode::Spectral, &info);
    CHECK_FALSE(info.spectral_ok);
    CHECK(info.graph_components == 12);
    CHECK_FALSE(info.warning.empty());
    CHECK(coords.rows() == 24);
}

TEST_CASE("init: output is finite and correctly shaped") {
    const FuzzySet fs = two_cliques(6, 6);
    const Matrix coords = initialize_embedding(fs, 4, 5, InitMode::Spectral);
    CHECK(coords.rows() == 12);
    CHECK(coords.cols() == 4);
    for (std::size_t i = 0; i < coords.size(); ++i)
        CHECK(std::isfinite(coords.data()[i]));
}

TEST_CASE("optimize: zero epochs leave coordinates unchanged") {
    const Matrix x = two_clusters(20, 6, 8.0, 306);
    UmapParams params;
    params.n_neighbors = 5;
    params.n_epochs = 0;
    params.target_dim = 2;
    NeighborGraph g = knn_graph(x, 5);
    calibrate_bandwidths(g, 5);
    const FuzzySet fs = fuzzy_simplicial_set(g);
    const Matrix init = initialize_embedding(fs, 2, 1, InitMode::Random);
    const Embedding emb = optimize_embedding(fs, init, params);
    CHECK(emb.coords == init);
}

TEST_CASE("optimize: two far clusters separate cleanly") {
    const std::size_t per = 50;
    const Matrix x = two_clusters(per, 10, 30.0, 307);
    UmapParams params;
    params.n_neighbors = 10;
    params.target_dim = 2;
    params.n_epochs = 150;
    params.seed = 4;
    const UmapModel model = umap_fit(x, params);
    const Matrix& y = model.embedding;

    double cx[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < 2 * per; ++i) {
        cx[i / per][0] += y(i, 0) / per;
        cx[i / per][1] += y(i, 1) / per;
    }
    double within = 0.0;
    for (std::size_t i = 0; i < 2 * per; ++i) {
        const double dx = y(i, 0) - cx[i / per][0];
        const double dy = y(i, 1) - cx[i / per][1];
        within += dx * dx + dy * dy;
    }
    within = std::sqrt(within / (2 * per));
    const double gap = std::hypot(cx[0][0] - cx[1][0], cx[0][1] - cx[1][1]);
    CHECK(gap > 5.0 * within);
}

TEST_CASE("optimize: smoothed sampled cross-entropy is non-increasing") {
    const Matrix x = two_clusters(60, 8, 10.0, 308);
    UmapParams params;
    params.n_neighbors = 8;
    params.target_dim = 2;
    params.n_epochs = 100;
    params.seed = 12;
    EmbeddingTrace trace;
    const UmapModel model = umap_fit(x, params, &trace);
    REQUIRE(trace.epoch_loss.size() == 100);
    const std::size_t window = 20;
    double prev = 1e300;
    for (std::size_t w0 = 0; w0 + window <= 100; w0 += window) {
        double mean = 0;
        for (std::size_t e = w0; e < w0 + window; ++e)
            mean += trace.epoch_loss[e];
        mean /= window;
        CHECK(mean <= prev + 1e-12);
        prev = mean;
    }
}

TEST_CASE("optimize: identical seed gives bit-identical embeddings") {
    const Matrix x = two_clusters(30, 5, 6.0, 309);
    UmapParams params;
    params.n_neighbors = 6;
    params.target_dim = 2;
    params.n_epochs = 50;
    params.seed = 77;
    const UmapModel a = umap_fit(x, params);
    const UmapModel b = umap_fit(x, params);
    CHECK(a.embedding == b.embedding);
}

TEST_CASE("transform: training duplicate lands on its training coords") {
    const Matrix x = two_clusters(25, 4, 9.0, 310);
    UmapParams params;
    params.n_neighbors = 5;
    params.target_dim = 2;
    params.n_epochs = 60;
    params.seed = 3;
    const UmapModel model = umap_fit(x, params);

    Matrix probe(1, 4);
    for (std::size_t c = 0; c < 4; ++c) probe(0, c) = x(17, c);
    const Matrix y = umap_transform(model, probe);
    CHECK(y(0, 0) == doctest::Approx(model.embedding(17, 0)).epsilon(1e-6));
    CHECK(y(0, 1) == doctest::Approx(model.embedding(17, 1)).epsilon(1e-6));
}

TEST_CASE("transform: midpoint of two isolated points is the coord midpoint") {
    // Two tight pairs far apart; k = 2 so the midpoint probe sees exactly
    // its two equidistant parents with equal membership.
    Matrix x(4, 2);
    x(0, 0) = 0.0;
    x(1, 0) = 1.0;
    x(2, 0) = 40.0;
    x(3, 0) = 41.0;
    UmapParams params;
    params.n_neighbors = 2;
    params.target_dim = 2;
    params.n_epochs = 40;
    params.seed = 6;
    params.init = "random";
    const UmapModel model = umap_fit(x, params);

    Matrix probe(1, 2);
    probe(0, 0) = 0.5;
    const Matrix y = umap_transform(model, probe);
    CHECK(y(0, 0) == doctest::Approx(0.5 * (model.embedding(0, 0) +
                                            model.embedding(1, 0)))
                         .epsilon(1e-9));
    CHECK(y(0, 1) == doctest::Approx(0.5 * (model.embedding(0, 1) +
                                            model.embedding(1, 1)))
                         .epsilon(1e-9));
}

TEST_CASE("transform: batch equals one-at-a-time at zero refine epochs") {
    const Matrix x = two_clusters(20, 3, 7.0, 311);
    UmapParams params;
    params.n_neighbors = 4;
    params.target_dim = 2;
    params.n_epochs = 30;
    params.seed = 8;
    const UmapModel model = umap_fit(x, params);

    Rng rng(312);
    Matrix probes(6, 3);
    for (std::size_t i = 0; i < probes.size(); ++i)
        probes.data()[i] = rng.uniform(-1.0, 8.0);
    const Matrix batch = umap_transform(model, probes);
    for (std::size_t i = 0; i < 6; ++i) {
        Matrix one(1, 3);
        for (std::size_t c = 0; c < 3; ++c) one(0, c) = probes(i, c);
        const Matrix single = umap_transform(model, one);
        for (std::size_t c = 0; c < 2; ++c)
            CHECK(single(0, c) == batch(i, c));
    }
}

TEST_CASE("transform: refinement is deterministic and finite") {
    const Matrix x = two_clusters(25, 4, 9.0, 313);
    UmapParams params;
    params.n_neighbors = 5;
    params.target_dim = 2;
    params.n_epochs = 40;
    params.seed = 14;
    const UmapModel model = umap_fit(x, params);

    Rng rng(314);
    Matrix probes(5, 4);
    for (std::size_t i = 0; i < probes.size(); ++i)
        probes.data()[i] = rng.uniform(-1.0, 10.0);
    const Matrix a = umap_transform(model, probes, 20, 99);
    const Matrix b = umap_transform(model, probes, 20, 99);
    CHECK(a == b);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::isfinite(a.data()[i]));
}

TEST_CASE("transform rejects dimension mismatches") {
    const Matrix x = two_clusters(10, 3, 5.0, 315);
    UmapParams params;
    params.n_neighbors = 3;
    params.target_dim = 2;
    params.n_epochs = 10;
    const UmapModel model = umap_fit(x, params);
    Matrix probe(1, 4);
    CHECK_THROWS_AS(umap_transform(model, probe), DataError);
}
