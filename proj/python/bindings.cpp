#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xrumap/baselines.hpp"
#include "xrumap/errors.hpp"
#include "xrumap/eval.hpp"
#include "xrumap/hypercube.hpp"
#include "xrumap/manifold.hpp"
#include "xrumap/metrics.hpp"
#include "xrumap/parametric.hpp"
#include "xrumap/synth.hpp"

namespace py = pybind11;
using namespace xrumap;

namespace {

HyperCube cube_from_array(const py::array_t<float>& arr, bool transmittance) {
    const auto buf = arr.request();
    if (buf.ndim != 3)
        throw DataError("cube array must have shape [H, W, C]");
    HyperCube cube(buf.shape[0], buf.shape[1], buf.shape[2], 0.0f,
                   transmittance);
    const auto view = arr.unchecked<3>();
    for (std::size_t h = 0; h < cube.height; ++h)
        for (std::size_t w = 0; w < cube.width; ++w)
            for (std::size_t c = 0; c < cube.bands; ++c)
                cube.at(h, w, c) = view(h, w, c);
    validate(cube);
    return cube;
}

py::array_t<float> cube_to_array(const HyperCube& cube) {
    py::array_t<float> arr({cube.height, cube.width, cube.bands});
    auto view = arr.mutable_unchecked<3>();
    for (std::size_t h = 0; h < cube.height; ++h)
        for (std::size_t w = 0; w < cube.width; ++w)
            for (std::size_t c = 0; c < cube.bands; ++c)
                view(h, w, c) = cube.at(h, w, c);
    return arr;
}

Matrix matrix_from_array(const py::array_t<double>& arr) {
    const auto buf = arr.request();
    if (buf.ndim != 2) throw DataError("expected a 2-D array");
    Matrix m(buf.shape[0], buf.shape[1]);
    const auto view = arr.unchecked<2>();
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = view(i, j);
    return m;
}

py::array_t<double> matrix_to_array(const Matrix& m) {
    py::array_t<double> arr({m.rows(), m.cols()});
    auto view = arr.mutable_unchecked<2>();
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) view(i, j) = m(i, j);
    return arr;
}

std::vector<double> vec_from_array(const py::array_t<double>& arr) {
    const auto buf = arr.request();
    if (buf.ndim != 1) throw DataError("expected a 1-D array");
    std::vector<double> v(buf.shape[0]);
    const auto view = arr.unchecked<1>();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = view(i);
    return v;
}

MaskPair mask_pair(const py::array_t<std::uint8_t>& predicted,
                   const py::array_t<std::uint8_t>& reference) {
    const auto bp = predicted.request();
    const auto br = reference.request();
    if (bp.ndim != 2 || br.ndim != 2)
        throw DataError("masks must be 2-D arrays");
    MaskPair pair;
    pair.height = bp.shape[0];
    pair.width = bp.shape[1];
    const auto vp = predicted.unchecked<2>();
    const auto vr = reference.unchecked<2>();
    pair.predicted.resize(pair.height * pair.width);
    pair.reference.resize(pair.height * pair.width);
    for (std::size_t h = 0; h < pair.height; ++h)
        for (std::size_t w = 0; w < pair.width; ++w) {
            pair.predicted[h * pair.width + w] = vp(h, w);
            pair.reference[h * pair.width + w] = vr(h, w);
        }
    return pair;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Hyperspectral XRT dimensionality-reduction toolkit core";

    py::register_exception<ConfigError>(m, "XrConfigError");
    py::register_exception<DataError>(m, "XrDataError");
    py::register_exception<NumericalError>(m, "XrNumericalError");

    // Cube operations; arrays are [H, W, C] float32.
    m.def(
        "load_cube",
        [](const std::string& path) {
            const HyperCube cube = load_cube(path);
            return py::make_tuple(cube_to_array(cube), cube.transmittance);
        },
        py::arg("path"));
    m.def(
        "save_cube",
        [](const py::array_t<float>& arr, const std::string& path,
           bool transmittance) {
            save_cube(cube_from_array(arr, transmittance), path);
        },
        py::arg("cube"), py::arg("path"), py::arg("transmittance") = false);
    m.def(
        "white_normalize",
        [](const py::array_t<float>& cube, const py::array_t<double>& ref) {
            const auto buf = ref.request();
            if (buf.ndim != 2)
                throw DataError("white reference must be [W, C]");
            WhiteReference white(buf.shape[0], buf.shape[1]);
            const auto view = ref.unchecked<2>();
            for (std::size_t w = 0; w < white.width; ++w)
                for (std::size_t c = 0; c < white.bands; ++c)
                    white.at(w, c) = static_cast<float>(view(w, c));
            std::size_t clamped = 0;
            const HyperCube out = white_normalize(
                cube_from_array(cube, false), white, &clamped);
            return py::make_tuple(cube_to_array(out), clamped);
        },
        py::arg("cube"), py::arg("reference"));
    m.def(
        "fuse_beer_lambert",
        [](const py::array_t<float>& a, const py::array_t<float>& b) {
            return cube_to_array(fuse_beer_lambert(cube_from_array(a, true),
                                                   cube_from_array(b, true)));
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "avg_pool2d",
        [](const py::array_t<float>& cube, std::size_t out_h,
           std::size_t out_w, bool transmittance) {
            return cube_to_array(avg_pool2d(
                cube_from_array(cube, transmittance), out_h, out_w));
        },
        py::arg("cube"), py::arg("out_h"), py::arg("out_w"),
        py::arg("transmittance") = false);
    m.def(
        "flatten_pixels",
        [](const py::array_t<float>& cube) {
            return matrix_to_array(
                flatten_pixels(cube_from_array(cube, false)));
        },
        py::arg("cube"));

    // Linear baselines.
    py::class_<PcaModel>(m, "PcaModel")
        .def_property_readonly(
            "explained_variance_ratio",
            [](const PcaModel& model) {
                return py::array_t<double>(
                    model.explained_variance_ratio.size(),
                    model.explained_variance_ratio.data());
            })
        .def_property_readonly(
            "components",
            [](const PcaModel& model) {
                return matrix_to_array(model.components);
            })
        .def("transform",
             [](const PcaModel& model, const py::array_t<double>& x) {
                 return matrix_to_array(
                     pca_transform(model, matrix_from_array(x)));
             })
        .def("inverse",
             [](const PcaModel& model, const py::array_t<double>& y) {
                 return matrix_to_array(
                     pca_inverse(model, matrix_from_array(y)));
             });
    m.def(
        "pca_fit",
        [](const py::array_t<double>& x, std::size_t dims,
           bool unit_variance) {
            return pca_fit(matrix_from_array(x), dims, unit_variance);
        },
        py::arg("x"), py::arg("dims"), py::arg("unit_variance") = false);

    py::class_<NmfModel>(m, "NmfModel")
        .def_property_readonly(
            "basis",
            [](const NmfModel& model) { return matrix_to_array(model.basis); })
        .def_readonly("reconstruction_error", &NmfModel::reconstruction_error)
        .def("transform",
             [](const NmfModel& model, const py::array_t<double>& x,
                std::size_t iters) {
                 return matrix_to_array(
                     nmf_transform(model, matrix_from_array(x), iters));
             },
             py::arg("x"), py::arg("iters") = 200);
    m.def(
        "nmf_fit",
        [](const py::array_t<double>& x, std::size_t rank, std::size_t iters,
           std::uint64_t seed) {
            NmfFit fit = nmf_fit(matrix_from_array(x), rank, iters, seed);
            return py::make_tuple(fit.model, matrix_to_array(fit.weights));
        },
        py::arg("x"), py::arg("rank"), py::arg("iters") = 200,
        py::arg("seed") = 0);

    // UMAP.
    py::class_<UmapModel>(m, "UmapModel")
        .def_property_readonly(
            "embedding",
            [](const UmapModel& model) {
                return matrix_to_array(model.embedding);
            })
        .def_property_readonly("curve",
                               [](const UmapModel& model) {
                                   return py::make_tuple(model.curve_a,
                                                         model.curve_b);
                               })
        .def("transform",
             [](const UmapModel& model, const py::array_t<double>& x,
                int refine_epochs, std::uint64_t seed) {
                 return matrix_to_array(umap_transform(
                     model, matrix_from_array(x), refine_epochs, seed));
             },
             py::arg("x"), py::arg("refine_epochs") = 0, py::arg("seed") = 0);
    m.def(
        "umap_fit",
        [](const py::array_t<double>& x, int n_neighbors, double min_dist,
           double spread, int target_dim, int n_epochs, double learning_rate,
           int negative_sample_rate, std::uint64_t seed,
           const std::string& init) {
            UmapParams params;
            params.n_neighbors = n_neighbors;
            params.min_dist = min_dist;
            params.spread = spread;
            params.target_dim = target_dim;
            params.n_epochs = n_epochs;
            params.learning_rate = learning_rate;
            params.negative_sample_rate = negative_sample_rate;
            params.seed = seed;
            params.init = init;
            return umap_fit(matrix_from_array(x), params);
        },
        py::arg("x"), py::arg("n_neighbors") = 15, py::arg("min_dist") = 0.1,
        py::arg("spread") = 1.0, py::arg("target_dim") = 2,
        py::arg("n_epochs") = 200, py::arg("learning_rate") = 1.0,
        py::arg("negative_sample_rate") = 5, py::arg("seed") = 0,
        py::arg("init") = "spectral");

    // Parametric encoder.
    py::class_<EncoderNet>(m, "EncoderNet")
        .def("forward", [](const EncoderNet& net, const py::array_t<double>& x) {
            return matrix_to_array(encoder_forward(net, matrix_from_array(x)));
        });
    m.def(
        "train_parametric",
        [](const py::array_t<double>& x, int n_neighbors,
           std::size_t target_dim, std::vector<std::size_t> hidden,
           std::size_t epochs, std::size_t batch_edges, double step_size,
           int negative_sample_rate, double min_dist, double spread,
           std::uint64_t seed) {
            const Matrix data = matrix_from_array(x);
            NeighborGraph graph = knn_graph(data, n_neighbors);
            calibrate_bandwidths(graph, n_neighbors);
            const FuzzySet fs = fuzzy_simplicial_set(graph);
            const auto [a, b] = fit_curve(min_dist, spread);
            TrainConfig cfg;
            cfg.batch_edges = batch_edges;
            cfg.epochs = epochs;
            cfg.step_size = step_size;
            cfg.negative_sample_rate = negative_sample_rate;
            cfg.seed = seed;
            cfg.target_dim = target_dim;
            cfg.hidden = std::move(hidden);
            TrainResult result = train_parametric(data, fs, cfg, a, b);
            return py::make_tuple(result.net, result.batch_loss);
        },
        py::arg("x"), py::arg("n_neighbors") = 15, py::arg("target_dim") = 2,
        py::arg("hidden") = std::vector<std::size_t>{64, 64},
        py::arg("epochs") = 50, py::arg("batch_edges") = 256,
        py::arg("step_size") = 1e-3, py::arg("negative_sample_rate") = 5,
        py::arg("min_dist") = 0.1, py::arg("spread") = 1.0,
        py::arg("seed") = 0);

    // Metrics.
    m.def(
        "s_score",
        [](const py::array_t<double>& p, const py::array_t<double>& t) {
            return s_score(vec_from_array(p), vec_from_array(t));
        },
        py::arg("predictions"), py::arg("targets"));
    m.def(
        "sh_score",
        [](const py::array_t<double>& s) { return sh_score(vec_from_array(s)); },
        py::arg("scores"));
    m.def(
        "iou",
        [](const py::array_t<std::uint8_t>& predicted,
           const py::array_t<std::uint8_t>& reference) {
            return iou(mask_pair(predicted, reference));
        },
        py::arg("predicted"), py::arg("reference"));
    m.def(
        "dice",
        [](const py::array_t<std::uint8_t>& predicted,
           const py::array_t<std::uint8_t>& reference) {
            return dice(mask_pair(predicted, reference));
        },
        py::arg("predicted"), py::arg("reference"));
    m.def(
        "mutual_information",
        [](const py::array_t<double>& feature, const std::vector<int>& labels,
           int bins, bool quantile) {
            return mutual_information(vec_from_array(feature), labels, bins,
                                      quantile);
        },
        py::arg("feature"), py::arg("labels"), py::arg("bins") = 32,
        py::arg("quantile") = false);
    m.def(
        "trustworthiness",
        [](const py::array_t<double>& x_high, const py::array_t<double>& y_low,
           int k) {
            return trustworthiness(matrix_from_array(x_high),
                                   matrix_from_array(y_low), k);
        },
        py::arg("x_high"), py::arg("y_low"), py::arg("k"));

    // Synthetic benchmark generation.
    m.def(
        "synth_dataset",
        [](const std::string& out_dir, const std::string& task,
           std::size_t n_train, std::size_t n_test, std::size_t height,
           std::size_t width, std::size_t bands, double photons,
           double insert_prob, std::uint64_t seed) {
            SynthParams params;
            params.task = task;
            params.n_train = n_train;
            params.n_test = n_test;
            params.height = height;
            params.width = width;
            params.bands = bands;
            params.photons = photons;
            params.insert_prob = insert_prob;
            params.seed = seed;
            write_dataset(synth_dataset(params), out_dir);
        },
        py::arg("out_dir"), py::arg("task") = "segmentation",
        py::arg("n_train") = 20, py::arg("n_test") = 6, py::arg("height") = 24,
        py::arg("width") = 24, py::arg("bands") = 16,
        py::arg("photons") = 2500.0, py::arg("insert_prob") = 0.75,
        py::arg("seed") = 0);
}
