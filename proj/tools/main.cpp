#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xrumap/baselines.hpp"
#include "xrumap/errors.hpp"
#include "xrumap/eval.hpp"
#include "xrumap/hypercube.hpp"
#include "xrumap/manifold.hpp"
#include "xrumap/metrics.hpp"
#include "xrumap/model_io.hpp"
#include "xrumap/parametric.hpp"
#include "xrumap/rng.hpp"
#include "xrumap/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace xrumap;

namespace {

// Pipeline stages rethrow with their stage name so failures identify the
// step that broke.
template <typename F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError("stage " + std::string(name) + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError("stage " + std::string(name) + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError("stage " + std::string(name) + ": " + e.what());
    }
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

struct PoolTarget {
    std::size_t h = 0, w = 0;  // 0 means no pooling
    bool active() const { return h > 0 && w > 0; }
};

PoolTarget parse_pool(const std::string& text) {
    PoolTarget t;
    if (text.empty() || text == "none") return t;
    const auto x = text.find('x');
    if (x == std::string::npos)
        throw ConfigError("--pool expects HxW, got '" + text + "'");
    t.h = std::stoul(text.substr(0, x));
    t.w = std::stoul(text.substr(x + 1));
    if (t.h == 0 || t.w == 0)
        throw ConfigError("--pool dimensions must be positive");
    return t;
}

// Shared preprocessing: optional white normalization then optional pooling.
HyperCube preprocess(HyperCube cube, const WhiteReference* white,
                     const PoolTarget& pool) {
    if (white)
        cube = stage("normalize",
                     [&] { return white_normalize(cube, *white); });
    if (pool.active())
        cube = stage("pool", [&] { return avg_pool2d(cube, pool.h, pool.w); });
    return cube;
}

HyperCube pool_mask(const HyperCube& mask, const PoolTarget& pool) {
    if (!pool.active()) return mask;
    HyperCube pooled = avg_pool2d(mask, pool.h, pool.w);
    for (float& v : pooled.data) v = v >= 0.5f ? 1.0f : 0.0f;
    return pooled;
}

WhiteReference load_white(const fs::path& path) {
    // White references ride in the cube container with H == 1.
    const HyperCube cube = load_cube(path);
    if (cube.height != 1)
        throw DataError("white reference file must have H == 1");
    WhiteReference ref(cube.width, cube.bands);
    for (std::size_t i = 0; i < ref.data.size(); ++i) {
        ref.data[i] = cube.data[i];
        if (ref.data[i] <= 0.0f)
            throw DataError("white reference values must be positive");
    }
    return ref;
}

// Per-band affine map of projected features into [0, 1] so they fit the cube
// container; the map is recorded next to the cube for invertibility.
HyperCube features_to_cube(const Matrix& features, std::size_t height,
                           std::size_t width, const fs::path& affine_path) {
    const std::size_t d = features.cols();
    std::vector<double> lo(d, 0.0), scale(d, 1.0);
    for (std::size_t c = 0; c < d; ++c) {
        double mn = features(0, c), mx = features(0, c);
        for (std::size_t i = 0; i < features.rows(); ++i) {
            mn = std::min(mn, features(i, c));
            mx = std::max(mx, features(i, c));
        }
        lo[c] = mn;
        scale[c] = mx > mn ? mx - mn : 1.0;
    }
    Matrix scaled(features.rows(), d);
    for (std::size_t i = 0; i < features.rows(); ++i)
        for (std::size_t c = 0; c < d; ++c)
            scaled(i, c) = (features(i, c) - lo[c]) / scale[c];

    ordered_json j;
    j["kind"] = "band_affine";
    j["offset"] = lo;
    j["scale"] = scale;
    std::ofstream os(affine_path, std::ios::trunc);
    os << j.dump(2) << "\n";
    return reshape_pixels(scaled, height, width);
}

struct ReducerOptions {
    std::size_t dims = 5;
    std::uint64_t seed = 0;
    int umap_neighbors = 15;
    double umap_min_dist = 0.1;
    double umap_spread = 1.0;
    int umap_epochs = 200;
    double umap_lr = 1.0;
    int umap_negative_rate = 5;
    std::string umap_init = "spectral";
    std::size_t fit_cap = 4096;
    int refine_epochs = 0;
    std::size_t nmf_iters = 200;
    bool pca_unit_variance = false;
    std::size_t batch_edges = 256;
    std::size_t parametric_epochs = 30;
    double parametric_step = 1e-3;
    std::string hidden = "64,64";

    std::vector<std::size_t> hidden_sizes() const {
        std::vector<std::size_t> sizes;
        std::stringstream ss(hidden);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) sizes.push_back(std::stoul(item));
        return sizes;
    }

    CompareConfig to_compare_config() const {
        CompareConfig cfg;
        cfg.dims = dims;
        cfg.master_seed = seed;
        cfg.umap_neighbors = umap_neighbors;
        cfg.umap_min_dist = umap_min_dist;
        cfg.umap_epochs = umap_epochs;
        cfg.umap_negative_rate = umap_negative_rate;
        cfg.umap_init = umap_init;
        cfg.fit_cap = fit_cap;
        cfg.refine_epochs = refine_epochs;
        cfg.nmf_iters = nmf_iters;
        cfg.parametric_epochs = parametric_epochs;
        cfg.parametric_batch = batch_edges;
        cfg.parametric_step = parametric_step;
        return cfg;
    }
};

void add_reducer_flags(CLI::App* cmd, ReducerOptions& opt) {
    cmd->add_option("--dims", opt.dims, "Target dimension D");
    cmd->add_option("--seed", opt.seed, "Master random seed");
    cmd->add_option("--n-neighbors", opt.umap_neighbors, "UMAP neighbors");
    cmd->add_option("--min-dist", opt.umap_min_dist, "UMAP minimum distance");
    cmd->add_option("--spread", opt.umap_spread, "UMAP spread");
    cmd->add_option("--epochs", opt.umap_epochs, "UMAP layout epochs");
    cmd->add_option("--learning-rate", opt.umap_lr, "UMAP learning rate");
    cmd->add_option("--negative-rate", opt.umap_negative_rate,
                    "Negative samples per positive");
    cmd->add_option("--init", opt.umap_init, "UMAP init: spectral|random");
    cmd->add_option("--fit-cap", opt.fit_cap,
                    "Max pixels used to fit umap/parametric reducers");
    cmd->add_option("--refine-epochs", opt.refine_epochs,
                    "SGD refinement epochs for out-of-sample projection");
    cmd->add_option("--nmf-iters", opt.nmf_iters,
                    "NMF multiplicative-update iterations");
    cmd->add_flag("--unit-variance", opt.pca_unit_variance,
                  "Standardize bands before PCA");
    cmd->add_option("--batch-edges", opt.batch_edges,
                    "Parametric encoder batch size (edges)");
    cmd->add_option("--p-epochs", opt.parametric_epochs,
                    "Parametric encoder training epochs");
    cmd->add_option("--step", opt.parametric_step,
                    "Parametric encoder step size");
    cmd->add_option("--hidden", opt.hidden,
                    "Encoder hidden layer sizes, comma separated");
}

Matrix concat_all(const std::vector<Matrix>& parts) {
    std::size_t rows = 0, cols = 0;
    for (const Matrix& m : parts) {
        rows += m.rows();
        cols = m.cols();
    }
    Matrix out(rows, cols);
    std::size_t at = 0;
    for (const Matrix& m : parts) {
        std::copy(m.data(), m.data() + m.size(), out.data() + at);
        at += m.size();
    }
    return out;
}

Matrix subsample_cap(const Matrix& m, std::size_t cap, std::uint64_t seed) {
    if (m.rows() <= cap) return m;
    Rng rng(seed);
    std::vector<std::uint32_t> idx(m.rows());
    for (std::size_t i = 0; i < idx.size(); ++i)
        idx[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = 0; i < cap; ++i) {
        const std::size_t j = i + rng.below(m.rows() - i);
        std::swap(idx[i], idx[j]);
    }
    std::sort(idx.begin(), idx.begin() + cap);
    Matrix out(cap, m.cols());
    for (std::size_t i = 0; i < cap; ++i)
        std::copy(m.row(idx[i]).begin(), m.row(idx[i]).end(),
                  out.row(i).begin());
    return out;
}

// ---------------------------------------------------------------- synth --

struct SynthArgs {
    SynthParams params;
    std::string out;
};

int run_synth(const SynthArgs& args) {
    const SynthDataset data = synth_dataset(args.params);
    write_dataset(data, args.out);
    std::cout << "wrote " << data.train.size() << " train and "
              << data.test.size() << " test cubes to " << args.out << "\n";
    return 0;
}

// -------------------------------------------------------------- convert --

struct ConvertArgs {
    std::string input, output;
    std::size_t height = 0, width = 0, bands = 0;
    std::string order = "hwc";
    bool csv = false;
    bool transmittance = false;
};

int run_convert(const ConvertArgs& args) {
    if (args.order.size() != 3 ||
        args.order.find('h') == std::string::npos ||
        args.order.find('w') == std::string::npos ||
        args.order.find('c') == std::string::npos)
        throw ConfigError("convert: --order must be a permutation of hwc");

    const std::size_t total = args.height * args.width * args.bands;
    std::vector<float> values;
    values.reserve(total);
    if (args.csv) {
        std::ifstream is(args.input);
        if (!is) throw DataError("cannot open " + args.input);
        double v;
        while (is >> v) {
            values.push_back(static_cast<float>(v));
            if (is.peek() == ',' || is.peek() == ';') is.ignore();
        }
    } else {
        std::ifstream is(args.input, std::ios::binary);
        if (!is) throw DataError("cannot open " + args.input);
        values.resize(total);
        is.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(total * 4));
        if (static_cast<std::size_t>(is.gcount()) != total * 4)
            throw DataError("convert: input holds fewer than " +
                            std::to_string(total) + " values");
    }
    if (values.size() != total)
        throw DataError("convert: expected " + std::to_string(total) +
                        " values, found " + std::to_string(values.size()));

    // The order string names the input nesting, slowest axis first.
    std::size_t extent[3];
    for (int a = 0; a < 3; ++a) {
        const char ax = args.order[a];
        extent[a] = ax == 'h' ? args.height
                              : ax == 'w' ? args.width : args.bands;
    }
    HyperCube cube(args.height, args.width, args.bands, 0.0f,
                   args.transmittance);
    std::size_t at = 0;
    std::size_t idx[3];
    for (idx[0] = 0; idx[0] < extent[0]; ++idx[0])
        for (idx[1] = 0; idx[1] < extent[1]; ++idx[1])
            for (idx[2] = 0; idx[2] < extent[2]; ++idx[2]) {
                std::size_t h = 0, w = 0, c = 0;
                for (int a = 0; a < 3; ++a) {
                    if (args.order[a] == 'h') h = idx[a];
                    if (args.order[a] == 'w') w = idx[a];
                    if (args.order[a] == 'c') c = idx[a];
                }
                cube.at(h, w, c) = values[at++];
            }
    save_cube(cube, args.output);
    std::cout << "wrote " << args.output << "\n";
    return 0;
}

// ------------------------------------------------------------------ fit --

struct FitArgs {
    std::string data;
    std::vector<std::string> inputs;
    std::vector<std::string> masks;
    std::string method = "umap";
    std::string out;
    std::string pool;
    std::string white;
    bool fit_on_mask = false;
    ReducerOptions reducer;
    int threads = 1;
};

std::vector<Matrix> gather_pixels(const std::vector<HyperCube>& cubes,
                                  const std::vector<HyperCube>& masks,
                                  bool use_masks) {
    std::vector<Matrix> out;
    for (std::size_t i = 0; i < cubes.size(); ++i) {
        const HyperCube* mask =
            use_masks && i < masks.size() ? &masks[i] : nullptr;
        out.push_back(stage("flatten",
                            [&] { return flatten_pixels(cubes[i], mask); }));
    }
    return out;
}

int run_fit(const FitArgs& args) {
    const PoolTarget pool = parse_pool(args.pool);
    std::unique_ptr<WhiteReference> white;
    if (!args.white.empty())
        white = std::make_unique<WhiteReference>(load_white(args.white));

    std::vector<HyperCube> cubes, masks;
    if (!args.data.empty()) {
        const SynthDataset data = load_dataset(args.data);
        cubes = data.train.cubes;
        masks = data.train.masks;
    } else {
        for (const auto& p : args.inputs) cubes.push_back(load_cube(p));
        for (const auto& p : args.masks) masks.push_back(load_cube(p));
    }
    if (cubes.empty()) throw ConfigError("fit: no input cubes");

    for (auto& cube : cubes)
        cube = preprocess(std::move(cube), white.get(), pool);
    for (auto& mask : masks) mask = pool_mask(mask, pool);

    const bool use_masks = args.fit_on_mask && !masks.empty();
    const Matrix x = concat_all(gather_pixels(cubes, masks, use_masks));

    fs::create_directories(args.out);
    const fs::path model_path = fs::path(args.out) / "model.json";
    const ReducerOptions& r = args.reducer;

    stage("fit", [&]() -> int {
        if (args.method == "pca") {
            save_pca(pca_fit(x, r.dims, r.pca_unit_variance), model_path);
        } else if (args.method == "nmf") {
            save_nmf(nmf_fit(x, r.dims, r.nmf_iters, r.seed).model,
                     model_path);
        } else if (args.method == "umap") {
            const Matrix fit_data = subsample_cap(x, r.fit_cap, r.seed);
            UmapParams params;
            params.n_neighbors = r.umap_neighbors;
            params.min_dist = r.umap_min_dist;
            params.spread = r.umap_spread;
            params.target_dim = static_cast<int>(r.dims);
            params.n_epochs = r.umap_epochs;
            params.learning_rate = r.umap_lr;
            params.negative_sample_rate = r.umap_negative_rate;
            params.seed = r.seed;
            params.init = r.umap_init;
            save_umap(umap_fit(fit_data, params, nullptr, args.threads),
                      model_path);
        } else if (args.method == "parametric") {
            const Matrix fit_data = subsample_cap(x, r.fit_cap, r.seed);
            NeighborGraph graph =
                knn_graph(fit_data, r.umap_neighbors, args.threads);
            calibrate_bandwidths(graph, r.umap_neighbors);
            const FuzzySet fuzzy = fuzzy_simplicial_set(graph);
            const auto [a, b] = fit_curve(r.umap_min_dist, r.umap_spread);
            TrainConfig cfg;
            cfg.batch_edges = r.batch_edges;
            cfg.epochs = r.parametric_epochs;
            cfg.step_size = r.parametric_step;
            cfg.negative_sample_rate = r.umap_negative_rate;
            cfg.seed = r.seed;
            cfg.target_dim = r.dims;
            cfg.hidden = r.hidden_sizes();
            save_encoder(train_parametric(fit_data, fuzzy, cfg, a, b).net,
                         a, b, model_path);
        } else {
            throw ConfigError("fit: unknown method '" + args.method + "'");
        }
        return 0;
    });
    std::cout << "wrote " << model_path.string() << "\n";
    return 0;
}

// -------------------------------------------------------------- project --

struct ProjectArgs {
    std::string model, input, output;
    std::string pool, white;
    int refine_epochs = 0;
    std::uint64_t seed = 0;
    int threads = 1;
};

int run_project(const ProjectArgs& args) {
    const PoolTarget pool = parse_pool(args.pool);
    std::unique_ptr<WhiteReference> white;
    if (!args.white.empty())
        white = std::make_unique<WhiteReference>(load_white(args.white));

    HyperCube cube = preprocess(load_cube(args.input), white.get(), pool);
    const Matrix pixels =
        stage("flatten", [&] { return flatten_pixels(cube); });

    const std::string kind = model_kind(args.model);
    const Matrix projected = stage("project", [&] {
        if (kind == "pca") return pca_transform(load_pca(args.model), pixels);
        if (kind == "nmf")
            return nmf_transform(load_nmf(args.model), pixels, 200);
        if (kind == "umap")
            return umap_transform(load_umap(args.model), pixels,
                                  args.refine_epochs, args.seed,
                                  args.threads);
        if (kind == "encoder")
            return encoder_forward(load_encoder(args.model).net, pixels);
        throw DataError("project: unsupported model kind '" + kind + "'");
    });

    const HyperCube out = stage("reshape", [&] {
        return features_to_cube(projected, cube.height, cube.width,
                                args.output + ".affine.json");
    });
    save_cube(out, args.output);
    std::cout << "wrote " << args.output << " [" << out.height << "x"
              << out.width << "x" << out.bands << "]\n";
    return 0;
}

// ----------------------------------------------------------------- eval --

struct EvalArgs {
    std::string data;
    std::string method = "umap";
    std::string out = "eval_out";
    std::string pool;
    bool dump = false;
    std::size_t shallow_epochs = 300;
    double shallow_step = 0.5;
    ReducerOptions reducer;
    int threads = 1;
    std::string config_text;  // canonical config, keys the intermediate cache
};

int run_eval(const EvalArgs& args) {
    const PoolTarget pool = parse_pool(args.pool);
    SynthDataset data = load_dataset(args.data);
    const bool segmentation = data.params.task == "segmentation";

    for (auto& cube : data.train.cubes)
        cube = preprocess(std::move(cube), nullptr, pool);
    for (auto& cube : data.test.cubes)
        cube = preprocess(std::move(cube), nullptr, pool);
    for (auto& mask : data.train.masks) mask = pool_mask(mask, pool);
    for (auto& mask : data.test.masks) mask = pool_mask(mask, pool);

    // Segmentation classifies every pixel; regression pools masked pixels.
    std::vector<Matrix> train_feats =
        gather_pixels(data.train.cubes, data.train.masks, !segmentation);
    std::vector<Matrix> test_feats =
        gather_pixels(data.test.cubes, data.test.masks, !segmentation);

    CompareConfig cfg = args.reducer.to_compare_config();
    cfg.task = data.params.task;
    cfg.threads = args.threads;

    ReducedFeatures reduced = stage("fit+project", [&] {
        return reduce_method(args.method, train_feats, test_feats, cfg,
                             args.reducer.seed);
    });

    std::vector<int> train_labels;
    for (const auto& mask : data.train.masks) {
        const auto labels = labels_from_mask(mask);
        train_labels.insert(train_labels.end(), labels.begin(), labels.end());
    }

    ShallowModel model = stage("shallow", [&] {
        // Standardize on train statistics before the shallow fit.
        std::vector<double> mean(reduced.dims, 0.0), sd(reduced.dims, 1.0);
        const Matrix all = concat_all(reduced.train);
        if (all.rows() > 1) {
            for (std::size_t i = 0; i < all.rows(); ++i)
                for (std::size_t c = 0; c < reduced.dims; ++c)
                    mean[c] += all(i, c);
            for (auto& v : mean) v /= static_cast<double>(all.rows());
            std::vector<double> var(reduced.dims, 0.0);
            for (std::size_t i = 0; i < all.rows(); ++i)
                for (std::size_t c = 0; c < reduced.dims; ++c) {
                    const double d = all(i, c) - mean[c];
                    var[c] += d * d;
                }
            for (std::size_t c = 0; c < reduced.dims; ++c) {
                const double s =
                    std::sqrt(var[c] / static_cast<double>(all.rows() - 1));
                sd[c] = s > 1e-12 ? s : 1.0;
            }
        }
        const auto standardize = [&](std::vector<Matrix>& mats) {
            for (Matrix& m : mats)
                for (std::size_t i = 0; i < m.rows(); ++i)
                    for (std::size_t c = 0; c < reduced.dims; ++c)
                        m(i, c) = (m(i, c) - mean[c]) / sd[c];
        };
        standardize(reduced.train);
        standardize(reduced.test);

        if (segmentation)
            return fit_shallow_classifier(concat_all(reduced.train),
                                          train_labels, args.shallow_epochs,
                                          args.shallow_step,
                                          args.reducer.seed);
        Matrix pooled(data.train.size(), reduced.dims);
        for (std::size_t i = 0; i < reduced.train.size(); ++i)
            for (std::size_t c = 0; c < reduced.dims; ++c) {
                double s = 0;
                for (std::size_t r = 0; r < reduced.train[i].rows(); ++r)
                    s += reduced.train[i](r, c);
                pooled(i, c) =
                    s / static_cast<double>(reduced.train[i].rows());
            }
        return fit_shallow_regressor(pooled, data.train.targets,
                                     args.shallow_epochs, args.shallow_step,
                                     args.reducer.seed);
    });

    EvalOptions options;
    options.task = data.params.task;
    EvalReport report = stage("eval", [&] {
        return evaluate_pixelwise(model, reduced.test, data.test, options);
    });
    report.method = args.method;
    report.dims = reduced.dims;
    report.seed = args.reducer.seed;
    report.component_evr = reduced.evr;

    fs::create_directories(args.out);
    stage("report", [&]() -> int {
        save_report_json(report, fs::path(args.out) / "report.json");
        save_report_csv(report, fs::path(args.out) / "report.csv");
        return 0;
    });

    if (args.dump) {
        const fs::path cache =
            fs::path(args.out) / "cache" / hex64(fnv1a(args.config_text));
        fs::create_directories(cache);
        for (std::size_t i = 0; i < data.test.size(); ++i) {
            std::ostringstream name;
            name << "projected_test_" << i << ".hsc";
            const fs::path out_path = cache / name.str();
            save_cube(features_to_cube(reduced.test[i],
                                       data.test.cubes[i].height,
                                       data.test.cubes[i].width,
                                       out_path.string() + ".affine.json"),
                      out_path);
        }
    }

    for (const auto& [name, value] : report.scalars)
        std::cout << name << " = " << value << "\n";
    std::cout << "wrote " << (fs::path(args.out) / "report.json").string()
              << "\n";
    return 0;
}

// -------------------------------------------------------------- compare --

struct CompareArgs {
    std::string data;
    std::string methods = "raw,pca,nmf,umap";
    std::string out = "compare_out";
    std::size_t runs = 10;
    std::size_t shallow_epochs = 300;
    double shallow_step = 0.5;
    ReducerOptions reducer;
    int threads = 1;
};

int run_compare(const CompareArgs& args) {
    SynthDataset data = load_dataset(args.data);
    CompareConfig cfg = args.reducer.to_compare_config();
    cfg.task = data.params.task;
    cfg.runs = args.runs;
    cfg.shallow_epochs = args.shallow_epochs;
    cfg.shallow_step = args.shallow_step;
    cfg.threads = args.threads;
    cfg.methods.clear();
    std::stringstream ss(args.methods);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) cfg.methods.push_back(item);

    const CompareResult result = compare_methods(data.train, data.test, cfg);
    fs::create_directories(args.out);
    save_compare_csv(result, fs::path(args.out) / "compare.csv");
    save_compare_json(result, fs::path(args.out) / "compare.json");

    for (const CompareAggregate& a : result.aggregates)
        std::cout << a.method << " " << a.metric << ": mean " << a.mean
                  << " std " << a.stddev << " stderr " << a.stderr_ << "\n";
    std::cout << "wrote " << (fs::path(args.out) / "compare.csv").string()
              << "\n";
    return 0;
}

// --------------------------------------------------------------- report --

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string out = "report_out";
};

int run_report(const ReportArgs& args) {
    if (args.inputs.empty()) throw ConfigError("report: no input reports");
    std::vector<EvalReport> reports;
    for (const auto& p : args.inputs) reports.push_back(load_report_json(p));

    fs::create_directories(args.out);
    {
        std::ofstream os(fs::path(args.out) / "merged.csv", std::ios::trunc);
        os << "method,dims,task,metric,value\n";
        os.precision(17);
        for (const EvalReport& r : reports)
            for (const auto& [metric, value] : r.scalars)
                os << r.method << "," << r.dims << "," << r.task << ","
                   << metric << "," << value << "\n";
    }
    {
        std::size_t max_d = 0;
        for (const EvalReport& r : reports)
            max_d = std::max(
                {max_d, r.component_mi.size(), r.component_evr.size()});
        std::ofstream os(fs::path(args.out) / "mi_series.csv",
                         std::ios::trunc);
        os << "method,dims,metric";
        for (std::size_t c = 0; c < max_d; ++c) os << ",c" << c;
        os << "\n";
        os.precision(17);
        const auto emit = [&](const EvalReport& r, const char* metric,
                              const std::vector<double>& values) {
            if (values.empty()) return;
            os << r.method << "," << r.dims << "," << metric;
            for (std::size_t c = 0; c < max_d; ++c) {
                os << ",";
                if (c < values.size()) os << values[c];
            }
            os << "\n";
        };
        for (const EvalReport& r : reports) {
            emit(r, "mi", r.component_mi);
            emit(r, "evr", r.component_evr);
        }
    }
    std::cout << "wrote " << (fs::path(args.out) / "merged.csv").string()
              << " and mi_series.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hyperspectral XRT dimensionality-reduction toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "INI config file; command-line flags override its values");

    int threads = 1;
    app.add_option("--threads", threads, "Worker threads (1 = deterministic)")
        ->capture_default_str();

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate a phantom dataset");
    synth->add_option("--out", synth_args.out, "Output directory")
        ->required();
    synth->add_option("--task", synth_args.params.task,
                      "segmentation|regression");
    synth->add_option("--n-train", synth_args.params.n_train, "Train cubes");
    synth->add_option("--n-test", synth_args.params.n_test, "Test cubes");
    synth->add_option("--height", synth_args.params.height, "Cube rows");
    synth->add_option("--width", synth_args.params.width, "Cube columns");
    synth->add_option("--bands", synth_args.params.bands, "Energy bands");
    synth->add_option("--photons", synth_args.params.photons,
                      "Open-beam photon scale (noise level)");
    synth->add_option("--insert-prob", synth_args.params.insert_prob,
                      "Fraction of positive segmentation samples");
    synth->add_option("--seed", synth_args.params.seed, "Random seed");

    ConvertArgs convert_args;
    auto* convert =
        app.add_subcommand("convert", "Convert raw/CSV data to .hsc");
    convert->add_option("--input", convert_args.input)->required();
    convert->add_option("--output", convert_args.output)->required();
    convert->add_option("--height", convert_args.height)->required();
    convert->add_option("--width", convert_args.width)->required();
    convert->add_option("--bands", convert_args.bands)->required();
    convert->add_option("--order", convert_args.order,
                        "Input axis nesting, slowest first (e.g. hwc, chw)");
    convert->add_flag("--csv", convert_args.csv, "Input is text values");
    convert->add_flag("--transmittance", convert_args.transmittance,
                      "Tag output as transmittance");

    FitArgs fit_args;
    auto* fit = app.add_subcommand("fit", "Fit a reducer model");
    fit->add_option("--data", fit_args.data,
                    "Dataset directory (train split)");
    fit->add_option("--input", fit_args.inputs, "Cube files");
    fit->add_option("--mask", fit_args.masks, "Mask files");
    fit->add_option("--method", fit_args.method, "pca|nmf|umap|parametric");
    fit->add_option("--out", fit_args.out, "Model output directory")
        ->required();
    fit->add_option("--pool", fit_args.pool, "Pool to HxW first");
    fit->add_option("--white", fit_args.white,
                    "White reference .hsc (H=1) for normalization");
    fit->add_flag("--fit-on-mask", fit_args.fit_on_mask,
                  "Fit only on masked pixels");
    add_reducer_flags(fit, fit_args.reducer);

    ProjectArgs project_args;
    auto* project =
        app.add_subcommand("project", "Project a cube through a model");
    project->add_option("--model", project_args.model)->required();
    project->add_option("--input", project_args.input)->required();
    project->add_option("--output", project_args.output)->required();
    project->add_option("--pool", project_args.pool, "Pool to HxW first");
    project->add_option("--white", project_args.white, "White reference");
    project->add_option("--refine-epochs", project_args.refine_epochs);
    project->add_option("--seed", project_args.seed);

    EvalArgs eval_args;
    auto* evalc = app.add_subcommand(
        "eval", "Run the full pipeline on a dataset and emit a report");
    evalc->add_option("--data", eval_args.data, "Dataset directory")
        ->required();
    evalc->add_option("--method", eval_args.method,
                      "raw|pca|nmf|umap|parametric-umap");
    evalc->add_option("--out", eval_args.out, "Output directory");
    evalc->add_option("--pool", eval_args.pool, "Pool to HxW first");
    evalc->add_flag("--dump", eval_args.dump, "Dump intermediates");
    evalc->add_option("--shallow-epochs", eval_args.shallow_epochs);
    evalc->add_option("--shallow-step", eval_args.shallow_step);
    add_reducer_flags(evalc, eval_args.reducer);

    CompareArgs compare_args;
    auto* compare = app.add_subcommand(
        "compare", "Repeated-runs method comparison on a dataset");
    compare->add_option("--data", compare_args.data, "Dataset directory")
        ->required();
    compare->add_option("--methods", compare_args.methods,
                        "Comma-separated method list");
    compare->add_option("--out", compare_args.out, "Output directory");
    compare->add_option("--runs", compare_args.runs, "Runs per method");
    compare->add_option("--shallow-epochs", compare_args.shallow_epochs);
    compare->add_option("--shallow-step", compare_args.shallow_step);
    add_reducer_flags(compare, compare_args.reducer);

    ReportArgs report_args;
    auto* report =
        app.add_subcommand("report", "Merge eval reports into tables");
    report->add_option("--inputs", report_args.inputs, "Report JSON files")
        ->required();
    report->add_option("--out", report_args.out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (synth->parsed()) return run_synth(synth_args);
        if (convert->parsed()) return run_convert(convert_args);
        if (fit->parsed()) {
            fit_args.threads = threads;
            return run_fit(fit_args);
        }
        if (project->parsed()) {
            project_args.threads = threads;
            return run_project(project_args);
        }
        if (evalc->parsed()) {
            eval_args.threads = threads;
            eval_args.config_text = app.config_to_str(true, false);
            return run_eval(eval_args);
        }
        if (compare->parsed()) {
            compare_args.threads = threads;
            return run_compare(compare_args);
        }
        if (report->parsed()) return run_report(report_args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
