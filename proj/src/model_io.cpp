#include "xrumap/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "xrumap/errors.hpp"

namespace xrumap {

namespace {

using ordered_json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little,
              "serialized payloads assume a little-endian host");

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(const unsigned char* data, std::size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        const unsigned b0 = data[i];
        const unsigned b1 = i + 1 < len ? data[i + 1] : 0;
        const unsigned b2 = i + 2 < len ? data[i + 2] : 0;
        out.push_back(kB64Alphabet[b0 >> 2]);
        out.push_back(kB64Alphabet[((b0 & 0x3) << 4) | (b1 >> 4)]);
        out.push_back(i + 1 < len ? kB64Alphabet[((b1 & 0xf) << 2) | (b2 >> 6)]
                                  : '=');
        out.push_back(i + 2 < len ? kB64Alphabet[b2 & 0x3f] : '=');
    }
    return out;
}

std::vector<unsigned char> b64_decode(const std::string& text) {
    std::vector<int> lut(256, -1);
    for (int i = 0; i < 64; ++i)
        lut[static_cast<unsigned char>(kB64Alphabet[i])] = i;
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    int acc = 0, bits = 0;
    for (char ch : text) {
        if (ch == '=' || ch == '\n' || ch == '\r') continue;
        const int v = lut[static_cast<unsigned char>(ch)];
        if (v < 0) throw DataError("invalid base64 payload");
        acc = (acc << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((acc >> bits) & 0xff));
        }
    }
    return out;
}

ordered_json doubles_to_json(const std::vector<double>& v) {
    return ordered_json{
        {"dtype", "f64"},
        {"count", v.size()},
        {"data", b64_encode(reinterpret_cast<const unsigned char*>(v.data()),
                            v.size() * sizeof(double))}};
}

std::vector<double> doubles_from_json(const ordered_json& j) {
    if (j.at("dtype") != "f64") throw DataError("expected f64 payload");
    const auto bytes = b64_decode(j.at("data").get<std::string>());
    const std::size_t count = j.at("count").get<std::size_t>();
    if (bytes.size() != count * sizeof(double))
        throw DataError("payload size does not match declared count");
    std::vector<double> out(count);
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

ordered_json matrix_to_json(const Matrix& m) {
    ordered_json j = doubles_to_json(m.values());
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    return j;
}

Matrix matrix_from_json(const ordered_json& j) {
    return Matrix::from_data(j.at("rows").get<std::size_t>(),
                             j.at("cols").get<std::size_t>(),
                             doubles_from_json(j));
}

ordered_json read_json_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open file: " + path.string());
    ordered_json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw DataError("malformed JSON in " + path.string() + ": " +
                        e.what());
    }
    return j;
}

void write_json_file(const ordered_json& j,
                     const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write file: " + path.string());
    os << j.dump(2) << "\n";
}

// Binary sidecar: named arrays appended in call order, offsets recorded by
// the caller into the JSON descriptor.
struct SidecarWriter {
    std::ofstream os;
    std::size_t offset = 0;
    ordered_json table = ordered_json::object();

    explicit SidecarWriter(const std::filesystem::path& path)
        : os(path, std::ios::binary | std::ios::trunc) {
        if (!os) throw DataError("cannot write sidecar: " + path.string());
    }

    void add(const std::string& name, const void* data, std::size_t bytes,
             const std::string& dtype, std::vector<std::size_t> shape) {
        os.write(reinterpret_cast<const char*>(data),
                 static_cast<std::streamsize>(bytes));
        table[name] = ordered_json{{"dtype", dtype},
                                   {"shape", shape},
                                   {"offset", offset},
                                   {"bytes", bytes}};
        offset += bytes;
    }
};

struct SidecarReader {
    std::vector<unsigned char> blob;
    const ordered_json& table;

    SidecarReader(const std::filesystem::path& path, const ordered_json& t)
        : table(t) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw DataError("cannot open sidecar: " + path.string());
        blob.assign(std::istreambuf_iterator<char>(is),
                    std::istreambuf_iterator<char>());
    }

    template <typename T>
    std::vector<T> read(const std::string& name) const {
        const auto& entry = table.at(name);
        const std::size_t offset = entry.at("offset").get<std::size_t>();
        const std::size_t bytes = entry.at("bytes").get<std::size_t>();
        if (offset + bytes > blob.size())
            throw DataError("sidecar truncated at array '" + name + "'");
        std::vector<T> out(bytes / sizeof(T));
        std::memcpy(out.data(), blob.data() + offset, bytes);
        return out;
    }
};

std::filesystem::path sidecar_path(const std::filesystem::path& json_path) {
    std::filesystem::path p = json_path;
    p.replace_extension(".bin");
    return p;
}

}  // namespace

void save_pca(const PcaModel& model, const std::filesystem::path& path) {
    ordered_json j;
    j["kind"] = "pca";
    j["bands"] = model.mean.size();
    j["dims"] = model.components.rows();
    j["standardized"] = model.standardized;
    j["mean"] = doubles_to_json(model.mean);
    j["scale"] = doubles_to_json(model.scale);
    j["components"] = matrix_to_json(model.components);
    j["explained_variance_ratio"] = model.explained_variance_ratio;
    write_json_file(j, path);
}

PcaModel load_pca(const std::filesystem::path& path) {
    const ordered_json j = read_json_file(path);
    if (j.at("kind") != "pca")
        throw DataError(path.string() + " is not a pca model");
    PcaModel model;
    model.standardized = j.at("standardized").get<bool>();
    model.mean = doubles_from_json(j.at("mean"));
    model.scale = doubles_from_json(j.at("scale"));
    model.components = matrix_from_json(j.at("components"));
    model.explained_variance_ratio =
        j.at("explained_variance_ratio").get<std::vector<double>>();
    return model;
}

void save_nmf(const NmfModel& model, const std::filesystem::path& path) {
    ordered_json j;
    j["kind"] = "nmf";
    j["bands"] = model.basis.cols();
    j["rank"] = model.rank;
    j["reconstruction_error"] = model.reconstruction_error;
    j["basis"] = matrix_to_json(model.basis);
    j["error_trace"] = model.error_trace;
    write_json_file(j, path);
}

NmfModel load_nmf(const std::filesystem::path& path) {
    const ordered_json j = read_json_file(path);
    if (j.at("kind") != "nmf")
        throw DataError(path.string() + " is not an nmf model");
    NmfModel model;
    model.rank = j.at("rank").get<std::size_t>();
    model.reconstruction_error = j.at("reconstruction_error").get<double>();
    model.basis = matrix_from_json(j.at("basis"));
    model.error_trace = j.at("error_trace").get<std::vector<double>>();
    return model;
}

void save_umap(const UmapModel& model,
               const std::filesystem::path& json_path) {
    const std::filesystem::path bin = sidecar_path(json_path);
    SidecarWriter sidecar(bin);
    sidecar.add("train_data", model.train_data.data(),
                model.train_data.size() * sizeof(double), "f64",
                {model.train_data.rows(), model.train_data.cols()});
    sidecar.add("embedding", model.embedding.data(),
                model.embedding.size() * sizeof(double), "f64",
                {model.embedding.rows(), model.embedding.cols()});
    sidecar.add("knn_indices", model.graph.indices.data(),
                model.graph.indices.size() * sizeof(std::uint32_t), "u32",
                {model.graph.n, model.graph.k});
    sidecar.add("knn_distances", model.graph.distances.data(),
                model.graph.distances.size() * sizeof(double), "f64",
                {model.graph.n, model.graph.k});
    sidecar.add("rho", model.graph.rho.data(),
                model.graph.rho.size() * sizeof(double), "f64",
                {model.graph.n});
    sidecar.add("sigma", model.graph.sigma.data(),
                model.graph.sigma.size() * sizeof(double), "f64",
                {model.graph.n});

    ordered_json j;
    j["kind"] = "umap";
    j["params"] = ordered_json{
        {"n_neighbors", model.params.n_neighbors},
        {"min_dist", model.params.min_dist},
        {"spread", model.params.spread},
        {"target_dim", model.params.target_dim},
        {"n_epochs", model.params.n_epochs},
        {"learning_rate", model.params.learning_rate},
        {"negative_sample_rate", model.params.negative_sample_rate},
        {"seed", model.params.seed},
        {"metric", model.params.metric},
        {"init", model.params.init}};
    j["curve_a"] = model.curve_a;
    j["curve_b"] = model.curve_b;
    j["sidecar"] = bin.filename().string();
    j["arrays"] = sidecar.table;
    write_json_file(j, json_path);
}

UmapModel load_umap(const std::filesystem::path& json_path) {
    const ordered_json j = read_json_file(json_path);
    if (j.at("kind") != "umap")
        throw DataError(json_path.string() + " is not a umap model");
    UmapModel model;
    const auto& p = j.at("params");
    model.params.n_neighbors = p.at("n_neighbors").get<int>();
    model.params.min_dist = p.at("min_dist").get<double>();
    model.params.spread = p.at("spread").get<double>();
    model.params.target_dim = p.at("target_dim").get<int>();
    model.params.n_epochs = p.at("n_epochs").get<int>();
    model.params.learning_rate = p.at("learning_rate").get<double>();
    model.params.negative_sample_rate =
        p.at("negative_sample_rate").get<int>();
    model.params.seed = p.at("seed").get<std::uint64_t>();
    model.params.metric = p.at("metric").get<std::string>();
    model.params.init = p.at("init").get<std::string>();
    model.curve_a = j.at("curve_a").get<double>();
    model.curve_b = j.at("curve_b").get<double>();

    const std::filesystem::path bin =
        json_path.parent_path() / j.at("sidecar").get<std::string>();
    SidecarReader sidecar(bin, j.at("arrays"));
    const auto& arrays = j.at("arrays");
    {
        const auto shape =
            arrays.at("train_data").at("shape").get<std::vector<std::size_t>>();
        model.train_data = Matrix::from_data(
            shape[0], shape[1], sidecar.read<double>("train_data"));
    }
    {
        const auto shape =
            arrays.at("embedding").at("shape").get<std::vector<std::size_t>>();
        model.embedding = Matrix::from_data(shape[0], shape[1],
                                            sidecar.read<double>("embedding"));
    }
    const auto gshape =
        arrays.at("knn_indices").at("shape").get<std::vector<std::size_t>>();
    model.graph.n = gshape[0];
    model.graph.k = gshape[1];
    model.graph.indices = sidecar.read<std::uint32_t>("knn_indices");
    model.graph.distances = sidecar.read<double>("knn_distances");
    model.graph.rho = sidecar.read<double>("rho");
    model.graph.sigma = sidecar.read<double>("sigma");
    model.fuzzy.n = model.graph.n;  // membership graph is not persisted
    return model;
}

void save_encoder(const EncoderNet& net, double curve_a, double curve_b,
                  const std::filesystem::path& json_path) {
    const std::filesystem::path bin = sidecar_path(json_path);
    SidecarWriter sidecar(bin);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        sidecar.add("w" + std::to_string(l), net.weights[l].data(),
                    net.weights[l].size() * sizeof(double), "f64",
                    {net.weights[l].rows(), net.weights[l].cols()});
        sidecar.add("b" + std::to_string(l), net.biases[l].data(),
                    net.biases[l].size() * sizeof(double), "f64",
                    {net.biases[l].size()});
    }
    ordered_json j;
    j["kind"] = "encoder";
    j["layer_sizes"] = net.layer_sizes;
    j["curve_a"] = curve_a;
    j["curve_b"] = curve_b;
    j["sidecar"] = bin.filename().string();
    j["arrays"] = sidecar.table;
    write_json_file(j, json_path);
}

LoadedEncoder load_encoder(const std::filesystem::path& json_path) {
    const ordered_json j = read_json_file(json_path);
    if (j.at("kind") != "encoder")
        throw DataError(json_path.string() + " is not an encoder model");
    LoadedEncoder out;
    out.curve_a = j.at("curve_a").get<double>();
    out.curve_b = j.at("curve_b").get<double>();
    out.net.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();

    const std::filesystem::path bin =
        json_path.parent_path() / j.at("sidecar").get<std::string>();
    SidecarReader sidecar(bin, j.at("arrays"));
    for (std::size_t l = 0; l + 1 < out.net.layer_sizes.size(); ++l) {
        out.net.weights.push_back(
            Matrix::from_data(out.net.layer_sizes[l + 1],
                              out.net.layer_sizes[l],
                              sidecar.read<double>("w" + std::to_string(l))));
        out.net.biases.push_back(
            sidecar.read<double>("b" + std::to_string(l)));
    }
    return out;
}

std::string model_kind(const std::filesystem::path& json_path) {
    return read_json_file(json_path).at("kind").get<std::string>();
}

void save_report_json(const EvalReport& report,
                      const std::filesystem::path& path) {
    ordered_json j;
    j["kind"] = "eval_report";
    j["task"] = report.task;
    j["method"] = report.method;
    j["dims"] = report.dims;
    j["seed"] = report.seed;
    ordered_json scalars = ordered_json::array();
    for (const auto& [name, value] : report.scalars)
        scalars.push_back(ordered_json::array({name, value}));
    j["scalars"] = scalars;
    j["component_mi"] = report.component_mi;
    j["component_evr"] = report.component_evr;
    write_json_file(j, path);
}

EvalReport load_report_json(const std::filesystem::path& path) {
    const ordered_json j = read_json_file(path);
    if (!j.contains("kind") || j.at("kind") != "eval_report")
        throw DataError(path.string() + " is not an eval report");
    EvalReport report;
    report.task = j.at("task").get<std::string>();
    report.method = j.at("method").get<std::string>();
    report.dims = j.at("dims").get<std::size_t>();
    report.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& pair : j.at("scalars"))
        report.scalars.emplace_back(pair.at(0).get<std::string>(),
                                    pair.at(1).get<double>());
    report.component_mi = j.at("component_mi").get<std::vector<double>>();
    report.component_evr = j.at("component_evr").get<std::vector<double>>();
    return report;
}

namespace {

void write_csv(const std::filesystem::path& path, const std::string& body) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write file: " + path.string());
    os << body;
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void save_report_csv(const EvalReport& report,
                     const std::filesystem::path& path) {
    std::ostringstream os;
    os << "metric,component,value\n";
    for (const auto& [name, value] : report.scalars)
        os << name << ",," << format_double(value) << "\n";
    for (std::size_t c = 0; c < report.component_mi.size(); ++c)
        os << "mi," << c << "," << format_double(report.component_mi[c])
           << "\n";
    for (std::size_t c = 0; c < report.component_evr.size(); ++c)
        os << "evr," << c << "," << format_double(report.component_evr[c])
           << "\n";
    write_csv(path, os.str());
}

void save_compare_csv(const CompareResult& result,
                      const std::filesystem::path& path) {
    std::ostringstream os;
    os << "method,dims,run,metric,value\n";
    for (const CompareRow& row : result.rows)
        os << row.method << "," << row.dims << "," << row.run << ","
           << row.metric << "," << format_double(row.value) << "\n";
    write_csv(path, os.str());
}

void save_compare_json(const CompareResult& result,
                       const std::filesystem::path& path) {
    ordered_json j;
    j["kind"] = "compare_result";
    j["dims"] = result.dims;
    j["runs"] = result.runs;
    ordered_json rows = ordered_json::array();
    for (const CompareRow& row : result.rows)
        rows.push_back(ordered_json{{"method", row.method},
                                    {"dims", row.dims},
                                    {"run", row.run},
                                    {"metric", row.metric},
                                    {"value", row.value}});
    j["rows"] = rows;
    ordered_json aggregates = ordered_json::array();
    for (const CompareAggregate& a : result.aggregates)
        aggregates.push_back(ordered_json{{"method", a.method},
                                          {"metric", a.metric},
                                          {"mean", a.mean},
                                          {"stddev", a.stddev},
                                          {"stderr", a.stderr_}});
    j["aggregates"] = aggregates;
    write_json_file(j, path);
}

}  // namespace xrumap
