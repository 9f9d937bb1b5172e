#include <algorithm>
#include <cmath>
#include <vector>

#include "xrumap/errors.hpp"
#include "xrumap/rng.hpp"
#include "xrumap/synth.hpp"

namespace xrumap {

namespace {

// Attenuation profile over the normalized band coordinate e in [0, 1]:
// a decaying continuum plus an optional Gaussian feature.
struct MaterialCurve {
    double base, decay, tilt;
    double bump_center = 0.0, bump_amp = 0.0, bump_width = 1.0;
    double fringe_freq = 0.0, fringe_amp = 0.0;  // oscillatory attenuation
    double fringe_phase = 0.0;

    double mu(double e) const {
        double v = base * (0.25 + std::exp(-decay * e)) + tilt * e;
        if (bump_amp != 0.0) {
            const double d = (e - bump_center) / bump_width;
            v += bump_amp * std::exp(-0.5 * d * d);
        }
        if (fringe_amp != 0.0)
            v += fringe_amp * 0.5 *
                 (1.0 + std::cos(6.283185307179586 * fringe_freq * e +
                                 fringe_phase));
        return std::max(v, 0.01);
    }
};

// Fixed material library; only the geometry is randomized per sample.
// The insert is a compound with two shallow absorption lines; the container
// decoys are single-line materials whose line depths match the insert's
// summed depth. In the shallow regime the total absorption is identical, so
// only the joint presence of both lines marks the insert.
const MaterialCurve kFabric{0.55, 2.2, 0.05, 0.20, 0.50, 0.12};
const MaterialCurve kPlastic{0.90, 3.5, 0.0, 0.92, 0.60, 0.10};
const MaterialCurve kMetal{1.10, 5.0, -0.10, 0.12, 0.45, 0.10};
const MaterialCurve kLine40{0.04, 0.0, 0.0, 0.40, 0.45, 0.090};
const MaterialCurve kLine70{0.04, 0.0, 0.0, 0.70, 0.45, 0.090};
const MaterialCurve kStoneA{0.90, 2.5, 0.0};
const MaterialCurve kStoneB{0.90, 2.5, 0.0};
const MaterialCurve kStoneC{0.90, 2.5, 0.0};

struct Ellipse {
    double ch, cw;      // center, pixel units
    double rh, rw;      // radii
    double angle;       // radians
    double thickness;   // peak thickness
    double flatness = 0.5;  // dome exponent; smaller means flatter top

    // Dome profile: thickness * (1 - q)^flatness inside the ellipse.
    double at(double h, double w) const {
        const double dh = h - ch, dw = w - cw;
        const double c = std::cos(angle), s = std::sin(angle);
        const double u = (c * dh + s * dw) / rh;
        const double v = (-s * dh + c * dw) / rw;
        const double q = u * u + v * v;
        return q < 1.0 ? thickness * std::pow(1.0 - q, flatness) : 0.0;
    }
};

std::vector<double> band_grid(std::size_t bands) {
    std::vector<double> e(bands);
    for (std::size_t c = 0; c < bands; ++c)
        e[c] = bands > 1 ? static_cast<double>(c) /
                               static_cast<double>(bands - 1)
                         : 0.0;
    return e;
}

WhiteReference make_white(std::size_t width, std::size_t bands,
                          double photons) {
    WhiteReference ref(width, bands);
    const auto e = band_grid(bands);
    for (std::size_t w = 0; w < width; ++w) {
        const double across =
            1.0 + 0.08 * std::sin(6.283185307179586 * static_cast<double>(w) /
                                  std::max<std::size_t>(1, width));
        for (std::size_t c = 0; c < bands; ++c) {
            const double spectral =
                0.8 + 0.4 * std::exp(-(e[c] - 0.4) * (e[c] - 0.4) / 0.5);
            ref.at(w, c) = static_cast<float>(photons * spectral * across);
        }
    }
    return ref;
}

// Transmittance cube for a thickness-by-material stack, detected through the
// white reference with Poisson-like shot noise and normalized back.
HyperCube detect(const std::vector<std::vector<double>>& thickness,
                 const std::vector<const MaterialCurve*>& materials,
                 std::size_t height, std::size_t width, std::size_t bands,
                 const WhiteReference& ref, Rng& rng) {
    const auto e = band_grid(bands);
    HyperCube intensity(height, width, bands);
    for (std::size_t h = 0; h < height; ++h)
        for (std::size_t w = 0; w < width; ++w) {
            for (std::size_t c = 0; c < bands; ++c) {
                double attenuation = 0.0;
                for (std::size_t m = 0; m < materials.size(); ++m)
                    attenuation += thickness[m][h * width + w] *
                                   materials[m]->mu(e[c]);
                const double t = std::exp(-attenuation);
                const double i0 = ref.at(w, c);
                const double counts = i0 * t;
                const double noisy =
                    counts + std::sqrt(std::max(counts, 0.0)) * rng.normal();
                intensity.at(h, w, c) =
                    static_cast<float>(std::max(noisy, 0.0));
            }
        }
    return white_normalize(intensity, ref);
}

Ellipse random_ellipse(Rng& rng, double height, double width, double min_r,
                       double max_r, double min_t, double max_t) {
    Ellipse el;
    el.ch = rng.uniform(0.2 * height, 0.8 * height);
    el.cw = rng.uniform(0.2 * width, 0.8 * width);
    el.rh = rng.uniform(min_r, max_r) * height;
    el.rw = rng.uniform(min_r, max_r) * width;
    el.angle = rng.uniform(0.0, 3.141592653589793);
    el.thickness = rng.uniform(min_t, max_t);
    return el;
}

void add_field(std::vector<double>& field, const Ellipse& el,
               std::size_t height, std::size_t width) {
    for (std::size_t h = 0; h < height; ++h)
        for (std::size_t w = 0; w < width; ++w)
            field[h * width + w] += el.at(static_cast<double>(h),
                                          static_cast<double>(w));
}

struct Sample {
    HyperCube cube, mask;
    std::vector<double> targets;
};

Sample make_segmentation_sample(const SynthParams& p,
                                const WhiteReference& ref, Rng& rng,
                                bool with_insert) {
    const std::size_t hw = p.height * p.width;
    // Fields: fabric, plastic, metal, line40, line70.
    std::vector<std::vector<double>> container_thickness(
        5, std::vector<double>(hw, 0.0));
    const std::vector<const MaterialCurve*> container_materials = {
        &kFabric, &kPlastic, &kMetal, &kLine40, &kLine70};

    // Diffuse fabric base, solid texture objects, and single-line decoys;
    // every line rides on an ordinary carrier object so no material stack is
    // unique to one line pattern.
    const double haze = rng.uniform(0.3, 0.65);
    for (double& t : container_thickness[0]) t += haze;
    const int n_objects = 2 + static_cast<int>(rng.below(3));
    for (int o = 0; o < n_objects; ++o) {
        const bool decoy = rng.below(5) >= 3;
        Ellipse el = random_ellipse(rng, static_cast<double>(p.height),
                                    static_cast<double>(p.width), 0.14, 0.36,
                                    0.3, 1.2);
        const std::size_t carrier = rng.below(3);
        if (!decoy) {
            add_field(container_thickness[carrier], el, p.height, p.width);
            continue;
        }
        el.flatness = 0.25;
        add_field(container_thickness[carrier], el, p.height, p.width);
        // One line at twice the insert's per-line thickness.
        el.thickness = rng.uniform(1.0, 1.6);
        add_field(container_thickness[3 + rng.below(2)], el, p.height,
                  p.width);
    }
    HyperCube container = detect(container_thickness, container_materials,
                                 p.height, p.width, p.bands, ref, rng);

    // Insert: a random carrier plus both lines, each at half a decoy's
    // thickness.
    std::vector<std::vector<double>> insert_thickness(
        3, std::vector<double>(hw, 0.0));
    const MaterialCurve* carriers[3] = {&kFabric, &kPlastic, &kMetal};
    const std::vector<const MaterialCurve*> insert_materials = {
        carriers[rng.below(3)], &kLine40, &kLine70};
    HyperCube mask(p.height, p.width, 1);
    double mass = 0.0;
    if (with_insert) {
        Ellipse el =
            random_ellipse(rng, static_cast<double>(p.height),
                           static_cast<double>(p.width), 0.18, 0.34, 1.0, 1.0);
        el.flatness = 0.25;
        el.thickness = rng.uniform(0.3, 1.2);
        add_field(insert_thickness[0], el, p.height, p.width);
        el.thickness = rng.uniform(0.5, 0.8);
        add_field(insert_thickness[1], el, p.height, p.width);
        el.thickness = rng.uniform(0.5, 0.8);
        add_field(insert_thickness[2], el, p.height, p.width);
        for (std::size_t i = 0; i < hw; ++i) {
            if (insert_thickness[1][i] > 0.0) {
                mask.data[i] = 1.0f;
                mass += insert_thickness[1][i] + insert_thickness[2][i];
            }
        }
    }
    HyperCube insert = detect(insert_thickness, insert_materials, p.height,
                              p.width, p.bands, ref, rng);

    Sample s;
    s.cube = fuse_beer_lambert(container, insert);
    s.mask = std::move(mask);
    s.targets = {mass * 0.01};
    return s;
}

Sample make_regression_sample(const SynthParams& p, const WhiteReference& ref,
                              Rng& rng) {
    const std::size_t hw = p.height * p.width;

    // Stone concentrations: A and B are sampled independently so the
    // closure constraint carries no information about A; C is the filler.
    const double conc_a = rng.uniform(0.10, 0.42);
    const double conc_b = rng.uniform(0.30, 0.55);
    const double conc_c = 1.0 - conc_a - conc_b;

    Ellipse el = random_ellipse(rng, static_cast<double>(p.height),
                                static_cast<double>(p.width), 0.22, 0.42, 1.5,
                                3.2);
    el.ch = 0.5 * static_cast<double>(p.height) + rng.uniform(-1.5, 1.5);
    el.cw = 0.5 * static_cast<double>(p.width) + rng.uniform(-1.5, 1.5);

    // Component A sets the phases of two layered-structure fringe systems
    // with coprime wrap counts: each alone wraps past a full cycle over the
    // concentration range (so no band combination reads A monotonically),
    // while the pair stays jointly unambiguous. Component B shifts its
    // absorption line.
    MaterialCurve fringe_a1{0.02, 0.0, 0.0, 0.0, 0.0, 1.0,
                            3.0 + 0.6 * conc_a, 0.20,
                            6.283185307179586 * 2.8 * conc_a};
    MaterialCurve fringe_a2{0.02, 0.0, 0.0, 0.0, 0.0, 1.0, 5.5, 0.08,
                            6.283185307179586 * 4.3 * conc_a};
    MaterialCurve line_b{0.02, 0.0, 0.0, 0.55 + 0.30 * conc_b, 2.2, 0.10,
                         0.0, 0.0, 0.0};
    MaterialCurve line_b2{0.02, 0.0, 0.0, 0.25 + 0.20 * conc_b, 1.2, 0.09};

    std::vector<std::vector<double>> thickness(7,
                                               std::vector<double>(hw, 0.0));
    HyperCube mask(p.height, p.width, 1);
    double mass = 0.0;
    for (std::size_t h = 0; h < p.height; ++h)
        for (std::size_t w = 0; w < p.width; ++w) {
            const double t = el.at(static_cast<double>(h),
                                   static_cast<double>(w));
            if (t > 0.0) {
                const std::size_t i = h * p.width + w;
                thickness[0][i] = t * conc_a;
                thickness[1][i] = t * conc_b;
                thickness[2][i] = t * conc_c;
                thickness[3][i] = t;
                thickness[4][i] = t;
                thickness[5][i] = t;
                thickness[6][i] = t;
                mask.data[i] = 1.0f;
                mass += t;
            }
        }
    if (mass <= 0.0)
        throw NumericalError("synth: degenerate stone with zero support");
    std::size_t support = 0;
    for (std::size_t i = 0; i < hw; ++i) support += mask.data[i] != 0.0f;

    Sample s;
    s.cube = detect(thickness,
                    {&kStoneA, &kStoneB, &kStoneC, &fringe_a1, &fringe_a2,
                     &line_b, &line_b2},
                    p.height, p.width, p.bands, ref, rng);
    s.mask = std::move(mask);
    // Mass is reported as mean areal density over the stone support, which
    // pooled per-pixel features can actually carry.
    s.targets = {mass / static_cast<double>(support), conc_a, conc_b};
    return s;
}

}  // namespace

SynthDataset synth_dataset(const SynthParams& params) {
    if (params.task != "segmentation" && params.task != "regression")
        throw ConfigError("synth: unknown task '" + params.task + "'");
    if (params.height < 4 || params.width < 4 || params.bands < 2)
        throw ConfigError("synth: cube dimensions too small");
    if (params.n_train == 0 || params.n_test == 0)
        throw ConfigError("synth: need at least one train and test sample");
    if (params.photons <= 0.0)
        throw ConfigError("synth: photons must be positive");

    const bool regression = params.task == "regression";
    const WhiteReference ref =
        make_white(params.width, params.bands, params.photons);

    SynthDataset out;
    out.params = params;
    out.train.target_names = regression
                                 ? std::vector<std::string>{"mass", "A", "B"}
                                 : std::vector<std::string>{"mass"};
    out.test.target_names = out.train.target_names;
    const std::size_t n_targets = out.train.target_names.size();
    out.train.targets = Matrix(params.n_train, n_targets);
    out.test.targets = Matrix(params.n_test, n_targets);

    Rng root(params.seed);
    const auto fill = [&](SampleSet& set, std::size_t count,
                          std::uint64_t stream) {
        Rng rng = root.fork(stream);
        for (std::size_t i = 0; i < count; ++i) {
            bool with_insert = false;
            if (!regression) with_insert = rng.uniform() < params.insert_prob;
            Sample s = regression
                           ? make_regression_sample(params, ref, rng)
                           : make_segmentation_sample(params, ref, rng,
                                                      with_insert);
            set.cubes.push_back(std::move(s.cube));
            set.masks.push_back(std::move(s.mask));
            for (std::size_t j = 0; j < n_targets; ++j)
                set.targets(i, j) = s.targets[j];
        }
    };
    fill(out.train, params.n_train, 1);
    fill(out.test, params.n_test, 2);
    return out;
}

}  // namespace xrumap
