// SPDX-License-Identifier: Apache-2.0
#include "data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "core/error.hpp"

namespace tfk {

namespace {
constexpr std::size_t kDiagClasses = 5;
}

std::vector<DependencyRow> SyntheticSpec::default_table() {
    return {
        {0, 0, 0, 0, 0.15}, {1, 1, 0, 1, 0.20}, {2, 2, 0, 2, 0.15}, {2, 3, 0, 3, 0.10},
        {3, 3, 1, 3, 0.10}, {3, 3, 0, 4, 0.10}, {0, 2, 1, 4, 0.05}, {1, 0, 1, 1, 0.15},
    };
}

void SyntheticSpec::validate() const {
    if (num_cases == 0) throw ConfigError("synthetic spec: num_cases must be positive");
    if (image_size < 8) throw ConfigError("synthetic spec: image_size must be at least 8");
    if (table.empty()) throw ConfigError("synthetic spec: empty dependency table");
    double total = 0;
    std::set<std::tuple<unsigned, unsigned, unsigned>> keys;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& r = table[i];
        const std::string where = "synthetic spec: table row " + std::to_string(i);
        if (r.derm >= kDermSignals) throw ConfigError(where + " derm signal out of range");
        if (r.cli >= kCliSignals) throw ConfigError(where + " cli signal out of range");
        if (r.meta > 1) throw ConfigError(where + " meta bit out of range");
        if (r.diag >= kDiagClasses) throw ConfigError(where + " DIAG class out of range");
        if (!(r.prob > 0)) throw ConfigError(where + " probability must be positive");
        if (!keys.insert({r.derm, r.cli, r.meta}).second) {
            throw ConfigError(where + " repeats a (derm, cli, meta) combination");
        }
        total += r.prob;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("synthetic spec: probabilities sum to " + std::to_string(total));
    if (label_noise < 0 || label_noise > 1) throw ConfigError("synthetic spec: label_noise outside [0, 1]");
    if (pixel_noise < 0) throw ConfigError("synthetic spec: pixel_noise is negative");
    if (val_fraction < 0 || test_fraction < 0 || val_fraction + test_fraction >= 1) {
        throw ConfigError("synthetic spec: split fractions leave no training cases");
    }
}

double bayes_accuracy(const SyntheticSpec& spec, bool derm, bool cli, bool meta) {
    std::map<std::tuple<int, int, int>, std::array<double, kDiagClasses>> joint;
    for (const auto& r : spec.table) {
        auto& cell = joint[{derm ? int(r.derm) : -1, cli ? int(r.cli) : -1, meta ? int(r.meta) : -1}];
        for (std::size_t k = 0; k < kDiagClasses; ++k) {
            cell[k] += r.prob * ((1 - spec.label_noise) * (k == r.diag ? 1.0 : 0.0) + spec.label_noise / kDiagClasses);
        }
    }
    double acc = 0;
    for (const auto& [key, cell] : joint) acc += *std::max_element(cell.begin(), cell.end());
    return acc;
}

double BayesReport::at(const std::string& subset) const {
    for (const auto& [k, v] : entries)
        if (k == subset) return v;
    throw ContractError("bayes report has no subset '" + subset + "'");
}

BayesReport bayes_report(const SyntheticSpec& spec) {
    BayesReport r;
    const char* names[] = {"none", "meta", "cli", "cli+meta", "derm", "derm+meta", "derm+cli", "derm+cli+meta"};
    for (unsigned mask = 0; mask < 8; ++mask) {
        r.entries.emplace_back(names[mask], bayes_accuracy(spec, mask & 4, mask & 2, mask & 1));
    }
    return r;
}

LabelVector synthetic_labels(const Latent& z, std::size_t diag) {
    return {diag,
            z.derm % 3,
            z.meta,
            z.cli % 3,
            (z.derm + z.cli) % 3,
            (z.derm + z.meta) % 3,
            (z.cli + z.meta) % 3,
            (z.derm + z.cli + z.meta) % 2};
}

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); }

void paint(Image& img, std::size_t y, std::size_t x, const double rgb[3], double noise, Rng& rng) {
    for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = to_byte(rgb[c] + 255.0 * noise * rng.normal());
}

}  // namespace

Image render_derm(unsigned texture, std::size_t size, double noise, Rng& rng) {
    static const double skin[3] = {205, 165, 145}, base[3] = {140, 95, 70}, dark[3] = {60, 38, 28};
    const std::size_t period = std::max<std::size_t>(4, size / 8), half = period / 2;
    const std::size_t oy = 0, ox = 0;
    const double c = (double(size) - 1) / 2, radius = 0.40 * double(size);
    Image img{size, size, std::vector<std::uint8_t>(size * size * 3)};
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double dy = double(y) - c, dx = double(x) - c;
            const std::size_t py = y + oy, px = x + ox;
            bool on = false;
            switch (texture) {
                case 0: on = (py / half) % 2 == 0; break;
                case 1: on = (px / half) % 2 == 0; break;
                case 2: on = (py / half + px / half) % 2 == 0; break;
                default: on = py % period < half && px % period < half; break;
            }
            const double* rgb = dy * dy + dx * dx > radius * radius ? skin : (on ? dark : base);
            paint(img, y, x, rgb, noise, rng);
        }
    }
    return img;
}

Image render_cli(unsigned shape, std::size_t size, double noise, Rng& rng) {
    static const double skin[3] = {215, 180, 165}, lesion[3] = {120, 70, 60};
    const double s = double(size);
    const double cy = (s - 1) / 2 + rng.uniform(-s / 16, s / 16), cx = (s - 1) / 2 + rng.uniform(-s / 16, s / 16);
    const double k = rng.uniform(0.92, 1.08);
    double ry = 0, rx = 0, hole = 0;
    switch (shape) {
        case 0: ry = rx = 0.36; break;
        case 1: ry = rx = 0.17; break;
        case 2: ry = 0.16; rx = 0.40; break;
        case 3: ry = 0.40; rx = 0.16; break;
        default: ry = rx = 0.36; hole = 0.22; break;
    }
    ry *= k * s;
    rx *= k * s;
    hole *= k * s;
    Image img{size, size, std::vector<std::uint8_t>(size * size * 3)};
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double dy = double(y) - cy, dx = double(x) - cx;
            const bool inside = (dy * dy) / (ry * ry) + (dx * dx) / (rx * rx) <= 1.0 &&
                                (hole == 0 || dy * dy + dx * dx > hole * hole);
            paint(img, y, x, inside ? lesion : skin, noise, rng);
        }
    }
    return img;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const Rng root(spec.seed);
    Rng draw = root.split(1);
    const std::size_t rows = spec.table.size();

    // (row, split) for every case, in generation order.
    std::vector<std::pair<std::size_t, Split>> plan;
    if (spec.stratified) {
        std::vector<std::size_t> quota(rows);
        std::vector<std::pair<double, std::size_t>> remainder;
        std::size_t assigned = 0;
        for (std::size_t r = 0; r < rows; ++r) {
            const double exact = spec.table[r].prob * double(spec.num_cases);
            quota[r] = static_cast<std::size_t>(std::floor(exact + 1e-9));
            assigned += quota[r];
            remainder.emplace_back(-(exact - double(quota[r])), r);
        }
        std::stable_sort(remainder.begin(), remainder.end());
        for (std::size_t i = 0; assigned < spec.num_cases; ++i, ++assigned) ++quota[remainder[i % rows].second];
        for (std::size_t r = 0; r < rows; ++r) {
            const auto n_test = static_cast<std::size_t>(std::lround(double(quota[r]) * spec.test_fraction));
            const auto n_val = static_cast<std::size_t>(std::lround(double(quota[r]) * spec.val_fraction));
            for (std::size_t i = 0; i < quota[r]; ++i) {
                plan.emplace_back(r, i < n_test ? Split::Test : i < n_test + n_val ? Split::Val : Split::Train);
            }
        }
        for (std::size_t i = plan.size(); i > 1; --i) std::swap(plan[i - 1], plan[draw.below(i)]);
    } else {
        for (std::size_t i = 0; i < spec.num_cases; ++i) {
            double u = draw.uniform(), acc = 0;
            std::size_t r = 0;
            while (r + 1 < rows && u >= (acc += spec.table[r].prob)) ++r;
            const double v = draw.uniform();
            plan.emplace_back(r, v < spec.test_fraction                       ? Split::Test
                                 : v < spec.test_fraction + spec.val_fraction ? Split::Val
                                                                               : Split::Train);
        }
    }

    SyntheticData out;
    out.data.height = out.data.width = spec.image_size;
    out.report = bayes_report(spec);
    const MetaSchema& meta = MetaSchema::derm7pt();
    const std::size_t sex = meta.field_index("sex");
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto& row = spec.table[plan[i].first];
        Rng rng = root.split(1000 + i);
        Latent z{row.derm, row.cli, row.meta};
        std::size_t diag = row.diag;
        if (spec.label_noise > 0 && rng.bernoulli(spec.label_noise)) diag = rng.below(kDiagClasses);
        std::vector<std::string> values;
        for (std::size_t f = 0; f < meta.fields.size(); ++f) {
            values.push_back(f == sex ? meta.vocab[f][z.meta] : meta.vocab[f][rng.below(meta.vocab[f].size())]);
        }
        Case c;
        char id[32];
        std::snprintf(id, sizeof id, "syn%05zu", i);
        c.id = id;
        c.split = plan[i].second;
        c.labels = synthetic_labels(z, diag);
        c.meta = encode_meta(values, meta);
        c.derm = render_derm(z.derm, spec.image_size, spec.pixel_noise, rng);
        c.cli = render_cli(z.cli, spec.image_size, spec.pixel_noise, rng);
        out.data.cases.push_back(std::move(c));
        out.latent.push_back(z);
    }
    return out;
}

}  // namespace tfk
