#include "proxyfair/synth.hpp"

#include "proxyfair/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace proxyfair {

namespace {

/// Splits `total` proportionally to `weights` by largest remainder.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> out(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t used = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const double exact = static_cast<double>(total) * weights[k] / sum;
        out[k] = static_cast<std::size_t>(std::floor(exact));
        used += out[k];
        remainders.emplace_back(exact - std::floor(exact), k);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; used < total; ++r, ++used) {
        ++out[remainders[r % remainders.size()].second];
    }
    return out;
}

} // namespace

void validate(const SynthParams& params) {
    if (params.samples < 4) {
        throw ParameterError("samples", "must be >= 4");
    }
    if (params.modes < 1 || params.modes > params.samples) {
        throw ParameterError("modes", "must lie in [1, samples]");
    }
    if (params.dim < 1) {
        throw ParameterError("dim", "must be >= 1");
    }
    if (!(params.female_fraction >= 0 && params.female_fraction <= 1)) {
        throw ParameterError("female_fraction", "must lie in [0, 1]");
    }
    if (!(params.separation >= 0) || !std::isfinite(params.separation)) {
        throw ParameterError("separation", "must be a finite value >= 0");
    }
    if (params.composition == SynthComposition::Skewed) {
        if (params.modes < 2) {
            throw ParameterError("modes", "skewed composition needs at least 2 modes");
        }
        if (!(params.purity > 0.5 && params.purity <= 1)) {
            throw ParameterError("purity", "must lie in (0.5, 1]");
        }
        if (!(params.female_fraction > 1 - params.purity && params.female_fraction < params.purity)) {
            throw ParameterError("female_fraction", "must lie strictly between 1 - purity and purity");
        }
    }
}

SynthData synthesize(const SynthParams& params) {
    validate(params);
    const std::size_t modes = params.modes;
    const std::size_t dim = params.dim;

    // mode sizes and female share per mode
    std::vector<double> weights(modes, 1.0);
    std::vector<double> female_share(modes, params.female_fraction);
    if (params.composition == SynthComposition::Skewed) {
        const std::size_t female_modes = modes / 2;
        const std::size_t male_modes = modes - female_modes;
        const double pu = params.purity;
        const double f = params.female_fraction;
        const double male_weight = static_cast<double>(female_modes) * (pu - f) /
                                   (static_cast<double>(male_modes) * (f - (1 - pu)));
        for (std::size_t k = 0; k < modes; ++k) {
            const bool female_led = k < female_modes;
            weights[k] = female_led ? 1.0 : male_weight;
            female_share[k] = female_led ? pu : 1 - pu;
        }
    }
    const auto sizes = apportion(params.samples, weights);

    Rng rng(derive_seed(params.seed, 0x5EED));
    std::vector<double> centres(modes * dim);
    for (auto& c : centres) {
        c = params.separation * standard_normal(rng);
    }
    struct ModeProfile {
        double mean_age, base_rate, tpr, fpr;
    };
    std::vector<ModeProfile> profiles(modes);
    for (auto& p : profiles) {
        p.mean_age = 25 + 55 * uniform01(rng);
        p.base_rate = 0.2 + 0.3 * uniform01(rng);
        p.tpr = 0.6 + 0.3 * uniform01(rng);
        p.fpr = 0.05 + 0.2 * uniform01(rng);
    }

    struct Row {
        int mode;
        MetadataRecord record;
        std::vector<double> values;
    };
    std::vector<Row> rows;
    rows.reserve(params.samples);
    for (std::size_t k = 0; k < modes; ++k) {
        const auto females = static_cast<std::size_t>(std::llround(female_share[k] * static_cast<double>(sizes[k])));
        const auto& prof = profiles[k];
        for (std::size_t s = 0; s < sizes[k]; ++s) {
            Row row{static_cast<int>(k), {}, std::vector<double>(dim)};
            for (std::size_t c = 0; c < dim; ++c) {
                row.values[c] = centres[k * dim + c] + standard_normal(rng);
            }
            auto& rec = row.record;
            rec.gender = s < females ? Gender::Female : Gender::Male;
            rec.age = static_cast<int>(std::clamp(std::lround(prof.mean_age + 10 * standard_normal(rng)), 0L, 100L));
            rec.label = uniform01(rng) < prof.base_rate ? 1 : 0;
            rec.prediction = uniform01(rng) < (*rec.label == 1 ? prof.tpr : prof.fpr) ? 1 : 0;
            rec.score = *rec.prediction == 1 ? 0.5 + 0.5 * uniform01(rng) : 0.5 * uniform01(rng);
            rows.push_back(std::move(row));
        }
    }
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    partial_shuffle(std::span<std::size_t>(order), order.size(), rng);

    std::vector<std::string> ids;
    std::vector<double> values;
    std::vector<MetadataRecord> records;
    std::vector<int> mode_of;
    ids.reserve(rows.size());
    values.reserve(rows.size() * dim);
    for (std::size_t r = 0; r < order.size(); ++r) {
        const auto& row = rows[order[r]];
        char id[32];
        std::snprintf(id, sizeof id, "s%06zu", r);
        ids.emplace_back(id);
        values.insert(values.end(), row.values.begin(), row.values.end());
        records.push_back(row.record);
        mode_of.push_back(row.mode);
    }
    MetadataColumns columns{true, true, true, true, true};
    auto table = MetadataTable(ids, std::move(records), columns);
    return SynthData{EmbeddingMatrix(std::move(ids), std::move(values), dim), std::move(table), std::move(mode_of)};
}

} // namespace proxyfair
