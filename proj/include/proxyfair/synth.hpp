#ifndef PROXYFAIR_SYNTH_HPP
#define PROXYFAIR_SYNTH_HPP

#include "proxyfair/types.hpp"

#include <cstdint>
#include <vector>

namespace proxyfair {

enum class SynthComposition {
    /// Half the modes lean female, half lean male, at `purity`.
    Skewed,
    /// Every mode mirrors the population gender split.
    Mixed,
};

struct SynthParams {
    std::size_t samples = 10000;
    std::size_t modes = 20;
    std::size_t dim = 32;
    double female_fraction = 0.3;
    /// Share of a skewed mode belonging to its dominant gender.
    double purity = 0.95;
    SynthComposition composition = SynthComposition::Skewed;
    /// Standard deviation of mode centres; members have unit spread.
    double separation = 10.0;
    std::uint64_t seed = 0;
};

void validate(const SynthParams& params);

struct SynthData {
    EmbeddingMatrix embeddings;
    MetadataTable metadata;
    /// Generating mode of each row.
    std::vector<int> modes;
};

/**
 * Planted-cluster data set: Gaussian modes in `dim` dimensions with gender,
 * age, label, prediction and score per sample. With Skewed composition
 * the majority-gender modes are made larger so the population matches
 * `female_fraction` while each mode stays attribute-skewed.
 */
SynthData synthesize(const SynthParams& params);

} // namespace proxyfair

#endif
