#pragma once

#include <vector>

#include "beamwatch/dataset.hpp"
#include "beamwatch/model.hpp"

namespace beamwatch::pipeline::detail {

using model::BatchInput;

/// Packs samples into one model input, storing each distinct frame once.
BatchInput make_batch(const std::vector<const dataset::Sample*>& samples);

/// Sample order for one epoch, seeded by (seed, epoch). With grouping, episodes are
/// shuffled and then the samples inside each episode.
std::vector<std::size_t> epoch_permutation(const std::vector<dataset::Sample>& samples, std::uint64_t seed,
                                           std::size_t epoch, bool group_by_episode);

}  // namespace beamwatch::pipeline::detail
