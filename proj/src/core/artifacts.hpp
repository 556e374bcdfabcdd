#pragma once

#include <cstdint>
#include <filesystem>

#include "core/io.hpp"
#include "core/meta_router.hpp"
#include "core/shortlist.hpp"
#include "core/toy_lm.hpp"
#include "core/vocab_clusters.hpp"

namespace specvoc {

// Each save returns the content hash recorded in its manifest.
std::uint64_t save_model(const std::filesystem::path& dir, const ToyModelPair& model);
ToyModelPair load_model(const std::filesystem::path& dir);

std::uint64_t save_router(const std::filesystem::path& dir, const RouterModel& router);
RouterModel load_router(const std::filesystem::path& dir);

Json partition_to_json(const ClusterPartition& partition);
ClusterPartition partition_from_json(const Json& j);

Json ranking_to_json(const FrequencyRanking& ranking);
FrequencyRanking ranking_from_json(const Json& j);

}  // namespace specvoc
