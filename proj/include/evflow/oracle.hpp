#pragma once

#include <vector>

#include "evflow/event.hpp"
#include "evflow/matcher.hpp"

namespace evflow {

/// Reference estimator: nested loops over (k, i, j) applying the window,
/// radius, displacement and retention rules directly to the sorted batch,
/// with no index maps or recency queues. Intended for small batches
/// (N up to a few thousand); used to verify process_batch.
std::vector<FlowRecord> brute_force_flow(const EventBatch& batch, const MatcherParams& params,
                                         std::vector<Triplet>* triplets = nullptr);

}  // namespace evflow
