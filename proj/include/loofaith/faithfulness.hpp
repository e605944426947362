#pragma once

// Agreement between the model's self-reported keywords K and the parts of
// the context the explainer found to matter:
//
//   f_sr(s)  = 1 if some k in K occurs in region s, else 0
//   g(t)     = 1 if some k in K occurs in necessary group t, else 0
//   f_nk(s)  = mean of g(t) over the necessary groups of s
//   f_i      = max over scorable regions of (f_sr(s) + f_nk(s)) / 2
//   F        = mean of f_i over scored samples
//
// A region with no necessary groups has no f_nk and is left out of the max.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loofaith/dataset.hpp"
#include "loofaith/explain.hpp"
#include "loofaith/text.hpp"

namespace loofaith {

struct RegionFaithfulness {
    std::size_t part_index = 0;
    int f_sr = 0;
    double f_nk = 0.0;
    double combined = 0.0;
    std::vector<int> hits;  // g(t) per necessary group, in group order
};

struct SampleFaithfulness {
    std::string sample_id;
    double f_i = 0.0;
    std::size_t argmax_part_index = 0;
    std::vector<RegionFaithfulness> per_region;
};

struct CorpusFaithfulness {
    std::optional<double> F;
    std::size_t n_scored = 0;
    std::vector<std::string> sample_ids;
};

int f_sr(const Region& region, std::span<const std::string> keywords);

/// g(t) for one group.
int keyword_hit(const MaskGroup& group, std::span<const std::string> keywords);

/// Throws Undefined when `necessary` is empty.
double f_nk(std::span<const MaskGroup> necessary, std::span<const std::string> keywords);

/// Throws NotScorable unless the explanation succeeded and some region has
/// necessary groups. Ties on the max go to the lowest part index.
SampleFaithfulness sample_faithfulness(const ExplanationResult& result);

CorpusFaithfulness corpus_faithfulness(std::span<const SampleFaithfulness> scores);

FaithfulnessRecord to_record(const SampleFaithfulness& score);

}  // namespace loofaith
