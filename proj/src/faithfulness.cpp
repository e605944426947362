#include "loofaith/faithfulness.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "loofaith/error.hpp"

namespace loofaith {

namespace {

int any_contained(const std::string& text, std::span<const std::string> keywords) {
    return std::any_of(keywords.begin(), keywords.end(),
                       [&](const std::string& k) { return contains_keyword(text, k); })
               ? 1
               : 0;
}

}  // namespace

int f_sr(const Region& region, std::span<const std::string> keywords) {
    return any_contained(region.text(), keywords);
}

int keyword_hit(const MaskGroup& group, std::span<const std::string> keywords) {
    return any_contained(group.text(), keywords);
}

double f_nk(std::span<const MaskGroup> necessary, std::span<const std::string> keywords) {
    if (necessary.empty()) throw Undefined("f_nk is undefined for a region without necessary keywords");
    std::size_t hits = 0;
    for (const auto& g : necessary) hits += static_cast<std::size_t>(keyword_hit(g, keywords));
    return static_cast<double>(hits) / static_cast<double>(necessary.size());
}

SampleFaithfulness sample_faithfulness(const ExplanationResult& result) {
    if (result.status != Status::ok)
        throw NotScorable(fmt::format("sample {} has status {}", result.sample_id, to_string(result.status)));

    SampleFaithfulness out;
    out.sample_id = result.sample_id;
    const std::span<const std::string> keywords = result.self_keywords;
    bool have_best = false;
    for (const auto& region : result.sufficient_regions) {
        const auto it = result.nk_by_region.find(region.part_index);
        if (it == result.nk_by_region.end() || it->second.empty()) continue;

        RegionFaithfulness rf;
        rf.part_index = region.part_index;
        rf.f_sr = f_sr(region, keywords);
        for (const auto& g : it->second) rf.hits.push_back(keyword_hit(g, keywords));
        rf.f_nk = f_nk(it->second, keywords);
        rf.combined = (static_cast<double>(rf.f_sr) + rf.f_nk) / 2.0;

        if (!have_best || rf.combined > out.f_i ||
            (rf.combined == out.f_i && rf.part_index < out.argmax_part_index)) {
            out.f_i = rf.combined;
            out.argmax_part_index = rf.part_index;
            have_best = true;
        }
        out.per_region.push_back(std::move(rf));
    }
    if (!have_best) throw NotScorable(fmt::format("sample {} has no region with necessary keywords", result.sample_id));
    return out;
}

CorpusFaithfulness corpus_faithfulness(std::span<const SampleFaithfulness> scores) {
    CorpusFaithfulness out;
    out.n_scored = scores.size();
    if (scores.empty()) return out;
    double sum = 0.0;
    for (const auto& s : scores) {
        sum += s.f_i;
        out.sample_ids.push_back(s.sample_id);
    }
    out.F = sum / static_cast<double>(scores.size());
    return out;
}

FaithfulnessRecord to_record(const SampleFaithfulness& score) {
    FaithfulnessRecord rec;
    rec.f_i = score.f_i;
    rec.argmax_part_index = score.argmax_part_index;
    for (const auto& r : score.per_region) rec.regions.push_back({r.part_index, r.f_sr, r.f_nk, r.combined, r.hits});
    return rec;
}

}  // namespace loofaith
