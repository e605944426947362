#include "loofaith/explain.hpp"

#include <fmt/format.h>

#include "loofaith/error.hpp"

namespace loofaith {

void ExplainConfig::validate() const {
    if (p == 0) throw InvalidParameter("p (candidate regions) must be at least 1");
    if (q == 0) throw InvalidParameter("q (keyword groups) must be at least 1");
}

Explainer::Explainer(ModelClient& model, EmbeddingProvider* embedder, EvalConfig eval, ExplainConfig config)
    : model_(model), embedder_(embedder), eval_(std::move(eval)), config_(config) {
    eval_.validate();
    config_.validate();
}

Explainer::Answer Explainer::ask(const Sample& sample, const std::optional<std::string>& context, Stage stage,
                                 CallLedger& ledger) {
    const auto raw = model_.ask(sample.question, context, stage, ledger);
    Answer out;
    try {
        out.response = parse_response(raw);
    } catch (const ParseError& e) {
        // a reply without a usable answer counts as a wrong answer
        out.parse_error = e.what();
        return out;
    }
    out.correct = evaluate(sample.gold_answers, out.response->answer, eval_, embedder_).correct;
    return out;
}

RetrievalCheck Explainer::is_retrieval_hard(const Sample& sample, CallLedger& ledger) {
    const auto a = ask(sample, std::nullopt, Stage::no_context, ledger);
    RetrievalCheck check;
    check.hard = !a.correct;
    if (a.response) check.answer = a.response->answer;
    return check;
}

std::vector<Region> Explainer::sufficient_regions(const Sample& sample, CallLedger& ledger) {
    std::vector<Region> sufficient;
    for (auto& region : split_into_parts(tokenize(sample.context), config_.p, sample.id)) {
        if (ask(sample, region.text(), Stage::sufficient_region, ledger).correct)
            sufficient.push_back(std::move(region));
    }
    return sufficient;
}

std::vector<MaskGroup> Explainer::necessary_keywords(const Sample& sample, const Region& region, CallLedger& ledger) {
    std::vector<MaskGroup> necessary;
    if (region.words.empty()) return necessary;
    for (auto& group : split_into_groups(region, config_.q)) {
        if (!ask(sample, mask_group(region, group), Stage::necessary_keyword, ledger).correct)
            necessary.push_back(std::move(group));
    }
    return necessary;
}

ExplanationResult Explainer::explain_sample(const Sample& sample) {
    ExplanationResult r;
    r.sample_id = sample.id;
    try {
        const auto hard = is_retrieval_hard(sample, r.ledger);
        r.retrieval_hard = hard.hard;
        r.no_context_answer = hard.answer;
        if (!hard.hard) {
            r.status = Status::not_retrieval_hard;
            return r;
        }

        const auto original = ask(sample, sample.context, Stage::original_context, r.ledger);
        if (!original.response) {
            r.status = Status::parse_error;
            r.error = original.parse_error;
            return r;
        }
        r.original_answer = original.response->answer;
        r.thought = original.response->thought;
        r.self_keywords = original.response->keywords;
        if (!original.correct) {
            r.status = Status::wrong_with_context;
            return r;
        }

        r.sufficient_regions = sufficient_regions(sample, r.ledger);
        if (r.sufficient_regions.empty()) {
            r.status = Status::no_sufficient_region;
            return r;
        }

        bool any = false;
        for (const auto& region : r.sufficient_regions) {
            auto nk = necessary_keywords(sample, region, r.ledger);
            any = any || !nk.empty();
            r.nk_by_region.emplace(region.part_index, std::move(nk));
            if (config_.run_nk_on == NkMode::first_sufficient_region) break;
        }
        r.status = any ? Status::ok : Status::no_necessary_keywords;
    } catch (const ProviderError& e) {
        r.status = Status::provider_error;
        r.error = e.what();
    }
    return r;
}

// ---------------------------------------------------------------------------

ResultRecord to_record(const ExplanationResult& result) {
    ResultRecord rec;
    rec.id = result.sample_id;
    rec.status = result.status;
    rec.retrieval_hard = result.retrieval_hard;
    rec.answer_no_context = result.no_context_answer;
    rec.answer_original = result.original_answer;
    rec.thought = result.thought;
    rec.model_keywords = result.self_keywords;
    for (const auto& region : result.sufficient_regions)
        rec.sufficient_regions.push_back({region.part_index, region.word_span, region.char_span, region.text()});
    for (const auto& [part, groups] : result.nk_by_region) {
        NecessaryRecord n{part, {}};
        for (const auto& g : groups) n.groups.push_back({g.group_index, g.word_span, g.text()});
        rec.necessary_keywords.push_back(std::move(n));
    }
    rec.calls = result.ledger;
    rec.error = result.error;
    return rec;
}

ExplanationResult from_record(const ResultRecord& record) {
    ExplanationResult r;
    r.sample_id = record.id;
    r.status = record.status;
    r.retrieval_hard = record.retrieval_hard;
    r.no_context_answer = record.answer_no_context;
    r.original_answer = record.answer_original;
    r.thought = record.thought;
    r.self_keywords = record.model_keywords;
    for (const auto& s : record.sufficient_regions) {
        Region region;
        region.parent_id = record.id;
        region.part_index = s.part_index;
        region.words = tokenize(s.text);
        region.word_span = s.word_span;
        region.char_span = s.char_span;
        if (region.words.size() != s.word_span.size())
            throw InvalidParameter(fmt::format("record {}: region {} text does not match its word span", record.id,
                                               s.part_index));
        r.sufficient_regions.push_back(std::move(region));
    }
    for (const auto& n : record.necessary_keywords) {
        auto& groups = r.nk_by_region[n.part_index];
        for (const auto& g : n.groups) {
            MaskGroup group{n.part_index, g.group_index, tokenize(g.text), g.word_span};
            if (group.words.size() != g.word_span.size())
                throw InvalidParameter(fmt::format("record {}: group {} text does not match its word span",
                                                   record.id, g.group_index));
            groups.push_back(std::move(group));
        }
    }
    r.ledger = record.calls;
    r.error = record.error;
    return r;
}

}  // namespace loofaith
