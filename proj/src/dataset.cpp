#include "loofaith/dataset.hpp"

#include <array>
#include <cmath>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "loofaith/error.hpp"

namespace loofaith {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::optional<std::string> validate_sample(const json& obj, Sample& out) {
    if (!obj.is_object()) return "line is not a JSON object";
    for (const char* field : {"question", "context"}) {
        if (!obj.contains(field) || !obj[field].is_string()) return fmt::format("missing string field '{}'", field);
        if (normalize_whitespace(obj[field].get<std::string>()).empty()) return fmt::format("field '{}' is empty", field);
    }
    if (!obj.contains("answers") || !obj["answers"].is_array() || obj["answers"].empty())
        return std::string("missing non-empty 'answers' list");
    for (const auto& a : obj["answers"]) {
        if (!a.is_string() || normalize_whitespace(a.get<std::string>()).empty())
            return std::string("'answers' must hold non-empty strings");
    }
    if (obj.contains("id") && !obj["id"].is_null()) {
        if (!obj["id"].is_string() || obj["id"].get<std::string>().empty()) return std::string("'id' must be a non-empty string");
        out.id = obj["id"].get<std::string>();
    }
    out.question = obj["question"].get<std::string>();
    out.context = obj["context"].get<std::string>();
    out.gold_answers = obj["answers"].get<std::vector<std::string>>();
    return std::nullopt;
}

}  // namespace

Dataset load_dataset(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IOError(fmt::format("cannot read dataset {}", path.string()));

    Dataset ds;
    std::unordered_set<std::string> seen;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (normalize_whitespace(line).empty()) continue;
        Sample sample;
        std::optional<std::string> problem;
        try {
            problem = validate_sample(json::parse(line), sample);
        } catch (const json::parse_error& e) {
            problem = fmt::format("invalid JSON: {}", e.what());
        }
        if (!problem) {
            if (sample.id.empty()) sample.id = fmt::format("line-{}", n);
            if (!seen.insert(sample.id).second) problem = fmt::format("duplicate id '{}'", sample.id);
        }
        if (problem) {
            ++ds.skipped;
            ds.diagnostics.push_back(fmt::format("{}:{}: {}", path.string(), n, *problem));
            spdlog::warn("skipping {}", ds.diagnostics.back());
            continue;
        }
        ds.samples.push_back(std::move(sample));
    }
    if (in.bad()) throw IOError(fmt::format("error while reading {}", path.string()));
    if (ds.samples.empty()) throw EmptyDataset(fmt::format("{} holds no valid samples", path.string()));
    return ds;
}

void save_dataset(const fs::path& path, const std::vector<Sample>& samples) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IOError(fmt::format("cannot write {}", path.string()));
    for (const auto& s : samples) {
        ordered_json j;
        j["id"] = s.id;
        j["question"] = s.question;
        j["context"] = s.context;
        j["answers"] = s.gold_answers;
        out << j.dump() << '\n';
    }
    if (!out) throw IOError(fmt::format("write to {} failed", path.string()));
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<std::pair<Status, std::string_view>, 7> kStatusNames = {{
    {Status::ok, "ok"},
    {Status::not_retrieval_hard, "not_retrieval_hard"},
    {Status::wrong_with_context, "wrong_with_context"},
    {Status::no_sufficient_region, "no_sufficient_region"},
    {Status::no_necessary_keywords, "no_necessary_keywords"},
    {Status::provider_error, "provider_error"},
    {Status::parse_error, "parse_error"},
}};

double round6(double x) { return std::round(x * 1e6) / 1e6; }

ordered_json span_json(const Span& s) { return ordered_json::array({s.begin, s.end}); }

Span span_from(const json& j) { return {j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>()}; }

template <typename T>
ordered_json optional_json(const std::optional<T>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

ordered_json record_json(const ResultRecord& r) {
    ordered_json j;
    j["id"] = r.id;
    j["status"] = to_string(r.status);
    j["retrieval_hard"] = optional_json(r.retrieval_hard);
    j["answers"] = {{"no_context", optional_json(r.answer_no_context)},
                    {"original", optional_json(r.answer_original)}};
    j["thought"] = optional_json(r.thought);
    j["model_keywords"] = r.model_keywords;

    ordered_json regions = ordered_json::array();
    for (const auto& s : r.sufficient_regions) {
        ordered_json o;
        o["part_index"] = s.part_index;
        o["word_span"] = span_json(s.word_span);
        o["char_span"] = span_json(s.char_span);
        o["text"] = s.text;
        regions.push_back(std::move(o));
    }
    j["sufficient_regions"] = std::move(regions);

    ordered_json nk = ordered_json::array();
    for (const auto& n : r.necessary_keywords) {
        ordered_json groups = ordered_json::array();
        for (const auto& g : n.groups) {
            ordered_json o;
            o["group_index"] = g.group_index;
            o["word_span"] = span_json(g.word_span);
            o["text"] = g.text;
            groups.push_back(std::move(o));
        }
        ordered_json o;
        o["part_index"] = n.part_index;
        o["groups"] = std::move(groups);
        nk.push_back(std::move(o));
    }
    j["necessary_keywords"] = std::move(nk);

    if (r.faithfulness) {
        ordered_json scores = ordered_json::array();
        for (const auto& s : r.faithfulness->regions) {
            ordered_json o;
            o["part_index"] = s.part_index;
            o["f_sr"] = s.f_sr;
            o["f_nk"] = round6(s.f_nk);
            o["combined"] = round6(s.combined);
            o["hits"] = s.hits;
            scores.push_back(std::move(o));
        }
        ordered_json f;
        f["regions"] = std::move(scores);
        f["f_i"] = round6(r.faithfulness->f_i);
        f["argmax_part_index"] = r.faithfulness->argmax_part_index;
        j["faithfulness"] = std::move(f);
    } else {
        j["faithfulness"] = nullptr;
    }

    const auto& l = r.calls;
    ordered_json calls;
    calls["no_context"] = l.calls_no_context;
    calls["original_context"] = l.calls_original_context;
    calls["sufficient_regions"] = l.calls_sr;
    calls["necessary_keywords"] = l.calls_nk;
    calls["cache_hits"] = l.cache_hits;
    calls["total"] = l.total();
    j["calls"] = std::move(calls);
    j["error"] = optional_json(r.error);
    return j;
}

}  // namespace

std::string_view to_string(Status status) {
    for (const auto& [s, name] : kStatusNames)
        if (s == status) return name;
    return "unknown";
}

Status status_from_string(std::string_view name) {
    for (const auto& [s, n] : kStatusNames)
        if (n == name) return s;
    throw InvalidParameter(fmt::format("unknown status '{}'", name));
}

void to_json(json& j, const ResultRecord& r) { j = json::parse(record_json(r).dump()); }

void from_json(const json& j, ResultRecord& r) {
    r = ResultRecord{};
    r.id = j.at("id").get<std::string>();
    r.status = status_from_string(j.at("status").get<std::string>());
    r.retrieval_hard = optional_from<bool>(j, "retrieval_hard");
    if (j.contains("answers")) {
        r.answer_no_context = optional_from<std::string>(j.at("answers"), "no_context");
        r.answer_original = optional_from<std::string>(j.at("answers"), "original");
    }
    r.thought = optional_from<std::string>(j, "thought");
    r.model_keywords = j.value("model_keywords", std::vector<std::string>{});
    for (const auto& s : j.value("sufficient_regions", json::array())) {
        r.sufficient_regions.push_back({s.at("part_index").get<std::size_t>(), span_from(s.at("word_span")),
                                        span_from(s.at("char_span")), s.at("text").get<std::string>()});
    }
    for (const auto& n : j.value("necessary_keywords", json::array())) {
        NecessaryRecord rec{n.at("part_index").get<std::size_t>(), {}};
        for (const auto& g : n.at("groups"))
            rec.groups.push_back({g.at("group_index").get<std::size_t>(), span_from(g.at("word_span")),
                                  g.at("text").get<std::string>()});
        r.necessary_keywords.push_back(std::move(rec));
    }
    if (j.contains("faithfulness") && !j.at("faithfulness").is_null()) {
        const auto& f = j.at("faithfulness");
        FaithfulnessRecord fr;
        for (const auto& s : f.at("regions"))
            fr.regions.push_back({s.at("part_index").get<std::size_t>(), s.at("f_sr").get<int>(),
                                  s.at("f_nk").get<double>(), s.at("combined").get<double>(),
                                  s.at("hits").get<std::vector<int>>()});
        fr.f_i = f.at("f_i").get<double>();
        fr.argmax_part_index = f.at("argmax_part_index").get<std::size_t>();
        r.faithfulness = std::move(fr);
    }
    if (j.contains("calls")) j.at("calls").get_to(r.calls);
    r.error = optional_from<std::string>(j, "error");
}

std::string to_jsonl_line(const ResultRecord& record) { return record_json(record).dump(); }

void save_results(const fs::path& path, const std::vector<ResultRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IOError(fmt::format("cannot write results {}", path.string()));
    for (const auto& r : records) out << to_jsonl_line(r) << '\n';
    if (!out) throw IOError(fmt::format("write to {} failed", path.string()));
}

std::vector<ResultRecord> load_results(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IOError(fmt::format("cannot read results {}", path.string()));
    std::vector<ResultRecord> out;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (normalize_whitespace(line).empty()) continue;
        try {
            out.push_back(json::parse(line).get<ResultRecord>());
        } catch (const std::exception& e) {
            throw IOError(fmt::format("{}:{}: bad result record: {}", path.string(), n, e.what()));
        }
    }
    return out;
}

ResultAppender::ResultAppender(const fs::path& path) : out_(path, std::ios::binary | std::ios::app) {
    if (!out_) throw IOError(fmt::format("cannot append to {}", path.string()));
}

void ResultAppender::append(const ResultRecord& record) {
    const auto line = to_jsonl_line(record);
    std::lock_guard lock(mu_);
    out_ << line << '\n';
    out_.flush();
    if (!out_) throw IOError("appending result record failed");
}

}  // namespace loofaith
