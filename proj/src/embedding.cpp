#include "loofaith/embedding.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "loofaith/error.hpp"
#include "loofaith/text.hpp"
#include "utf8.hpp"

namespace loofaith {

using json = nlohmann::json;

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw InvalidParameter(fmt::format("embedding dimensions differ: {} vs {}", a.size(), b.size()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// ---------------------------------------------------------------------------

HashedNgramEmbedder::HashedNgramEmbedder(std::size_t dimension, std::size_t ngram)
    : dimension_(dimension), ngram_(ngram) {
    if (dimension_ == 0 || ngram_ == 0) throw InvalidParameter("embedder dimension and n-gram size must be positive");
}

std::vector<double> HashedNgramEmbedder::embed(std::string_view text) {
    std::vector<double> v(dimension_, 0.0);
    // n-grams never cross word boundaries, so word order does not matter
    for (const auto& word : tokenize(text)) {
        std::vector<char32_t> cps{U' '};
        for (char32_t cp : utf8::codepoints(word))
            cps.push_back(cp < 0x80 ? static_cast<char32_t>(utf8::ascii_lower(static_cast<char>(cp))) : cp);
        cps.push_back(U' ');
        const std::size_t n = std::min(ngram_, cps.size());
        for (std::size_t i = 0; i + n <= cps.size(); ++i) {
            // FNV-1a over the code points of the n-gram
            std::uint64_t h = 1469598103934665603ull;
            for (std::size_t k = 0; k < n; ++k) {
                h ^= static_cast<std::uint64_t>(cps[i + k]);
                h *= 1099511628211ull;
            }
            v[h % dimension_] += 1.0;
        }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (double& x : v) x /= norm;
    return v;
}

// ---------------------------------------------------------------------------

TableEmbedder::TableEmbedder(std::map<std::string, std::vector<double>, std::less<>> table)
    : table_(std::move(table)) {
    for (const auto& [text, vec] : table_) {
        if (dimension_ == 0) dimension_ = vec.size();
        if (vec.size() != dimension_ || vec.empty())
            throw InvalidParameter("table embeddings must share one non-zero dimension");
    }
}

std::vector<double> TableEmbedder::embed(std::string_view text) {
    const auto it = table_.find(text);
    if (it == table_.end()) throw EmbeddingUnavailable(fmt::format("no embedding for '{}'", text));
    return it->second;
}

// ---------------------------------------------------------------------------

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderConfig config)
    : config_(std::move(config)), endpoint_(http::parse_endpoint(config_.base_url)) {}

std::size_t RemoteEmbedder::dimension() const {
    std::lock_guard lock(mu_);
    return dimension_;
}

std::vector<double> RemoteEmbedder::embed(std::string_view text) {
    {
        std::lock_guard lock(mu_);
        if (auto it = memo_.find(std::string(text)); it != memo_.end()) return it->second;
    }
    json body = {{"model", config_.model}, {"input", json::array({std::string(text)})}};
    http::Headers headers;
    if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);

    const auto res = http::post_json(endpoint_, "/embeddings", body.dump(), headers, config_.timeout);
    if (!res.ok())
        throw EmbeddingUnavailable(fmt::format("embedding request failed: status {} {}", res.status,
                                               res.transport_error));
    std::vector<double> vec;
    try {
        const auto doc = json::parse(res.body);
        vec = doc.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw EmbeddingUnavailable(fmt::format("malformed embedding response: {}", e.what()));
    }
    if (vec.empty()) throw EmbeddingUnavailable("embedding response held an empty vector");

    std::lock_guard lock(mu_);
    if (dimension_ == 0) dimension_ = vec.size();
    if (vec.size() != dimension_)
        throw EmbeddingUnavailable(fmt::format("embedding dimension changed from {} to {}", dimension_, vec.size()));
    memo_.emplace(std::string(text), vec);
    return vec;
}

}  // namespace loofaith
