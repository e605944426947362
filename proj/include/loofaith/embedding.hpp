#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "loofaith/http.hpp"

namespace loofaith {

/// Maps text to a fixed-length vector. Implementations must be deterministic
/// per instance and safe for concurrent calls.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    /// Throws EmbeddingUnavailable when no vector can be produced.
    virtual std::vector<double> embed(std::string_view text) = 0;
    virtual std::size_t dimension() const = 0;
};

/// Cosine similarity; 0 when either vector has zero norm. Throws
/// InvalidParameter on a dimension mismatch.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Offline embedder: character n-grams of each space-padded word, hashed into
/// a fixed number of buckets and L2-normalized. Needs no model files or
/// network access.
class HashedNgramEmbedder final : public EmbeddingProvider {
public:
    explicit HashedNgramEmbedder(std::size_t dimension = 256, std::size_t ngram = 3);

    std::vector<double> embed(std::string_view text) override;
    std::size_t dimension() const override { return dimension_; }

private:
    std::size_t dimension_;
    std::size_t ngram_;
};

/// Fixed lookup table, used in tests to pin similarities exactly. Unknown text
/// raises EmbeddingUnavailable.
class TableEmbedder final : public EmbeddingProvider {
public:
    explicit TableEmbedder(std::map<std::string, std::vector<double>, std::less<>> table);

    std::vector<double> embed(std::string_view text) override;
    std::size_t dimension() const override { return dimension_; }

private:
    std::map<std::string, std::vector<double>, std::less<>> table_;
    std::size_t dimension_ = 0;
};

struct RemoteEmbedderConfig {
    std::string base_url;
    std::string model;
    std::string api_key;  // sent as a bearer token when non-empty
    std::chrono::milliseconds timeout{30000};
};

/// Client for an embeddings endpoint speaking
/// {model, input:[...]} -> {data:[{embedding:[...]}]}. Results are memoized.
class RemoteEmbedder final : public EmbeddingProvider {
public:
    explicit RemoteEmbedder(RemoteEmbedderConfig config);

    std::vector<double> embed(std::string_view text) override;
    std::size_t dimension() const override;

private:
    RemoteEmbedderConfig config_;
    http::Endpoint endpoint_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, std::vector<double>> memo_;
    std::size_t dimension_ = 0;
};

}  // namespace loofaith
