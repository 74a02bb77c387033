#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saba/backend/types.hpp"
#include "saba/errors.hpp"
#include "saba/util.hpp"

namespace saba::backend {

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    // One unit-norm vector per input text, order-preserving.
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) {
        if (texts.empty())
            throw Error(ErrorClass::InputValidation, "embed called with no texts");
        for (const auto& t : texts)
            if (util::is_blank(t))
                throw Error(ErrorClass::InputValidation, "embed called with a blank text");
        auto raw = embed_raw(texts);
        for (auto& v : raw) normalize(v);
        return raw;
    }

    virtual int dimension() const = 0;
    virtual std::string name() const = 0;

protected:
    virtual std::vector<EmbeddingVector> embed_raw(const std::vector<std::string>& texts) = 0;

    static void normalize(EmbeddingVector& v) {
        double norm = 0.0;
        for (double x : v.values) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            if (!v.values.empty()) v.values[0] = 1.0;
            return;
        }
        for (double& x : v.values) x /= norm;
    }
};

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension())
        throw Error(ErrorClass::InputValidation, "cosine over mismatched dimensions");
    double dot = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
    return dot;
}

namespace detail {
inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
} // namespace detail

// Deterministic hash-projection embedding for offline runs: each token maps to
// a fixed pseudo-random direction, texts sum their token directions. Identical
// texts embed identically; token overlap raises similarity.
class HashEmbedding : public EmbeddingProvider {
public:
    explicit HashEmbedding(int dimension = 64) : dimension_(dimension) {}

    int dimension() const override { return dimension_; }
    std::string name() const override { return "hash-" + std::to_string(dimension_); }

protected:
    std::vector<EmbeddingVector> embed_raw(const std::vector<std::string>& texts) override {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& text : texts) out.push_back(project(text));
        return out;
    }

private:
    EmbeddingVector project(const std::string& text) const {
        EmbeddingVector v;
        v.values.assign(static_cast<size_t>(dimension_), 0.0);
        auto tokens = tokenize(text);
        if (tokens.empty()) tokens.push_back(util::trim(text));
        for (const auto& token : tokens) {
            uint64_t state = util::fnv1a64(token);
            for (double& x : v.values) {
                uint64_t r = detail::splitmix64(state);
                x += static_cast<double>(r >> 11) / static_cast<double>(1ULL << 53) * 2.0 - 1.0;
            }
        }
        return v;
    }

    static std::vector<std::string> tokenize(const std::string& text) {
        std::string cleaned;
        cleaned.reserve(text.size());
        for (char c : text) {
            if (std::isalnum(static_cast<unsigned char>(c)))
                cleaned.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            else
                cleaned.push_back(' ');
        }
        return util::split_whitespace(cleaned);
    }

    int dimension_;
};

// Embedding endpoint wire mapping, testable without a server.
inline nlohmann::json build_embedding_body(const std::vector<std::string>& texts,
                                           const std::string& model) {
    return nlohmann::json{{"input", texts}, {"model", model}};
}

inline std::vector<EmbeddingVector> parse_embedding_body(const std::string& body) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("data") || !j.at("data").is_array())
        throw Error(ErrorClass::BackendUnavailable, "malformed embedding body");
    std::vector<EmbeddingVector> out;
    for (const auto& item : j.at("data")) {
        EmbeddingVector v;
        v.values = item.value("embedding", std::vector<double>{});
        if (v.values.empty())
            throw Error(ErrorClass::BackendUnavailable, "embedding entry without values");
        out.push_back(std::move(v));
    }
    return out;
}

} // namespace saba::backend
