#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "safeval/text.hpp"

namespace safeval::testing {

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("safeval_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string random_token(std::mt19937_64& rng, int max_len = 6) {
    std::uniform_int_distribution<int> len(1, max_len);
    std::uniform_int_distribution<int> ch(0, 25);
    std::string token;
    int n = len(rng);
    for (int i = 0; i < n; ++i) token += static_cast<char>('a' + ch(rng));
    return token;
}

// A bag of random tokens drawn from a small alphabet so collisions (shared
// tokens, repeats) actually happen.
inline NormalizedAnswer random_token_bag(std::mt19937_64& rng, int max_tokens = 6) {
    static const std::vector<std::string> pool = {
        "palace", "guard", "cover",  "queen", "tourist", "box",   "rifle", "london",
        "slip",   "fall",  "sentry", "march", "band",    "crowd", "street"};
    std::uniform_int_distribution<int> count(0, max_tokens);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    NormalizedAnswer bag;
    int n = count(rng);
    for (int i = 0; i < n; ++i) bag.tokens.push_back(pool[pick(rng)]);
    return bag;
}

}  // namespace safeval::testing
