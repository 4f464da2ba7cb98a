#pragma once

#include <string>
#include <vector>

#include "radannot/common.hpp"

namespace radannot::text {

// Lowercases, splits on whitespace and strips residual non-alphabetic
// characters from token edges. Tokens that end up empty are dropped.
inline std::vector<std::string> tokenize(const std::string& s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    auto is_alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); };
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        std::size_t j = i;
        while (j < s.size() && !is_space(s[j])) ++j;
        if (j > i) {
            std::size_t a = i, b = j;
            while (a < b && !is_alpha(s[a])) ++a;
            while (b > a && !is_alpha(s[b - 1])) --b;
            if (b > a) out.push_back(str::lower(s.substr(a, b - a)));
        }
        i = j;
    }
    return out;
}

// All contiguous word windows of length n, space-joined, in order.
inline std::vector<std::string> word_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
    std::vector<std::string> out;
    if (n == 0 || tokens.size() < n) return out;
    out.reserve(tokens.size() - n + 1);
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string g = tokens[i];
        for (std::size_t k = 1; k < n; ++k) {
            g += ' ';
            g += tokens[i + k];
        }
        out.push_back(std::move(g));
    }
    return out;
}

} // namespace radannot::text
