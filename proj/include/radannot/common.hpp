#pragma once

// Shared plumbing: error taxonomy, deterministic RNG, hashing and
// little-endian binary I/O used by the persisted file formats.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace radannot {

// Base of all library errors. The CLI maps the two broad categories to
// distinct exit codes, so new error types should derive from one of them.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad or missing input data (malformed records, degenerate corpora, ...).
struct DataError : Error {
    using Error::Error;
};

// Numerical failure (NaN, dimension mismatch, underflow guard).
struct NumericalError : Error {
    using Error::Error;
};

struct EmptyAnnotation : DataError { using DataError::DataError; };
struct MalformedAnnotation : DataError { using DataError::DataError; };
struct NoUsableText : DataError { using DataError::DataError; };
struct BadRatios : DataError { using DataError::DataError; };
struct EmptyCorpus : DataError { using DataError::DataError; };
struct EmptySentence : DataError { using DataError::DataError; };
struct DegenerateLabels : DataError { using DataError::DataError; };
struct MissingGroundTruth : DataError { using DataError::DataError; };
struct NoEligiblePairs : DataError { using DataError::DataError; };
struct EmptySource : DataError { using DataError::DataError; };
struct EmptyTrainingSet : DataError { using DataError::DataError; };
struct BadConfig : DataError { using DataError::DataError; };
struct DimensionMismatch : NumericalError { using NumericalError::NumericalError; };
struct NaNGuard : NumericalError { using NumericalError::NumericalError; };

// Deterministic random source. All sampling goes through explicit
// arithmetic on the raw 64-bit stream so results do not depend on the
// standard library's unspecified distribution algorithms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n), n > 0; rejection sampling, no modulo bias
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // inclusive range
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return lo + std::int64_t(below(std::uint64_t(hi - lo + 1)));
    }

    double normal() {
        // Box-Muller, cached spare
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = uniform(-1.0, 1.0);
            v = uniform(-1.0, 1.0);
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        // Fisher-Yates
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = std::size_t(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// FNV-1a, used for artifact checksums in run manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

namespace io {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw DataError("unexpected end of binary stream");
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    write_u32(os, std::uint32_t(v));
    write_u32(os, std::uint32_t(v >> 32));
}

inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t lo = read_u32(is);
    std::uint64_t hi = read_u32(is);
    return lo | hi << 32;
}

inline void write_f64(std::ostream& os, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    write_u64(os, v);
}

inline double read_f64(std::istream& is) {
    std::uint64_t v = read_u64(is);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

inline void write_f32(std::ostream& os, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    write_u32(os, v);
}

inline float read_f32(std::istream& is) {
    std::uint32_t v = read_u32(is);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, std::uint32_t(s.size()));
    os.write(s.data(), std::streamsize(s.size()));
}

inline std::string read_string(std::istream& is) {
    std::uint32_t n = read_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw DataError("unexpected end of binary stream");
    return s;
}

} // namespace io

namespace str {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::string lower(std::string s) {
    for (char& c : s)
        if (c >= 'A' && c <= 'Z') c = char(c - 'A' + 'a');
    return s;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline std::string join(const std::vector<std::string>& v, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += v[i];
    }
    return out;
}

} // namespace str
} // namespace radannot
