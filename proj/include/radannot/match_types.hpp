#pragma once

#include <string>
#include <vector>

#include "radannot/common.hpp"

namespace radannot::match {

enum class Provenance { manual, rule, encoder, random_baseline };

inline const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::manual: return "manual";
        case Provenance::rule: return "rule";
        case Provenance::encoder: return "encoder";
        case Provenance::random_baseline: return "random-baseline";
    }
    return "?";
}

inline Provenance parse_provenance(const std::string& s, std::size_t line_no = 0) {
    if (s == "manual") return Provenance::manual;
    if (s == "rule") return Provenance::rule;
    if (s == "encoder") return Provenance::encoder;
    if (s == "random-baseline") return Provenance::random_baseline;
    std::string where = line_no ? " at line " + std::to_string(line_no) : "";
    throw DataError("unknown provenance '" + s + "'" + where);
}

// One weak-supervision unit: annotation `annotation_index` of report
// `report_id` is matched to sentence `sentence_index`. sentence_index of
// -1 marks an annotation the matcher left unmatched.
struct MatchedPair {
    std::string report_id;
    int annotation_index = 0;
    int sentence_index = 0;
    int label = 1; // 1 = matching pair, 0 = constructed non-match
    Provenance provenance = Provenance::rule;

    bool unmatched() const { return sentence_index < 0; }
};

} // namespace radannot::match
