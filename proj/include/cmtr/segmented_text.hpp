#pragma once

#include <string>
#include <vector>

namespace cmtr {

// Text made of segments that the tokenizer joins with sentinel tokens:
// <CLS> seg0 <SEP> seg1 <SEP> ... segN. Sentinels are never typed into the
// text itself, so a literal "[SEP]" inside a title stays plain text.
struct SegmentedText {
    std::vector<std::string> segments;

    bool operator==(const SegmentedText&) const = default;

    // Human-readable rendering used in logs and test diagnostics only.
    std::string display(const std::string& cls = "[CLS]", const std::string& sep = "[SEP]") const {
        std::string out = cls;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            if (i > 0) out += " " + sep;
            if (!segments[i].empty()) out += " " + segments[i];
        }
        return out;
    }
};

}  // namespace cmtr
