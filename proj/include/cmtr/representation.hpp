#pragma once

#include <array>
#include <string>
#include <string_view>

#include "cmtr/error.hpp"

namespace cmtr {

// The three textual views of a document, each classified by its own model.
enum class Representation { original, extractive, abstractive };

inline constexpr std::array<Representation, 3> kAllRepresentations{
    Representation::original, Representation::extractive, Representation::abstractive};

inline std::string_view to_string(Representation r) {
    switch (r) {
        case Representation::original: return "original";
        case Representation::extractive: return "extractive";
        case Representation::abstractive: return "abstractive";
    }
    return "?";
}

// Accepts the full name or the one-letter tag (O, E, A).
inline Representation parse_representation(std::string_view s) {
    if (s == "original" || s == "O" || s == "o") return Representation::original;
    if (s == "extractive" || s == "E" || s == "e") return Representation::extractive;
    if (s == "abstractive" || s == "A" || s == "a") return Representation::abstractive;
    throw ConfigError("unknown representation '" + std::string(s) + "'");
}

}  // namespace cmtr
