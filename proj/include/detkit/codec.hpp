#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "detkit/types.hpp"

namespace detkit {

// Fixed answer for categories with no boxes; also what an empty detection
// list encodes to.
inline constexpr std::string_view kNoObjectsSentence =
    "There are no objects of this category in the image.";

// Serialization modes for coordinates and confidence scores: plain decimal
// text, or reserved tokens drawn from fixed-size coordinate/score codebooks.
struct TokenCodecConfig {
    enum class Mode { kPlain, kExtraVocab };

    Mode mode = Mode::kPlain;
    int coord_precision = 3;  // decimal places, plain mode
    int coord_bins = 1000;    // extra_vocab mode
    int score_bins = 100;     // extra_vocab mode

    void check() const;  // throws ConfigError on invalid values
};

struct ParseSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct ParseIssue {
    ParseSpan span;
    std::string reason;
};

// Parsing never fails as a whole: well-formed groups become detections,
// malformed fragments become issues.
struct ParseOutcome {
    std::vector<Detection> detections;
    std::vector<ParseIssue> errors;
};

// Renders detections as answer text. Each box becomes one bracket group of
// four coordinates (normalized to [0,1] by the image size) plus the score;
// groups are joined with "; ". An empty list renders the no-objects
// sentence. Throws std::domain_error when a score or normalized coordinate
// falls outside [0,1].
std::string encode_answer(const std::vector<Detection>& dets, const ImageRecord& image,
                          const TokenCodecConfig& cfg);

// Extracts every well-formed bracket group from untrusted model text,
// skipping and reporting malformed fragments (resynchronizing at the next
// '['). Coordinates are de-normalized to pixels, clamped to the image,
// reordered if inverted; the query category is attached. Box order follows
// text order.
ParseOutcome parse_answer(std::string_view text, const ImageRecord& image,
                          CategoryId category, const TokenCodecConfig& cfg);

// The reserved token strings of the extra-vocab codebooks, coordinate bins
// first then score bins. Throws std::domain_error in plain mode.
std::vector<std::string> vocab_tokens(const TokenCodecConfig& cfg);

}  // namespace detkit
