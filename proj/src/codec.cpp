#include "detkit/codec.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "detkit/errors.hpp"

namespace detkit {

namespace {

constexpr double kEps = 1e-9;

void append_plain(std::string& out, double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    out += buf;
}

int quantize(double v, int bins) {
    return static_cast<int>(std::lround(v * static_cast<double>(bins - 1)));
}

double dequantize(int k, int bins) {
    return static_cast<double>(k) / static_cast<double>(bins - 1);
}

// --- parsing -----------------------------------------------------------

struct Cursor {
    std::string_view text;
    std::size_t pos = 0;

    bool done() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }

    void skip_ws() {
        while (!done() && (peek() == ' ' || peek() == '\t' || peek() == '\n' || peek() == '\r'))
            ++pos;
    }

    bool accept(char c) {
        if (!done() && peek() == c) {
            ++pos;
            return true;
        }
        return false;
    }
};

// number := [+-]? (digits [ "." digits* ] | "." digits)
bool parse_number(Cursor& cur, double& out) {
    const std::size_t start = cur.pos;
    std::size_t p = cur.pos;
    const std::string_view t = cur.text;
    if (p < t.size() && (t[p] == '+' || t[p] == '-')) ++p;
    std::size_t digits = 0;
    while (p < t.size() && t[p] >= '0' && t[p] <= '9') ++p, ++digits;
    if (p < t.size() && t[p] == '.') {
        ++p;
        while (p < t.size() && t[p] >= '0' && t[p] <= '9') ++p, ++digits;
    }
    if (digits == 0) return false;
    const auto res = std::from_chars(t.data() + start, t.data() + p, out);
    if (res.ec != std::errc{}) return false;
    cur.pos = p;
    return true;
}

// token := "<" name "_" digits ">", value looked up in the named codebook
bool parse_token(Cursor& cur, const TokenCodecConfig& cfg, bool score_field, double& out) {
    Cursor probe = cur;
    if (!probe.accept('<')) return false;
    const std::string_view want = score_field ? "score_" : "coord_";
    if (probe.text.substr(probe.pos, want.size()) != want) return false;
    probe.pos += want.size();
    int k = 0;
    std::size_t digits = 0;
    while (!probe.done() && probe.peek() >= '0' && probe.peek() <= '9') {
        k = k * 10 + (probe.peek() - '0');
        if (k > 10'000'000) return false;
        ++probe.pos;
        ++digits;
    }
    if (digits == 0 || !probe.accept('>')) return false;
    const int bins = score_field ? cfg.score_bins : cfg.coord_bins;
    if (k >= bins) return false;
    out = dequantize(k, bins);
    cur = probe;
    return true;
}

bool parse_field(Cursor& cur, const TokenCodecConfig& cfg, bool score_field, double& out) {
    if (cfg.mode == TokenCodecConfig::Mode::kExtraVocab)
        return parse_token(cur, cfg, score_field, out);
    return parse_number(cur, out);
}

// group := "[" field ("," field){4} "]"
bool parse_group(Cursor& cur, const TokenCodecConfig& cfg, double (&values)[5],
                 std::string& reason) {
    if (!cur.accept('[')) {
        reason = "expected '['";
        return false;
    }
    for (int i = 0; i < 5; ++i) {
        cur.skip_ws();
        if (!parse_field(cur, cfg, /*score_field=*/i == 4, values[i])) {
            reason = i == 4 ? "bad or missing score field"
                            : "bad or missing coordinate field " + std::to_string(i + 1);
            return false;
        }
        cur.skip_ws();
        if (i < 4 && !cur.accept(',')) {
            reason = "expected ',' after field " + std::to_string(i + 1);
            return false;
        }
    }
    if (!cur.accept(']')) {
        reason = "expected ']' after score";
        return false;
    }
    return true;
}

}  // namespace

void TokenCodecConfig::check() const {
    if (coord_precision < 1) throw ConfigError("codec: coord_precision must be >= 1");
    if (coord_bins < 2) throw ConfigError("codec: coord_bins must be >= 2");
    if (score_bins < 2) throw ConfigError("codec: score_bins must be >= 2");
}

std::string encode_answer(const std::vector<Detection>& dets, const ImageRecord& image,
                          const TokenCodecConfig& cfg) {
    cfg.check();
    if (dets.empty()) return std::string(kNoObjectsSentence);

    std::string out;
    bool first = true;
    for (const auto& d : dets) {
        const double norm[5] = {d.bbox.x1 / image.width, d.bbox.y1 / image.height,
                                d.bbox.x2 / image.width, d.bbox.y2 / image.height, d.score};
        for (double v : norm)
            if (v < -kEps || v > 1.0 + kEps)
                throw std::domain_error("encode_answer: normalized value outside [0,1]");

        if (!first) out += "; ";
        first = false;
        out += '[';
        for (int i = 0; i < 5; ++i) {
            if (i > 0) out += ", ";
            const double v = std::clamp(norm[i], 0.0, 1.0);
            if (cfg.mode == TokenCodecConfig::Mode::kPlain) {
                append_plain(out, v, cfg.coord_precision);
            } else if (i == 4) {
                out += "<score_" + std::to_string(quantize(v, cfg.score_bins)) + ">";
            } else {
                out += "<coord_" + std::to_string(quantize(v, cfg.coord_bins)) + ">";
            }
        }
        out += ']';
    }
    return out;
}

ParseOutcome parse_answer(std::string_view text, const ImageRecord& image, CategoryId category,
                          const TokenCodecConfig& cfg) {
    cfg.check();
    ParseOutcome outcome;

    std::size_t search_from = 0;
    while (true) {
        const std::size_t start = text.find('[', search_from);
        if (start == std::string_view::npos) break;

        Cursor cur{text, start};
        double v[5];
        std::string reason;
        if (!parse_group(cur, cfg, v, reason)) {
            outcome.errors.push_back({{start, cur.pos}, reason});
            search_from = start + 1;  // an inner '[' may still start a valid group
            continue;
        }

        double x1 = v[0] * image.width;
        double y1 = v[1] * image.height;
        double x2 = v[2] * image.width;
        double y2 = v[3] * image.height;
        if (x2 < x1) std::swap(x1, x2);
        if (y2 < y1) std::swap(y1, y2);
        const BBox box = BBox{x1, y1, x2, y2}.clamped(image.width, image.height);
        if (!box.valid()) {
            outcome.errors.push_back({{start, cur.pos}, "degenerate box"});
            search_from = cur.pos;
            continue;
        }

        Detection det;
        det.image_id = image.id;
        det.category_id = category;
        det.bbox = box;
        det.score = std::clamp(v[4], 0.0, 1.0);
        outcome.detections.push_back(det);
        search_from = cur.pos;
    }
    return outcome;
}

std::vector<std::string> vocab_tokens(const TokenCodecConfig& cfg) {
    cfg.check();
    if (cfg.mode != TokenCodecConfig::Mode::kExtraVocab)
        throw std::domain_error("vocab_tokens: codec is not in extra_vocab mode");
    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(cfg.coord_bins + cfg.score_bins));
    for (int k = 0; k < cfg.coord_bins; ++k) tokens.push_back("<coord_" + std::to_string(k) + ">");
    for (int k = 0; k < cfg.score_bins; ++k) tokens.push_back("<score_" + std::to_string(k) + ">");
    return tokens;
}

}  // namespace detkit
