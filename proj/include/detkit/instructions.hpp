#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "detkit/codec.hpp"
#include "detkit/prompt.hpp"
#include "detkit/rng.hpp"
#include "detkit/types.hpp"

namespace detkit {

enum class Polarity { kPositive, kNegative };

// One instruction round: a per-category detection prompt and its answer.
// Positive turns encode at least one box; negative turns carry the fixed
// no-objects sentence.
struct InstructionTurn {
    CategoryId category_id = 0;
    std::string category_name;
    Polarity polarity = Polarity::kPositive;
    std::string prompt;
    std::string answer;

    bool operator==(const InstructionTurn&) const = default;
};

// Ordered per-image conversation. Positive and negative turns are generated
// at a 1:1 ratio before the round cap; no category appears twice.
struct ConversationRecord {
    ImageId image_id = 0;
    std::string file_name;
    std::vector<InstructionTurn> turns;

    std::size_t positive_count() const;
    std::size_t negative_count() const;

    bool operator==(const ConversationRecord&) const = default;
};

struct GenConfig {
    std::uint64_t seed = 0;
    std::size_t round_cap = 80;  // 80 for COCO-style label sets, 365 for Object365-style
    TokenCodecConfig codec;
    std::string prompt_template = kDefaultPromptTemplate;
};

// Distinct categories of this image with at least one non-crowd box.
std::set<CategoryId> categories_present(ImageId image_id,
                                        const std::vector<ScoredAnnotation>& anns);

// n distinct categories sampled from the label set minus `present`,
// deterministic for a given rng state. Requests larger than the remainder
// are clipped; `clipped` reports that when non-null.
std::set<CategoryId> sample_negatives(const std::set<CategoryId>& present,
                                      const CategorySet& categories, std::size_t n, Rng& rng,
                                      bool* clipped = nullptr);

// One image's conversation: a positive turn per present category (its boxes
// encoded in randomized order) plus matched negatives, the whole turn list
// shuffled. On round-cap overflow positives are kept preferentially. Images
// with no usable annotations yield an empty record.
ConversationRecord build_conversation(const ImageRecord& image,
                                      const std::vector<ScoredAnnotation>& anns,
                                      const CategorySet& categories, const GenConfig& cfg,
                                      Rng& rng);

// Whole-dataset generation, ordered by ascending image id. A pure function
// of (dataset, config): reruns produce identical records.
std::vector<ConversationRecord> generate_conversations(const ScoredDataset& ds,
                                                       const GenConfig& cfg);

// Per-epoch re-randomization keyed by (seed, epoch, image_id): permutes the
// turns of each record and the box groups inside each positive answer. Turn
// and box multisets are unchanged.
std::vector<ConversationRecord> shuffle_epoch(const std::vector<ConversationRecord>& records,
                                              std::uint64_t epoch, std::uint64_t seed);

// Line-delimited records: {image_id, file_name, turns:[{category, polarity,
// prompt, answer}]}. Empty records are skipped.
void export_conversations(const std::vector<ConversationRecord>& records,
                          const std::filesystem::path& path);

std::vector<ConversationRecord> import_conversations(const std::filesystem::path& path,
                                                     const CategorySet& categories);

}  // namespace detkit
