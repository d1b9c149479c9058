#include "detkit/instructions.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <thread>

#include <json.hpp>

#include "detkit/errors.hpp"
#include "detkit/parallel.hpp"

namespace detkit {

using nlohmann::json;

namespace {

constexpr std::uint64_t kStreamConvGen = 0xC0;
constexpr std::uint64_t kStreamEpoch = 0xE0;

std::vector<std::string> split_groups(const std::string& answer) {
    std::vector<std::string> groups;
    std::size_t pos = 0;
    while (pos <= answer.size()) {
        const std::size_t sep = answer.find("; ", pos);
        if (sep == std::string::npos) {
            groups.push_back(answer.substr(pos));
            break;
        }
        groups.push_back(answer.substr(pos, sep - pos));
        pos = sep + 2;
    }
    return groups;
}

std::string join_groups(const std::vector<std::string>& groups) {
    std::string out;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (i > 0) out += "; ";
        out += groups[i];
    }
    return out;
}

}  // namespace

std::string build_prompt(const std::string& category_name, const std::string& tmpl) {
    const std::size_t pos = tmpl.find(kCategoryPlaceholder);
    if (pos == std::string::npos)
        throw ConfigError("prompt template is missing the " + std::string(kCategoryPlaceholder) +
                          " placeholder");
    std::string out = tmpl;
    out.replace(pos, std::string(kCategoryPlaceholder).size(), category_name);
    return out;
}

std::size_t ConversationRecord::positive_count() const {
    return static_cast<std::size_t>(std::count_if(turns.begin(), turns.end(), [](const auto& t) {
        return t.polarity == Polarity::kPositive;
    }));
}

std::size_t ConversationRecord::negative_count() const {
    return turns.size() - positive_count();
}

std::set<CategoryId> categories_present(ImageId image_id,
                                        const std::vector<ScoredAnnotation>& anns) {
    std::set<CategoryId> present;
    for (const auto& a : anns)
        if (a.image_id == image_id && !a.iscrowd) present.insert(a.category_id);
    return present;
}

std::set<CategoryId> sample_negatives(const std::set<CategoryId>& present,
                                      const CategorySet& categories, std::size_t n, Rng& rng,
                                      bool* clipped) {
    std::vector<CategoryId> remaining;
    for (const auto& c : categories)
        if (!present.count(c.id)) remaining.push_back(c.id);

    if (clipped) *clipped = n > remaining.size();
    n = std::min(n, remaining.size());

    // Partial Fisher-Yates: the first n slots end up with the sample.
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.next_index(remaining.size() - i);
        std::swap(remaining[i], remaining[j]);
    }
    return {remaining.begin(), remaining.begin() + static_cast<std::ptrdiff_t>(n)};
}

ConversationRecord build_conversation(const ImageRecord& image,
                                      const std::vector<ScoredAnnotation>& anns,
                                      const CategorySet& categories, const GenConfig& cfg,
                                      Rng& rng) {
    ConversationRecord record;
    record.image_id = image.id;
    record.file_name = image.file_name;

    const std::set<CategoryId> present = categories_present(image.id, anns);
    const std::size_t n = present.size();
    const std::size_t positive_quota = std::min(n, cfg.round_cap);
    const std::size_t negative_quota = std::min(n, cfg.round_cap - positive_quota);

    std::size_t positives_made = 0;
    for (const auto& cat : categories) {
        if (positives_made == positive_quota) break;
        if (!present.count(cat.id)) continue;

        std::vector<Detection> boxes;
        for (const auto& a : anns)
            if (a.image_id == image.id && a.category_id == cat.id && !a.iscrowd)
                boxes.push_back({a.image_id, a.category_id, a.bbox, a.score});
        rng.shuffle(boxes);

        InstructionTurn turn;
        turn.category_id = cat.id;
        turn.category_name = cat.name;
        turn.polarity = Polarity::kPositive;
        turn.prompt = build_prompt(cat.name, cfg.prompt_template);
        turn.answer = encode_answer(boxes, image, cfg.codec);
        record.turns.push_back(std::move(turn));
        ++positives_made;
    }

    const std::set<CategoryId> negatives =
        sample_negatives(present, categories, negative_quota, rng);
    for (const auto& cat : categories) {
        if (!negatives.count(cat.id)) continue;
        InstructionTurn turn;
        turn.category_id = cat.id;
        turn.category_name = cat.name;
        turn.polarity = Polarity::kNegative;
        turn.prompt = build_prompt(cat.name, cfg.prompt_template);
        turn.answer = encode_answer({}, image, cfg.codec);
        record.turns.push_back(std::move(turn));
    }

    rng.shuffle(record.turns);
    return record;
}

std::vector<ConversationRecord> generate_conversations(const ScoredDataset& ds,
                                                       const GenConfig& cfg) {
    std::vector<const ImageRecord*> images;
    images.reserve(ds.images.size());
    for (const auto& im : ds.images) images.push_back(&im);
    std::sort(images.begin(), images.end(),
              [](const ImageRecord* a, const ImageRecord* b) { return a->id < b->id; });

    std::map<ImageId, std::vector<ScoredAnnotation>> by_image;
    for (const auto& a : ds.annotations) by_image[a.image_id].push_back(a);

    // Per-image builds are independent (each derives its own rng stream);
    // slots keep the output in image-id order at any worker count.
    std::vector<ConversationRecord> records(images.size());
    static const std::vector<ScoredAnnotation> kNone;
    parallel_for(images.size(), std::thread::hardware_concurrency(), [&](std::size_t i) {
        const ImageRecord* im = images[i];
        Rng rng(derive_seed(cfg.seed, kStreamConvGen, static_cast<std::uint64_t>(im->id)));
        const auto it = by_image.find(im->id);
        records[i] = build_conversation(*im, it == by_image.end() ? kNone : it->second,
                                        ds.categories, cfg, rng);
    });
    return records;
}

std::vector<ConversationRecord> shuffle_epoch(const std::vector<ConversationRecord>& records,
                                              std::uint64_t epoch, std::uint64_t seed) {
    std::vector<ConversationRecord> out = records;
    for (auto& record : out) {
        Rng rng(derive_seed(seed, kStreamEpoch, epoch, static_cast<std::uint64_t>(record.image_id)));
        rng.shuffle(record.turns);
        for (auto& turn : record.turns) {
            if (turn.polarity != Polarity::kPositive) continue;
            auto groups = split_groups(turn.answer);
            rng.shuffle(groups);
            turn.answer = join_groups(groups);
        }
    }
    return out;
}

void export_conversations(const std::vector<ConversationRecord>& records,
                          const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& record : records) {
        if (record.turns.empty()) continue;
        json turns = json::array();
        for (const auto& t : record.turns)
            turns.push_back({{"category", t.category_name},
                             {"polarity", t.polarity == Polarity::kPositive ? "positive" : "negative"},
                             {"prompt", t.prompt},
                             {"answer", t.answer}});
        const json line = {{"image_id", record.image_id},
                           {"file_name", record.file_name},
                           {"turns", std::move(turns)}};
        out << line.dump() << '\n';
    }
}

std::vector<ConversationRecord> import_conversations(const std::filesystem::path& path,
                                                     const CategorySet& categories) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    std::map<std::string, CategoryId> by_name;
    for (const auto& c : categories) by_name[c.name] = c.id;

    std::vector<ConversationRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what(),
                             e.byte);
        }
        ConversationRecord record;
        record.image_id = doc.at("image_id").get<ImageId>();
        record.file_name = doc.value("file_name", std::string{});
        for (const auto& t : doc.at("turns")) {
            InstructionTurn turn;
            turn.category_name = t.at("category").get<std::string>();
            const auto it = by_name.find(turn.category_name);
            if (it == by_name.end())
                throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                      ": unknown category " + turn.category_name);
            turn.category_id = it->second;
            turn.polarity = t.at("polarity").get<std::string>() == "positive"
                                ? Polarity::kPositive
                                : Polarity::kNegative;
            turn.prompt = t.at("prompt").get<std::string>();
            turn.answer = t.at("answer").get<std::string>();
            record.turns.push_back(std::move(turn));
        }
        records.push_back(std::move(record));
    }
    return records;
}

}  // namespace detkit
