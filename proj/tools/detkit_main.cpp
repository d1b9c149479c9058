#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "detkit/config_file.hpp"
#include "detkit/dataset.hpp"
#include "detkit/errors.hpp"
#include "detkit/evaluator.hpp"
#include "detkit/instructions.hpp"
#include "detkit/manifest.hpp"
#include "detkit/merge.hpp"
#include "detkit/model_client.hpp"
#include "detkit/orchestrator.hpp"
#include "detkit/report.hpp"

namespace fs = std::filesystem;
using namespace detkit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitPartialFailure = 2;

struct GlobalOptions {
    std::string out_dir = "out";
    std::uint64_t seed = 0;
};

fs::path ensure_out_dir(const GlobalOptions& global) {
    fs::path dir(global.out_dir);
    fs::create_directories(dir);
    return dir;
}

void print_warnings(const LoadReport& report) {
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
}

TokenCodecConfig::Mode codec_mode(const std::string& name) {
    if (name == "plain") return TokenCodecConfig::Mode::kPlain;
    if (name == "extra_vocab") return TokenCodecConfig::Mode::kExtraVocab;
    throw ConfigError("unknown codec mode '" + name + "' (expected plain or extra_vocab)");
}

// Shared codec flags for the subcommands that serialize or parse answers.
struct CodecOptions {
    std::string mode = "plain";
    int precision = 3;
    int coord_bins = 1000;
    int score_bins = 100;

    void attach(CLI::App* cmd) {
        cmd->add_option("--codec", mode, "Answer serialization mode: plain or extra_vocab")
            ->capture_default_str();
        cmd->add_option("--precision", precision, "Decimal places per coordinate (plain mode)")
            ->capture_default_str();
        cmd->add_option("--coord-bins", coord_bins, "Coordinate codebook size (extra_vocab mode)")
            ->capture_default_str();
        cmd->add_option("--score-bins", score_bins, "Score codebook size (extra_vocab mode)")
            ->capture_default_str();
    }

    TokenCodecConfig build() const {
        TokenCodecConfig cfg;
        cfg.mode = codec_mode(mode);
        cfg.coord_precision = precision;
        cfg.coord_bins = coord_bins;
        cfg.score_bins = score_bins;
        cfg.check();
        return cfg;
    }

    nlohmann::json to_json() const {
        return {{"codec", mode},
                {"precision", precision},
                {"coord_bins", coord_bins},
                {"score_bins", score_bins}};
    }
};

RunManifest start_manifest(const std::string& command, const GlobalOptions& global) {
    RunManifest manifest;
    manifest.command = command;
    manifest.seed = global.seed;
    manifest.started_at = iso8601_utc_now();
    return manifest;
}

void finish_manifest(RunManifest& manifest, const fs::path& out_dir) {
    manifest.finished_at = iso8601_utc_now();
    write_manifest(out_dir, manifest);
}

// --- subcommands ---------------------------------------------------------

int cmd_ingest(const GlobalOptions& global, const std::string& annotations) {
    const fs::path out_dir = ensure_out_dir(global);
    RunManifest manifest = start_manifest("ingest", global);
    manifest.input_digests[annotations] = file_digest(annotations);
    manifest.config = {{"annotations", annotations}};

    LoadReport load_report;
    const DetectionDataset ds = load_coco_json(annotations, &load_report);
    print_warnings(load_report);

    const ValidationReport validation = validate(ds);
    if (!validation.ok()) {
        for (const auto& issue : validation.issues) std::cerr << "invalid: " << issue.detail << '\n';
        return kExitInputError;
    }

    const BoxDistributionStats stats = dataset_stats(ds);
    char line[160];
    std::snprintf(line, sizeof(line), "%zu images, %zu boxes, %.1f boxes/image",
                  stats.total_images, stats.total_boxes, stats.mean_boxes_per_image);
    std::cout << line << '\n';

    write_stats_csv(out_dir / "stats.csv", stats);
    finish_manifest(manifest, out_dir);
    return kExitOk;
}

int cmd_merge_pseudo(const GlobalOptions& global, const std::string& annotations,
                     const std::string& pseudo_path, double iou_threshold, bool class_agnostic) {
    const fs::path out_dir = ensure_out_dir(global);
    RunManifest manifest = start_manifest("merge-pseudo", global);
    manifest.input_digests[annotations] = file_digest(annotations);
    manifest.input_digests[pseudo_path] = file_digest(pseudo_path);
    manifest.config = {{"annotations", annotations},
                       {"pseudo", pseudo_path},
                       {"iou_threshold", iou_threshold},
                       {"class_wise", !class_agnostic}};

    LoadReport load_report;
    const DetectionDataset ds = load_coco_json(annotations, &load_report);
    const std::vector<Detection> pseudo = load_pseudo_labels(pseudo_path, ds, &load_report);
    print_warnings(load_report);

    const ScoredDataset adjusted =
        adjust_dataset(ds, pseudo, iou_threshold, !class_agnostic,
                       std::max<std::size_t>(1, std::thread::hardware_concurrency()));
    const ShiftReport shift = distribution_shift_report(dataset_stats(ds), dataset_stats(adjusted));

    write_scored_json(out_dir / "adjusted_annotations.json", adjusted);
    write_shift_csv(out_dir / "shift_report.csv", shift);
    write_histogram_svg(out_dir / "shift_report.svg", "Boxes per image, before/after adjustment",
                        {{"before", shift.before.histogram}, {"after", shift.after.histogram}});

    char line[160];
    std::snprintf(line, sizeof(line), "mean boxes/image %.2f -> %.2f (delta %+.2f)",
                  shift.before.mean_boxes_per_image, shift.after.mean_boxes_per_image,
                  shift.mean_delta);
    std::cout << line << '\n';

    finish_manifest(manifest, out_dir);
    return kExitOk;
}

int cmd_gen_instructions(const GlobalOptions& global, const std::string& annotations,
                         std::size_t cap, const CodecOptions& codec_opts,
                         const std::string& out_name) {
    const fs::path out_dir = ensure_out_dir(global);
    RunManifest manifest = start_manifest("gen-instructions", global);
    manifest.input_digests[annotations] = file_digest(annotations);
    manifest.config = {{"annotations", annotations}, {"cap", cap}, {"out", out_name}};
    manifest.config.update(codec_opts.to_json());

    LoadReport load_report;
    const ScoredDataset ds = load_scored_json(annotations, &load_report);
    print_warnings(load_report);

    GenConfig cfg;
    cfg.seed = global.seed;
    cfg.round_cap = cap;
    cfg.codec = codec_opts.build();

    const auto records = generate_conversations(ds, cfg);
    export_conversations(records, out_dir / out_name);

    std::size_t non_empty = 0, turns = 0;
    for (const auto& r : records) {
        if (!r.turns.empty()) ++non_empty;
        turns += r.turns.size();
    }
    std::cout << non_empty << " records, " << turns << " turns -> "
              << (out_dir / out_name).string() << '\n';

    finish_manifest(manifest, out_dir);
    return kExitOk;
}

int cmd_run_inference(const GlobalOptions& global, const std::string& annotations,
                      std::string endpoint, const std::string& simulate_path,
                      const CodecOptions& codec_opts, std::size_t parallelism,
                      double timeout_seconds, std::size_t retries,
                      const std::vector<std::string>& sampling_kv) {
    const fs::path out_dir = ensure_out_dir(global);
    RunManifest manifest = start_manifest("run-inference", global);
    manifest.input_digests[annotations] = file_digest(annotations);

    // The environment variable wins over the flag so deployments can retarget
    // scripted runs without editing them; simulated runs ignore it.
    if (simulate_path.empty())
        if (const char* env = std::getenv("DETKIT_ENDPOINT")) endpoint = env;
    if (endpoint.empty() == simulate_path.empty())
        throw ConfigError("run-inference: exactly one of --endpoint/--simulate is required");

    LoadReport load_report;
    const DetectionDataset ds = load_coco_json(annotations, &load_report);
    print_warnings(load_report);

    const TokenCodecConfig codec = codec_opts.build();
    InferenceConfig inference;
    inference.sampling = nlohmann::json::object();
    for (const auto& kv : sampling_kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--sampling expects key=value, got '" + kv + "'");
        inference.sampling[kv.substr(0, eq)] = kv.substr(eq + 1);
    }

    std::unique_ptr<ModelClient> client;
    if (!simulate_path.empty()) {
        manifest.input_digests[simulate_path] = file_digest(simulate_path);
        SimModelConfig sim = load_sim_config(simulate_path);
        if (sim.seed == 0) sim.seed = global.seed;
        client = std::make_unique<SimulatedModel>(ds, sim, codec);
        manifest.config = {{"annotations", annotations},
                           {"simulate", simulate_path},
                           {"proposal_cap", sim.proposal_cap},
                           {"sim_seed", sim.seed}};
    } else {
        EndpointConfig endpoint_cfg;
        endpoint_cfg.base_url = endpoint;
        endpoint_cfg.timeout_seconds = timeout_seconds;
        endpoint_cfg.retries = retries;
        endpoint_cfg.sampling = inference.sampling;
        client = std::make_unique<HttpModelClient>(endpoint_cfg);
        manifest.config = {{"annotations", annotations}, {"endpoint", endpoint}};
    }
    manifest.config["parallelism"] = parallelism;
    manifest.config.update(codec_opts.to_json());

    const RunResult result = run_dataset(*client, ds, codec, inference, parallelism);

    write_detections_json(out_dir / "predictions.json", result.predictions);
    std::ofstream report_out(out_dir / "run_report.json", std::ios::binary);
    report_out << result.report.to_json().dump(2) << '\n';

    std::cout << result.report.images << " images, " << result.report.requests << " requests, "
              << result.predictions.size() << " detections, " << result.report.parse_errors
              << " parse errors, " << result.report.failures.size() << " failures\n";
    for (const auto& f : result.report.failures)
        std::cerr << "failure: image " << f.image_id << " category " << f.category_id << ": "
                  << f.error << '\n';

    finish_manifest(manifest, out_dir);
    return result.report.ok() ? kExitOk : kExitPartialFailure;
}

int cmd_evaluate(const GlobalOptions& global, const std::string& annotations,
                 const std::string& predictions_path, double score_threshold, bool has_threshold,
                 std::size_t max_dets, double pr_iou) {
    const fs::path out_dir = ensure_out_dir(global);
    RunManifest manifest = start_manifest("evaluate", global);
    manifest.input_digests[annotations] = file_digest(annotations);
    manifest.input_digests[predictions_path] = file_digest(predictions_path);
    manifest.config = {{"annotations", annotations},
                       {"predictions", predictions_path},
                       {"max_dets", max_dets},
                       {"pr_iou", pr_iou}};
    if (has_threshold) manifest.config["score_threshold"] = score_threshold;

    LoadReport load_report;
    const DetectionDataset ds = load_coco_json(annotations, &load_report);
    const std::vector<Detection> preds = load_detections_json(predictions_path, ds, &load_report);
    print_warnings(load_report);

    EvalConfig cfg;
    cfg.max_detections = max_dets;
    if (has_threshold) cfg.score_threshold = score_threshold;

    const EvalResult result = evaluate(preds, ds, cfg);
    write_metrics_text(std::cout, result);
    write_metrics_text(out_dir / "metrics.txt", result);
    write_per_category_csv(out_dir / "per_category.csv", result, ds.categories);

    std::vector<PRCurve> curves;
    for (const auto& cat : ds.categories) curves.push_back(pr_curve(preds, ds, cat.id, pr_iou, cfg));
    write_pr_csv(out_dir / "pr_curves.csv", curves, ds.categories);

    finish_manifest(manifest, out_dir);
    return kExitOk;
}

int cmd_diagnose(const GlobalOptions& global, const std::string& annotations,
                 const std::string& predictions_path) {
    const fs::path out_dir = ensure_out_dir(global);
    RunManifest manifest = start_manifest("diagnose", global);
    manifest.input_digests[annotations] = file_digest(annotations);
    manifest.input_digests[predictions_path] = file_digest(predictions_path);
    manifest.config = {{"annotations", annotations}, {"predictions", predictions_path}};

    LoadReport load_report;
    const DetectionDataset ds = load_coco_json(annotations, &load_report);
    const std::vector<Detection> preds = load_detections_json(predictions_path, ds, &load_report);
    print_warnings(load_report);

    const BoxDistributionStats gt_stats = dataset_stats(ds);
    const BoxDistributionStats pred_stats = prediction_stats(ds.images, preds);
    char means[96];
    std::snprintf(means, sizeof(means), "%.4f", gt_stats.mean_boxes_per_image);
    std::string gt_mean = means;
    std::snprintf(means, sizeof(means), "%.4f", pred_stats.mean_boxes_per_image);
    write_histogram_pair_csv(out_dir / "box_distribution.csv",
                             {"gt", gt_stats.histogram}, {"pred", pred_stats.histogram},
                             {{"gt_mean", gt_mean}, {"pred_mean", means}});
    write_histogram_svg(out_dir / "box_distribution.svg",
                        "Boxes per image, ground truth vs predictions",
                        {{"ground truth", gt_stats.histogram},
                         {"predictions", pred_stats.histogram}});

    const CorrectnessFlags flags = correctness_flags(preds, ds);
    std::ostringstream summary;
    summary << "correct      " << flags.correct << '\n'
            << "wrong_box    " << flags.wrong_box << '\n'
            << "wrong_label  " << flags.wrong_label << '\n'
            << "missed       " << flags.missed << '\n';
    std::cout << summary.str();
    std::ofstream flags_out(out_dir / "correctness.txt", std::ios::binary);
    flags_out << summary.str();

    finish_manifest(manifest, out_dir);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Detection data toolkit: pseudo-label merging, class-specific instruction "
                 "generation, per-category inference, and COCO-protocol evaluation"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "Read options from a key=value file");

    GlobalOptions global;
    app.add_option("--out-dir", global.out_dir, "Directory receiving every output file")
        ->capture_default_str();
    app.add_option("--seed", global.seed, "Base seed for all randomized steps")
        ->capture_default_str();

    // ingest
    std::string ingest_annotations;
    auto* ingest = app.add_subcommand("ingest", "Load annotations, print counts, write stats CSV");
    ingest->add_option("--annotations", ingest_annotations, "COCO-style annotation file")
        ->required();

    // merge-pseudo
    std::string merge_annotations, merge_pseudo;
    double merge_iou = 0.5;
    bool merge_class_agnostic = false;
    auto* merge = app.add_subcommand(
        "merge-pseudo", "Merge detector pseudo-labels into the ground truth and report the shift");
    merge->add_option("--annotations", merge_annotations, "COCO-style annotation file")->required();
    merge->add_option("--pseudo", merge_pseudo, "Pseudo-label file (COCO results format)")
        ->required();
    merge->add_option("--iou-threshold", merge_iou, "Merge suppression threshold")
        ->capture_default_str();
    merge->add_flag("--class-agnostic", merge_class_agnostic,
                    "Suppress across categories instead of within each category");

    // gen-instructions
    std::string gen_annotations, gen_out = "conversations.jsonl";
    std::size_t gen_cap = 80;
    CodecOptions gen_codec;
    auto* gen = app.add_subcommand("gen-instructions",
                                   "Build class-specific instruction conversations");
    gen->add_option("--annotations", gen_annotations,
                    "Annotation file (plain ground truth or adjusted output)")
        ->required();
    gen->add_option("--cap", gen_cap, "Maximum instruction rounds per image")
        ->capture_default_str();
    gen->add_option("--out", gen_out, "Output file name inside --out-dir")->capture_default_str();
    gen_codec.attach(gen);

    // run-inference
    std::string run_annotations, run_endpoint, run_simulate;
    std::size_t run_parallelism = 4, run_retries = 2;
    double run_timeout = 30.0;
    std::vector<std::string> run_sampling;
    CodecOptions run_codec;
    auto* run = app.add_subcommand("run-inference",
                                   "Query a model endpoint (or the simulated model) per category");
    run->add_option("--annotations,--dataset", run_annotations, "COCO-style annotation file")
        ->required();
    run->add_option("--endpoint", run_endpoint,
                    "Model endpoint base URL (DETKIT_ENDPOINT overrides)");
    run->add_option("--simulate", run_simulate, "Simulated-model config file (key = value lines)");
    run->add_option("--parallelism", run_parallelism, "Concurrent in-flight images")
        ->capture_default_str();
    run->add_option("--timeout", run_timeout, "Per-request timeout in seconds")
        ->capture_default_str();
    run->add_option("--retries", run_retries, "Additional attempts per failed request")
        ->capture_default_str();
    run->add_option("--sampling", run_sampling,
                    "Opaque sampling passthrough, key=value (repeatable)");
    run_codec.attach(run);

    // evaluate
    std::string eval_annotations, eval_predictions;
    double eval_score_threshold = 0.0, eval_pr_iou = 0.5;
    std::size_t eval_max_dets = 100;
    auto* eval = app.add_subcommand("evaluate", "COCO-protocol metrics for a prediction file");
    eval->add_option("--annotations", eval_annotations, "COCO-style annotation file")->required();
    eval->add_option("--predictions", eval_predictions, "Predictions (COCO results format)")
        ->required();
    auto* threshold_opt = eval->add_option("--score-threshold", eval_score_threshold,
                                           "Drop detections below this score before evaluating");
    eval->add_option("--max-dets", eval_max_dets, "Detections kept per image and category")
        ->capture_default_str();
    eval->add_option("--pr-iou", eval_pr_iou, "IoU threshold for the exported PR curves")
        ->capture_default_str();

    // diagnose
    std::string diag_annotations, diag_predictions;
    auto* diag = app.add_subcommand(
        "diagnose", "Box-distribution and per-box correctness report for a prediction file");
    diag->add_option("--annotations", diag_annotations, "COCO-style annotation file")->required();
    diag->add_option("--predictions", diag_predictions, "Predictions (COCO results format)")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) return cmd_ingest(global, ingest_annotations);
        if (merge->parsed())
            return cmd_merge_pseudo(global, merge_annotations, merge_pseudo, merge_iou,
                                    merge_class_agnostic);
        if (gen->parsed())
            return cmd_gen_instructions(global, gen_annotations, gen_cap, gen_codec, gen_out);
        if (run->parsed())
            return cmd_run_inference(global, run_annotations, run_endpoint, run_simulate,
                                     run_codec, run_parallelism, run_timeout, run_retries,
                                     run_sampling);
        if (eval->parsed())
            return cmd_evaluate(global, eval_annotations, eval_predictions, eval_score_threshold,
                                threshold_opt->count() > 0, eval_max_dets, eval_pr_iou);
        if (diag->parsed()) return cmd_diagnose(global, diag_annotations, diag_predictions);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInputError;
    }
    return kExitOk;
}
