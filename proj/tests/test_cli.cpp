#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "detkit/dataset.hpp"
#include "fixtures.hpp"

using namespace detkit;
namespace fx = detkit::fixtures;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

const char* cli_path() { return std::getenv("DETKIT_CLI"); }

CliResult run_cli(const std::string& args, const std::string& env = {}) {
    const auto dir = fx::tmp_dir();
    const auto out = dir / "stdout.txt";
    const auto err = dir / "stderr.txt";
    const std::string cmd = (env.empty() ? "" : env + " ") + std::string(cli_path()) + " " + args +
                            " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WEXITSTATUS(status), slurp(out), slurp(err)};
}

fs::path write_fixture_annotations(const fs::path& dir) {
    json doc;
    doc["categories"] = {{{"id", 1}, {"name", "cat"}}, {{"id", 2}, {"name", "dog"}}};
    doc["images"] = json::array();
    doc["annotations"] = json::array();
    int ann_id = 1;
    for (int i = 1; i <= 4; ++i) {
        doc["images"].push_back(
            {{"id", i}, {"width", 640}, {"height", 480}, {"file_name", "img.jpg"}});
        for (int b = 0; b < i - 1; ++b)  // images with 0,1,2,3 boxes
            doc["annotations"].push_back({{"id", ann_id++},
                                          {"image_id", i},
                                          {"category_id", 1 + b % 2},
                                          {"bbox", {100.0 * b, 50, 80, 60}},
                                          {"area", 4800.0},
                                          {"iscrowd", 0}});
    }
    return fx::write_file(dir / "annotations.json", doc.dump());
}

}  // namespace

TEST_CASE("cli end-to-end surfaces" * doctest::skip(cli_path() == nullptr)) {
    const fs::path dir = fx::tmp_dir();
    const fs::path anns = write_fixture_annotations(dir);
    const fs::path out_dir = dir / "out";

    SUBCASE("ingest prints counts and writes stats plus a manifest") {
        const auto res =
            run_cli("ingest --annotations " + anns.string() + " --out-dir " + out_dir.string());
        CHECK(res.exit_code == 0);
        CHECK(res.out.find("4 images, 6 boxes, 1.5 boxes/image") != std::string::npos);
        CHECK(fs::exists(out_dir / "stats.csv"));
        CHECK(slurp(out_dir / "stats.csv").find("bucket,count") != std::string::npos);
        const auto manifest = json::parse(slurp(out_dir / "manifest.json"));
        CHECK(manifest.at("command") == "ingest");
        CHECK(manifest.at("input_digests").size() == 1);
    }

    SUBCASE("ingest on a missing file fails with exit 1 and a stderr message") {
        const auto res = run_cli("ingest --annotations /nope/missing.json");
        CHECK(res.exit_code == 1);
        CHECK_FALSE(res.err.empty());
    }

    SUBCASE("unknown flags are hard errors") {
        const auto res = run_cli("ingest --annotations " + anns.string() + " --bogus-flag 1");
        CHECK(res.exit_code != 0);
    }

    SUBCASE("help documents every subcommand") {
        const auto res = run_cli("--help");
        CHECK(res.exit_code == 0);
        for (const char* cmd : {"ingest", "merge-pseudo", "gen-instructions", "run-inference",
                                "evaluate", "diagnose"})
            CHECK(res.out.find(cmd) != std::string::npos);
    }

    SUBCASE("merge-pseudo with an empty pseudo list reports delta 0") {
        const auto pseudo = fx::write_file(dir / "pseudo.json", "[]");
        const auto res = run_cli("merge-pseudo --annotations " + anns.string() + " --pseudo " +
                                 pseudo.string() + " --out-dir " + out_dir.string());
        CHECK(res.exit_code == 0);
        CHECK(res.out.find("delta +0.00") != std::string::npos);
        CHECK(slurp(out_dir / "shift_report.csv").find("# mean_delta=0.0000") !=
              std::string::npos);
        CHECK(fs::exists(out_dir / "shift_report.svg"));
        CHECK(fs::exists(out_dir / "adjusted_annotations.json"));

        // adjusted output loads back with identical counts, all ground truth
        LoadReport report;
        const auto adjusted = load_scored_json(out_dir / "adjusted_annotations.json", &report);
        CHECK(adjusted.annotations.size() == 6);
    }

    SUBCASE("merge-pseudo with two disjoint pseudo boxes per image reports delta 2") {
        json pseudo = json::array();
        for (int i = 1; i <= 4; ++i) {
            pseudo.push_back({{"image_id", i}, {"category_id", 1},
                              {"bbox", {400, 10, 60, 60}}, {"score", 0.9}});
            pseudo.push_back({{"image_id", i}, {"category_id", 1},
                              {"bbox", {400, 300, 60, 60}}, {"score", 0.8}});
        }
        const auto pseudo_path = fx::write_file(dir / "pseudo2.json", pseudo.dump());
        const auto res = run_cli("merge-pseudo --annotations " + anns.string() + " --pseudo " +
                                 pseudo_path.string() + " --out-dir " + out_dir.string());
        CHECK(res.exit_code == 0);
        CHECK(res.out.find("delta +2.00") != std::string::npos);
    }

    SUBCASE("gen-instructions is bytewise deterministic for a fixed seed") {
        const fs::path out_a = dir / "gen_a";
        const fs::path out_b = dir / "gen_b";
        const std::string base = "gen-instructions --annotations " + anns.string() + " --seed 42";
        CHECK(run_cli(base + " --out-dir " + out_a.string()).exit_code == 0);
        CHECK(run_cli(base + " --out-dir " + out_b.string()).exit_code == 0);
        const auto bytes_a = slurp(out_a / "conversations.jsonl");
        CHECK_FALSE(bytes_a.empty());
        CHECK(bytes_a == slurp(out_b / "conversations.jsonl"));
    }

    SUBCASE("run-inference with the simulated model, then evaluate and diagnose") {
        const auto sim_cfg = fx::write_file(dir / "sim.toml",
                                            "seed = 7\nproposal_cap = 50\nmiss_rate = 0.0\n");
        const fs::path run_dir = dir / "run";
        const auto run = run_cli("run-inference --annotations " + anns.string() + " --simulate " +
                                 sim_cfg.string() + " --parallelism 2 --out-dir " +
                                 run_dir.string());
        CHECK(run.exit_code == 0);
        CHECK(fs::exists(run_dir / "predictions.json"));
        CHECK(fs::exists(run_dir / "run_report.json"));
        const auto report = json::parse(slurp(run_dir / "run_report.json"));
        CHECK(report.at("images") == 4);
        CHECK(report.at("requests") == 8);  // 4 images x 2 categories

        const fs::path eval_dir = dir / "eval";
        const auto eval = run_cli("evaluate --annotations " + anns.string() + " --predictions " +
                                  (run_dir / "predictions.json").string() + " --out-dir " +
                                  eval_dir.string());
        CHECK(eval.exit_code == 0);
        CHECK(eval.out.find("AP        1.0000") != std::string::npos);
        CHECK(fs::exists(eval_dir / "metrics.txt"));
        CHECK(fs::exists(eval_dir / "per_category.csv"));
        CHECK(fs::exists(eval_dir / "pr_curves.csv"));

        const fs::path diag_dir = dir / "diag";
        const auto diag = run_cli("diagnose --annotations " + anns.string() + " --predictions " +
                                  (run_dir / "predictions.json").string() + " --out-dir " +
                                  diag_dir.string());
        CHECK(diag.exit_code == 0);
        CHECK(fs::exists(diag_dir / "box_distribution.svg"));
        CHECK(diag.out.find("correct      6") != std::string::npos);
        CHECK(diag.out.find("missed       0") != std::string::npos);

        // perfect predictions: the two histogram columns are identical
        std::istringstream csv(slurp(diag_dir / "box_distribution.csv"));
        std::string line;
        bool saw_rows = false;
        while (std::getline(csv, line)) {
            if (line.empty() || line[0] == '#' || line[0] == 'b') continue;
            const auto first = line.find(',');
            const auto second = line.find(',', first + 1);
            CHECK(line.substr(first + 1, second - first - 1) == line.substr(second + 1));
            saw_rows = true;
        }
        CHECK(saw_rows);
    }

    SUBCASE("run-inference requires exactly one model source") {
        const auto res = run_cli("run-inference --annotations " + anns.string());
        CHECK(res.exit_code == 1);
        CHECK(res.err.find("endpoint") != std::string::npos);
    }

    SUBCASE("env var supplies the endpoint; total failure exits with code 2") {
        // one-image dataset keeps the dead-endpoint retries quick
        json doc;
        doc["categories"] = {{{"id", 1}, {"name", "cat"}}};
        doc["images"] = {{{"id", 1}, {"width", 64}, {"height", 64}, {"file_name", "x.jpg"}}};
        doc["annotations"] = {{{"id", 1}, {"image_id", 1}, {"category_id", 1},
                               {"bbox", {8, 8, 16, 16}}, {"area", 256.0}, {"iscrowd", 0}}};
        const auto tiny = fx::write_file(dir / "tiny.json", doc.dump());

        const auto res = run_cli("run-inference --annotations " + tiny.string() +
                                 " --timeout 0.2 --retries 0 --out-dir " +
                                 (dir / "dead").string(),
                                 "DETKIT_ENDPOINT=http://127.0.0.1:9");
        CHECK(res.exit_code == 2);
        CHECK(res.err.find("failure") != std::string::npos);
    }
}
