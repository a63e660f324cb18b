#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "occ/errors.hpp"
#include "occ/experiments.hpp"
#include "occ/run_config.hpp"

using namespace occ;
namespace fs = std::filesystem;

namespace {

// The build bakes in the binary's path; the environment can override it.
const char* cli_path() {
    if (const char* p = std::getenv("OCC_CLI_PATH"); p && *p) return p;
#ifdef OCC_CLI_PATH
    return OCC_CLI_PATH;
#else
    return "occ";
#endif
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("occ_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Small enough to run in a second or two.
nlohmann::json small_doc() {
    return {{"data", {{"synthetic", {{"samples_per_class", 40}}}}},
            {"train", {{"epochs", 4}, {"batch_size", 32}}},
            {"query", {{"budget_fraction", 0.25}}}};
}

fs::path write_config(const fs::path& dir, const nlohmann::json& doc) {
    const auto p = dir / "run.json";
    std::ofstream(p) << doc.dump(2);
    return p;
}

int run(const std::string& args) {
    const std::string cmd = std::string(cli_path()) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::vector<std::string> lines(const fs::path& p) {
    std::vector<std::string> out;
    std::ifstream in(p);
    for (std::string l; std::getline(in, l);)
        if (!l.empty()) out.push_back(l);
    return out;
}

}  // namespace

TEST_CASE("run config parsing") {
    const auto c = run_config_from_json(small_doc());
    CHECK(c.synthetic->samples_per_class == 40);
    CHECK(c.train.epochs == 4);
    CHECK(c.train.learning_rate == 1e-3);
    CHECK(c.oracle.mode == "simulated");

    CHECK_THROWS_AS(run_config_from_json({{"bogus", 1}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json({{"train", {{"epochs", "many"}}}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json({{"oracle", {{"orientation", "C"}}}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json({{"query", {{"strategy", "oracle"}}}}), ConfigError);

    const auto again = run_config_from_json(to_json(c));
    CHECK(to_json(again) == to_json(c));
    CHECK(config_hash(again) == config_hash(c));
}

TEST_CASE("dot-path overrides") {
    nlohmann::json doc = small_doc();
    apply_override(doc, "oracle.orientation", "B");
    apply_override(doc, "query.budget_fraction", "0.1");
    apply_override(doc, "train.label_extension", "false");
    const auto c = run_config_from_json(doc);
    CHECK(c.oracle.orientation == 'B');
    CHECK(c.train.budget_fraction == 0.1);
    CHECK_FALSE(c.train.label_extension);
}

TEST_CASE("output directory from the environment") {
    const auto dir = scratch("env");
    const auto cfg = write_config(dir, small_doc());
    setenv("OCC_OUT_DIR", (dir / "from_env").c_str(), 1);
    CHECK(load_run_config(cfg, {}).output_dir == dir / "from_env");
    unsetenv("OCC_OUT_DIR");
    CHECK(load_run_config(cfg, {}).output_dir == "occ_out");
    CHECK_THROWS_AS(load_run_config(dir / "missing.json", {}), ConfigError);
}

TEST_CASE("train writes the run record and reports") {
    const auto dir = scratch("train");
    const auto cfg = write_config(dir, small_doc());
    REQUIRE(run("train -c " + cfg.string() + " -o " + (dir / "out").string()) == 0);
    for (const char* f : {"run_record.json", "queries.jsonl", "model.occ", "annotations.jsonl", "scatter.csv",
                          "metrics.txt"})
        CHECK(fs::exists(dir / "out" / f));
    const auto rec = read_json(dir / "out" / "run_record.json");
    CHECK(rec["assignment"].size() == 160);
    CHECK(rec["epochs"].size() == 4);
    CHECK(rec.contains("run_config_hash"));
    const auto queries = lines(dir / "out" / "queries.jsonl");
    CHECK(queries.size() == rec["queries_logged"].get<std::size_t>());
    const std::string metrics = slurp(dir / "out" / "metrics.txt");
    CHECK(metrics.find("NMI") != std::string::npos);
    CHECK(metrics.find("ACC") != std::string::npos);
}

TEST_CASE("configuration errors exit with status 2") {
    const auto dir = scratch("errors");
    CHECK(run("train -c " + (dir / "nope.json").string()) == 2);
    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK(run("train -c " + (dir / "broken.json").string()) == 2);
    const auto cfg = write_config(dir, small_doc());
    CHECK(run("train -c " + cfg.string() + " --train.epochs=-3") == 2);
    CHECK(run("no-such-command") == 2);
}

TEST_CASE("the orientation override changes the answers") {
    const auto dir = scratch("orient");
    const auto cfg = write_config(dir, small_doc());
    REQUIRE(run("train -c " + cfg.string() + " -o " + (dir / "a").string()) == 0);
    REQUIRE(run("train -c " + cfg.string() + " --oracle.orientation B -o " + (dir / "b").string()) == 0);
    const auto ra = read_json(dir / "a" / "run_record.json"), rb = read_json(dir / "b" / "run_record.json");
    CHECK(ra["run_config"]["oracle"]["orientation"] == "A");
    CHECK(rb["run_config"]["oracle"]["orientation"] == "B");
    CHECK(slurp(dir / "a" / "annotations.jsonl") != slurp(dir / "b" / "annotations.jsonl"));
}

TEST_CASE("sweep grid") {
    const auto dir = scratch("sweep");
    nlohmann::json doc = small_doc();
    doc["train"]["epochs"] = 2;
    const auto cfg = write_config(dir, doc);
    REQUIRE(run("sweep-queries -c " + cfg.string() + " --budgets 0,5,10,25 --strategies csd,random,entropy -o " +
                (dir / "out").string()) == 0);
    const auto rows = lines(dir / "out" / "sweep.csv");
    REQUIRE(rows.size() == 13);
    CHECK(rows[0] == "strategy,budget_pct,seed,ACC,NMI,ARI");
    std::vector<std::string> zero;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto first = rows[i].find(',');
        const auto second = rows[i].find(',', first + 1);
        if (std::stod(rows[i].substr(first + 1, second - first - 1)) == 0.0)
            zero.push_back(rows[i].substr(second));
    }
    REQUIRE(zero.size() == 3);
    CHECK(zero[0] == zero[1]);
    CHECK(zero[1] == zero[2]);
}

TEST_CASE("spaces ablation") {
    const auto dir = scratch("ablate");
    nlohmann::json doc = small_doc();
    doc["train"]["epochs"] = 2;
    const auto cfg = write_config(dir, doc);
    REQUIRE(run("ablate -c " + cfg.string() + " --which spaces -o " + (dir / "out").string()) == 0);
    const auto table = slurp(dir / "out" / "ablation_spaces.txt");
    for (const char* col : {"A:NMI", "A:ARI", "A:ACC", "B:NMI", "B:ARI", "B:ACC", "R+A", "R only", "A only"})
        CHECK(table.find(col) != std::string::npos);
    const auto j = read_json(dir / "out" / "ablation_spaces.json");
    REQUIRE(j.size() == 3);
    for (const auto& row : j) {
        if (row["label"] == "R only") CHECK(row["record"]["epochs"][0]["assign_loss"] == "excluded");
        if (row["label"] == "A only") CHECK(row["record"]["epochs"][0]["rep_loss"] == "excluded");
    }
    CHECK(run("ablate -c " + cfg.string() + " --which everything") == 2);
}

TEST_CASE("risk check") {
    const auto dir = scratch("risk");
    REQUIRE(run("risk-check --n 50 --delta 0.05 --trials 10000 -o " + dir.string()) == 0);
    const auto r = read_json(dir / "risk_report.json");
    CHECK(r["coverage"].get<double>() >= 0.95);
    CHECK(r["Dp_star"].get<double>() <= r["Dp_uniform"].get<double>());
    CHECK(r.contains("config_hash"));
    CHECK(r.contains("seed"));
    CHECK(lines(dir / "risk_deviations.csv").size() == 10001);
    CHECK(run("risk-check --trials 0 -o " + dir.string()) == 2);
    CHECK(run("risk-check --delta 1.5 -o " + dir.string()) == 2);
    CHECK(run("risk-check --delta 0 -o " + dir.string()) == 2);
}

TEST_CASE("gen-data writes a loadable file") {
    const auto dir = scratch("gen");
    const auto cfg = write_config(dir, small_doc());
    REQUIRE(run("gen-data -c " + cfg.string() + " --file " + (dir / "d.csv").string()) == 0);
    CHECK(lines(dir / "d.csv").size() == 161);
}
