// occ: command-line driver for training, sweeps, ablations, risk checks and
// the interactive oracle service.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "occ/errors.hpp"
#include "occ/experiments.hpp"
#include "occ/run_config.hpp"
#include "occ/service.hpp"

namespace fs = std::filesystem;
using namespace occ;

namespace {

constexpr int kConfigExit = 2;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config, "Run config (JSON)");
    cmd->add_option("--seed", c.seed, "Seed for training and synthetic data");
    cmd->add_option("-o,--out", c.out, "Output directory");
    cmd->allow_extras();
    cmd->footer("Any config key can be set as --section.key value, e.g. --oracle.orientation B.");
}

// "--a.b value" and "--a.b=value" pairs left over by the parser.
std::vector<std::pair<std::string, std::string>> dotted_overrides(const std::vector<std::string>& extras) {
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& arg = extras[i];
        if (arg.rfind("--", 0) != 0 || arg.size() <= 2)
            throw ConfigError("unexpected argument '" + arg + "'");
        std::string key = arg.substr(2);
        if (const auto eq = key.find('='); eq != std::string::npos) {
            out.emplace_back(key.substr(0, eq), key.substr(eq + 1));
            continue;
        }
        if (key.find('.') == std::string::npos) throw ConfigError("unknown option '" + arg + "'");
        if (i + 1 >= extras.size()) throw ConfigError("missing value for '" + arg + "'");
        out.emplace_back(key, extras[++i]);
    }
    return out;
}

RunConfigFile resolve(const Common& c, const CLI::App* cmd) {
    auto overrides = dotted_overrides(cmd->remaining());
    if (!c.out.empty()) overrides.emplace_back("output.dir", nlohmann::json(c.out).dump());
    if (!c.config.empty() && !fs::exists(c.config))
        throw ConfigError("config file not found: " + c.config);
    RunConfigFile cfg = load_run_config(c.config, overrides);
    if (!c.out.empty()) cfg.output_dir = c.out;
    if (c.seed) {
        cfg.train.seed = *c.seed;
        if (cfg.synthetic) cfg.synthetic->seed = *c.seed;
    }
    return cfg;
}

std::vector<std::uint64_t> seed_list(const std::vector<std::uint64_t>& given, const RunConfigFile& cfg) {
    return given.empty() ? std::vector<std::uint64_t>{cfg.train.seed} : given;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << text;
}

std::string metrics_table(const RunRecord& r) {
    std::ostringstream out;
    out << std::left << std::setw(12) << "orientation" << std::right << std::setw(8) << "NMI"
        << std::setw(8) << "ARI" << std::setw(8) << "ACC" << '\n'
        << std::fixed << std::setprecision(3);
    for (auto [name, m] : {std::pair{"A", &r.final_a}, std::pair{"B", &r.final_b}}) {
        if (!*m) continue;
        out << std::left << std::setw(12) << name << std::right << std::setw(8) << (*m)->nmi
            << std::setw(8) << (*m)->ari << std::setw(8) << (*m)->acc << '\n';
    }
    return out.str();
}

void write_train_outputs(const RunConfigFile& cfg, const Dataset& data, const TrainResult& r) {
    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir);
    nlohmann::json record = to_json(r.record);
    record["run_config"] = to_json(cfg);
    record["run_config_hash"] = config_hash(cfg);
    record["dataset"] = data.provenance;
    write_text(dir / "run_record.json", record.dump(2) + "\n");
    {
        std::ofstream q(dir / "queries.jsonl");
        for (const auto& e : r.record.queries) q << to_json(e).dump() << '\n';
    }
    save_checkpoint(r.params, dir / "model.occ");
    r.store.save_jsonl(dir / "annotations.jsonl");
    const ForwardPass pass = embed(r.params, data);
    export_scatter(data, pass.zhat, r.record.assignment, dir / "scatter.csv");
    const std::string table = metrics_table(r.record);
    write_text(dir / "metrics.txt", table);
    std::cout << table;
}

std::vector<Strategy> parse_strategies(const std::vector<std::string>& names) {
    std::vector<Strategy> out;
    for (const auto& n : names) out.push_back(parse_strategy(n));
    return out;
}

std::atomic<bool> g_interrupted{false};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Oracle-guided contrastive clustering"};
    app.require_subcommand(1);

    Common common;

    auto* train_cmd = app.add_subcommand("train", "Train with a simulated oracle and write the run record");
    add_common(train_cmd, common);

    std::vector<double> budgets{0, 5, 10, 25, 100};
    std::vector<std::string> strategies{"csd", "random", "entropy"};
    std::vector<std::uint64_t> seeds;
    auto* sweep_cmd = app.add_subcommand("sweep-queries", "Strategy x budget grid, CSV of ACC");
    add_common(sweep_cmd, common);
    sweep_cmd->add_option("--budgets", budgets, "Budget percentages")->delimiter(',');
    sweep_cmd->add_option("--strategies", strategies, "csd, random, entropy")->delimiter(',');
    sweep_cmd->add_option("--seeds", seeds, "Seeds (default: the config seed)")->delimiter(',');

    std::string which = "spaces";
    auto* ablate_cmd = app.add_subcommand("ablate", "Contrastive-space or label-extension ablation");
    add_common(ablate_cmd, common);
    ablate_cmd->add_option("--which", which, "spaces | label-extension");
    ablate_cmd->add_option("--seeds", seeds, "Seeds (default: the config seed)")->delimiter(',');

    RiskCheckParams risk;
    std::string risk_out;
    auto* risk_cmd = app.add_subcommand("risk-check", "Monte-Carlo check of the active-risk bound");
    risk_cmd->add_option("--n", risk.n, "Target pairs");
    risk_cmd->add_option("--delta", risk.delta, "Failure probability");
    risk_cmd->add_option("--trials", risk.trials, "Monte-Carlo trials (>= 1000)");
    risk_cmd->add_option("--population", risk.population, "Pairs behind the expected risk");
    risk_cmd->add_option("--seed", risk.seed, "Seed");
    risk_cmd->add_option("-o,--out", risk_out, "Output directory");

    auto* serve_cmd = app.add_subcommand("serve", "Train with a human oracle over HTTP");
    add_common(serve_cmd, common);

    std::string data_out;
    auto* gen_cmd = app.add_subcommand("gen-data", "Write the configured synthetic dataset");
    add_common(gen_cmd, common);
    gen_cmd->add_option("--file", data_out, "Output file (.csv or .jsonl)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigExit;
    }

    try {
        if (*train_cmd) {
            const RunConfigFile cfg = resolve(common, train_cmd);
            const Dataset data = load_run_data(cfg);
            const TrainResult r = run_simulated(data, cfg);
            write_train_outputs(cfg, data, r);
            std::cerr << "run record written to " << (cfg.output_dir / "run_record.json").string() << '\n';
        } else if (*sweep_cmd) {
            const RunConfigFile cfg = resolve(common, sweep_cmd);
            const auto rows = sweep_queries(cfg, parse_strategies(strategies), budgets, seed_list(seeds, cfg));
            fs::create_directories(cfg.output_dir);
            std::ofstream csv(cfg.output_dir / "sweep.csv");
            write_sweep_csv(rows, csv);
            write_sweep_csv(rows, std::cout);
        } else if (*ablate_cmd) {
            const RunConfigFile cfg = resolve(common, ablate_cmd);
            const AblationMode mode = parse_ablation_mode(which);
            const auto rows = ablate(cfg, mode, seed_list(seeds, cfg));
            fs::create_directories(cfg.output_dir);
            const std::string table = ablation_table(rows);
            write_text(cfg.output_dir / ("ablation_" + which + ".txt"), table);
            nlohmann::json records = nlohmann::json::array();
            for (const auto& row : rows)
                records.push_back({{"variant", row.label}, {"seed", row.seed}, {"record", row.record}});
            write_text(cfg.output_dir / ("ablation_" + which + ".json"), records.dump(2) + "\n");
            std::cout << table;
        } else if (*risk_cmd) {
            const RiskCheckReport report = risk_check(risk);
            fs::path dir = risk_out;
            if (dir.empty()) {
                const char* env = std::getenv("OCC_OUT_DIR");
                dir = env && *env ? env : "occ_out";
            }
            fs::create_directories(dir);
            write_text(dir / "risk_report.json", report.json.dump(2) + "\n");
            std::ofstream csv(dir / "risk_deviations.csv");
            csv << "trial,deviation\n" << std::setprecision(17);
            for (std::size_t t = 0; t < report.deviations.size(); ++t)
                csv << t << ',' << report.deviations[t] << '\n';
            std::cout << report.json.dump(2) << '\n';
        } else if (*serve_cmd) {
            RunConfigFile cfg = resolve(common, serve_cmd);
            cfg.oracle.mode = "interactive";
            const Dataset data = load_run_data(cfg);
            QueryBroker broker(cfg.oracle.queue_capacity,
                               std::chrono::milliseconds(static_cast<long>(cfg.oracle.timeout_s * 1000)));
            RunStatus status;
            status.set_scatter(scatter_rows(data, data.features, std::vector<int>(data.size(), 0)));
            OracleService service(broker, status);
            service.start(cfg.oracle.bind, cfg.oracle.port);
            std::cerr << "serving on http://" << cfg.oracle.bind << ':' << service.port() << '\n';
            std::signal(SIGINT, [](int) { g_interrupted = true; });
            InteractiveOracle oracle(data, broker, status);
            TrainHooks hooks = status_hooks(status, data);
            auto on_batch = hooks.on_batch;
            hooks.on_batch = [on_batch](const TrainProgress& p) {
                if (g_interrupted) throw std::runtime_error("interrupted");
                on_batch(p);
            };
            const TrainResult r = train(data, &oracle, cfg.train, hooks);
            service.stop();
            write_train_outputs(cfg, data, r);
        } else if (*gen_cmd) {
            const RunConfigFile cfg = resolve(common, gen_cmd);
            save_dataset(load_run_data(cfg), data_out);
            std::cerr << "wrote " << data_out << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigExit;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kConfigExit;
    } catch (const InvalidInput& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kConfigExit;
    } catch (const StartupError& e) {
        std::cerr << "startup error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
