#include "occ/experiments.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "occ/errors.hpp"
#include "occ/riskbound.hpp"

namespace occ {

TrainResult run_simulated(const Dataset& data, const RunConfigFile& config) {
    if (config.oracle.mode == "interactive")
        throw ConfigError("interactive oracle runs go through the serve command");
    if (config.oracle.mode == "none" || config.train.budget_fraction == 0.0)
        return train(data, nullptr, config.train);
    if (!data.has_orientations())
        throw ConfigError("simulated oracle needs orientation labels in the data");
    SimulatedOracle oracle(data, data.map(config.oracle.orientation));
    return train(data, &oracle, config.train);
}

namespace {

RunConfigFile with_seed(RunConfigFile c, std::uint64_t seed) {
    c.train.seed = seed;
    if (c.synthetic) c.synthetic->seed = seed;
    return c;
}

MetricTriple personalized(const TrainResult& r, char orientation) {
    const auto& m = orientation == 'A' ? r.record.final_a : r.record.final_b;
    if (!m) throw ConfigError("run has no orientation labels to evaluate against");
    return *m;
}

}  // namespace

std::vector<SweepRow> sweep_queries(const RunConfigFile& base, const std::vector<Strategy>& strategies,
                                    const std::vector<double>& budget_pcts,
                                    const std::vector<std::uint64_t>& seeds) {
    for (double b : budget_pcts)
        if (!(b >= 0.0 && b <= 100.0)) throw ConfigError("budget percentages must lie in [0, 100]");
    std::vector<SweepRow> rows;
    for (std::uint64_t seed : seeds) {
        const RunConfigFile seeded = with_seed(base, seed);
        const Dataset data = load_run_data(seeded);
        for (Strategy s : strategies)
            for (double pct : budget_pcts) {
                RunConfigFile c = seeded;
                c.train.strategy = s;
                c.train.budget_fraction = pct / 100.0;
                c.train.eval_every = 0;
                const TrainResult r = run_simulated(data, c);
                rows.push_back({s, pct, seed, personalized(r, c.oracle.orientation)});
            }
    }
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
    out << "strategy,budget_pct,seed,ACC,NMI,ARI\n";
    out << std::setprecision(10);
    for (const auto& r : rows)
        out << to_string(r.strategy) << ',' << r.budget_pct << ',' << r.seed << ',' << r.metrics.acc
            << ',' << r.metrics.nmi << ',' << r.metrics.ari << '\n';
}

AblationMode parse_ablation_mode(const std::string& name) {
    if (name == "spaces") return AblationMode::Spaces;
    if (name == "label-extension") return AblationMode::LabelExtension;
    throw ConfigError("ablation must be spaces or label-extension, got '" + name + "'");
}

std::vector<AblationRow> ablate(const RunConfigFile& base, AblationMode mode,
                                const std::vector<std::uint64_t>& seeds) {
    struct Variant {
        std::string label;
        bool rep, assign, extension;
    };
    std::vector<Variant> variants;
    const bool le = base.train.label_extension;
    if (mode == AblationMode::Spaces)
        variants = {{"R+A", true, true, le}, {"R only", true, false, le}, {"A only", false, true, le}};
    else
        variants = {{"LE on", true, true, true}, {"LE off", true, true, false}};

    std::vector<AblationRow> rows;
    for (std::uint64_t seed : seeds) {
        const RunConfigFile seeded = with_seed(base, seed);
        const Dataset data = load_run_data(seeded);
        for (const auto& v : variants) {
            RunConfigFile c = seeded;
            if (mode == AblationMode::Spaces) {
                c.train.terms.representation = v.rep;
                c.train.terms.assignment = v.assign;
            }
            c.train.label_extension = v.extension;
            const TrainResult r = run_simulated(data, c);
            if (!r.record.final_a || !r.record.final_b)
                throw ConfigError("ablation needs data with both orientation labels");
            rows.push_back({v.label, seed, *r.record.final_a, *r.record.final_b, to_json(r.record)});
        }
    }
    return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
    std::vector<std::string> order;
    std::map<std::string, std::pair<std::array<double, 6>, int>> sums;
    for (const auto& r : rows) {
        auto [it, fresh] = sums.try_emplace(r.label);
        if (fresh) order.push_back(r.label);
        auto& [s, count] = it->second;
        const double v[6] = {r.metrics_a.nmi, r.metrics_a.ari, r.metrics_a.acc,
                             r.metrics_b.nmi, r.metrics_b.ari, r.metrics_b.acc};
        for (int k = 0; k < 6; ++k) s[k] += v[k];
        ++count;
    }
    std::ostringstream out;
    out << std::left << std::setw(10) << "variant" << std::right;
    for (const char* o : {"A", "B"})
        for (const char* m : {"NMI", "ARI", "ACC"}) out << std::setw(9) << (std::string(o) + ":" + m);
    out << '\n' << std::fixed << std::setprecision(3);
    for (const auto& label : order) {
        const auto& [s, count] = sums.at(label);
        out << std::left << std::setw(10) << label << std::right;
        for (double v : s) out << std::setw(9) << v / count;
        out << '\n';
    }
    return out.str();
}

void RiskCheckParams::validate() const {
    if (n < 1) throw ConfigError("risk-check n must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    if (trials < 1000) throw ConfigError("trials must be >= 1000");
    if (population < n) throw ConfigError("population must be >= n");
}

RiskCheckReport risk_check(const RiskCheckParams& params) {
    params.validate();
    std::seed_seq seq{params.seed, std::uint64_t{5}};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // The target pairs are the first n of a larger population whose mean
    // stands in for the expected risk.
    std::vector<double> population(params.population);
    for (double& l : population) l = unit(rng);
    // p* needs strictly positive losses.
    for (double& l : population) l = std::max(l, 1e-12);
    const std::vector<double> losses(population.begin(), population.begin() + params.n);
    double expected = 0.0;
    for (double l : population) expected += l;
    expected /= static_cast<double>(population.size());

    const auto p_star = optimal_sampling_distribution(losses);
    const std::vector<double> uniform(params.n, 1.0 / static_cast<double>(params.n));
    const double dp_star = d_p(losses, p_star);
    const double dp_uniform = d_p(losses, uniform);

    const CoverageReport cov = monte_carlo_coverage(losses, p_star, params.delta, params.trials, rng);

    std::vector<char> queried(params.n);
    for (std::size_t z = 0; z < params.n; ++z) queried[z] = unit(rng) < p_star[z];
    const RiskTerms terms = risk_decomposition({losses, p_star}, expected, queried);

    nlohmann::json params_json = {{"n", params.n},
                                  {"delta", params.delta},
                                  {"trials", params.trials},
                                  {"population", params.population},
                                  {"seed", params.seed}};
    RiskCheckReport report;
    report.json = {{"params", params_json},
                   {"config_hash", fnv1a(params_json.dump())},
                   {"seed", params.seed},
                   {"coverage", cov.coverage},
                   {"target_coverage", 1.0 - params.delta},
                   {"coverage_ok", cov.coverage >= 1.0 - params.delta},
                   {"bound", cov.bound},
                   {"mean_target_risk", terms.target_mean},
                   {"mean_extended_risk", cov.mean_extended},
                   {"extended_stderr", cov.extended_stderr},
                   {"Dp_star", dp_star},
                   {"Dp_uniform", dp_uniform},
                   {"optimal_ok", dp_star <= dp_uniform},
                   {"terms",
                    {{"A_excess", terms.excess},
                     {"B_extended", terms.extended},
                     {"C_active", terms.active}}}};
    report.deviations = cov.deviations;
    return report;
}

}  // namespace occ
