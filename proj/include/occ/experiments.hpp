#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "occ/metrics.hpp"
#include "occ/query.hpp"
#include "occ/run_config.hpp"
#include "occ/trainer.hpp"

namespace occ {

/// Trains once on `data` with a simulated oracle along `config.oracle`
/// (no oracle when the mode is "none" or the budget is 0).
TrainResult run_simulated(const Dataset& data, const RunConfigFile& config);

struct SweepRow {
    Strategy strategy = Strategy::Csd;
    double budget_pct = 0.0;
    std::uint64_t seed = 0;
    MetricTriple metrics;  // against the oracle's orientation
};

/// Strategy x budget x seed grid. Data is regenerated per seed when synthetic.
std::vector<SweepRow> sweep_queries(const RunConfigFile& base, const std::vector<Strategy>& strategies,
                                    const std::vector<double>& budget_pcts,
                                    const std::vector<std::uint64_t>& seeds);
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);

enum class AblationMode { Spaces, LabelExtension };
AblationMode parse_ablation_mode(const std::string& name);

struct AblationRow {
    std::string label;  // "R+A", "R only", "A only", "LE on", "LE off"
    std::uint64_t seed = 0;
    MetricTriple metrics_a;
    MetricTriple metrics_b;
    nlohmann::json record;  // RunRecord JSON of the run
};

std::vector<AblationRow> ablate(const RunConfigFile& base, AblationMode mode,
                                const std::vector<std::uint64_t>& seeds);

/// One line per variant (averaged over seeds), NMI/ARI/ACC per orientation.
std::string ablation_table(const std::vector<AblationRow>& rows);

struct RiskCheckParams {
    std::size_t n = 50;
    double delta = 0.05;
    std::size_t trials = 10000;
    std::size_t population = 2000;  // pairs the expected risk is taken over
    std::uint64_t seed = 0;

    void validate() const;
};

struct RiskCheckReport {
    nlohmann::json json;
    std::vector<double> deviations;
};

/// Coverage of the bound under p*, D_p of p* against uniform, and the
/// three-term decomposition for one draw.
RiskCheckReport risk_check(const RiskCheckParams& params);

}  // namespace occ
