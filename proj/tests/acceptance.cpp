// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit when any
// fails. Experiment settings come from desk_defaults().

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "occ/experiments.hpp"
#include "occ/metrics.hpp"
#include "occ/query.hpp"
#include "occ/riskbound.hpp"
#include "support.hpp"

using namespace occ;

namespace {

constexpr std::uint64_t kSeeds = 5;
constexpr int kNeeded = 4;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s %-28s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Plain contrastive loss written from scratch: partner kernel against N times
// the kernel sum over every row.
double plain_contrastive(const ref::Mat& e, double tau) {
    const std::size_t two_n = e.size(), n = two_n / 2;
    double sum = 0;
    for (std::size_t r = 0; r < two_n; ++r) {
        double all = 0;
        for (const auto& q : e) all += ref::kernel(e[r], q, tau);
        sum += -std::log(ref::kernel(e[r], e[(r + n) % two_n], tau) / (static_cast<double>(n) * all));
    }
    return sum / static_cast<double>(two_n);
}

RunConfigFile experiment_base(std::uint64_t seed, char orientation, double budget) {
    RunConfigFile c = desk_defaults();
    c.train.seed = seed;
    c.synthetic->seed = seed;
    c.oracle.orientation = orientation;
    c.train.budget_fraction = budget;
    return c;
}

TrainResult run(const RunConfigFile& c) { return run_simulated(load_run_data(c), c); }

Outcome gradient() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0;
    std::size_t entries = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const ModelShape shape;
        const ModelParams params = init_params(shape, rng);
        const Tensor2 x = ref::random_tensor(8, shape.input_dim, rng);
        const QueryMatrix c = ref::random_query_matrix(4, 2.0, rng);
        const auto fd = ref::finite_difference_check(params, x, c, 0.5, 1.0);
        worst = std::max(worst, fd.max_rel);
        entries += fd.checked;
    }
    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << "max rel err " << worst << " over " << entries << " entries, " << secs << "s (need < 1e-4, < 60s)";
    return {worst < 1e-4 && secs < 60, d.str()};
}

Outcome degeneration() {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> pick_n(2, 16);
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = pick_n(rng);
        const Tensor2 z = ref::random_tensor(2 * n, 6, rng);
        const double active = active_instance_loss(z, QueryMatrix::zeros(n), 0.5);
        worst = std::max(worst, std::abs(active - plain_contrastive(ref::to_mat(z), 0.5)));
    }
    std::ostringstream d;
    d << "max |diff| " << worst << " on 100 batches (need <= 1e-12)";
    return {worst <= 1e-12, d.str()};
}

Outcome scalar_oracle() {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> pick_n(1, 4), pick_k(2, 3);
    double worst = 0;
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = pick_n(rng), k = pick_k(rng);
        const Tensor2 z = ref::random_tensor(2 * n, 3, rng);
        const Tensor2 y = ref::random_probabilities(2 * n, k, rng);
        const QueryMatrix c = ref::random_query_matrix(n, 3.0, rng);
        const auto b = total_loss(z, y, c, 0.5, 1.0);
        const auto zm = ref::to_mat(z), ym = ref::to_mat(y), cm = ref::query_mat(c);
        worst = std::max({worst, std::abs(b.rep_loss - ref::instance_loss(zm, cm, 0.5)),
                          std::abs(b.cluster_loss - ref::cluster_loss(ym, 1.0)),
                          std::abs(b.balance - ref::entropy(ym)),
                          std::abs(b.total - ref::total(zm, ym, cm, 0.5, 1.0))});
    }
    std::ostringstream d;
    d << "max |diff| " << worst << " on 200 cases (need <= 1e-10)";
    return {worst <= 1e-10, d.str()};
}

Outcome steering() {
    int good = 0;
    std::ostringstream d;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        bool ok = true;
        for (char o : {'A', 'B'}) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto r = run(experiment_base(seed, o, 0.25)).record;
            const MetricTriple& to = o == 'A' ? *r.final_a : *r.final_b;
            const MetricTriple& away = o == 'A' ? *r.final_b : *r.final_a;
            ok = ok && to.acc >= 0.95 && to.nmi >= 0.7 && away.acc <= 0.6 && seconds_since(t0) < 600;
            d << " " << o << seed << ":" << to.acc << "/" << to.nmi << "/" << away.acc;
        }
        good += ok;
    }
    return {good >= kNeeded, std::to_string(good) + "/5 seeds (ACC/NMI toward, ACC away)" + d.str()};
}

Outcome unsupervised() {
    int good = 0;
    std::ostringstream d;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        const auto r = run(experiment_base(seed, 'A', 0.0)).record;
        good += r.final_a->acc >= 0.9;
        d << " " << r.final_a->acc;
    }
    return {good >= kNeeded, std::to_string(good) + "/5 seeds ACC vs A >= 0.9:" + d.str()};
}

double personalized_acc(std::uint64_t seed, Strategy s, double budget) {
    RunConfigFile c = experiment_base(seed, 'B', budget);
    c.train.strategy = s;
    return run(c).record.final_b->acc;
}

Outcome query_efficiency() {
    std::ostringstream d;
    bool ok = true;
    for (double budget : {0.05, 0.10, 0.25}) {
        int good = 0;
        for (std::uint64_t seed = 0; seed < kSeeds; ++seed)
            good += personalized_acc(seed, Strategy::Csd, budget) >= personalized_acc(seed, Strategy::Random, budget);
        d << " " << budget * 100 << "%:" << good << "/5";
        ok = ok && good >= kNeeded;
    }
    double spread = 0;
    for (double budget : {0.0, 1.0})
        for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
            double lo = 1, hi = 0;
            for (Strategy s : {Strategy::Csd, Strategy::Random, Strategy::Entropy}) {
                const double a = personalized_acc(seed, s, budget);
                lo = std::min(lo, a);
                hi = std::max(hi, a);
            }
            spread = std::max(spread, hi - lo);
        }
    d << ", endpoint spread " << spread << " (need <= 0.02)";
    return {ok && spread <= 0.02, "CSD >= random" + d.str()};
}

Outcome ablations() {
    int spaces = 0, extension = 0;
    std::ostringstream d;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        RunConfigFile base = experiment_base(seed, 'B', 0.05);
        const auto sp = ablate(base, AblationMode::Spaces, {seed});
        const auto le = ablate(base, AblationMode::LabelExtension, {seed});
        // sp: R+A, R only, A only; le: LE on, LE off
        spaces += sp[0].metrics_b.acc >= std::max(sp[1].metrics_b.acc, sp[2].metrics_b.acc);
        extension += le[0].metrics_b.acc >= le[1].metrics_b.acc;
        d << " s" << seed << ":" << sp[0].metrics_b.acc << "/" << sp[1].metrics_b.acc << "/" << sp[2].metrics_b.acc
          << "," << le[0].metrics_b.acc << "/" << le[1].metrics_b.acc;
    }
    std::ostringstream head;
    head << "R+A >= max " << spaces << "/5, LE on >= off " << extension << "/5 (B ACC R+A/R/A,on/off)";
    return {spaces >= kNeeded && extension >= kNeeded, head.str() + d.str()};
}

Outcome optimal_sampling() {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> pick_n(1, 8);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    int violations = 0;
    double closed_form = 0;
    for (int v = 0; v < 100; ++v) {
        const int n = pick_n(rng);
        std::vector<double> l(n);
        for (double& x : l) x = u(rng);
        const auto star = optimal_sampling_distribution(l);
        double root_sum = 0;
        for (double x : l) root_sum += std::sqrt(x);
        for (int i = 0; i < n; ++i) closed_form = std::max(closed_form, std::abs(star[i] - std::sqrt(l[i]) / root_sum));
        const double best = d_p(l, star);
        for (int t = 0; t < 1000; ++t) {
            std::vector<double> q(n);
            double s = 0;
            for (double& x : q) s += x = u(rng);
            for (double& x : q) x /= s;
            violations += !(best <= d_p(l, q));
        }
    }
    std::ostringstream d;
    d << violations << " violations in 10^5 comparisons, closed-form max diff " << closed_form << " (need 0, <= 1e-12)";
    return {violations == 0 && closed_form <= 1e-12, d.str()};
}

Outcome coverage() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool ok = true;
    std::ostringstream d;
    for (double delta : {0.01, 0.05, 0.1})
        for (std::size_t n : {10u, 50u, 200u}) {
            std::vector<double> l(n);
            for (double& x : l) x = u(rng);
            const auto star = optimal_sampling_distribution(l);
            const auto rep = monte_carlo_coverage(l, star, delta, 10000, rng);
            ok = ok && rep.coverage >= 1.0 - delta;
            d << " d" << delta << "/n" << n << ":" << rep.coverage;
        }
    const double secs = seconds_since(t0);
    d << ", " << secs << "s";
    return {ok && secs < 120, "coverage >= 1-delta" + d.str()};
}

Outcome metrics() {
    std::mt19937_64 rng(15);
    std::uniform_int_distribution<int> size(1, 8), k(1, 3);
    int mismatches = 0;
    for (int t = 0; t < 500; ++t) {
        const int n = size(rng), kp = k(rng), kt = k(rng);
        std::uniform_int_distribution<int> cp(0, kp - 1), ct(0, kt - 1);
        std::vector<int> pred(n), truth(n);
        for (int i = 0; i < n; ++i) {
            pred[i] = cp(rng);
            truth[i] = ct(rng);
        }
        mismatches += std::abs(acc(pred, truth) - ref::brute_acc(pred, truth)) > 1e-12;
    }
    using V = std::vector<int>;
    const bool fixtures = std::abs(nmi(V{0, 0, 1, 1, 2}, V{0, 0, 1, 1, 2}) - 1.0) <= 1e-6 &&
                          std::abs(nmi(V{0, 0, 0, 0}, V{0, 1, 0, 1})) <= 1e-6 &&
                          std::abs(nmi(V{0, 0, 1, 1}, V{0, 1, 0, 1})) <= 1e-6 &&
                          std::abs(ari(V{0, 1, 1, 2}, V{5, 3, 3, 9}) - 1.0) <= 1e-6 &&
                          std::abs(ari(V{0, 0, 1, 1}, V{0, 1, 0, 1}) - -0.5) <= 1e-6 &&
                          std::abs(acc(V{0, 1, 1, 0, 1}, V{0, 0, 1, 1, 1}) - 0.6) <= 1e-6;
    return {mismatches == 0 && fixtures, std::to_string(mismatches) + " ACC mismatches in 500 cases, fixtures " +
                                             (fixtures ? "match" : "differ")};
}

}  // namespace

int main() {
    report("gradient-correctness", gradient);
    report("loss-degeneration", degeneration);
    report("scalar-oracle-equivalence", scalar_oracle);
    report("orientation-steering", steering);
    report("unsupervised-sanity", unsupervised);
    report("query-efficiency-ordering", query_efficiency);
    report("ablation-trends", ablations);
    report("optimal-sampling", optimal_sampling);
    report("bound-coverage", coverage);
    report("metrics-oracle", metrics);
    std::printf("%d failed\n", failures);
    return failures == 0 ? 0 : 1;
}
