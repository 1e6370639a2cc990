#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "pleio/gwas.hpp"
#include "pleio/rng.hpp"

namespace pleio {

// Six-component mixture over true per-SNP effects (gamma_j, alpha_j):
//   pi1*q      relevant + balanced pleiotropy
//   pi1*(1-q)  relevant, no pleiotropy
//   pi2*q      null + balanced pleiotropy
//   pi2*(1-q)  null                        (pi2 = 1 - pi1 - pi3)
//   pi3*r      directional: alpha ~ N(mu_y, tau_y2)
//   pi3*(1-r)  correlated: shared factor A_j added to both gamma and alpha
struct ScenarioConfig {
    std::string id = "scenario";
    std::size_t p_snps = 200000;
    double pi1 = 0.02;
    double pi3 = 0.0;
    double q = 0.0;
    double r = 0.0;
    double mu_x = 0.0;
    double mu_y = 0.01;
    double tau_x2 = 2e-5;
    double tau_y2 = 2e-5;
    double s2 = 2e-5;
    double n_x = 200000;
    double n_y = 0;  // 0 means n_x / 2
    double beta = 0.5;
    double lambda_ei = 5.4513;
    double lambda_mei = 4.0556;
    double eta = 0.5;
    double alpha_level = 0.05;
    std::size_t replicates = 1000;

    double sigma_x() const { return 1.0 / std::sqrt(n_x); }
    double sigma_y() const { return 1.0 / std::sqrt(n_y > 0 ? n_y : n_x / 2.0); }
    void validate() const;  // throws ConfigError
};

struct EffectDraw {
    double gamma = 0.0;
    double alpha = 0.0;
    int component = 4;  // 1..6 per the mixture order above
};

std::vector<EffectDraw> sample_effects(const ScenarioConfig& cfg, const RngStream& stream);

// Summary-level data with exact standard errors; pairs come out in the
// major-allele reference coding (synthetic eaf >= 0.5).
std::vector<HarmonizedPair> gen_summary(const std::vector<EffectDraw>& effects,
                                        const ScenarioConfig& cfg, const RngStream& stream);

struct ReplicateRecord {
    static constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
    double p_ei = kNaN;
    double z_ei = kNaN;
    double p_mei_major = kNaN;
    double p_mei_normal = kNaN;
    double p_combined = kNaN;
    bool ok_ei = false;   // false means the method was skipped this replicate
    bool ok_mei = false;
    std::size_t n_sel_ei = 0;
    std::size_t n_sel_mei = 0;
    double kappa_hat = kNaN;
    double beta_rivw = kNaN;
    double z_me_major = kNaN;
    double z_me_normal = kNaN;
    double lambda_rc_major = kNaN;
    double lambda_rc_normal = kNaN;
    // Closed-form expected numerator from the realized selected true effects.
    double h1_expected_major = kNaN;
    double h1_expected_normal = kNaN;
    std::string skip_reason;
};

// Deterministic given (cfg, seed, replicate_index) regardless of threading.
ReplicateRecord run_replicate(const ScenarioConfig& cfg, std::uint64_t seed,
                              std::uint64_t replicate_index);

struct MethodRate {
    std::string method;
    double rate = 0.0;
    double mc_se = 0.0;
    std::size_t n_used = 0;
    std::size_t n_skipped = 0;
};

struct ExperimentReport {
    std::string scenario_id;
    std::vector<MethodRate> rates;
    double mean_n_sel_ei = 0.0;
    double mean_n_sel_mei = 0.0;
    double mean_kappa = 0.0;
    std::vector<std::string> warnings;
    std::string to_json() const;
};

ExperimentReport aggregate(const ScenarioConfig& cfg,
                           const std::vector<ReplicateRecord>& records);

// Runs all replicates of one scenario, fanning out over threads; the record
// vector is indexed by replicate so aggregation is order-independent.
std::vector<ReplicateRecord> run_scenario(const ScenarioConfig& cfg, std::uint64_t seed,
                                          unsigned threads = 1);

std::vector<ExperimentReport> run_experiment(const std::vector<ScenarioConfig>& grid,
                                             std::uint64_t master_seed,
                                             unsigned threads = 1);

// Per-scenario seed so grids stay reproducible independent of ordering noise.
std::uint64_t scenario_seed(std::uint64_t master_seed, std::size_t scenario_index);

// INI-style grid: one [section] per scenario, keys mirroring ScenarioConfig.
std::vector<ScenarioConfig> parse_scenario_grid(std::istream& in);

void write_reports_tsv(std::ostream& out, const std::vector<ExperimentReport>& reports);

}  // namespace pleio
