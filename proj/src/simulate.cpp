#include "pleio/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "pleio/egger.hpp"
#include "pleio/mei.hpp"
#include "pleio/rivw.hpp"
#include "pleio/stats.hpp"

namespace pleio {

void ScenarioConfig::validate() const {
    if (p_snps == 0) throw ConfigError(id + ": p_snps must be positive");
    if (pi1 < 0 || pi3 < 0 || pi1 + pi3 > 1.0)
        throw ConfigError(id + ": mixture proportions must be in [0,1] with pi1 + pi3 <= 1");
    if (q < 0 || q > 1 || r < 0 || r > 1)
        throw ConfigError(id + ": q and r must lie in [0,1]");
    if (tau_x2 < 0 || tau_y2 < 0 || s2 < 0)
        throw ConfigError(id + ": variances must be nonnegative");
    if (n_x < 1 || (n_y != 0 && n_y < 1))
        throw ConfigError(id + ": sample sizes must be >= 1");
    if (lambda_ei <= 0 || lambda_mei <= 0 || eta <= 0)
        throw ConfigError(id + ": lambda_ei, lambda_mei and eta must be positive");
    if (alpha_level <= 0 || alpha_level >= 1)
        throw ConfigError(id + ": alpha_level must lie in (0,1)");
    if (replicates == 0) throw ConfigError(id + ": replicates must be positive");
}

namespace {

// Stream ids carved out per replicate; one stream per random ingredient so
// draws can be indexed by SNP and skipped without losing alignment.
enum StreamRole : std::uint64_t {
    kEffects = 0,         // four indexed draws per SNP, see draw_effect
    kGammaHatNoise = 1,
    kSelectionNoise = 2,
    kOutcomeNoise = 3,
    kRolesPerReplicate = 4,
};

struct MixtureCuts {
    double c1, c2, c3, c4, c5;
};

MixtureCuts cuts_for(const ScenarioConfig& cfg) {
    const double pi2 = 1.0 - cfg.pi1 - cfg.pi3;
    MixtureCuts c{};
    c.c1 = cfg.pi1 * cfg.q;
    c.c2 = cfg.pi1;
    c.c3 = cfg.pi1 + pi2 * cfg.q;
    c.c4 = cfg.pi1 + pi2;
    c.c5 = cfg.pi1 + pi2 + cfg.pi3 * cfg.r;
    return c;
}

// One SNP uses four indexed draws: component uniform, gamma normal, alpha
// normal, shared-factor normal. Unused draws are skipped, not consumed.
EffectDraw draw_effect(const ScenarioConfig& cfg, const MixtureCuts& cuts,
                       const RngStream& stream, std::uint64_t j) {
    const std::uint64_t base = 4 * j;
    const double u = stream.uniform_at(base);
    const double tau_x = std::sqrt(cfg.tau_x2);
    const double tau_y = std::sqrt(cfg.tau_y2);
    EffectDraw d;
    if (u < cuts.c1) {
        d.component = 1;
        d.gamma = cfg.mu_x + tau_x * stream.normal_at(base + 1);
        d.alpha = tau_y * stream.normal_at(base + 2);
    } else if (u < cuts.c2) {
        d.component = 2;
        d.gamma = cfg.mu_x + tau_x * stream.normal_at(base + 1);
    } else if (u < cuts.c3) {
        d.component = 3;
        d.alpha = tau_y * stream.normal_at(base + 2);
    } else if (u < cuts.c4) {
        d.component = 4;
    } else if (u < cuts.c5) {
        d.component = 5;
        d.gamma = cfg.mu_x + tau_x * stream.normal_at(base + 1);
        d.alpha = cfg.mu_y + tau_y * stream.normal_at(base + 2);
    } else {
        d.component = 6;
        const double shared = std::sqrt(cfg.s2) * stream.normal_at(base + 3);
        d.gamma = cfg.mu_x + tau_x * stream.normal_at(base + 1) + shared;
        d.alpha = tau_y * stream.normal_at(base + 2) + shared;
    }
    return d;
}

}  // namespace

std::vector<EffectDraw> sample_effects(const ScenarioConfig& cfg, const RngStream& stream) {
    cfg.validate();
    const MixtureCuts cuts = cuts_for(cfg);
    std::vector<EffectDraw> effects(cfg.p_snps);
    for (std::uint64_t j = 0; j < cfg.p_snps; ++j)
        effects[j] = draw_effect(cfg, cuts, stream, j);
    return effects;
}

std::vector<HarmonizedPair> gen_summary(const std::vector<EffectDraw>& effects,
                                        const ScenarioConfig& cfg, const RngStream& stream) {
    const double sx = cfg.sigma_x();
    const double sy = cfg.sigma_y();
    std::vector<HarmonizedPair> pairs(effects.size());
    char buf[32];
    for (std::size_t j = 0; j < effects.size(); ++j) {
        HarmonizedPair& p = pairs[j];
        std::snprintf(buf, sizeof(buf), "snp%08zu", j + 1);
        p.snp_id = buf;
        p.gamma_hat = effects[j].gamma + sx * stream.normal_at(3 * j);
        p.sigma_x = sx;
        p.Gamma_hat = cfg.beta * effects[j].gamma + effects[j].alpha +
                      sy * stream.normal_at(3 * j + 1);
        p.sigma_y = sy;
        // Already major-coded: synthetic effect-allele frequency >= 0.5.
        p.eaf_exposure = 0.5 + 0.4999 * stream.uniform_at(3 * j + 2);
        p.orientation = Orientation::AsGiven;
    }
    return pairs;
}

ReplicateRecord run_replicate(const ScenarioConfig& cfg, std::uint64_t seed,
                              std::uint64_t replicate_index) {
    cfg.validate();
    const std::uint64_t base = replicate_index * kRolesPerReplicate;
    const RngStream effects(seed, base + kEffects);
    const RngStream ghat_noise(seed, base + kGammaHatNoise);
    const RngStream sel_noise(seed, base + kSelectionNoise);
    const RngStream out_noise(seed, base + kOutcomeNoise);

    const double sx = cfg.sigma_x();
    const double sy = cfg.sigma_y();
    const MixtureCuts cuts = cuts_for(cfg);

    struct Selected {
        double gamma_hat, Gamma_hat, gamma, alpha;
    };
    std::vector<Selected> mei_sel;
    std::vector<double> ei_gamma_hat, ei_Gamma_hat;
    mei_sel.reserve(1024);

    for (std::uint64_t j = 0; j < cfg.p_snps; ++j) {
        const EffectDraw eff = draw_effect(cfg, cuts, effects, j);
        const double gamma_hat = eff.gamma + sx * ghat_noise.normal_at(j);
        const double zx = gamma_hat / sx;

        const bool ei_keep = std::fabs(zx) > cfg.lambda_ei;
        const double z_noise = cfg.eta * sel_noise.normal_at(j);
        const bool mei_keep = std::fabs(zx + z_noise) - cfg.lambda_mei > 0.0;
        if (!ei_keep && !mei_keep) continue;

        const double Gamma_hat =
            cfg.beta * eff.gamma + eff.alpha + sy * out_noise.normal_at(j);
        if (ei_keep) {
            ei_gamma_hat.push_back(gamma_hat);
            ei_Gamma_hat.push_back(Gamma_hat);
        }
        if (mei_keep) mei_sel.push_back({gamma_hat, Gamma_hat, eff.gamma, eff.alpha});
    }

    ReplicateRecord rec;
    rec.n_sel_ei = ei_gamma_hat.size();
    rec.n_sel_mei = mei_sel.size();

    // EI test: normal-allele orientation, plain Egger regression.
    try {
        std::vector<double> sy_vec(ei_gamma_hat.size(), sy);
        for (std::size_t j = 0; j < ei_gamma_hat.size(); ++j) {
            if (ei_gamma_hat[j] < 0.0) {
                ei_gamma_hat[j] = -ei_gamma_hat[j];
                ei_Gamma_hat[j] = -ei_Gamma_hat[j];
            }
        }
        const EggerResult egger = egger_fit(ei_gamma_hat, ei_Gamma_hat, sy_vec);
        rec.p_ei = egger.p_value;
        rec.z_ei = egger.z_e;
        rec.ok_ei = true;
    } catch (const StatError& e) {
        rec.skip_reason += std::string("ei: ") + e.what() + "; ";
    }

    // MEI family on the rerandomized selection.
    try {
        const std::size_t m = mei_sel.size();
        if (m < 3) throw InsufficientInstruments("mei: fewer than 3 selected SNPs");
        const SelectionConfig sel_cfg{cfg.lambda_mei, cfg.eta};

        std::vector<double> g_rb(m), s2_rb(m), G_major(m), g_rb_normal(m), G_normal(m);
        std::vector<double> sy_vec(m, sy), sx_vec(m, sx);
        std::vector<double> true_g_major(m), true_a_major(m), true_g_normal(m),
            true_a_normal(m);
        for (std::size_t j = 0; j < m; ++j) {
            const RBEstimate rb = rao_blackwell(mei_sel[j].gamma_hat, sx, sel_cfg);
            g_rb[j] = rb.gamma_rb;
            s2_rb[j] = rb.sigma2_rb;
            G_major[j] = mei_sel[j].Gamma_hat;
            true_g_major[j] = mei_sel[j].gamma;
            true_a_major[j] = mei_sel[j].alpha;
            const double flip = (mei_sel[j].gamma_hat < 0.0) ? -1.0 : 1.0;
            g_rb_normal[j] = flip * rb.gamma_rb;
            G_normal[j] = flip * mei_sel[j].Gamma_hat;
            true_g_normal[j] = flip * mei_sel[j].gamma;
            true_a_normal[j] = flip * mei_sel[j].alpha;
        }

        const RivwResult rivw = rivw_estimate(g_rb, s2_rb, G_major, sy_vec, sx_vec);
        rec.kappa_hat = rivw.kappa_hat;
        rec.beta_rivw = rivw.beta_hat;

        const MeiResult major = mei_statistic(g_rb, s2_rb, G_major, sy_vec, rivw,
                                              CodingScheme::MajorAllele);
        const MeiResult normal = mei_statistic(g_rb_normal, s2_rb, G_normal, sy_vec, rivw,
                                               CodingScheme::NormalAllele);
        const CombinedResult combined = combined_test(major, normal, sy_vec);

        rec.p_mei_major = major.p_value;
        rec.p_mei_normal = normal.p_value;
        rec.p_combined = combined.p_value;
        rec.z_me_major = major.z_me;
        rec.z_me_normal = normal.z_me;
        rec.lambda_rc_major = major.lambda_rc;
        rec.lambda_rc_normal = normal.lambda_rc;
        rec.h1_expected_major =
            h1_expected_numerator(true_g_major, true_a_major, sy_vec).expected_numerator;
        rec.h1_expected_normal =
            h1_expected_numerator(true_g_normal, true_a_normal, sy_vec).expected_numerator;
        rec.ok_mei = true;
    } catch (const StatError& e) {
        rec.skip_reason += std::string("mei: ") + e.what() + "; ";
    }
    return rec;
}

std::vector<ReplicateRecord> run_scenario(const ScenarioConfig& cfg, std::uint64_t seed,
                                          unsigned threads) {
    cfg.validate();
    std::vector<ReplicateRecord> records(cfg.replicates);
    if (threads <= 1) {
        for (std::size_t r = 0; r < cfg.replicates; ++r)
            records[r] = run_replicate(cfg, seed, r);
        return records;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t r = next.fetch_add(1);
            if (r >= cfg.replicates) break;
            records[r] = run_replicate(cfg, seed, r);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return records;
}

namespace {

MethodRate rate_of(const std::string& name, const std::vector<ReplicateRecord>& records,
                   double alpha, double ReplicateRecord::*p, bool ReplicateRecord::*ok) {
    MethodRate mr;
    mr.method = name;
    std::size_t rejected = 0;
    for (const auto& rec : records) {
        if (!(rec.*ok)) {
            ++mr.n_skipped;
            continue;
        }
        ++mr.n_used;
        if (rec.*p < alpha) ++rejected;
    }
    if (mr.n_used > 0) {
        mr.rate = static_cast<double>(rejected) / static_cast<double>(mr.n_used);
        mr.mc_se = std::sqrt(mr.rate * (1.0 - mr.rate) / static_cast<double>(mr.n_used));
    }
    return mr;
}

}  // namespace

ExperimentReport aggregate(const ScenarioConfig& cfg,
                           const std::vector<ReplicateRecord>& records) {
    ExperimentReport rep;
    rep.scenario_id = cfg.id;
    rep.rates = {
        rate_of("ei", records, cfg.alpha_level, &ReplicateRecord::p_ei,
                &ReplicateRecord::ok_ei),
        rate_of("mei_major", records, cfg.alpha_level, &ReplicateRecord::p_mei_major,
                &ReplicateRecord::ok_mei),
        rate_of("mei_normal", records, cfg.alpha_level, &ReplicateRecord::p_mei_normal,
                &ReplicateRecord::ok_mei),
        rate_of("mei_combined", records, cfg.alpha_level, &ReplicateRecord::p_combined,
                &ReplicateRecord::ok_mei),
    };
    double sum_ei = 0.0, sum_mei = 0.0, sum_kappa = 0.0;
    std::size_t n_kappa = 0;
    for (const auto& rec : records) {
        sum_ei += static_cast<double>(rec.n_sel_ei);
        sum_mei += static_cast<double>(rec.n_sel_mei);
        if (rec.ok_mei) {
            sum_kappa += rec.kappa_hat;
            ++n_kappa;
        }
    }
    const double n = static_cast<double>(records.size());
    rep.mean_n_sel_ei = sum_ei / n;
    rep.mean_n_sel_mei = sum_mei / n;
    rep.mean_kappa = (n_kappa > 0) ? sum_kappa / static_cast<double>(n_kappa) : 0.0;
    for (const auto& mr : rep.rates) {
        if (mr.n_skipped * 10 > records.size())
            rep.warnings.push_back(mr.method + ": more than 10% of replicates skipped (" +
                                   std::to_string(mr.n_skipped) + "/" +
                                   std::to_string(records.size()) + ")");
    }
    return rep;
}

std::uint64_t scenario_seed(std::uint64_t master_seed, std::size_t scenario_index) {
    // splitmix64 finalizer over (master, index)
    std::uint64_t z = master_seed + (scenario_index + 1) * 0x9e3779b97f4a7c15ULL;
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

std::vector<ExperimentReport> run_experiment(const std::vector<ScenarioConfig>& grid,
                                             std::uint64_t master_seed, unsigned threads) {
    if (grid.empty()) throw ConfigError("run_experiment: empty scenario grid");
    std::vector<ExperimentReport> reports;
    reports.reserve(grid.size());
    for (std::size_t s = 0; s < grid.size(); ++s) {
        const auto records = run_scenario(grid[s], scenario_seed(master_seed, s), threads);
        reports.push_back(aggregate(grid[s], records));
    }
    return reports;
}

std::vector<ScenarioConfig> parse_scenario_grid(std::istream& in) {
    std::vector<ScenarioConfig> grid;
    std::unordered_set<std::string> names;
    ScenarioConfig* current = nullptr;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        if (line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[' && line.back() == ']') {
            ScenarioConfig cfg;
            cfg.id = line.substr(1, line.size() - 2);
            if (cfg.id.empty() || !names.insert(cfg.id).second)
                throw ConfigError("scenario grid line " + std::to_string(lineno) +
                                  ": empty or duplicate section name");
            grid.push_back(cfg);
            current = &grid.back();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos || current == nullptr)
            throw ConfigError("scenario grid line " + std::to_string(lineno) +
                              ": expected key=value inside a [section]");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return (b == std::string::npos) ? std::string{} : s.substr(b, e - b + 1);
        };
        key = strip(key);
        value = strip(value);
        double num = 0.0;
        try {
            num = std::stod(value);
        } catch (...) {
            throw ConfigError("scenario grid line " + std::to_string(lineno) +
                              ": non-numeric value for '" + key + "'");
        }
        if (key == "p_snps") current->p_snps = static_cast<std::size_t>(num);
        else if (key == "pi1") current->pi1 = num;
        else if (key == "pi3") current->pi3 = num;
        else if (key == "q") current->q = num;
        else if (key == "r") current->r = num;
        else if (key == "mu_x") current->mu_x = num;
        else if (key == "mu_y") current->mu_y = num;
        else if (key == "tau_x2") current->tau_x2 = num;
        else if (key == "tau_y2") current->tau_y2 = num;
        else if (key == "s2") current->s2 = num;
        else if (key == "n_x") current->n_x = num;
        else if (key == "n_y") current->n_y = num;
        else if (key == "beta") current->beta = num;
        else if (key == "lambda_ei") current->lambda_ei = num;
        else if (key == "lambda_mei") current->lambda_mei = num;
        else if (key == "eta") current->eta = num;
        else if (key == "alpha_level") current->alpha_level = num;
        else if (key == "replicates") current->replicates = static_cast<std::size_t>(num);
        else
            throw ConfigError("scenario grid line " + std::to_string(lineno) +
                              ": unknown key '" + key + "'");
    }
    if (grid.empty()) throw ConfigError("scenario grid: no [section] found");
    for (const auto& cfg : grid) cfg.validate();
    return grid;
}

std::string ExperimentReport::to_json() const {
    nlohmann::json j;
    j["scenario"] = scenario_id;
    j["rates"] = nlohmann::json::array();
    for (const auto& mr : rates)
        j["rates"].push_back({{"method", mr.method},
                              {"rate", mr.rate},
                              {"mc_se", mr.mc_se},
                              {"n_used", mr.n_used},
                              {"n_skipped", mr.n_skipped}});
    j["mean_n_sel_ei"] = mean_n_sel_ei;
    j["mean_n_sel_mei"] = mean_n_sel_mei;
    j["mean_kappa"] = mean_kappa;
    j["warnings"] = warnings;
    return j.dump(2);
}

void write_reports_tsv(std::ostream& out, const std::vector<ExperimentReport>& reports) {
    out << "scenario\tmethod\trate\tmc_se\tn_used\tn_skipped\tmean_n_sel_ei\tmean_n_sel_mei\tmean_kappa\n";
    for (const auto& rep : reports)
        for (const auto& mr : rep.rates)
            out << rep.scenario_id << '\t' << mr.method << '\t' << mr.rate << '\t'
                << mr.mc_se << '\t' << mr.n_used << '\t' << mr.n_skipped << '\t'
                << rep.mean_n_sel_ei << '\t' << rep.mean_n_sel_mei << '\t' << rep.mean_kappa
                << '\n';
}

}  // namespace pleio
