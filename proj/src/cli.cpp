#include "pleio/cli.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <map>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pleio/egger.hpp"
#include "pleio/gwas.hpp"
#include "pleio/mei.hpp"
#include "pleio/rivw.hpp"
#include "pleio/simulate.hpp"
#include "pleio/stats.hpp"

namespace pleio {

namespace {

using nlohmann::json;

std::string iso_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

std::uint64_t entropy_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write output file: " + path.string());
    out << content;
    if (!out.flush()) throw ConfigError("write failed: " + path.string());
}

std::filesystem::path ensure_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec) throw ConfigError("cannot create output directory: " + dir);
    return p;
}

struct ResolvedSeed {
    std::uint64_t value = 0;
    const char* source = "flag";
};

ResolvedSeed resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return {*flag, "flag"};
    return {entropy_seed(), "entropy"};
}

json manifest_base(const std::string& command, const ResolvedSeed& seed) {
    json m;
    m["tool"] = "pleiotest";
    m["version"] = kToolVersion;
    m["command"] = command;
    m["timestamp_utc"] = iso_timestamp();
    m["seed"] = seed.value;
    m["seed_source"] = seed.source;
    return m;
}

json input_entry(const std::string& path) {
    return json{{"path", path}, {"fnv1a64", file_digest(path)}};
}

// Shared flags for the two real-data commands.
struct DataOptions {
    std::string exposure_path;
    std::string outcome_path;
    std::string out_dir = ".";
    double mei_pvalue = 5e-5;
    double lambda_mei = 0.0;  // 0 means derive from mei_pvalue
    double eta = 0.5;
    double palindromic_threshold = 0.08;
    std::optional<std::uint64_t> seed;
    std::string snp_col = "snp";
    std::string effect_col = "effect_allele";
    std::string other_col = "other_allele";
    std::string beta_col = "beta";
    std::string se_col = "se";
    std::string eaf_col;  // empty means no eaf column

    ColumnMap columns() const {
        ColumnMap cm;
        cm.snp = snp_col;
        cm.effect_allele = effect_col;
        cm.other_allele = other_col;
        cm.beta = beta_col;
        cm.se = se_col;
        if (!eaf_col.empty()) cm.eaf = eaf_col;
        return cm;
    }

    json to_json() const {
        json j;
        j["exposure"] = exposure_path;
        j["outcome"] = outcome_path;
        j["output_dir"] = out_dir;
        j["mei_pvalue"] = mei_pvalue;
        j["lambda_mei"] = lambda_mei;
        j["eta"] = eta;
        j["palindromic_threshold"] = palindromic_threshold;
        j["columns"] = {{"snp", snp_col},       {"effect_allele", effect_col},
                        {"other_allele", other_col}, {"beta", beta_col},
                        {"se", se_col},         {"eaf", eaf_col}};
        return j;
    }
};

void add_data_flags(CLI::App* cmd, DataOptions& opt) {
    cmd->add_option("--exposure", opt.exposure_path, "Exposure summary-statistics table")
        ->required();
    cmd->add_option("--outcome", opt.outcome_path, "Outcome summary-statistics table")
        ->required();
    cmd->add_option("--out", opt.out_dir, "Output directory (created if missing)");
    cmd->add_option("--mei-pvalue", opt.mei_pvalue,
                    "Two-sided p-value threshold defining the rerandomized cutoff");
    cmd->add_option("--lambda-mei", opt.lambda_mei,
                    "Raw cutoff override for the rerandomized selection (skips --mei-pvalue)");
    cmd->add_option("--eta", opt.eta, "Rerandomization noise scale");
    cmd->add_option("--palindromic-threshold", opt.palindromic_threshold,
                    "Drop palindromic SNPs with |eaf - 0.5| within this band");
    cmd->add_option("--seed", opt.seed,
                    "Seed for the rerandomization noise (entropy if omitted, recorded)");
    cmd->add_option("--snp-col", opt.snp_col, "SNP id column name");
    cmd->add_option("--effect-allele-col", opt.effect_col, "Effect allele column name");
    cmd->add_option("--other-allele-col", opt.other_col, "Other allele column name");
    cmd->add_option("--beta-col", opt.beta_col, "Effect estimate column name");
    cmd->add_option("--se-col", opt.se_col, "Standard error column name");
    cmd->add_option("--eaf-col", opt.eaf_col, "Effect allele frequency column (optional)");
}

struct LoadedTable {
    ParseResult parsed;
};

ParseResult load_table(const std::string& path, const ColumnMap& cm) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open input file: " + path);
    ParseResult res = parse_summary_table(in, cm);
    if (res.records.empty())
        throw ValidationError(path + ": no usable rows after parsing");
    return res;
}

json row_errors_json(const ParseResult& res) {
    json arr = json::array();
    for (const auto& e : res.errors)
        arr.push_back({{"line", e.line}, {"message", e.message}});
    return arr;
}

double resolve_lambda(double override_value, double pvalue) {
    if (override_value > 0.0) return override_value;
    return lambda_from_pvalue(pvalue);
}

// Selection + Rao-Blackwell state shared by the rivw and mei paths.
struct MeiWorkspace {
    std::vector<SelectionRecord> selection;  // one per harmonized pair
    std::vector<std::size_t> idx;            // indices of selected pairs
    std::vector<double> g_rb, s2_rb, G, sy, sx;
    RivwResult rivw;
};

MeiWorkspace mei_select_and_fit(const std::vector<HarmonizedPair>& pairs,
                                const SelectionConfig& scfg, std::uint64_t seed) {
    MeiWorkspace ws;
    RngStream stream(seed, 0);
    ws.selection = rerandomized_select(pairs, scfg, stream);
    for (const auto& rec : ws.selection)
        if (rec.selected) ws.idx.push_back(rec.index);
    const std::size_t m = ws.idx.size();
    ws.g_rb.resize(m);
    ws.s2_rb.resize(m);
    ws.G.resize(m);
    ws.sy.resize(m);
    ws.sx.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        const HarmonizedPair& p = pairs[ws.idx[k]];
        const RBEstimate rb = rao_blackwell(p.gamma_hat, p.sigma_x, scfg);
        ws.g_rb[k] = rb.gamma_rb;
        ws.s2_rb[k] = rb.sigma2_rb;
        ws.G[k] = p.Gamma_hat;
        ws.sy[k] = p.sigma_y;
        ws.sx[k] = p.sigma_x;
    }
    ws.rivw = rivw_estimate(ws.g_rb, ws.s2_rb, ws.G, ws.sy, ws.sx);
    return ws;
}

// Per-SNP sign taking the stored pair into the requested coding.
double coding_flip(const HarmonizedPair& p, CodingScheme scheme) {
    if (scheme == CodingScheme::NormalAllele) return p.gamma_hat < 0.0 ? -1.0 : 1.0;
    if (!p.eaf_exposure)
        throw ValidationError("major-allele coding requires eaf; missing for " + p.snp_id);
    return *p.eaf_exposure < 0.5 ? -1.0 : 1.0;
}

MeiResult mei_for_scheme(const MeiWorkspace& ws, const std::vector<HarmonizedPair>& pairs,
                         CodingScheme scheme) {
    const std::size_t m = ws.idx.size();
    std::vector<double> g(m), G(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double f = coding_flip(pairs[ws.idx[k]], scheme);
        g[k] = f * ws.g_rb[k];
        G[k] = f * ws.G[k];
    }
    return mei_statistic(g, ws.s2_rb, G, ws.sy, ws.rivw, scheme);
}

json rivw_json(const RivwResult& r) {
    return json{{"beta_hat", r.beta_hat}, {"se", r.se},
                {"z", r.z},               {"p", r.p_value},
                {"theta1", r.theta1},     {"theta2", r.theta2},
                {"n_selected", r.n_selected}, {"kappa_hat", r.kappa_hat}};
}

json mei_json(const MeiResult& r, double lambda, double eta) {
    return json{{"scheme", to_string(r.scheme)}, {"z", r.z_me},
                {"p", r.p_value},                {"lambda_rc", r.lambda_rc},
                {"v_hat", r.v_hat},              {"n_selected", r.n_selected},
                {"lambda", lambda},              {"eta", eta}};
}

void write_diagnostics_tsv(const std::filesystem::path& path,
                           const std::vector<HarmonizedPair>& pairs,
                           const std::vector<SelectionRecord>& selection,
                           double lambda_ei, const SelectionConfig& scfg) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write output file: " + path.string());
    out << "snp_id\tgamma_hat\tsigma_x\tGamma_hat\tsigma_y\teaf\tsel_ei\tsel_mei\t"
           "z_noise\ts_value\tgamma_rb\tsigma2_rb\n";
    out.precision(10);
    for (std::size_t j = 0; j < pairs.size(); ++j) {
        const HarmonizedPair& p = pairs[j];
        const SelectionRecord& s = selection[j];
        const bool sel_ei = std::fabs(p.gamma_hat / p.sigma_x) > lambda_ei;
        out << p.snp_id << '\t' << p.gamma_hat << '\t' << p.sigma_x << '\t'
            << p.Gamma_hat << '\t' << p.sigma_y << '\t';
        if (p.eaf_exposure) out << *p.eaf_exposure;
        else out << "NA";
        out << '\t' << (sel_ei ? 1 : 0) << '\t' << (s.selected ? 1 : 0) << '\t'
            << s.z_noise << '\t' << s.s_value << '\t';
        if (s.selected) {
            const RBEstimate rb = rao_blackwell(p.gamma_hat, p.sigma_x, scfg);
            out << rb.gamma_rb << '\t' << rb.sigma2_rb << '\n';
        } else {
            out << "NA\tNA\n";
        }
    }
}

struct TestOptions : DataOptions {
    std::string method = "all";
    double ei_pvalue = 5e-8;
    double lambda_ei = 0.0;
};

int cmd_test(const TestOptions& opt, std::ostream&) {
    const auto out_dir = ensure_dir(opt.out_dir);
    const ColumnMap cm = opt.columns();
    const ParseResult exposure = load_table(opt.exposure_path, cm);
    const ParseResult outcome = load_table(opt.outcome_path, cm);
    const HarmonizeResult harm =
        harmonize(exposure.records, outcome.records, opt.palindromic_threshold);

    const bool want_ei = opt.method == "ei" || opt.method == "all";
    const bool want_major = opt.method == "mei-major" || opt.method == "mei-combined" ||
                            opt.method == "all";
    const bool want_normal = opt.method == "mei-normal" || opt.method == "mei-combined" ||
                             opt.method == "all";
    const bool want_combined = opt.method == "mei-combined" || opt.method == "all";

    const double lambda_ei = resolve_lambda(opt.lambda_ei, opt.ei_pvalue);
    const double lambda_mei = resolve_lambda(opt.lambda_mei, opt.mei_pvalue);
    const SelectionConfig scfg{lambda_mei, opt.eta};
    const ResolvedSeed seed = resolve_seed(opt.seed);

    json results;
    results["version"] = kToolVersion;
    results["n_harmonized"] = harm.pairs.size();
    results["methods"] = json::object();

    if (want_ei) {
        const auto oriented = orient(harm.pairs, CodingScheme::NormalAllele);
        const auto kept = conventional_select(oriented, lambda_ei);
        std::vector<double> g(kept.size()), G(kept.size()), sy(kept.size());
        for (std::size_t k = 0; k < kept.size(); ++k) {
            g[k] = oriented[kept[k]].gamma_hat;
            G[k] = oriented[kept[k]].Gamma_hat;
            sy[k] = oriented[kept[k]].sigma_y;
        }
        const EggerResult egger = egger_fit(g, G, sy);
        results["methods"]["ei"] = {{"z", egger.z_e},
                                    {"p", egger.p_value},
                                    {"intercept", egger.mu_e},
                                    {"se_intercept", egger.se_mu},
                                    {"slope", egger.beta_e},
                                    {"se_slope", egger.se_beta},
                                    {"phi", egger.phi_hat},
                                    {"n_selected", egger.n_used},
                                    {"lambda", lambda_ei}};
    }

    MeiWorkspace ws;
    if (want_major || want_normal) {
        ws = mei_select_and_fit(harm.pairs, scfg, seed.value);
        results["rivw"] = rivw_json(ws.rivw);
    }
    MeiResult major, normal;
    if (want_major) {
        major = mei_for_scheme(ws, harm.pairs, CodingScheme::MajorAllele);
        results["methods"]["mei_major"] = mei_json(major, lambda_mei, opt.eta);
    }
    if (want_normal) {
        normal = mei_for_scheme(ws, harm.pairs, CodingScheme::NormalAllele);
        results["methods"]["mei_normal"] = mei_json(normal, lambda_mei, opt.eta);
    }
    if (want_combined) {
        const CombinedResult comb = combined_test(major, normal, ws.sy);
        results["methods"]["mei_combined"] = {{"z_major", comb.z_major},
                                              {"z_normal", comb.z_normal},
                                              {"rho_mn", comb.rho_mn},
                                              {"z_combined", comb.z_combined},
                                              {"p", comb.p_value}};
    }

    json harmon = json::parse(harm.report.to_json());
    harmon["row_errors_exposure"] = row_errors_json(exposure);
    harmon["row_errors_outcome"] = row_errors_json(outcome);

    json manifest = manifest_base("test", seed);
    json cfg = opt.to_json();
    cfg["method"] = opt.method;
    cfg["ei_pvalue"] = opt.ei_pvalue;
    cfg["lambda_ei_resolved"] = lambda_ei;
    cfg["lambda_mei_resolved"] = lambda_mei;
    manifest["config"] = cfg;
    manifest["inputs"] = {{"exposure", input_entry(opt.exposure_path)},
                          {"outcome", input_entry(opt.outcome_path)}};

    write_text(out_dir / "results.json", results.dump(2) + "\n");
    write_text(out_dir / "harmonization.json", harmon.dump(2) + "\n");
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
    if (want_major || want_normal) {
        write_diagnostics_tsv(out_dir / "diagnostics.tsv", harm.pairs, ws.selection,
                              lambda_ei, scfg);
    }
    return 0;
}

int cmd_rivw(const DataOptions& opt, std::ostream&) {
    const auto out_dir = ensure_dir(opt.out_dir);
    const ColumnMap cm = opt.columns();
    const ParseResult exposure = load_table(opt.exposure_path, cm);
    const ParseResult outcome = load_table(opt.outcome_path, cm);
    const HarmonizeResult harm =
        harmonize(exposure.records, outcome.records, opt.palindromic_threshold);

    const double lambda_mei = resolve_lambda(opt.lambda_mei, opt.mei_pvalue);
    const SelectionConfig scfg{lambda_mei, opt.eta};
    const ResolvedSeed seed = resolve_seed(opt.seed);
    const MeiWorkspace ws = mei_select_and_fit(harm.pairs, scfg, seed.value);

    json result = rivw_json(ws.rivw);
    result["version"] = kToolVersion;
    result["lambda"] = lambda_mei;
    result["eta"] = opt.eta;
    result["n_harmonized"] = harm.pairs.size();

    json manifest = manifest_base("rivw", seed);
    json cfg = opt.to_json();
    cfg["lambda_mei_resolved"] = lambda_mei;
    manifest["config"] = cfg;
    manifest["inputs"] = {{"exposure", input_entry(opt.exposure_path)},
                          {"outcome", input_entry(opt.outcome_path)}};

    write_text(out_dir / "rivw.json", result.dump(2) + "\n");
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return 0;
}

struct SimulateOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;  // 0 means env default / 1
};

unsigned default_threads() {
    if (const char* env = std::getenv("PLEIO_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v < 1) throw ConfigError("PLEIO_THREADS must be a positive integer");
        return static_cast<unsigned>(v);
    }
    return 1;
}

int cmd_simulate(const SimulateOptions& opt, std::ostream& out) {
    const auto out_dir = ensure_dir(opt.out_dir);
    std::ifstream in(opt.config_path);
    if (!in) throw ConfigError("cannot open scenario grid: " + opt.config_path);
    const std::vector<ScenarioConfig> grid = parse_scenario_grid(in);

    const ResolvedSeed seed = resolve_seed(opt.seed);
    const unsigned threads = opt.threads > 0 ? opt.threads : default_threads();
    const std::vector<ExperimentReport> reports = run_experiment(grid, seed.value, threads);

    std::ostringstream tsv;
    write_reports_tsv(tsv, reports);
    json arr = json::array();
    for (const auto& rep : reports) arr.push_back(json::parse(rep.to_json()));

    json manifest = manifest_base("simulate", seed);
    manifest["config"] = {{"grid", opt.config_path},
                          {"threads", threads},
                          {"scenarios", grid.size()},
                          {"output_dir", opt.out_dir}};
    manifest["inputs"] = {{"grid", input_entry(opt.config_path)}};

    write_text(out_dir / "reports.tsv", tsv.str());
    write_text(out_dir / "reports.json", arr.dump(2) + "\n");
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
    for (const auto& rep : reports)
        for (const auto& w : rep.warnings) out << rep.scenario_id << ": " << w << "\n";
    return 0;
}

struct SummarizeOptions {
    std::vector<std::string> inputs;
    double alpha = 0.05;
    std::size_t tests = 0;  // Bonferroni denominator; 0 means number of inputs
    std::string out_path;   // empty means stdout
};

int cmd_summarize(const SummarizeOptions& opt, std::ostream& out) {
    const std::size_t denom = opt.tests > 0 ? opt.tests : opt.inputs.size();
    struct Tally {
        std::size_t total = 0, nominal = 0, bonferroni = 0;
    };
    std::map<std::string, Tally> tallies;
    for (const auto& path : opt.inputs) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open result file: " + path);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw ValidationError(path + ": invalid JSON (" + e.what() + ")");
        }
        if (!j.contains("methods") || !j["methods"].is_object())
            throw ValidationError(path + ": missing 'methods' object");
        for (const auto& [name, entry] : j["methods"].items()) {
            if (!entry.contains("p")) continue;
            const double p = entry["p"].get<double>();
            Tally& t = tallies[name];
            ++t.total;
            if (p < opt.alpha) ++t.nominal;
            if (p < opt.alpha / static_cast<double>(denom)) ++t.bonferroni;
        }
    }
    std::ostringstream tsv;
    tsv << "method\tn_results\tn_significant_nominal\tn_significant_bonferroni\t"
           "alpha\tcorrection_denominator\n";
    for (const auto& [name, t] : tallies)
        tsv << name << '\t' << t.total << '\t' << t.nominal << '\t' << t.bonferroni
            << '\t' << opt.alpha << '\t' << denom << '\n';
    if (opt.out_path.empty()) out << tsv.str();
    else write_text(opt.out_path, tsv.str());
    return 0;
}

json error_json(const char* type, const std::string& message, int code) {
    return json{{"error", {{"type", type}, {"message", message}, {"exit_code", code}}}};
}

}  // namespace

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file for digest: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Pleiotropy testing and rerandomized-IVW estimation for two-sample MR"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    TestOptions topt;
    CLI::App* test = app.add_subcommand(
        "test", "Run pleiotropy tests on harmonized exposure/outcome tables");
    add_data_flags(test, topt);
    test->add_option("--method", topt.method, "Which test(s) to run")
        ->check(CLI::IsMember({"ei", "mei-major", "mei-normal", "mei-combined", "all"}));
    test->add_option("--ei-pvalue", topt.ei_pvalue,
                     "Two-sided p-value threshold for the conventional selection");
    test->add_option("--lambda-ei", topt.lambda_ei,
                     "Raw cutoff override for the conventional selection");

    DataOptions ropt;
    CLI::App* rivw = app.add_subcommand("rivw", "Rerandomized-IVW causal effect estimate");
    add_data_flags(rivw, ropt);

    SimulateOptions sopt;
    CLI::App* simulate = app.add_subcommand("simulate", "Run a Monte Carlo scenario grid");
    simulate->add_option("config", sopt.config_path, "INI scenario grid")->required();
    simulate->add_option("--out", sopt.out_dir, "Output directory");
    simulate->add_option("--seed", sopt.seed, "Master seed (entropy if omitted, recorded)");
    simulate->add_option("--threads", sopt.threads,
                         "Worker threads (default: PLEIO_THREADS env var or 1)");

    SummarizeOptions mopt;
    CLI::App* summarize = app.add_subcommand(
        "summarize", "Aggregate result JSONs into a significance count sheet");
    summarize->add_option("results", mopt.inputs, "results.json files from `test` runs")
        ->required();
    summarize->add_option("--alpha", mopt.alpha, "Nominal significance level");
    summarize->add_option("--tests", mopt.tests,
                          "Bonferroni denominator (default: number of inputs)");
    summarize->add_option("--out", mopt.out_path, "Write the sheet here instead of stdout");

    try {
        std::vector<const char*> argv;
        argv.push_back("pleiotest");
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << error_json("usage", e.what(), 2).dump() << "\n";
        return 2;
    }

    try {
        if (test->parsed()) return cmd_test(topt, out);
        if (rivw->parsed()) return cmd_rivw(ropt, out);
        if (simulate->parsed()) return cmd_simulate(sopt, out);
        if (summarize->parsed()) return cmd_summarize(mopt, out);
        err << error_json("usage", "no subcommand given", 2).dump() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        err << error_json("config", e.what(), 2).dump() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        err << error_json("validation", e.what(), 2).dump() << "\n";
        return 2;
    } catch (const StatError& e) {
        err << error_json("degenerate", e.what(), 3).dump() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << error_json("internal", e.what(), 1).dump() << "\n";
        return 1;
    }
}

}  // namespace pleio
