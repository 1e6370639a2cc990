#include "pleio/gwas.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace pleio {

const char* to_string(CodingScheme scheme) {
    return scheme == CodingScheme::MajorAllele ? "major" : "normal";
}

namespace {

char complement(char a) {
    switch (a) {
        case 'A': return 'T';
        case 'T': return 'A';
        case 'C': return 'G';
        case 'G': return 'C';
        default: return '?';
    }
}

bool valid_allele(char a) { return a == 'A' || a == 'C' || a == 'G' || a == 'T'; }

bool is_palindromic(char ea, char oa) { return complement(ea) == oa; }

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> fields;
    if (delim == ' ') {
        // whitespace mode: collapse runs of spaces/tabs
        std::istringstream ss(line);
        std::string tok;
        while (ss >> tok) fields.push_back(tok);
        return fields;
    }
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

char detect_delimiter(const std::string& header) {
    if (header.find('\t') != std::string::npos) return '\t';
    if (header.find(',') != std::string::npos) return ',';
    return ' ';
}

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end && std::isfinite(out);
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

ParseResult parse_summary_table(std::istream& source, const ColumnMap& columns,
                                char delimiter) {
    std::string header;
    if (!std::getline(source, header))
        throw ConfigError("parse_summary_table: empty input, no header row");
    header = trim(header);
    const char delim = (delimiter == '\0') ? detect_delimiter(header) : delimiter;

    const auto header_fields = split_line(header, delim);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header_fields.size(); ++i) index[trim(header_fields[i])] = i;

    auto require = [&](const std::string& name) {
        auto it = index.find(name);
        if (it == index.end())
            throw ConfigError("parse_summary_table: missing required column '" + name + "'");
        return it->second;
    };
    const std::size_t i_snp = require(columns.snp);
    const std::size_t i_ea = require(columns.effect_allele);
    const std::size_t i_oa = require(columns.other_allele);
    const std::size_t i_beta = require(columns.beta);
    const std::size_t i_se = require(columns.se);
    std::optional<std::size_t> i_eaf;
    if (columns.eaf) i_eaf = require(*columns.eaf);

    ParseResult result;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(source, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        const auto fields = split_line(line, delim);
        const std::size_t needed =
            std::max({i_snp, i_ea, i_oa, i_beta, i_se, i_eaf.value_or(0)});
        if (fields.size() <= needed) {
            result.errors.push_back({lineno, "too few fields"});
            continue;
        }

        SummaryRecord rec;
        rec.snp_id = trim(fields[i_snp]);
        if (rec.snp_id.empty()) {
            result.errors.push_back({lineno, "empty snp id"});
            continue;
        }
        const std::string ea = trim(fields[i_ea]);
        const std::string oa = trim(fields[i_oa]);
        if (ea.size() != 1 || oa.size() != 1 || !valid_allele(std::toupper(ea[0])) ||
            !valid_allele(std::toupper(oa[0]))) {
            result.errors.push_back({lineno, "invalid allele code"});
            continue;
        }
        rec.effect_allele = static_cast<char>(std::toupper(ea[0]));
        rec.other_allele = static_cast<char>(std::toupper(oa[0]));
        if (rec.effect_allele == rec.other_allele) {
            result.errors.push_back({lineno, "effect and other allele identical"});
            continue;
        }
        if (!parse_double(trim(fields[i_beta]), rec.beta)) {
            result.errors.push_back({lineno, "non-numeric beta"});
            continue;
        }
        double se = 0.0;
        if (!parse_double(trim(fields[i_se]), se)) {
            result.errors.push_back({lineno, "non-numeric standard error"});
            continue;
        }
        if (se <= 0.0) {
            result.errors.push_back({lineno, "non-positive standard error"});
            continue;
        }
        rec.se = se;
        if (i_eaf) {
            const std::string f = trim(fields[*i_eaf]);
            double eaf = 0.0;
            if (!f.empty() && f != "NA" && f != ".") {
                if (!parse_double(f, eaf) || eaf < 0.0 || eaf > 1.0) {
                    result.errors.push_back({lineno, "invalid eaf"});
                    continue;
                }
                rec.eaf = eaf;
            }
        }
        if (!seen.insert(rec.snp_id).second)
            throw ValidationError("parse_summary_table: duplicate snp_id '" + rec.snp_id +
                                  "' at line " + std::to_string(lineno));
        result.records.push_back(std::move(rec));
    }
    return result;
}

HarmonizeResult harmonize(const std::vector<SummaryRecord>& exposure,
                          const std::vector<SummaryRecord>& outcome,
                          double drop_palindromic_threshold) {
    if (drop_palindromic_threshold < 0.0 || drop_palindromic_threshold > 0.5)
        throw ConfigError("harmonize: palindromic threshold must be in [0, 0.5]");

    std::unordered_map<std::string, const SummaryRecord*> out_by_id;
    out_by_id.reserve(outcome.size());
    for (const auto& rec : outcome) out_by_id[rec.snp_id] = &rec;

    HarmonizeResult result;
    for (const auto& exp : exposure) {
        auto it = out_by_id.find(exp.snp_id);
        if (it == out_by_id.end()) continue;
        const SummaryRecord& out = *it->second;

        const bool palindromic = is_palindromic(exp.effect_allele, exp.other_allele);
        if (palindromic) {
            if (!exp.eaf || std::fabs(*exp.eaf - 0.5) <= drop_palindromic_threshold) {
                result.report.exclusions.push_back({exp.snp_id, "palindromic-ambiguous"});
                continue;
            }
            if (!out.eaf) {
                result.report.exclusions.push_back(
                    {exp.snp_id, "palindromic, outcome eaf missing"});
                continue;
            }
        }

        bool flip = false;
        bool matched = false;
        if (out.effect_allele == exp.effect_allele && out.other_allele == exp.other_allele) {
            matched = true;
        } else if (out.effect_allele == exp.other_allele &&
                   out.other_allele == exp.effect_allele) {
            matched = true;
            flip = true;
        } else if (out.effect_allele == complement(exp.effect_allele) &&
                   out.other_allele == complement(exp.other_allele)) {
            matched = true;
        } else if (out.effect_allele == complement(exp.other_allele) &&
                   out.other_allele == complement(exp.effect_allele)) {
            matched = true;
            flip = true;
        }
        if (!matched) {
            result.report.exclusions.push_back({exp.snp_id, "allele mismatch"});
            continue;
        }
        if (palindromic) {
            // strand inferred by frequency agreement: flip when the two
            // studies put the effect allele on opposite sides of 0.5
            flip = (*exp.eaf < 0.5) != (*out.eaf < 0.5);
        }

        HarmonizedPair pair;
        pair.snp_id = exp.snp_id;
        pair.gamma_hat = exp.beta;
        pair.sigma_x = exp.se;
        pair.Gamma_hat = flip ? -out.beta : out.beta;
        pair.sigma_y = out.se;
        pair.eaf_exposure = exp.eaf;
        pair.orientation = Orientation::AsGiven;
        result.pairs.push_back(std::move(pair));
        ++result.report.n_kept;
        if (flip) ++result.report.n_flipped;
    }
    result.report.n_dropped = result.report.exclusions.size();
    if (result.pairs.empty())
        throw ValidationError("harmonize: no SNPs shared between exposure and outcome");
    return result;
}

std::vector<HarmonizedPair> orient(std::vector<HarmonizedPair> pairs, CodingScheme scheme) {
    if (scheme == CodingScheme::MajorAllele) {
        std::string missing;
        for (const auto& p : pairs)
            if (!p.eaf_exposure) missing += (missing.empty() ? "" : ", ") + p.snp_id;
        if (!missing.empty())
            throw ValidationError("orient: MajorAllele scheme requires eaf for every pair; missing: " +
                                  missing);
    }
    for (auto& p : pairs) {
        bool flip = false;
        if (scheme == CodingScheme::MajorAllele) {
            flip = *p.eaf_exposure < 0.5;  // eaf == 0.5 kept as-given
        } else {
            flip = p.gamma_hat < 0.0;
        }
        if (flip) {
            p.gamma_hat = -p.gamma_hat;
            p.Gamma_hat = -p.Gamma_hat;
            if (p.eaf_exposure) p.eaf_exposure = 1.0 - *p.eaf_exposure;
            p.orientation = (p.orientation == Orientation::AsGiven) ? Orientation::Flipped
                                                                    : Orientation::AsGiven;
        }
    }
    return pairs;
}

std::string HarmonizationReport::to_json() const {
    nlohmann::json j;
    j["n_kept"] = n_kept;
    j["n_flipped"] = n_flipped;
    j["n_dropped"] = n_dropped;
    j["exclusions"] = nlohmann::json::array();
    for (const auto& e : exclusions)
        j["exclusions"].push_back({{"snp_id", e.snp_id}, {"reason", e.reason}});
    return j.dump(2);
}

void write_pairs_tsv(std::ostream& out, const std::vector<HarmonizedPair>& pairs) {
    out << "snp_id\tgamma_hat\tsigma_x\tGamma_hat\tsigma_y\teaf_exposure\torientation\n";
    out.precision(17);
    for (const auto& p : pairs) {
        out << p.snp_id << '\t' << p.gamma_hat << '\t' << p.sigma_x << '\t' << p.Gamma_hat
            << '\t' << p.sigma_y << '\t';
        if (p.eaf_exposure)
            out << *p.eaf_exposure;
        else
            out << "NA";
        out << '\t' << (p.orientation == Orientation::AsGiven ? "as_given" : "flipped")
            << '\n';
    }
}

}  // namespace pleio
