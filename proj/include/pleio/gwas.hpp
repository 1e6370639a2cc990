#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pleio/errors.hpp"

namespace pleio {

enum class Orientation { AsGiven, Flipped };
enum class CodingScheme { MajorAllele, NormalAllele };

const char* to_string(CodingScheme scheme);

// One SNP's association estimate from a single GWAS table.
struct SummaryRecord {
    std::string snp_id;
    char effect_allele = 'A';
    char other_allele = 'G';
    std::optional<double> eaf;
    double beta = 0.0;
    double se = 1.0;
};

// Per-SNP exposure/outcome associations aligned to one effect allele.
struct HarmonizedPair {
    std::string snp_id;
    double gamma_hat = 0.0;   // exposure association
    double sigma_x = 1.0;
    double Gamma_hat = 0.0;   // outcome association, same effect allele
    double sigma_y = 1.0;
    std::optional<double> eaf_exposure;
    Orientation orientation = Orientation::AsGiven;
};

// Header names carrying each required role; eaf is optional.
struct ColumnMap {
    std::string snp = "snp";
    std::string effect_allele = "effect_allele";
    std::string other_allele = "other_allele";
    std::string beta = "beta";
    std::string se = "se";
    std::optional<std::string> eaf;
};

struct RowError {
    std::size_t line = 0;  // 1-based, header is line 1
    std::string message;
};

struct ParseResult {
    std::vector<SummaryRecord> records;
    std::vector<RowError> errors;
};

// Parses a delimited table with a header row. delimiter '\0' autodetects
// (tab, then comma, then whitespace). Missing required columns throw
// ConfigError; duplicate snp_ids throw ValidationError naming the id; other
// row-level failures are collected in the result.
ParseResult parse_summary_table(std::istream& source, const ColumnMap& columns,
                                char delimiter = '\0');

struct Exclusion {
    std::string snp_id;
    std::string reason;
};

struct HarmonizationReport {
    std::size_t n_kept = 0;
    std::size_t n_flipped = 0;  // subset of n_kept whose outcome was swapped
    std::size_t n_dropped = 0;
    std::vector<Exclusion> exclusions;
    std::string to_json() const;
};

struct HarmonizeResult {
    std::vector<HarmonizedPair> pairs;
    HarmonizationReport report;
};

// Matches records by snp_id, aligns outcome effects to the exposure effect
// allele (accounting for strand complement), and drops palindromic SNPs whose
// exposure eaf lies within drop_palindromic_threshold of 0.5.
HarmonizeResult harmonize(const std::vector<SummaryRecord>& exposure,
                          const std::vector<SummaryRecord>& outcome,
                          double drop_palindromic_threshold = 0.08);

// Re-references pairs under the given coding scheme. MajorAllele flips pairs
// whose effect allele is minor (eaf < 0.5, ties kept as-given); NormalAllele
// flips so every gamma_hat ends up >= 0. Idempotent.
std::vector<HarmonizedPair> orient(std::vector<HarmonizedPair> pairs, CodingScheme scheme);

// TSV with columns snp_id, gamma_hat, sigma_x, Gamma_hat, sigma_y,
// eaf_exposure, orientation.
void write_pairs_tsv(std::ostream& out, const std::vector<HarmonizedPair>& pairs);

}  // namespace pleio
