#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pleio/gwas.hpp"
#include "pleio/rivw.hpp"

namespace pleio {

struct MeiResult {
    double lambda_r = 0.0;
    double lambda_rc = 0.0;  // centered numerator, exactly zero-mean under H0
    double v_hat = 0.0;
    double z_me = 0.0;
    double p_value = 1.0;
    std::vector<double> u_hat;  // per-SNP contributions over the selected set
    CodingScheme scheme = CodingScheme::MajorAllele;
    double beta_r_used = 0.0;
    std::size_t n_selected = 0;
    std::string to_json() const;
};

struct CombinedResult {
    double z_major = 0.0;
    double z_normal = 0.0;
    double rho_mn = 0.0;
    double z_combined = 0.0;
    double p_value = 1.0;
    std::string to_json() const;
};

// Selected-set moments of true (or plug-in) effects and the closed-form
// expected numerator they imply under directional/correlated pleiotropy.
struct H1Diagnostic {
    double mu_gamma_sel = 0.0;
    double tau_gamma_sel = 0.0;
    double mu_alpha_sel = 0.0;
    double tau_alpha_sel = 0.0;
    double rho_sel = 0.0;
    double expected_numerator = 0.0;
};

// All spans cover the selected subset, oriented per the given scheme (flip of
// a pair negates gamma_rb and Gamma_hat together; sigma2_rb is flip-invariant).
// rivw must come from the same selection set; its beta_hat is plugged in.
MeiResult mei_statistic(std::span<const double> gamma_rb,
                        std::span<const double> sigma2_rb,
                        std::span<const double> Gamma_hat,
                        std::span<const double> sigma_y,
                        const RivwResult& rivw, CodingScheme scheme);

// Both results must be computed on the identical selection set and SNP order;
// sigma_y supplies the weights aligning the two u_hat vectors.
CombinedResult combined_test(const MeiResult& res_major, const MeiResult& res_normal,
                             std::span<const double> sigma_y);

H1Diagnostic h1_expected_numerator(std::span<const double> gamma,
                                   std::span<const double> alpha,
                                   std::span<const double> sigma_y);

}  // namespace pleio
