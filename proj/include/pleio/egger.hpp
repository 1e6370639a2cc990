#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pleio/gwas.hpp"

namespace pleio {

struct EggerResult {
    double beta_e = 0.0;   // slope
    double mu_e = 0.0;     // intercept
    double se_beta = 0.0;
    double se_mu = 0.0;
    double phi_hat = 1.0;  // overdispersion, floored at 1
    double z_e = 0.0;
    double p_value = 1.0;
    std::size_t n_used = 0;
    std::string to_json() const;
};

// Conventional hard threshold: keeps exactly {j : |gamma_hat/sigma_x| > lambda}.
std::vector<std::size_t> conventional_select(std::span<const double> gamma_hat,
                                             std::span<const double> sigma_x,
                                             double lambda);

std::vector<std::size_t> conventional_select(const std::vector<HarmonizedPair>& pairs,
                                             double lambda);

// Weighted Egger regression of Gamma_hat on gamma_hat with weights
// sigma_y^{-2}; inputs should already be oriented so all gamma_hat >= 0.
EggerResult egger_fit(std::span<const double> gamma_hat,
                      std::span<const double> Gamma_hat,
                      std::span<const double> sigma_y);

EggerResult egger_fit(const std::vector<HarmonizedPair>& pairs);

}  // namespace pleio
