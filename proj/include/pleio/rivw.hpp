#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pleio/gwas.hpp"
#include "pleio/rng.hpp"

namespace pleio {

struct SelectionConfig {
    double lambda = 4.0556;  // cutoff on |gamma_hat/sigma_x + Z|
    double eta = 0.5;        // rerandomization noise scale
};

struct SelectionRecord {
    std::size_t index = 0;
    double z_noise = 0.0;
    bool selected = false;
    double s_value = 0.0;  // |gamma_hat/sigma_x + z_noise| - lambda
};

// Rao-Blackwellized instrument effect conditional on selection. sigma2_rb is
// an unbiased variance estimate and may be negative for individual SNPs.
struct RBEstimate {
    double gamma_rb = 0.0;
    double sigma2_rb = 0.0;
    double a_plus = 0.0;
    double a_minus = 0.0;
};

struct RivwResult {
    double beta_hat = 0.0;
    double se = 0.0;
    double z = 0.0;
    double p_value = 1.0;
    double theta1 = 0.0;
    double theta2 = 0.0;
    std::size_t n_selected = 0;
    double kappa_hat = 0.0;  // plug-in IV strength over the selected set
};

// One record per SNP, selected or not. Noise Z_j is drawn from the stream in
// input order (indexed by position), so re-orienting pairs never redraws it.
std::vector<SelectionRecord> rerandomized_select(std::span<const double> gamma_hat,
                                                 std::span<const double> sigma_x,
                                                 const SelectionConfig& cfg,
                                                 const RngStream& stream);

std::vector<SelectionRecord> rerandomized_select(const std::vector<HarmonizedPair>& pairs,
                                                 const SelectionConfig& cfg,
                                                 const RngStream& stream);

// Conditionally unbiased effect and variance estimates given S_j > 0.
// Stable for standardized effects up to |gamma_hat/sigma_x| ~ eta*40.
RBEstimate rao_blackwell(double gamma_hat, double sigma_x, const SelectionConfig& cfg);

// All spans cover the selected subset only, in a common order.
RivwResult rivw_estimate(std::span<const double> gamma_rb,
                         std::span<const double> sigma2_rb,
                         std::span<const double> Gamma_hat,
                         std::span<const double> sigma_y,
                         std::span<const double> sigma_x);

RivwResult rivw_estimate(const std::vector<HarmonizedPair>& pairs,
                         const std::vector<SelectionRecord>& records,
                         const std::vector<RBEstimate>& rb);

}  // namespace pleio
