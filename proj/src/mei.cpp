#include "pleio/mei.hpp"

#include <cmath>

#include <json.hpp>

#include "pleio/stats.hpp"

namespace pleio {

MeiResult mei_statistic(std::span<const double> gamma_rb,
                        std::span<const double> sigma2_rb,
                        std::span<const double> Gamma_hat,
                        std::span<const double> sigma_y,
                        const RivwResult& rivw, CodingScheme scheme) {
    const std::size_t m = gamma_rb.size();
    if (m < 3) throw InsufficientInstruments("mei_statistic: fewer than 3 selected SNPs");
    if (m != rivw.n_selected)
        throw AlignmentError("mei_statistic: selection set does not match rivw result");

    double theta1 = 0.0, theta2 = 0.0, t_hat = 0.0, sum_wG = 0.0, correction = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double w = 1.0 / (sigma_y[j] * sigma_y[j]);
        theta1 += w * gamma_rb[j] * Gamma_hat[j];
        theta2 += w * (gamma_rb[j] * gamma_rb[j] - sigma2_rb[j]);
        t_hat += w * gamma_rb[j];
        sum_wG += w * Gamma_hat[j];
        correction += w * w * sigma2_rb[j] * Gamma_hat[j];
    }

    MeiResult res;
    res.scheme = scheme;
    res.n_selected = m;
    res.beta_r_used = rivw.beta_hat;
    res.lambda_r = theta2 * sum_wG - theta1 * t_hat;
    res.lambda_rc = res.lambda_r + correction;

    const double beta = rivw.beta_hat;
    res.u_hat.resize(m);
    double v_hat = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double g2 = gamma_rb[j] * gamma_rb[j] - sigma2_rb[j];
        const double u = (Gamma_hat[j] - beta * gamma_rb[j]) * theta2 -
                         (gamma_rb[j] * Gamma_hat[j] - beta * g2) * t_hat;
        res.u_hat[j] = u;
        const double w2 = 1.0 / std::pow(sigma_y[j], 4);
        v_hat += w2 * u * u;
    }
    res.v_hat = v_hat;
    if (!(v_hat > 0.0)) {
        // A dataset with all Gamma_hat = 0 is degenerate but well-defined:
        // the numerator is exactly zero as well.
        if (res.lambda_rc == 0.0) {
            res.z_me = 0.0;
            res.p_value = 1.0;
            return res;
        }
        throw DegenerateVariance("mei_statistic: zero variance estimate");
    }
    res.z_me = res.lambda_rc / std::sqrt(v_hat);
    res.p_value = two_sided_p(res.z_me);
    return res;
}

CombinedResult combined_test(const MeiResult& res_major, const MeiResult& res_normal,
                             std::span<const double> sigma_y) {
    const std::size_t m = res_major.u_hat.size();
    if (m != res_normal.u_hat.size() || m != sigma_y.size())
        throw AlignmentError("combined_test: mismatched selection sets");
    if (!(res_major.v_hat > 0.0) || !(res_normal.v_hat > 0.0))
        throw DegenerateVariance("combined_test: a u_hat vector is all zero");

    double cross = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double w2 = 1.0 / std::pow(sigma_y[j], 4);
        cross += w2 * res_major.u_hat[j] * res_normal.u_hat[j];
    }
    double rho = cross / std::sqrt(res_major.v_hat * res_normal.v_hat);
    if (std::fabs(rho) > 1.0 + 1e-12)
        throw NumericError("combined_test: correlation estimate outside [-1,1]: " +
                           std::to_string(rho));
    rho = std::clamp(rho, -1.0, 1.0);

    CombinedResult res;
    res.z_major = res_major.z_me;
    res.z_normal = res_normal.z_me;
    res.rho_mn = rho;
    res.z_combined = std::max(std::fabs(res.z_major), std::fabs(res.z_normal));

    const double z = res.z_combined;
    if (std::fabs(rho) > 1.0 - 1e-12) {
        res.p_value = two_sided_p(z);  // degenerate diagonal
    } else {
        res.p_value = std::clamp(1.0 - bvn_rect_prob(-z, z, -z, z, rho), 0.0, 1.0);
    }
    return res;
}

H1Diagnostic h1_expected_numerator(std::span<const double> gamma,
                                   std::span<const double> alpha,
                                   std::span<const double> sigma_y) {
    const std::size_t m = gamma.size();
    if (m < 2 || alpha.size() != m || sigma_y.size() != m)
        throw ValidationError("h1_expected_numerator: need >= 2 aligned entries");

    const double n = static_cast<double>(m);
    double mg = 0.0, ma = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        mg += gamma[j];
        ma += alpha[j];
    }
    mg /= n;
    ma /= n;
    double vg = 0.0, va = 0.0, cov = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        vg += (gamma[j] - mg) * (gamma[j] - mg);
        va += (alpha[j] - ma) * (alpha[j] - ma);
        cov += (gamma[j] - mg) * (alpha[j] - ma);
    }
    vg /= n;
    va /= n;
    cov /= n;

    H1Diagnostic d;
    d.mu_gamma_sel = mg;
    d.mu_alpha_sel = ma;
    d.tau_gamma_sel = std::sqrt(vg);
    d.tau_alpha_sel = std::sqrt(va);
    d.rho_sel = (vg > 0.0 && va > 0.0) ? cov / (d.tau_gamma_sel * d.tau_alpha_sel) : 0.0;

    double sw = 0.0, sw2 = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double w = 1.0 / (sigma_y[j] * sigma_y[j]);
        sw += w;
        sw2 += w * w;
    }
    // multiplier * (mu_alpha * tau_gamma^2 - rho * mu_gamma * tau_alpha * tau_gamma);
    // rho*tau_alpha*tau_gamma is just the covariance.
    d.expected_numerator = (sw * sw - sw2) * (ma * vg - mg * cov);
    return d;
}

std::string MeiResult::to_json() const {
    nlohmann::json j;
    j["scheme"] = to_string(scheme);
    j["z"] = z_me;
    j["p"] = p_value;
    j["lambda_rc"] = lambda_rc;
    j["v_hat"] = v_hat;
    j["n_selected"] = n_selected;
    return j.dump(2);
}

std::string CombinedResult::to_json() const {
    nlohmann::json j;
    j["z_major"] = z_major;
    j["z_normal"] = z_normal;
    j["rho_mn"] = rho_mn;
    j["z_combined"] = z_combined;
    j["p"] = p_value;
    return j.dump(2);
}

}  // namespace pleio
