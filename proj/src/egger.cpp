#include "pleio/egger.hpp"

#include <cmath>

#include <json.hpp>

#include "pleio/stats.hpp"

namespace pleio {

std::vector<std::size_t> conventional_select(std::span<const double> gamma_hat,
                                             std::span<const double> sigma_x,
                                             double lambda) {
    if (lambda <= 0.0) throw ConfigError("conventional_select: lambda must be positive");
    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < gamma_hat.size(); ++j)
        if (std::fabs(gamma_hat[j] / sigma_x[j]) > lambda) kept.push_back(j);
    return kept;
}

std::vector<std::size_t> conventional_select(const std::vector<HarmonizedPair>& pairs,
                                             double lambda) {
    std::vector<double> g(pairs.size()), s(pairs.size());
    for (std::size_t j = 0; j < pairs.size(); ++j) {
        g[j] = pairs[j].gamma_hat;
        s[j] = pairs[j].sigma_x;
    }
    return conventional_select(g, s, lambda);
}

EggerResult egger_fit(std::span<const double> gamma_hat,
                      std::span<const double> Gamma_hat,
                      std::span<const double> sigma_y) {
    const std::size_t m = gamma_hat.size();
    if (m < 3) throw InsufficientInstruments("egger_fit: fewer than 3 instruments");

    double sw = 0.0, sx = 0.0, sxx = 0.0, sy = 0.0, sxy = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double w = 1.0 / (sigma_y[j] * sigma_y[j]);
        sw += w;
        sx += w * gamma_hat[j];
        sxx += w * gamma_hat[j] * gamma_hat[j];
        sy += w * Gamma_hat[j];
        sxy += w * gamma_hat[j] * Gamma_hat[j];
    }
    const double det = sw * sxx - sx * sx;
    if (!(det > 1e-12 * sw * sxx))
        throw SingularDesign("egger_fit: degenerate design (instrument effects collinear)");

    EggerResult res;
    res.n_used = m;
    res.beta_e = (sw * sxy - sx * sy) / det;
    res.mu_e = (sxx * sy - sx * sxy) / det;

    double rss = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double w = 1.0 / (sigma_y[j] * sigma_y[j]);
        const double r = Gamma_hat[j] - res.mu_e - res.beta_e * gamma_hat[j];
        rss += w * r * r;
    }
    res.phi_hat = std::max(1.0, rss / static_cast<double>(m - 2));
    res.se_mu = std::sqrt(res.phi_hat * sxx / det);
    res.se_beta = std::sqrt(res.phi_hat * sw / det);
    res.z_e = res.mu_e / res.se_mu;
    res.p_value = two_sided_p(res.z_e);
    return res;
}

EggerResult egger_fit(const std::vector<HarmonizedPair>& pairs) {
    std::vector<double> g(pairs.size()), G(pairs.size()), sy(pairs.size());
    for (std::size_t j = 0; j < pairs.size(); ++j) {
        g[j] = pairs[j].gamma_hat;
        G[j] = pairs[j].Gamma_hat;
        sy[j] = pairs[j].sigma_y;
    }
    return egger_fit(g, G, sy);
}

std::string EggerResult::to_json() const {
    nlohmann::json j;
    j["beta"] = beta_e;
    j["intercept"] = mu_e;
    j["se_beta"] = se_beta;
    j["se_intercept"] = se_mu;
    j["phi"] = phi_hat;
    j["z"] = z_e;
    j["p"] = p_value;
    j["n_selected"] = n_used;
    return j.dump(2);
}

}  // namespace pleio
