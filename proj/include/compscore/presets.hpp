#pragma once

// Registry of the simulation-study models (ids 1-16) with their weight caps.
// Ids 13-16 are the multinomial versions of 1, 2, 3 and 7.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "compscore/errors.hpp"
#include "compscore/model.hpp"

namespace compscore {

struct ModelPreset {
    int id = 0;
    std::string description;
    ModelSpec spec;
    bool discrete = false;
    std::int64_t default_total = 0; // multinomial m for discrete presets
    Eigen::Index default_n = 1000;
    double cap_min = 1.0;     // a_c for the capped-min weight
    double cap_product = 1.0; // a_c for the capped-product weight
    std::vector<std::string> names;
};

inline const std::vector<std::string>& microbiome_category_names() {
    static const std::vector<std::string> names{"TM7", "Cyanobacteria_Chloroplast", "Actinobacteria", "Proteobacteria",
                                                "pooled"};
    return names;
}

namespace detail {

inline ModelSpec microbiome_model() {
    Eigen::MatrixXd a(4, 4);
    a << -127480, 14068.4, 1782.26, -240.077,
         14068.4, -8191.17, -8.00268, 374.694,
         1782.26, -8.00268, -46.6387, 9.02763,
         -240.077, 374.694, 9.02763, -39.2089;
    Eigen::VectorXd beta(5);
    beta << -0.80, -0.85, 0.0, -0.2, 0.0;
    ModelSpec m = make_hybrid(a, Eigen::VectorXd::Zero(4), beta);
    fix_linear_terms(m);
    return m;
}

inline ModelSpec three_part_hybrid() {
    Eigen::MatrixXd a(2, 2);
    a << -63602, 15145, 15145, -5694;
    ModelSpec m = make_hybrid(a, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Constant(3, -0.75));
    fix_linear_terms(m);
    return m;
}

inline ModelSpec three_part_gaussian() {
    Eigen::MatrixXd a(2, 2);
    a << -26.3678, 5.9598, 5.9598, -35.8885;
    ModelSpec m = make_truncated_gaussian(a, Eigen::VectorXd::Zero(2));
    fix_linear_terms(m);
    return m;
}

inline ModelSpec ten_part_gaussian(double diag, double lin) {
    return make_truncated_gaussian(diag * Eigen::MatrixXd::Identity(9, 9), Eigen::VectorXd::Constant(9, lin));
}

inline ModelSpec ten_part_dirichlet(int small) {
    Eigen::VectorXd beta = Eigen::VectorXd::Constant(10, 9.0);
    beta.head(small).setConstant(-0.8);
    return make_dirichlet(beta);
}

inline std::vector<ModelPreset> build_presets() {
    std::vector<ModelPreset> out;
    auto add = [&](int id, std::string desc, ModelSpec spec, double cmin, double cprod, Eigen::Index n = 1000,
                   bool discrete = false, std::vector<std::string> names = {}) {
        ModelPreset p;
        p.id = id;
        p.description = std::move(desc);
        p.names = names.empty() ? default_category_names(spec.p) : std::move(names);
        p.spec = std::move(spec);
        p.cap_min = cmin;
        p.cap_product = cprod;
        p.default_n = n;
        p.discrete = discrete;
        p.default_total = discrete ? 2000 : 0;
        out.push_back(std::move(p));
    };
    Eigen::VectorXd b7(3);
    b7 << -0.5, 0.70, 540;
    // Models 2 and 3 have no caps of their own; they borrow those of their
    // multinomial versions 14 and 15.
    add(1, "hybrid p=5, microbiome fit, beta and b fixed", microbiome_model(), 0.01, 1e-4, 92, false,
        microbiome_category_names());
    add(2, "hybrid p=3, beta=-0.75, beta and b fixed", three_part_hybrid(), 0.01, 1e-3);
    add(3, "truncated-gaussian p=3, beta and b fixed", three_part_gaussian(), 0.1, 0.02);
    add(4, "truncated-gaussian p=10, A=-5000 I, b=400", ten_part_gaussian(-5000, 400), 0.1, 2e-7);
    add(5, "truncated-gaussian p=10, A=-500 I, b=40", ten_part_gaussian(-500, 40), 0.02, 1e-7);
    add(6, "truncated-gaussian p=10, A=-50 I, b=4", ten_part_gaussian(-50, 4), 0.02, 1e-7);
    add(7, "dirichlet p=3, beta=(-0.5, 0.7, 540)", make_dirichlet(b7), 0.01, 1e-3, 92);
    add(8, "dirichlet p=10, beta=-0.8", ten_part_dirichlet(10), 0.002, 1e-8);
    add(9, "dirichlet p=10, beta=9", ten_part_dirichlet(0), 0.17, 6e-6);
    add(10, "dirichlet p=10, five -0.8 then five 9", ten_part_dirichlet(5), 0.002, 2e-9);
    add(11, "dirichlet p=10, two -0.8 then eight 9", ten_part_dirichlet(2), 0.005, 2e-7);
    add(12, "dirichlet p=10, eight -0.8 then two 9", ten_part_dirichlet(8), 0.001, 5e-11);
    add(13, "multinomial over model 1, m=2000", microbiome_model(), 0.01, 1e-4, 92, true, microbiome_category_names());
    add(14, "multinomial over model 2, m=2000", three_part_hybrid(), 0.01, 1e-3, 1000, true);
    add(15, "multinomial over model 3, m=2000", three_part_gaussian(), 0.1, 0.02, 1000, true);
    add(16, "multinomial over model 7, m=2000", make_dirichlet(b7), 0.01, 1e-3, 92, true);
    return out;
}

} // namespace detail

inline const std::vector<ModelPreset>& presets() {
    static const std::vector<ModelPreset> all = detail::build_presets();
    return all;
}

inline const ModelPreset& preset(int id) {
    for (const auto& p : presets())
        if (p.id == id) return p;
    fail(ErrorCode::configuration, "unknown model preset " + std::to_string(id) + " (valid ids are 1-16)");
}

} // namespace compscore
