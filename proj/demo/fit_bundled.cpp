// Fit the hybrid model to the bundled 92 x 5 count dataset the way the
// microbiome analysis does: beta fixed, b fixed at 0, capped-min weight with
// a_c = 0.01. Prints the estimate table.
//
//   demo_fit [path/to/microbiome_synthetic.csv]

#include <iomanip>
#include <iostream>

#include "compscore/compscore.hpp"
#include "compscore/io.hpp"

int main(int argc, char** argv) {
    using namespace compscore;
    const std::string path = argc > 1 ? argv[1] : "data/microbiome_synthetic.csv";
    try {
        const auto data = load_data(path);
        Eigen::VectorXd beta(5);
        beta << -0.80, -0.85, 0.0, -0.2, 0.0;
        ModelSpec spec = make_hybrid(Eigen::MatrixXd::Zero(4, 4), Eigen::VectorXd::Zero(4), beta);
        fix_linear_terms(spec);

        FitOptions opt;
        opt.weight = WeightSpec::make(WeightKind::capped_min, 0.01);
        const auto fit = fit_hybrid(data.proportions, spec, opt);

        std::cout << "n = " << fit.n << ", condition number of W = " << fit.condition << "\n";
        write_fit_table(std::cout, fit);
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
        return exit_status(e.code());
    }
    return 0;
}
