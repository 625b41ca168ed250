#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "kan/basis.hpp"
#include "kan/bench.hpp"
#include "kan/refine.hpp"
#include "kan/spectra.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitVerify = 3;

struct CliOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::string problem = "nonsmooth";
    std::string basis = "spline";
    std::string schedule;
    long long seed = -1;
    double scale = 1.0;
    bool free_knots = false;
    int order = 0;
    int grid = 0;
};

std::vector<int> parse_schedule(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    if (out.empty()) throw std::invalid_argument("empty schedule");
    return out;
}

kan::ExperimentConfig build_config(const CliOptions& opt) {
    kan::ExperimentConfig cfg;
    if (!opt.config_path.empty()) {
        std::ifstream in(opt.config_path);
        if (!in) throw std::invalid_argument("cannot read " + opt.config_path);
        std::stringstream buf;
        buf << in.rdbuf();
        cfg = kan::config_from_json(buf.str());
    }
    if (opt.problem != "nonsmooth") cfg.problem = opt.problem;
    if (opt.basis == "relu")
        cfg.basis = kan::BasisKind::TruncatedPower;
    else if (opt.basis != "spline")
        throw std::invalid_argument("--basis must be spline or relu");
    if (opt.free_knots) cfg.free_knots = true;
    if (!opt.schedule.empty()) cfg.schedule = parse_schedule(opt.schedule);
    if (opt.order > 0) cfg.order = opt.order;
    if (opt.grid > 0) cfg.grid = opt.grid;
    if (opt.seed >= 0) cfg.data_seed = static_cast<unsigned long long>(opt.seed);
    if (opt.scale != 1.0) cfg.scale = opt.scale;
    if (cfg.problem == "xor" && cfg.widths == std::vector<int>{2, 5, 1} &&
        opt.config_path.empty())
        cfg.widths = {2, 5, 5, 1};
    return cfg;
}

int cmd_train(const CliOptions& opt) {
    kan::ExperimentConfig cfg = build_config(opt);
    std::filesystem::create_directories(opt.out_dir);
    std::vector<std::vector<kan::HistoryRow>> histories;
    kan::ResultRow row = kan::run_experiment(cfg, &histories);
    kan::emit_report({row}, opt.out_dir + "/results.csv");
    for (std::size_t i = 0; i < histories.size(); ++i)
        kan::emit_history(histories[i], opt.out_dir + "/history_seed" +
                                            std::to_string(i) + ".csv");
    std::cout << kan::report_to_csv({row});
    if (row.seeds_used == 0) {
        std::cerr << "all seeds diverged (" << row.seeds_failed << " NaN runs)\n";
        return kExitNumerical;
    }
    if (row.seeds_failed > 0)
        std::cerr << "excluded " << row.seeds_failed << " NaN seed(s)\n";
    return kExitOk;
}

int cmd_bench(const CliOptions& opt) {
    std::filesystem::create_directories(opt.out_dir);
    std::vector<std::string> problems;
    if (opt.problem == "all")
        problems = {"nonsmooth", "xor"};
    else
        problems = {opt.problem};
    std::vector<kan::ResultRow> rows;
    for (const std::string& problem : problems) {
        for (kan::ExperimentConfig cfg :
             kan::benchmark_suite(problem, opt.scale)) {
            if (opt.order > 0) cfg.order = opt.order;
            if (opt.grid > 0) cfg.grid = opt.grid;
            rows.push_back(kan::run_experiment(cfg));
            const kan::ResultRow& r = rows.back();
            std::cerr << r.problem << " " << r.basis
                      << (r.free_knots ? "+free" : "") << " [" << r.schedule
                      << "] mse=" << r.mse_mean << " (" << r.seconds << "s)\n";
        }
    }
    kan::emit_report(rows, opt.out_dir + "/results.csv");
    std::cout << kan::report_to_csv(rows);
    for (const auto& r : rows)
        if (r.seeds_used == 0) return kExitNumerical;
    return kExitOk;
}

int cmd_analyze(const CliOptions& opt) {
    std::filesystem::create_directories(opt.out_dir);
    kan::SpectraReport rep = kan::build_spectra_report(
        opt.seed >= 0 ? static_cast<unsigned long long>(opt.seed) : 1);
    std::ofstream out(opt.out_dir + "/spectra.csv");
    out << rep.to_csv();
    std::cout << rep.to_csv();
    return kExitOk;
}

int cmd_verify() {
    int failures = 0;
    auto check = [&](const char* name, bool ok) {
        std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
        if (!ok) ++failures;
    };
    using namespace kan;

    // Basis equivalence through the change of basis.
    {
        double worst = 0.0;
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int r : {2, 3, 4}) {
            KnotVector kv = make_uniform_knots(0.0, 1.0, 6, r);
            ChangeOfBasis A = build_Ar(kv, r);
            for (int k = 0; k < 200; ++k) {
                double x = u(rng);
                Eigen::VectorXd lhs = eval_bspline_basis(kv, x);
                Eigen::VectorXd rhs = A.apply(eval_trunc_power_basis(kv, x));
                worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
            }
        }
        check("basis_equivalence", worst <= 1e-10);
    }
    // Refinement exactness on a random network.
    {
        Network net = make_kan_network({2, 3, 1}, 4, 3, BasisKind::Spline,
                                       false);
        init_network(net, 3);
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Eigen::MatrixXd X(500, 2);
        for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
        network_forward(net, X, ForwardMode::Train);
        Eigen::MatrixXd y0 = network_forward(net, X, ForwardMode::Frozen);
        Network fine = refine_network(net);
        Eigen::MatrixXd y1 = network_forward(fine, X, ForwardMode::Frozen);
        check("refinement_exactness",
              (y0 - y1).cwiseAbs().maxCoeff() <= 1e-10);
    }
    // Conditioning sweep.
    {
        double ks_min = 1e300, ks_max = 0.0, kr_first = 0.0, kr_last = 0.0;
        for (int n : {8, 16, 32, 64, 128}) {
            KnotVector kv = make_uniform_knots(0.0, 1.0, n, 2);
            double ks =
                condition_number(gram_matrix(kv, BasisKind::Spline, 3)).kappa;
            double kr = condition_number(
                            gram_matrix(kv, BasisKind::TruncatedPower, 3))
                            .kappa;
            ks_min = std::min(ks_min, ks);
            ks_max = std::max(ks_max, ks);
            if (n == 8) kr_first = kr;
            if (n == 128) kr_last = kr;
        }
        check("gram_conditioning",
              ks_max / ks_min <= 4.0 && kr_last / kr_first >= 10.0);
    }
    // Batch-size formula and nullspace.
    {
        auto cdf = [](double x) {
            return 0.5 * std::erfc(-x / std::sqrt(2.0));
        };
        int B = min_batch_size(0.999, 1.0 - (cdf(3.0) - cdf(2.0)));
        check("min_batch_size", B >= 310 && B <= 330);

        KnotVector kv = make_uniform_knots(0.0, 1.0, 5, 3);
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Eigen::MatrixXd X(80, 2);
        for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
        NullspaceDemo demo = nullspace_demo(kv, 2, X);
        check("nullspace", demo.sigma_min <= 1e-10 * demo.sigma_max &&
                               demo.kernel_residual <= 1e-10);
    }
    return failures == 0 ? kExitOk : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"KAN spline/ReLU basis benchmark"};
    app.require_subcommand(1);
    CliOptions opt;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "JSON config file");
        sub->add_option("--seed", opt.seed, "data seed override");
        sub->add_option("--out", opt.out_dir, "output directory");
        sub->add_option("--scale", opt.scale,
                        "divide epochs and dataset size by 1/scale");
        sub->add_option("--problem", opt.problem, "nonsmooth|xor|all");
        sub->add_option("--basis", opt.basis, "spline|relu");
        sub->add_flag("--free-knots", opt.free_knots, "trainable knots");
        sub->add_option("--schedule", opt.schedule,
                        "comma-separated epochs per level, e.g. 32,16,8,4");
        sub->add_option("--order", opt.order, "spline order r");
        sub->add_option("--grid", opt.grid, "initial interior intervals n");
    };
    CLI::App* train = app.add_subcommand("train", "train one configuration");
    CLI::App* bench =
        app.add_subcommand("bench", "reproduce the benchmark tables");
    CLI::App* analyze =
        app.add_subcommand("analyze", "conditioning and NTK spectra sweep");
    CLI::App* verify =
        app.add_subcommand("verify", "run the quick property checks");
    add_common(train);
    add_common(bench);
    add_common(analyze);
    (void)verify;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (train->parsed()) return cmd_train(opt);
        if (bench->parsed()) return cmd_bench(opt);
        if (analyze->parsed()) return cmd_analyze(opt);
        if (verify->parsed()) return cmd_verify();
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitConfig;
}
