#ifndef KAN_BENCH_HPP_
#define KAN_BENCH_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "kan/optim.hpp"

namespace kan {

struct ExperimentConfig {
    std::string problem = "nonsmooth";  // or "xor"
    std::vector<int> widths = {2, 5, 1};
    int order = 4;  // spline order r
    int grid = 2;   // initial interior interval count n
    BasisKind basis = BasisKind::Spline;
    bool free_knots = false;
    std::vector<int> schedule = {32, 16, 8, 4};
    TrainConfig train;
    unsigned long long data_seed = 0;
    std::vector<unsigned long long> model_seeds;  // empty = problem default
    int data_count = 20000;
    double domain_lo = 0.0001;
    double domain_hi = 0.9999;
    double rotation = 0.175;  // signed, counterclockwise
    double scale = 1.0;       // divides epochs and dataset size
};

double target_nonsmooth(double x, double y, double rotation = 0.175);
double target_xor(double x, double y);

struct Dataset {
    Eigen::MatrixXd X;  // D x 2
    Eigen::MatrixXd Y;  // D x 1, min-max normalized to [0,1]
    double y_scale = 1.0, y_shift = 0.0;  // raw = (norm - shift) / scale
};

Dataset gen_dataset(const ExperimentConfig& cfg);

struct ResultRow {
    std::string problem;
    std::string arch;      // e.g. 2-5-1/n3r4
    std::string basis;     // spline | relu
    bool free_knots = false;
    std::string schedule;  // e.g. 32-16-8-4
    int params = 0;        // at the final level
    double mse_mean = 0.0;
    double mse_std = 0.0;
    double seconds = 0.0;
    int seeds_used = 0;
    int seeds_failed = 0;  // NaN runs excluded from the statistics
    long flops_per_sample = 0;  // summed over levels, weighted by epochs
};

ResultRow run_experiment(const ExperimentConfig& cfg,
                         std::vector<std::vector<HistoryRow>>* histories =
                             nullptr);

/// Default model seeds: 1234..1238 for nonsmooth, 1232..1236 for xor.
std::vector<unsigned long long> default_model_seeds(const std::string& problem);

std::string report_to_csv(const std::vector<ResultRow>& rows);
std::string history_to_csv(const std::vector<HistoryRow>& rows);
void emit_report(const std::vector<ResultRow>& rows, const std::string& path);
void emit_history(const std::vector<HistoryRow>& rows,
                  const std::string& path);

ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);

/// The Tables 1-2 row set for one problem: ReLU coarse/fine, spline
/// coarse/multilevel, free-knot spline fine.
std::vector<ExperimentConfig> benchmark_suite(const std::string& problem,
                                              double scale);

}  // namespace kan

#endif  // KAN_BENCH_HPP_
