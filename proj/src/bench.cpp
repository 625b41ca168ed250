#include "kan/bench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace kan {

double target_nonsmooth(double x, double y, double rotation) {
    const double c = std::cos(rotation), s = std::sin(rotation);
    const double xr = c * x - s * y;
    const double yr = s * x + c * y;
    return std::cos(4.0 * M_PI * xr) + std::sin(M_PI * yr) +
           std::sin(2.0 * M_PI * yr) + std::abs(std::sin(3.0 * M_PI * yr * yr));
}

double target_xor(double x, double y) {
    return std::tanh(20.0 * x - 10.0) * std::tanh(20.0 * x - 40.0 * y + 10.0);
}

Dataset gen_dataset(const ExperimentConfig& cfg) {
    int count = cfg.data_count;
    if (cfg.scale != 1.0)
        count = std::max(1, static_cast<int>(std::lround(count * cfg.scale)));
    std::mt19937_64 rng(cfg.data_seed);
    std::uniform_real_distribution<double> u(cfg.domain_lo, cfg.domain_hi);
    Dataset ds;
    ds.X.resize(count, 2);
    ds.Y.resize(count, 1);
    for (int i = 0; i < count; ++i) {
        const double x = u(rng), y = u(rng);
        ds.X(i, 0) = x;
        ds.X(i, 1) = y;
        ds.Y(i, 0) = cfg.problem == "xor"
                         ? target_xor(x, y)
                         : target_nonsmooth(x, y, cfg.rotation);
    }
    const double lo = ds.Y.minCoeff(), hi = ds.Y.maxCoeff();
    if (hi > lo) {
        ds.y_scale = 1.0 / (hi - lo);
        ds.y_shift = -lo * ds.y_scale;
        ds.Y = (ds.Y.array() * ds.y_scale + ds.y_shift).matrix();
    } else {
        ds.y_scale = 1.0;
        ds.y_shift = 0.5 - lo;
        ds.Y.setConstant(0.5);
    }
    return ds;
}

std::vector<unsigned long long> default_model_seeds(
    const std::string& problem) {
    std::vector<unsigned long long> seeds;
    const unsigned long long first = problem == "xor" ? 1232 : 1234;
    for (unsigned long long s = first; s < first + 5; ++s) seeds.push_back(s);
    return seeds;
}

namespace {

std::vector<int> scaled_schedule(const std::vector<int>& sched, double scale) {
    std::vector<int> out = sched;
    if (scale == 1.0) return out;
    for (int& e : out)
        if (e > 0) e = std::max(1, static_cast<int>(std::lround(e * scale)));
    return out;
}

std::string join_ints(const std::vector<int>& v, char sep) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << sep;
        os << v[i];
    }
    return os.str();
}

}  // namespace

ResultRow run_experiment(const ExperimentConfig& cfg,
                         std::vector<std::vector<HistoryRow>>* histories) {
    if (cfg.problem != "nonsmooth" && cfg.problem != "xor")
        throw std::invalid_argument("run_experiment: unknown problem");
    const auto t0 = std::chrono::steady_clock::now();
    Dataset ds = gen_dataset(cfg);
    const std::vector<int> sched = scaled_schedule(cfg.schedule, cfg.scale);
    std::vector<unsigned long long> seeds =
        cfg.model_seeds.empty() ? default_model_seeds(cfg.problem)
                                : cfg.model_seeds;

    ResultRow row;
    row.problem = cfg.problem;
    row.basis = cfg.basis == BasisKind::Spline ? "spline" : "relu";
    row.free_knots = cfg.free_knots;
    row.schedule = join_ints(cfg.schedule, '-');
    {
        std::ostringstream os;
        os << join_ints(cfg.widths, '-') << "/n" << cfg.grid << "r"
           << cfg.order;
        row.arch = os.str();
    }

    std::vector<double> mses;
    for (unsigned long long seed : seeds) {
        Network net = make_kan_network(cfg.widths, cfg.grid, cfg.order,
                                       cfg.basis, cfg.free_knots);
        init_network(net, seed);
        try {
            TrainResult res =
                train_multilevel(net, ds.X, ds.Y, sched, cfg.train);
            if (!std::isfinite(res.final_loss))
                throw std::runtime_error("non-finite loss");
            mses.push_back(res.final_loss);
            if (histories) histories->push_back(res.history);
            row.params = count_params(net);
        } catch (const std::runtime_error&) {
            ++row.seeds_failed;
        }
    }
    row.seeds_used = static_cast<int>(mses.size());
    if (!mses.empty()) {
        double mean = 0.0;
        for (double m : mses) mean += m;
        mean /= mses.size();
        double var = 0.0;
        for (double m : mses) var += (m - mean) * (m - mean);
        if (mses.size() > 1) var /= mses.size() - 1;
        row.mse_mean = mean;
        row.mse_std = std::sqrt(var);
    } else {
        row.mse_mean = std::numeric_limits<double>::quiet_NaN();
        row.mse_std = std::numeric_limits<double>::quiet_NaN();
    }
    // Epoch-weighted per-sample FLOP budget across levels.
    for (std::size_t l = 0; l < sched.size(); ++l) {
        Network probe = make_kan_network(cfg.widths, cfg.grid << l, cfg.order,
                                         cfg.basis, cfg.free_knots);
        row.flops_per_sample +=
            static_cast<long>(sched[l]) * count_flops_per_sample(probe);
    }
    row.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    return row;
}

std::string report_to_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    os.precision(17);
    os << "problem,arch,basis,free_knots,schedule,params,mse_mean,mse_std,"
          "seconds\n";
    for (const auto& r : rows)
        os << r.problem << "," << r.arch << "," << r.basis << ","
           << (r.free_knots ? 1 : 0) << "," << r.schedule << "," << r.params
           << "," << r.mse_mean << "," << r.mse_std << "," << r.seconds
           << "\n";
    return os.str();
}

std::string history_to_csv(const std::vector<HistoryRow>& rows) {
    std::ostringstream os;
    os.precision(17);
    os << "level,epoch,loss,grad_norm\n";
    for (const auto& r : rows)
        os << r.level << "," << r.epoch << "," << r.loss << "," << r.grad_norm
           << "\n";
    return os.str();
}

namespace {

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace

void emit_report(const std::vector<ResultRow>& rows, const std::string& path) {
    write_file(path, report_to_csv(rows));
}

void emit_history(const std::vector<HistoryRow>& rows,
                  const std::string& path) {
    write_file(path, history_to_csv(rows));
}

ExperimentConfig config_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ExperimentConfig cfg;
    if (j.contains("problem")) cfg.problem = j["problem"].get<std::string>();
    if (j.contains("widths")) cfg.widths = j["widths"].get<std::vector<int>>();
    if (j.contains("order")) cfg.order = j["order"].get<int>();
    if (j.contains("grid")) cfg.grid = j["grid"].get<int>();
    if (j.contains("basis")) {
        const std::string b = j["basis"].get<std::string>();
        if (b == "spline")
            cfg.basis = BasisKind::Spline;
        else if (b == "relu")
            cfg.basis = BasisKind::TruncatedPower;
        else
            throw std::invalid_argument("config: basis must be spline|relu");
    }
    if (j.contains("free_knots")) cfg.free_knots = j["free_knots"].get<bool>();
    if (j.contains("schedule"))
        cfg.schedule = j["schedule"].get<std::vector<int>>();
    if (j.contains("optimizer")) {
        const std::string o = j["optimizer"].get<std::string>();
        if (o == "adam")
            cfg.train.kind = OptKind::Adam;
        else if (o == "lbfgs")
            cfg.train.kind = OptKind::Lbfgs;
        else
            throw std::invalid_argument("config: optimizer must be adam|lbfgs");
    }
    if (j.contains("lr")) {
        cfg.train.adam.lr = j["lr"].get<double>();
        cfg.train.lbfgs.lr = j["lr"].get<double>();
    }
    if (j.contains("data_seed"))
        cfg.data_seed = j["data_seed"].get<unsigned long long>();
    if (j.contains("model_seeds"))
        cfg.model_seeds =
            j["model_seeds"].get<std::vector<unsigned long long>>();
    if (j.contains("data_count")) cfg.data_count = j["data_count"].get<int>();
    if (j.contains("domain_lo")) cfg.domain_lo = j["domain_lo"].get<double>();
    if (j.contains("domain_hi")) cfg.domain_hi = j["domain_hi"].get<double>();
    if (j.contains("rotation")) cfg.rotation = j["rotation"].get<double>();
    if (j.contains("scale")) cfg.scale = j["scale"].get<double>();
    return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["problem"] = cfg.problem;
    j["widths"] = cfg.widths;
    j["order"] = cfg.order;
    j["grid"] = cfg.grid;
    j["basis"] = cfg.basis == BasisKind::Spline ? "spline" : "relu";
    j["free_knots"] = cfg.free_knots;
    j["schedule"] = cfg.schedule;
    j["optimizer"] = cfg.train.kind == OptKind::Adam ? "adam" : "lbfgs";
    j["data_seed"] = cfg.data_seed;
    j["model_seeds"] = cfg.model_seeds;
    j["data_count"] = cfg.data_count;
    j["domain_lo"] = cfg.domain_lo;
    j["domain_hi"] = cfg.domain_hi;
    j["rotation"] = cfg.rotation;
    j["scale"] = cfg.scale;
    return j.dump(2);
}

std::vector<ExperimentConfig> benchmark_suite(const std::string& problem,
                                              double scale) {
    ExperimentConfig base;
    base.problem = problem;
    base.widths = problem == "xor" ? std::vector<int>{2, 5, 5, 1}
                                   : std::vector<int>{2, 5, 1};
    base.scale = scale;

    const std::vector<int> coarse = {128, 0, 0, 0};
    const std::vector<int> fine = {0, 0, 0, 16};
    const std::vector<int> multi = {32, 16, 8, 4};

    std::vector<ExperimentConfig> suite;
    auto push = [&](BasisKind basis, bool free_knots,
                    const std::vector<int>& sched) {
        ExperimentConfig c = base;
        c.basis = basis;
        c.free_knots = free_knots;
        c.schedule = sched;
        suite.push_back(c);
    };
    push(BasisKind::TruncatedPower, false, coarse);
    push(BasisKind::TruncatedPower, false, fine);
    push(BasisKind::Spline, false, coarse);
    push(BasisKind::Spline, false, fine);
    push(BasisKind::Spline, false, multi);
    push(BasisKind::Spline, true, fine);
    return suite;
}

}  // namespace kan
