#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "halfspace/baselines.hpp"
#include "halfspace/core.hpp"
#include "halfspace/distributions.hpp"
#include "halfspace/learner.hpp"
#include "halfspace/losses.hpp"
#include "halfspace/lowerbound.hpp"
#include "halfspace/noise.hpp"
#include "halfspace/version.hpp"

namespace halfspace {

enum class Command { learn, compare, lowerbound, sweep };

inline std::string to_string(Command c) {
    switch (c) {
    case Command::learn: return "learn";
    case Command::compare: return "compare";
    case Command::lowerbound: return "lowerbound";
    case Command::sweep: return "sweep";
    }
    return "unknown";
}

inline Command parse_command(const std::string& s) {
    for (auto c : {Command::learn, Command::compare, Command::lowerbound, Command::sweep})
        if (s == to_string(c))
            return c;
    throw InvalidInput("unknown command '" + s + "'");
}

/// Config problems; the message names the offending key.
struct ConfigError : InvalidInput {
    using InvalidInput::InvalidInput;
};

enum class NoiseCalibration { noise_rate, tail_mass };

struct ExperimentConfig {
    Command command = Command::learn;
    std::vector<Family> families{Family::gaussian};
    std::size_t d = 2;
    double s = 3.0;
    std::vector<double> opt_list;
    std::vector<std::uint64_t> seeds{0};
    LearnerConfig learner;
    double epsilon_per_opt = 0.0;  // > 0: epsilon = epsilon_per_opt · opt for each cell
    std::string beta_rule = "sigma2rho2";
    NoiseCalibration calibration = NoiseCalibration::noise_rate;
    std::vector<ConvexKind> losses{ConvexKind::logistic, ConvexKind::hinge};
    std::size_t grid_points = 101;
    double quad_tol = 1e-8;
    std::size_t batch_size = 1000000;
    double grad_tol = 1e-6;
    std::uint64_t batch_seed = 1000003;
    std::string output_path;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(trim(item));
    return out;
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(x))
            throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

inline std::uint64_t to_count(const std::string& key, const std::string& v) {
    const double x = to_double(key, v);
    if (x < 0.0 || x != std::floor(x) || x > 1.8e19)
        throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
    return static_cast<std::uint64_t>(x);
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "false" || v == "0" || v == "no")
        return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

// "0,1,5" or "0..9" (inclusive).
inline std::vector<std::uint64_t> to_seeds(const std::string& key, const std::string& v) {
    std::vector<std::uint64_t> out;
    for (const auto& item : split_list(v)) {
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
            out.push_back(to_count(key, item));
            continue;
        }
        const auto a = to_count(key, trim(item.substr(0, dots)));
        const auto b = to_count(key, trim(item.substr(dots + 2)));
        if (b < a || b - a > 100000)
            throw ConfigError("config key '" + key + "': bad range '" + item + "'");
        for (auto k = a; k <= b; ++k)
            out.push_back(k);
    }
    return out;
}

} // namespace detail

/// Parses flat `key = value` lines; '#' starts a comment, lists are
/// comma-separated. Unknown, duplicate or malformed keys raise ConfigError.
inline ExperimentConfig parse_experiment_config(std::istream& in, Command command) {
    using namespace detail;
    ExperimentConfig cfg;
    cfg.command = command;
    std::map<std::string, std::string> kv;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": key '" + line + "' has no '= value'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": missing key");
        if (value.empty())
            throw ConfigError("config key '" + key + "': missing value");
        if (!kv.emplace(key, value).second)
            throw ConfigError("config key '" + key + "': given twice");
    }

    for (const auto& [key, v] : kv) {
        try {
            if (key == "command") {
                if (parse_command(v) != command)
                    throw ConfigError("config key 'command': file is for '" + v + "', invoked as '" + to_string(command) + "'");
            } else if (key == "family" || key == "families") {
                cfg.families.clear();
                for (const auto& f : split_list(v))
                    cfg.families.push_back(parse_family(f));
            } else if (key == "d") {
                cfg.d = to_count(key, v);
            } else if (key == "s") {
                cfg.s = to_double(key, v);
            } else if (key == "opt" || key == "opt_list") {
                cfg.opt_list.clear();
                for (const auto& o : split_list(v))
                    cfg.opt_list.push_back(to_double(key, o));
            } else if (key == "seeds") {
                cfg.seeds = to_seeds(key, v);
            } else if (key == "epsilon") {
                cfg.learner.epsilon = to_double(key, v);
            } else if (key == "epsilon_per_opt") {
                cfg.epsilon_per_opt = to_double(key, v);
            } else if (key == "delta") {
                cfg.learner.delta = to_double(key, v);
            } else if (key == "C_const") {
                cfg.learner.C_const = to_double(key, v);
            } else if (key == "sigma_grid") {
                cfg.learner.grid.clear();
                for (const auto& g : split_list(v))
                    cfg.learner.grid.push_back(to_double(key, g));
            } else if (key == "T_cap") {
                cfg.learner.T_cap = to_count(key, v);
            } else if (key == "beta_rule") {
                if (v != "sigma2rho2")
                    throw ConfigError("config key 'beta_rule': only 'sigma2rho2' (beta = sigma^2 rho^2) is supported");
                cfg.beta_rule = v;
            } else if (key == "rho") {
                cfg.learner.rho = to_double(key, v);
            } else if (key == "c_T") {
                cfg.learner.c_T = to_double(key, v);
            } else if (key == "holdout_size") {
                cfg.learner.holdout_size = to_count(key, v);
            } else if (key == "holdout_factor") {
                cfg.learner.holdout_factor = to_double(key, v);
            } else if (key == "eval_size") {
                cfg.learner.eval_size = to_count(key, v);
            } else if (key == "candidates_per_sigma") {
                cfg.learner.candidates_per_sigma = to_count(key, v);
            } else if (key == "timing") {
                cfg.learner.timing = to_bool(key, v);
            } else if (key == "noise_calibration") {
                if (v == "noise_rate")
                    cfg.calibration = NoiseCalibration::noise_rate;
                else if (v == "tail_mass")
                    cfg.calibration = NoiseCalibration::tail_mass;
                else
                    throw ConfigError("config key 'noise_calibration': expected noise_rate or tail_mass, got '" + v + "'");
            } else if (key == "losses" || key == "loss") {
                cfg.losses.clear();
                for (const auto& l : split_list(v))
                    cfg.losses.push_back(parse_convex_kind(l));
            } else if (key == "grid_points") {
                cfg.grid_points = to_count(key, v);
            } else if (key == "tol") {
                cfg.quad_tol = to_double(key, v);
            } else if (key == "batch_size") {
                cfg.batch_size = to_count(key, v);
            } else if (key == "grad_tol") {
                cfg.grad_tol = to_double(key, v);
            } else if (key == "batch_seed") {
                cfg.batch_seed = to_count(key, v);
            } else if (key == "output_path" || key == "out") {
                cfg.output_path = v;
            } else {
                throw ConfigError("unknown config key '" + key + "'");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError("config key '" + key + "': " + e.what());
        }
    }

    if (cfg.opt_list.empty())
        throw ConfigError("config key 'opt_list': at least one opt value is required");
    for (double o : cfg.opt_list)
        if (!(o > 0.0 && o < 0.5))
            throw ConfigError("config key 'opt_list': values must lie in (0, 1/2)");
    if (cfg.seeds.empty())
        throw ConfigError("config key 'seeds': at least one seed is required");
    if (cfg.families.empty())
        throw ConfigError("config key 'family': at least one family is required");
    if (cfg.d < 2)
        throw ConfigError("config key 'd': dimension must be >= 2");
    if (command == Command::compare || command == Command::lowerbound) {
        if (cfg.d != 2)
            throw ConfigError("config key 'd': " + to_string(command) + " runs in d = 2");
        for (double o : cfg.opt_list)
            if (!(o < 0.25))
                throw ConfigError("config key 'opt_list': " + to_string(command) + " needs opt < 1/4");
    }
    for (auto f : cfg.families)
        if (f != Family::gaussian && cfg.d != 2)
            throw ConfigError("config key 'd': family " + to_string(f) + " is defined only for d = 2");
    if (cfg.losses.empty())
        throw ConfigError("config key 'losses': at least one loss is required");
    if (cfg.grid_points < 1)
        throw ConfigError("config key 'grid_points': must be >= 1");
    if (!(cfg.quad_tol > 0.0))
        throw ConfigError("config key 'tol': must be positive");
    if (cfg.batch_size < 1)
        throw ConfigError("config key 'batch_size': must be >= 1");
    if (!(cfg.grad_tol > 0.0))
        throw ConfigError("config key 'grad_tol': must be positive");
    if (cfg.epsilon_per_opt < 0.0)
        throw ConfigError("config key 'epsilon_per_opt': must be non-negative");
    if (cfg.families.size() > 1 && command != Command::compare && command != Command::lowerbound)
        throw ConfigError("config key 'family': " + to_string(command) + " takes a single family");
    try {
        cfg.learner.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(std::string("learner settings: ") + e.what());
    }
    if (std::count(cfg.families.begin(), cfg.families.end(), Family::heavy_tailed) && !(cfg.s > 2.0))
        throw ConfigError("config key 's': the heavy-tailed family needs s > 2");
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path, Command command) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    return parse_experiment_config(in, command);
}

/// Runs f(0..n−1) on `workers` threads; results come back in index order.
/// The first failing index (in order) is reported through `error`.
template <typename T, typename F>
std::vector<std::optional<T>> parallel_map(std::size_t n, unsigned workers, F&& f, std::exception_ptr& error,
                                           std::size_t& first_failure) {
    std::vector<std::optional<T>> out(n);
    std::vector<std::exception_ptr> errors(n);
    std::size_t next = 0;
    std::mutex m;
    auto work = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lock(m);
                if (next >= n)
                    return;
                i = next++;
            }
            try {
                out[i] = f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned k = 0; k < workers; ++k)
            pool.emplace_back(work);
        for (auto& t : pool)
            t.join();
    }
    first_failure = n;
    for (std::size_t i = 0; i < n; ++i)
        if (errors[i]) {
            error = errors[i];
            first_failure = i;
            break;
        }
    return out;
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline double median(std::vector<double> v) {
    if (v.empty())
        throw InvalidInput("median: empty input");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares y ≈ slope·x + intercept.
inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw InvalidInput("least_squares: need at least two paired points");
    const double n = double(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0))
        throw InvalidInput("least_squares: x values are all equal");
    return {sxy / sxx, my - sxy / sxx * mx};
}

inline std::string error_message(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const std::exception& ex) {
        return ex.what();
    } catch (...) {
        return "unknown error";
    }
}

inline std::string csv_safe(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

/// Options shared by every run_* entry point.
struct RunOptions {
    unsigned workers = 1;
    std::uint64_t seed_offset = 0;
};

/// Outcome of a run: the exit status and, on failure, the reason.
struct RunStatus {
    int exit_code = 0;
    std::string message;
};

namespace detail {

inline NoiseModel build_far_flip(const ExperimentConfig& cfg, const DistributionSpec& spec, double opt) {
    // The construction lives in the plane of (e1, e2); its parameters come
    // from the planar marginal, which for d > 2 is the projection.
    const auto plane = spec.family == Family::gaussian ? DistributionSpec::gaussian(2) : spec;
    const auto w2 = UnitVector::basis(2, 1);
    const auto nm = cfg.calibration == NoiseCalibration::noise_rate ? far_flip_at_noise_rate(plane, w2, opt)
                                                                    : far_flip_at_tail_mass(plane, w2, opt);
    return NoiseModel::far_flip(UnitVector::basis(spec.dim, 1), nm.theta2(), nm.Z());
}

inline LearnerConfig learner_for(const ExperimentConfig& cfg, double opt) {
    LearnerConfig lc = cfg.learner;
    if (cfg.epsilon_per_opt > 0.0)
        lc.epsilon = std::min(0.5, cfg.epsilon_per_opt * opt);
    return lc;
}

// Status for a failed trial: 2 for input errors, 1 otherwise.
inline RunStatus failure_status(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const InvalidInput& ex) {
        return {2, ex.what()};
    } catch (const std::exception& ex) {
        return {1, ex.what()};
    } catch (...) {
        return {1, "unknown error"};
    }
}

inline void write_footer(std::ostream& os, std::size_t rows, const std::string& extra = {}) {
    os << "# rows=" << rows << (extra.empty() ? "" : " ") << extra << " version=" << version() << '\n';
}

} // namespace detail

inline const char* learn_csv_header() {
    return "seed,family,d,opt_target,measured_noise_rate,sigma_best,err01,angle_to_wstar,T_used,beta,wall_ms,"
           "samples_total,epsilon,C_const,beyond_C";
}

inline std::string learn_csv_row(const TrialReport& r, double epsilon) {
    std::ostringstream os;
    os << r.seed << ',' << r.family << ',' << r.d << ',' << fmt(r.opt_target) << ',' << fmt(r.measured_noise_rate) << ','
       << fmt(r.sigma_best) << ',' << fmt(r.err01) << ',' << fmt(r.angle_to_wstar) << ',' << r.T_used << ','
       << fmt(r.beta) << ',' << fmt(r.wall_ms) << ',' << r.samples_total << ',' << fmt(epsilon) << ','
       << fmt(r.C_const) << ',' << (r.beyond_C ? 1 : 0);
    return os.str();
}

struct LearnCell {
    double opt;
    std::uint64_t seed;
};

inline std::vector<LearnCell> learn_cells(const ExperimentConfig& cfg, const RunOptions& opts) {
    std::vector<LearnCell> cells;
    for (double opt : cfg.opt_list)
        for (auto seed : cfg.seeds)
            cells.push_back({opt, seed + opts.seed_offset});
    return cells;
}

/// One row per (opt, seed) in config order: far_flip data, learn, report.
inline RunStatus run_learn(const ExperimentConfig& cfg, std::ostream& os, const RunOptions& opts = {}) {
    const auto spec = DistributionSpec::make(cfg.families.front(), cfg.d, cfg.s);
    const auto cells = learn_cells(cfg, opts);
    std::exception_ptr err;
    std::size_t failed_at = 0;
    auto results = parallel_map<TrialReport>(cells.size(), opts.workers, [&](std::size_t i) {
        const auto noise = detail::build_far_flip(cfg, spec, cells[i].opt);
        return learn(spec, noise, detail::learner_for(cfg, cells[i].opt), cells[i].seed, cells[i].opt);
    }, err, failed_at);

    os << learn_csv_header() << '\n';
    std::size_t rows = 0;
    for (; rows < failed_at; ++rows)
        os << learn_csv_row(*results[rows], detail::learner_for(cfg, cells[rows].opt).epsilon) << '\n';
    if (err) {
        os << "FAILED," << cells[failed_at].seed << ',' << fmt(cells[failed_at].opt) << ',' << csv_safe(error_message(err)) << '\n';
        detail::write_footer(os, rows, "status=failed");
        return detail::failure_status(err);
    }
    detail::write_footer(os, rows);
    return {};
}

struct SweepSummary {
    std::vector<double> opts;
    std::vector<double> median_err;
    LineFit fit;
    bool monotone = true;
};

/// learn over every (opt, seed), reduced to per-opt medians and a least
/// squares line of median error against opt.
inline RunStatus run_sweep(const ExperimentConfig& cfg, std::ostream& os, const RunOptions& opts = {},
                           SweepSummary* summary = nullptr) {
    const auto spec = DistributionSpec::make(cfg.families.front(), cfg.d, cfg.s);
    const auto cells = learn_cells(cfg, opts);
    std::exception_ptr err;
    std::size_t failed_at = 0;
    auto results = parallel_map<TrialReport>(cells.size(), opts.workers, [&](std::size_t i) {
        const auto noise = detail::build_far_flip(cfg, spec, cells[i].opt);
        return learn(spec, noise, detail::learner_for(cfg, cells[i].opt), cells[i].seed, cells[i].opt);
    }, err, failed_at);

    os << "opt,seeds,median_err01,min_err01,max_err01,median_angle,median_noise_rate,median_sigma_best\n";
    if (err) {
        os << "FAILED," << cells[failed_at].seed << ',' << fmt(cells[failed_at].opt) << ',' << csv_safe(error_message(err)) << '\n';
        detail::write_footer(os, 0, "status=failed");
        return detail::failure_status(err);
    }
    SweepSummary sum;
    const std::size_t k = cfg.seeds.size();
    for (std::size_t j = 0; j < cfg.opt_list.size(); ++j) {
        std::vector<double> e, a, nr, sg;
        for (std::size_t i = j * k; i < (j + 1) * k; ++i) {
            e.push_back(results[i]->err01);
            a.push_back(results[i]->angle_to_wstar);
            nr.push_back(results[i]->measured_noise_rate);
            sg.push_back(results[i]->sigma_best);
        }
        const double me = median(e);
        os << fmt(cfg.opt_list[j]) << ',' << k << ',' << fmt(me) << ',' << fmt(*std::min_element(e.begin(), e.end())) << ','
           << fmt(*std::max_element(e.begin(), e.end())) << ',' << fmt(median(a)) << ',' << fmt(median(nr)) << ','
           << fmt(median(sg)) << '\n';
        sum.opts.push_back(cfg.opt_list[j]);
        sum.median_err.push_back(me);
    }
    std::vector<std::size_t> order(sum.opts.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sum.opts[a] < sum.opts[b]; });
    for (std::size_t i = 1; i < order.size(); ++i)
        if (sum.median_err[order[i]] < sum.median_err[order[i - 1]])
            sum.monotone = false;
    std::string extra;
    if (sum.opts.size() >= 2) {
        sum.fit = least_squares(sum.opts, sum.median_err);
        extra = "slope=" + fmt(sum.fit.slope) + " intercept=" + fmt(sum.fit.intercept) +
                " monotone=" + (sum.monotone ? "1" : "0");
    }
    detail::write_footer(os, cfg.opt_list.size(), extra);
    if (summary)
        *summary = sum;
    return {};
}

struct CompareRow {
    std::string family;
    double opt = 0.0;
    std::string method;
    double angle = 0.0;
    double err01 = 0.0;
    std::size_t runs = 0;
    bool converged = true;
    std::size_t iterations = 0;
};

inline const char* compare_csv_header() {
    return "family,opt,method,angle_to_wstar,angle_over_opt,err01,runs,converged,iterations";
}

inline std::string compare_csv_row(const CompareRow& r) {
    std::ostringstream os;
    os << r.family << ',' << fmt(r.opt) << ',' << r.method << ',' << fmt(r.angle) << ',' << fmt(r.angle / r.opt) << ','
       << fmt(r.err01) << ',' << r.runs << ',' << (r.converged ? 1 : 0) << ',' << r.iterations;
    return os.str();
}

/// Per (family, opt), in the planar far_flip setting with Pr[S] = opt:
/// median angle of the sigmoid-PSGD pipeline over seeds, the angle of each
/// full-batch convex minimizer, and predicted_floor.
inline RunStatus run_compare(const ExperimentConfig& cfg, std::ostream& os, const RunOptions& opts = {},
                             std::vector<CompareRow>* rows_out = nullptr) {
    os << compare_csv_header() << '\n';
    std::size_t rows = 0;
    std::vector<CompareRow> all;
    auto emit = [&](const CompareRow& r) {
        os << compare_csv_row(r) << '\n';
        all.push_back(r);
        ++rows;
    };
    bool all_converged = true;
    const auto w_star = UnitVector::basis(2, 1);
    for (auto family : cfg.families) {
        const auto spec = DistributionSpec::make(family, 2, cfg.s);
        for (double opt : cfg.opt_list) {
            std::exception_ptr err;
            try {
                const auto noise = far_flip_at_tail_mass(spec, w_star, opt);
                const auto lc = detail::learner_for(cfg, opt);
                std::size_t failed_at = 0;
                auto trials = parallel_map<TrialReport>(cfg.seeds.size(), opts.workers, [&](std::size_t i) {
                    return learn(spec, noise, lc, cfg.seeds[i] + opts.seed_offset, opt);
                }, err, failed_at);
                if (err)
                    std::rethrow_exception(err);
                std::vector<double> angles, errs;
                for (const auto& t : trials) {
                    angles.push_back(t->angle_to_wstar);
                    errs.push_back(t->err01);
                }
                emit({spec.name(), opt, "sigmoid_psgd", median(angles), median(errs), trials.size(), true, 0});

                const auto batch = make_dataset(spec, noise, cfg.batch_size, derive_seed(cfg.batch_seed, 0));
                const auto eval = make_dataset(spec, noise, cfg.learner.eval_size, derive_seed(cfg.batch_seed, 1));
                for (auto kind : cfg.losses) {
                    ConvexFitConfig fc;
                    fc.grad_tol = cfg.grad_tol;
                    const auto fit = fit_convex(batch, ConvexSurrogate{kind}, fc);
                    all_converged = all_converged && fit.converged;
                    const auto w = UnitVector::from(fit.w);
                    emit({spec.name(), opt, "convex_" + to_string(kind), angle_between(w, w_star).radians(),
                          estimate_err01(w, eval), 1, fit.converged, fit.iterations});
                }
                emit({spec.name(), opt, "predicted_floor", predicted_floor(spec, opt).radians(), 0.0, 1, true, 0});
            } catch (...) {
                err = std::current_exception();
            }
            if (err) {
                os << "FAILED," << spec.name() << ',' << fmt(opt) << ',' << csv_safe(error_message(err)) << '\n';
                detail::write_footer(os, rows, "status=failed");
                return detail::failure_status(err);
            }
        }
    }
    detail::write_footer(os, rows, all_converged ? "" : "status=not_converged");
    if (rows_out)
        *rows_out = all;
    if (!all_converged)
        return {1, "a convex baseline did not reach gradient norm " + fmt(cfg.grad_tol)};
    return {};
}

struct LowerboundRow {
    std::string loss;
    std::string family;
    double opt = 0.0;
    ConeScanReport report;
    double admissible = 0.0;
};

inline const char* lowerbound_csv_header() {
    return "loss,family,opt,Z,theta,grid_points,min_grad_norm,argmin_angle,admissible_theta,quad_error,"
           "min_tangential,certified";
}

inline std::string lowerbound_csv_row(const LowerboundRow& r) {
    std::ostringstream os;
    const auto& c = r.report;
    os << r.loss << ',' << r.family << ',' << fmt(r.opt) << ',' << fmt(c.Z) << ',' << fmt(c.theta_max.radians()) << ','
       << c.grid_points << ',' << fmt(c.min_grad_norm) << ',' << fmt(c.argmin_angle) << ',' << fmt(r.admissible) << ','
       << fmt(c.max_error) << ',' << fmt(c.min_tangential) << ',' << (c.certified() ? 1 : 0);
    return os.str();
}

/// scan_cone for every (loss, family, opt) with Pr[S] = opt and
/// θ = admissible_theta. Fails with status 1 if any cell is not certified.
inline RunStatus run_lowerbound(const ExperimentConfig& cfg, std::ostream& os, const RunOptions& opts = {},
                                std::vector<LowerboundRow>* rows_out = nullptr) {
    struct Cell {
        ConvexKind loss;
        Family family;
        double opt;
    };
    std::vector<Cell> cells;
    for (auto loss : cfg.losses)
        for (auto family : cfg.families)
            for (double opt : cfg.opt_list)
                cells.push_back({loss, family, opt});
    QuadratureSpec q;
    q.tol = cfg.quad_tol;
    std::exception_ptr err;
    std::size_t failed_at = 0;
    auto results = parallel_map<LowerboundRow>(cells.size(), opts.workers, [&](std::size_t i) {
        const auto spec = DistributionSpec::make(cells[i].family, 2, cfg.s);
        const double Z = radius_for_tail_mass(spec, cells[i].opt);
        const auto theta = admissible_theta(spec, Z);
        LowerboundRow row;
        row.loss = to_string(cells[i].loss);
        row.family = spec.name();
        row.opt = cells[i].opt;
        row.admissible = theta.radians();
        row.report = scan_cone(ConvexSurrogate{cells[i].loss}, spec, Z, theta, cfg.grid_points, q);
        return row;
    }, err, failed_at);

    os << lowerbound_csv_header() << '\n';
    bool all_certified = true;
    std::vector<LowerboundRow> all;
    for (std::size_t i = 0; i < failed_at; ++i) {
        os << lowerbound_csv_row(*results[i]) << '\n';
        all_certified = all_certified && results[i]->report.certified();
        all.push_back(*results[i]);
    }
    if (err) {
        os << "FAILED," << to_string(cells[failed_at].loss) << ',' << to_string(cells[failed_at].family) << ','
           << fmt(cells[failed_at].opt) << ',' << csv_safe(error_message(err)) << '\n';
        detail::write_footer(os, failed_at, "status=failed");
        return detail::failure_status(err);
    }
    detail::write_footer(os, failed_at, all_certified ? "" : "status=uncertified");
    if (rows_out)
        *rows_out = all;
    if (!all_certified)
        return {1, "a cone scan did not certify a nonzero gradient"};
    return {};
}

/// Dispatches to the run_* entry point for cfg.command.
inline RunStatus run_experiment(const ExperimentConfig& cfg, std::ostream& os, const RunOptions& opts = {}) {
    switch (cfg.command) {
    case Command::learn: return run_learn(cfg, os, opts);
    case Command::sweep: return run_sweep(cfg, os, opts);
    case Command::compare: return run_compare(cfg, os, opts);
    case Command::lowerbound: return run_lowerbound(cfg, os, opts);
    }
    return {2, "unknown command"};
}

} // namespace halfspace
