#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ranklab/analysis.hpp"
#include "ranklab/data.hpp"
#include "ranklab/format.hpp"
#include "ranklab/network.hpp"
#include "ranklab/training.hpp"

namespace ranklab {

enum class DataSource { synthetic, csv, idx };

/// Everything a run needs: dataset source, model width, the training
/// hyperparameters, output directory, and optional sweep axes. Populated in
/// four layers, each overriding the last: built-in defaults, a named
/// profile, a config file, then command-line overrides.
struct ExperimentConfig {
    DataSource source = DataSource::synthetic;

    // synthetic source
    std::size_t synth_n = 8;
    std::size_t synth_samples = 640;
    std::size_t synth_rank = 2;
    double synth_noise = 0.05;
    std::size_t teacher_width = 64;

    // csv source
    std::string csv_path;
    std::string target_column = "target";
    Normalize normalize = Normalize::none;
    double minmax_lo = -1.0;
    double minmax_hi = 1.0;

    // idx source
    std::string idx_images;
    std::string idx_labels;

    // train/test split
    std::size_t n_train = 512;
    std::size_t n_test = 128;

    std::size_t width = 256;
    TrainConfig train;
    std::string out_dir = ".";

    std::vector<double> sweep_mu_v;
    std::vector<std::size_t> sweep_batch;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t lo = 0;
    std::size_t hi = s.size();
    while (lo < hi && std::isspace(static_cast<unsigned char>(s[lo]))) ++lo;
    while (hi > lo && std::isspace(static_cast<unsigned char>(s[hi - 1]))) --hi;
    return s.substr(lo, hi - lo);
}

inline bool parse_bool(const std::string& value, const std::string& where) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::runtime_error(where + ": expected true/false, got '" + value + "'");
}

inline std::size_t parse_count(const std::string& value, const std::string& where) {
    const long long v = parse_integer(value, where);
    if (v < 0) throw std::runtime_error(where + ": expected a nonnegative count, got " + value);
    return static_cast<std::size_t>(v);
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& value, const std::string& where, Parse parse) {
    std::vector<T> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw std::runtime_error(where + ": empty list element");
        out.push_back(parse(item, where));
    }
    if (out.empty()) throw std::runtime_error(where + ": empty list");
    return out;
}

}  // namespace detail

struct ConfigEntry {
    std::string key;
    std::string value;
    std::string where;  // "config line N" or "override N"
};

/// Reads a flat key = value file. '#' starts a comment, blank lines are
/// skipped, and every retained entry remembers its line for error messages.
inline std::vector<ConfigEntry> read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path.string());
    std::vector<ConfigEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = "config line " + std::to_string(line_no);
        if (eq == std::string::npos) {
            throw std::runtime_error(where + ": expected key = value, got '" + line + "'");
        }
        ConfigEntry e;
        e.key = detail::trim(line.substr(0, eq));
        e.value = detail::trim(line.substr(eq + 1));
        e.where = where;
        if (e.key.empty()) throw std::runtime_error(where + ": empty key");
        if (e.value.empty()) throw std::runtime_error(where + ": empty value for '" + e.key + "'");
        entries.push_back(std::move(e));
    }
    return entries;
}

/// Applies one key = value pair. Unknown keys and malformed values are
/// rejected with the entry's location in the message.
inline void apply_config_entry(ExperimentConfig& cfg, const ConfigEntry& e) {
    const std::string ctx = e.where + ": " + e.key;
    const std::string& v = e.value;

    if (e.key == "dataset") {
        if (v == "synthetic") {
            cfg.source = DataSource::synthetic;
        } else if (v == "csv") {
            cfg.source = DataSource::csv;
        } else if (v == "idx") {
            cfg.source = DataSource::idx;
        } else {
            throw std::runtime_error(ctx + ": expected synthetic/csv/idx, got '" + v + "'");
        }
    } else if (e.key == "synth_n") {
        cfg.synth_n = detail::parse_count(v, ctx);
    } else if (e.key == "synth_samples") {
        cfg.synth_samples = detail::parse_count(v, ctx);
    } else if (e.key == "synth_rank") {
        cfg.synth_rank = detail::parse_count(v, ctx);
    } else if (e.key == "synth_noise") {
        cfg.synth_noise = parse_double(v, ctx);
    } else if (e.key == "teacher_width") {
        cfg.teacher_width = detail::parse_count(v, ctx);
    } else if (e.key == "csv_path") {
        cfg.csv_path = v;
    } else if (e.key == "target_column") {
        cfg.target_column = v;
    } else if (e.key == "normalize") {
        if (v == "none") {
            cfg.normalize = Normalize::none;
        } else if (v == "zscore") {
            cfg.normalize = Normalize::zscore;
        } else if (v == "minmax") {
            cfg.normalize = Normalize::minmax;
        } else {
            throw std::runtime_error(ctx + ": expected none/zscore/minmax, got '" + v + "'");
        }
    } else if (e.key == "minmax_lo") {
        cfg.minmax_lo = parse_double(v, ctx);
    } else if (e.key == "minmax_hi") {
        cfg.minmax_hi = parse_double(v, ctx);
    } else if (e.key == "idx_images") {
        cfg.idx_images = v;
    } else if (e.key == "idx_labels") {
        cfg.idx_labels = v;
    } else if (e.key == "n_train") {
        cfg.n_train = detail::parse_count(v, ctx);
    } else if (e.key == "n_test") {
        cfg.n_test = detail::parse_count(v, ctx);
    } else if (e.key == "width") {
        cfg.width = detail::parse_count(v, ctx);
    } else if (e.key == "batch_size") {
        cfg.train.batch_size = detail::parse_count(v, ctx);
    } else if (e.key == "epochs") {
        cfg.train.epochs = detail::parse_count(v, ctx);
    } else if (e.key == "lr0") {
        cfg.train.lr0 = parse_double(v, ctx);
    } else if (e.key == "decay_factor") {
        cfg.train.decay_factor = parse_double(v, ctx);
    } else if (e.key == "decay_period") {
        cfg.train.decay_period = detail::parse_count(v, ctx);
    } else if (e.key == "mu_u") {
        cfg.train.mu_u = parse_double(v, ctx);
    } else if (e.key == "mu_b") {
        cfg.train.mu_b = parse_double(v, ctx);
    } else if (e.key == "g") {
        if (v == "constant") {
            cfg.train.gspec = GSpec::constant(cfg.train.gspec.is_constant() ? cfg.train.gspec.mu_v
                                                                            : 1e-4);
        } else if (v == "affine_y2") {
            const double a = cfg.train.gspec.kind == GSpec::Kind::affine_y2 ? cfg.train.gspec.a
                                                                            : 1.0;
            const double c = cfg.train.gspec.kind == GSpec::Kind::affine_y2 ? cfg.train.gspec.c
                                                                            : 1.0;
            cfg.train.gspec = GSpec::affine_y2(a, c);
        } else {
            throw std::runtime_error(ctx + ": expected constant/affine_y2, got '" + v + "'");
        }
    } else if (e.key == "mu_v") {
        const double mu = parse_double(v, ctx);
        if (!(mu > 0.0)) throw std::runtime_error(ctx + ": mu_v must be positive");
        cfg.train.gspec = GSpec::constant(mu);
    } else if (e.key == "g_a") {
        const double a = parse_double(v, ctx);
        const double c = cfg.train.gspec.kind == GSpec::Kind::affine_y2 ? cfg.train.gspec.c : 0.0;
        cfg.train.gspec = GSpec::affine_y2(a, c);
    } else if (e.key == "g_c") {
        const double c = parse_double(v, ctx);
        const double a = cfg.train.gspec.kind == GSpec::Kind::affine_y2 ? cfg.train.gspec.a : 1.0;
        cfg.train.gspec = GSpec::affine_y2(a, c);
    } else if (e.key == "seed") {
        cfg.train.seed = static_cast<std::uint64_t>(parse_integer(v, ctx));
    } else if (e.key == "drop_last") {
        cfg.train.drop_last = detail::parse_bool(v, ctx);
    } else if (e.key == "out_dir") {
        cfg.out_dir = v;
    } else if (e.key == "sweep_mu_v") {
        cfg.sweep_mu_v = detail::parse_list<double>(
            v, ctx, [](const std::string& s, const std::string& c) { return parse_double(s, c); });
    } else if (e.key == "sweep_batch") {
        cfg.sweep_batch = detail::parse_list<std::size_t>(
            v, ctx,
            [](const std::string& s, const std::string& c) { return detail::parse_count(s, c); });
    } else {
        throw std::runtime_error(e.where + ": unknown key '" + e.key + "'");
    }
}

/// Named bundles of defaults matching the two experimental protocols plus a
/// small synthetic setup. Applied before the config file, so files and flags
/// can override any field.
inline void apply_profile(ExperimentConfig& cfg, const std::string& name) {
    if (name == "housing") {
        cfg.source = DataSource::csv;
        cfg.target_column = "MedHouseVal";
        cfg.n_train = 1800;
        cfg.n_test = 600;
        cfg.width = 8192;
        cfg.train.batch_size = 16;
        cfg.train.epochs = 5000;
        cfg.train.mu_u = 1e-4;
        cfg.train.mu_b = 1e-4;
    } else if (name == "mnist") {
        cfg.source = DataSource::idx;
        cfg.idx_images = "train-images-idx3-ubyte";
        cfg.idx_labels = "train-labels-idx1-ubyte";
        cfg.n_train = 9000;
        cfg.n_test = 1000;
        cfg.width = 32768;
        cfg.train.batch_size = 16;
        cfg.train.epochs = 2000;
        cfg.train.mu_u = 1e-6;
        cfg.train.mu_b = 1e-6;
    } else if (name == "desk") {
        cfg = ExperimentConfig{};  // the built-in defaults are the desk-scale setup
    } else {
        throw std::runtime_error("unknown profile '" + name + "' (known: housing, mnist, desk)");
    }
}

struct PreparedData {
    Dataset train;
    Dataset test;
};

namespace detail {

inline std::filesystem::path resolve_data_path(const std::string& p, const std::string& data_dir) {
    std::filesystem::path path(p);
    if (path.is_absolute() || data_dir.empty()) return path;
    return std::filesystem::path(data_dir) / path;
}

}  // namespace detail

/// Builds the train/test pair from the configured source. Relative csv/idx
/// paths resolve against data_dir when it is nonempty (the CLI passes the
/// data-directory environment variable through here).
inline PreparedData load_experiment_data(const ExperimentConfig& cfg,
                                         const std::string& data_dir = "") {
    Dataset full{Mat(1, 1), ColVec(1), {}};
    switch (cfg.source) {
        case DataSource::synthetic:
            full = synthetic_teacher(cfg.synth_n, cfg.synth_samples, cfg.synth_rank,
                                     cfg.synth_noise, cfg.train.seed, cfg.teacher_width);
            break;
        case DataSource::csv:
            if (cfg.csv_path.empty()) throw std::runtime_error("config: csv_path is required");
            full = load_csv(detail::resolve_data_path(cfg.csv_path, data_dir), cfg.target_column,
                            cfg.normalize, cfg.minmax_lo, cfg.minmax_hi);
            break;
        case DataSource::idx:
            if (cfg.idx_images.empty() || cfg.idx_labels.empty()) {
                throw std::runtime_error("config: idx_images and idx_labels are required");
            }
            full = load_idx(detail::resolve_data_path(cfg.idx_images, data_dir),
                            detail::resolve_data_path(cfg.idx_labels, data_dir));
            break;
    }
    auto [train_set, test_set] = split(full, cfg.n_train, cfg.n_test, cfg.train.seed + 1);
    return {std::move(train_set), std::move(test_set)};
}

struct PointResult {
    TrainResult tr;
    double final_stable_rank = 0.0;
    double final_train_mse = 0.0;
    double final_test_mse = 0.0;
    Gap gap;
    GradientCensus census;
    RankCertificate cert;
};

/// One full experiment at the config's settings: seeded init, training,
/// final-epoch gradient census, rank certificate, generalization gap.
inline PointResult run_point(const ExperimentConfig& cfg, const PreparedData& data) {
    cfg.train.validate();
    TwoLayerNet init = kaiming_init(cfg.width, data.train.input_dim(), cfg.train.seed);

    PointResult p;
    p.tr = train(std::move(init), data.train, data.test, cfg.train);
    if (!p.tr.log.epochs.empty()) {
        const auto& last = p.tr.log.epochs.back();
        p.final_stable_rank = last.stable_rank;
        p.final_train_mse = last.train_mse;
        p.final_test_mse = last.test_mse;
    } else {
        p.final_stable_rank = stable_rank(p.tr.net.v);
        p.final_train_mse = mean_squared_error(p.tr.net, data.train);
        p.final_test_mse = mean_squared_error(p.tr.net, data.test);
    }
    p.gap = generalization_gap(p.tr.net, data.train, data.test);
    p.census = gradient_census(p.tr.net, data.train, cfg.train.batch_size, cfg.train.gspec,
                               BatchFamily::epoch_partition(cfg.train.seed + 2));
    p.cert = cfg.train.gspec.is_constant()
                 ? certify_constant_auto(p.tr.net, data.train, cfg.train.batch_size,
                                         cfg.train.gspec, cfg.train.seed + 3)
                 : certify_variable_auto(p.tr.net, data.train, cfg.train.batch_size,
                                         cfg.train.gspec, cfg.train.seed + 3);
    return p;
}

struct SummaryRow {
    double mu_v = 0.0;
    std::size_t batch_size = 0;
    std::uint64_t seed = 0;
    double final_stable_rank = 0.0;
    double train_mse = 0.0;
    double test_mse = 0.0;
    double gap = 0.0;
    double epsilon = 0.0;  // census max over the final-epoch family
    double cert_distance = 0.0;
    double cert_bound = 0.0;  // proof constant times the certificate's epsilon
    bool cert_holds = false;
};

inline SummaryRow summarize_point(const ExperimentConfig& cfg, const PointResult& p) {
    SummaryRow row;
    row.mu_v = cfg.train.gspec.is_constant() ? cfg.train.gspec.mu_v
                                             : std::numeric_limits<double>::quiet_NaN();
    row.batch_size = cfg.train.batch_size;
    row.seed = cfg.train.seed;
    row.final_stable_rank = p.final_stable_rank;
    row.train_mse = p.final_train_mse;
    row.test_mse = p.final_test_mse;
    row.gap = p.gap.value;
    row.epsilon = p.census.max_norm;
    row.cert_distance = p.cert.distance;
    row.cert_bound = p.cert.constant_proof * p.cert.epsilon;
    row.cert_holds = p.cert.holds_proof;
    return row;
}

inline void write_summary_csv(std::span<const SummaryRow> rows,
                              const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_summary_csv: cannot open " + path.string());
    out << "mu_v,batch_size,seed,final_stable_rank,train_mse,test_mse,gap,"
           "epsilon,cert_distance,cert_bound,cert_holds\n";
    for (const auto& r : rows) {
        out << format_double(r.mu_v) << ',' << r.batch_size << ',' << r.seed << ','
            << format_double(r.final_stable_rank) << ',' << format_double(r.train_mse) << ','
            << format_double(r.test_mse) << ',' << format_double(r.gap) << ','
            << format_double(r.epsilon) << ',' << format_double(r.cert_distance) << ','
            << format_double(r.cert_bound) << ',' << (r.cert_holds ? 1 : 0) << '\n';
    }
    if (!out) throw std::runtime_error("write_summary_csv: write failed for " + path.string());
}

/// File-name suffix identifying one grid point, e.g. "_mu0.01_b16".
inline std::string point_suffix(double mu_v, std::size_t batch_size) {
    return "_mu" + format_double(mu_v) + "_b" + std::to_string(batch_size);
}

struct SweepFailure {
    double mu_v = 0.0;
    std::size_t batch_size = 0;
    std::string message;
};

struct SweepResult {
    std::vector<SummaryRow> rows;
    std::vector<SweepFailure> failures;
};

namespace detail {

inline std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace detail

/// Runs the grid of (mu_v, batch_size) points. Every point gets a fresh
/// seeded init and its own TrainLog and checkpoint under out_dir; summary.csv
/// collects one row per successful point and sweep_errors.csv any failures.
/// An empty axis falls back to the config's single value for that dimension.
inline SweepResult run_sweep(const ExperimentConfig& cfg, const PreparedData& data) {
    detail::require(!cfg.sweep_mu_v.empty() || !cfg.sweep_batch.empty(),
                    "sweep: at least one sweep axis must be set");
    detail::require(cfg.sweep_mu_v.empty() || cfg.train.gspec.is_constant(),
                    "sweep: the mu_v axis requires a constant g");

    std::vector<double> mu_axis = cfg.sweep_mu_v;
    if (mu_axis.empty()) {
        mu_axis = {cfg.train.gspec.is_constant() ? cfg.train.gspec.mu_v
                                                 : std::numeric_limits<double>::quiet_NaN()};
    }
    std::vector<std::size_t> b_axis = cfg.sweep_batch;
    if (b_axis.empty()) b_axis = {cfg.train.batch_size};

    const std::filesystem::path out_dir(cfg.out_dir);
    std::filesystem::create_directories(out_dir);

    SweepResult result;
    for (const double mu : mu_axis) {
        for (const std::size_t b : b_axis) {
            ExperimentConfig point = cfg;
            point.train.batch_size = b;
            if (point.train.gspec.is_constant()) point.train.gspec = GSpec::constant(mu);
            const std::string suffix = point_suffix(mu, b);
            try {
                PointResult p = run_point(point, data);
                const auto checkpoint = out_dir / ("checkpoint" + suffix + ".txt");
                save_checkpoint(p.tr.net, checkpoint);
                p.tr.log.checkpoint_path = checkpoint.string();
                write_train_log(p.tr.log, out_dir / ("train_log" + suffix + ".csv"));
                result.rows.push_back(summarize_point(point, p));
            } catch (const std::exception& ex) {
                result.failures.push_back({mu, b, ex.what()});
            }
        }
    }
    write_summary_csv(result.rows, out_dir / "summary.csv");
    if (!result.failures.empty()) {
        std::ofstream out(out_dir / "sweep_errors.csv");
        out << "mu_v,batch_size,error\n";
        for (const auto& f : result.failures) {
            out << format_double(f.mu_v) << ',' << f.batch_size << ','
                << detail::csv_quote(f.message) << '\n';
        }
    }
    return result;
}

}  // namespace ranklab
