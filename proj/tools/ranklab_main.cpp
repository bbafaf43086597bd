// Experiment runner: train/sweep/census/certify/spectrum/bounds/gen-data
// subcommands over the ranklab library. Config values come from defaults,
// then an optional profile, then a config file, then repeated --set
// overrides, in that order.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ranklab/ranklab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ranklab;

namespace {

constexpr const char* kDataDirEnv = "RANKLAB_DATA_DIR";

struct CommonArgs {
    std::string config_path;
    std::string profile;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::string data_dir;
    std::optional<std::uint64_t> seed;
};

void add_common_options(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "flat key = value config file");
    cmd->add_option("--profile", args.profile,
                    "named defaults applied before the config file (housing, mnist, desk)");
    cmd->add_option("--set", args.overrides,
                    "override one config key, e.g. --set batch_size=32 (repeatable)")
        ->type_name("KEY=VALUE");
    cmd->add_option("--out-dir", args.out_dir, "directory for all output files");
    cmd->add_option("--data-dir", args.data_dir,
                    "directory for input data files (default: $" + std::string(kDataDirEnv) + ")");
    cmd->add_option("--seed", args.seed, "override the experiment seed");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
    ExperimentConfig cfg;
    if (!args.profile.empty()) apply_profile(cfg, args.profile);
    if (!args.config_path.empty()) {
        for (const auto& entry : read_config_file(args.config_path)) {
            apply_config_entry(cfg, entry);
        }
    }
    std::size_t n = 0;
    for (const auto& ov : args.overrides) {
        ++n;
        const std::string where = "override " + std::to_string(n);
        const auto eq = ov.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(where + ": expected KEY=VALUE, got '" + ov + "'");
        }
        ConfigEntry entry;
        entry.key = detail::trim(ov.substr(0, eq));
        entry.value = detail::trim(ov.substr(eq + 1));
        entry.where = where;
        apply_config_entry(cfg, entry);
    }
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (args.seed) cfg.train.seed = *args.seed;
    return cfg;
}

std::string resolve_data_dir(const CommonArgs& args) {
    if (!args.data_dir.empty()) return args.data_dir;
    if (const char* env = std::getenv(kDataDirEnv)) return env;
    return "";
}

fs::path ensure_out_dir(const ExperimentConfig& cfg) {
    fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    return dir;
}

json certificate_json(const RankCertificate& cert, const CertVerdict& verdict) {
    json j;
    j["mode"] = cert.mode == CertMode::constant_g ? "constant_g" : "variable_g";
    j["batch_size"] = cert.batch_size;
    j["i1"] = cert.i1;
    j["i2"] = cert.i2;
    j["g1"] = cert.g1;
    j["g2"] = cert.g2;
    j["p0"] = cert.p0;
    j["p1"] = cert.p1;
    j["rank_bound"] = cert.rank_bound;
    j["epsilon"] = cert.epsilon;
    j["distance"] = cert.distance;
    j["constant_proof"] = cert.constant_proof;
    j["constant_paper"] = cert.constant_paper;
    j["holds_proof"] = cert.holds_proof;
    j["holds_paper"] = cert.holds_paper;
    std::vector<std::vector<double>> rows(cert.v_tilde.rows());
    for (std::size_t i = 0; i < cert.v_tilde.rows(); ++i) {
        const auto row = cert.v_tilde.row(i);
        rows[i].assign(row.begin(), row.end());
    }
    j["v_tilde"] = rows;
    j["verified"] = {{"distance", verdict.distance},
                     {"holds_proof", verdict.holds_proof},
                     {"holds_paper", verdict.holds_paper},
                     {"rank_ok", verdict.rank_ok}};
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

TwoLayerNet net_for_analysis(const ExperimentConfig& cfg, const PreparedData& data,
                             const std::string& checkpoint) {
    if (!checkpoint.empty()) return load_checkpoint(checkpoint);
    return kaiming_init(cfg.width, data.train.input_dim(), cfg.train.seed);
}

int cmd_train(const CommonArgs& args) {
    const auto cfg = resolve_config(args);
    const auto data = load_experiment_data(cfg, resolve_data_dir(args));
    const auto out = ensure_out_dir(cfg);

    PointResult p = run_point(cfg, data);
    save_checkpoint(p.tr.net, out / "checkpoint.txt");
    p.tr.log.checkpoint_path = (out / "checkpoint.txt").string();
    write_train_log(p.tr.log, out / "train_log.csv");
    write_census_csv(p.census, out / "census.csv");
    write_histogram_csv(p.census, out / "histogram.csv");
    const auto verdict = verify_certificate(p.cert, p.tr.net);
    write_text(out / "certificate.json", certificate_json(p.cert, verdict).dump(2) + "\n");
    const auto row = summarize_point(cfg, p);
    write_summary_csv(std::span(&row, 1), out / "summary.csv");

    std::cout << "train_mse " << format_double(p.final_train_mse) << "\n"
              << "test_mse " << format_double(p.final_test_mse) << "\n"
              << "stable_rank " << format_double(p.final_stable_rank) << "\n"
              << "census_max " << format_double(p.census.max_norm) << "\n"
              << "cert_holds " << (p.cert.holds_proof ? 1 : 0) << "\n";
    return 0;
}

int cmd_sweep(const CommonArgs& args) {
    const auto cfg = resolve_config(args);
    const auto data = load_experiment_data(cfg, resolve_data_dir(args));
    const auto result = run_sweep(cfg, data);
    std::cout << "points " << result.rows.size() << "\n"
              << "failures " << result.failures.size() << "\n"
              << "summary " << (fs::path(cfg.out_dir) / "summary.csv").string() << "\n";
    for (const auto& f : result.failures) {
        std::cerr << "failed point mu_v=" << format_double(f.mu_v) << " B=" << f.batch_size
                  << ": " << f.message << "\n";
    }
    return 0;
}

int cmd_census(const CommonArgs& args, const std::string& checkpoint, const std::string& family,
               std::size_t batches, std::size_t bins) {
    const auto cfg = resolve_config(args);
    const auto data = load_experiment_data(cfg, resolve_data_dir(args));
    const auto out = ensure_out_dir(cfg);
    const auto net = net_for_analysis(cfg, data, checkpoint);

    BatchFamily fam = BatchFamily::epoch_partition(cfg.train.seed + 2);
    if (family == "random") {
        fam = BatchFamily::random_batches(batches, cfg.train.seed + 2);
    } else if (family != "partition") {
        throw std::runtime_error("census: --family must be partition or random, got '" + family +
                                 "'");
    }
    const auto census =
        gradient_census(net, data.train, cfg.train.batch_size, cfg.train.gspec, fam, bins);
    write_census_csv(census, out / "census.csv");
    write_histogram_csv(census, out / "histogram.csv");
    std::cout << "batches " << census.norms.size() << "\n"
              << "max_norm " << format_double(census.max_norm) << "\n";
    return 0;
}

int cmd_certify(const CommonArgs& args, const std::string& checkpoint, long i1, long i2) {
    const auto cfg = resolve_config(args);
    const auto data = load_experiment_data(cfg, resolve_data_dir(args));
    const auto out = ensure_out_dir(cfg);
    const auto net = net_for_analysis(cfg, data, checkpoint);

    const RankCertificate cert =
        cfg.train.gspec.is_constant()
            ? certify_constant_auto(net, data.train, cfg.train.batch_size, cfg.train.gspec,
                                    cfg.train.seed + 3, i1)
            : certify_variable_auto(net, data.train, cfg.train.batch_size, cfg.train.gspec,
                                    cfg.train.seed + 3, i1, i2);
    const auto verdict = verify_certificate(cert, net);
    write_text(out / "certificate.json", certificate_json(cert, verdict).dump(2) + "\n");
    std::cout << "epsilon " << format_double(cert.epsilon) << "\n"
              << "distance " << format_double(cert.distance) << "\n"
              << "bound " << format_double(cert.constant_proof * cert.epsilon) << "\n"
              << "holds " << (verdict.holds_proof ? 1 : 0) << "\n";
    return 0;
}

int cmd_spectrum(const CommonArgs& args, const std::string& checkpoint) {
    const auto cfg = resolve_config(args);
    const auto data = load_experiment_data(cfg, resolve_data_dir(args));
    const auto out = ensure_out_dir(cfg);
    const auto net = net_for_analysis(cfg, data, checkpoint);

    const auto sigma = singular_values(net.v);
    std::string csv = "index,sigma\n";
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        csv += std::to_string(i) + "," + format_double(sigma[i]) + "\n";
    }
    write_text(out / "spectrum.csv", csv);
    std::cout << "sigma_max " << format_double(sigma.empty() ? 0.0 : sigma.front()) << "\n"
              << "stable_rank " << format_double(stable_rank(net.v)) << "\n"
              << "rank " << matrix_rank(net.v) << "\n";
    return 0;
}

int cmd_bounds(const CommonArgs& args, std::size_t m, std::size_t n, std::size_t k,
               std::size_t samples, double delta, double c_scale, double l_scale) {
    const auto cfg = resolve_config(args);
    const auto out = ensure_out_dir(cfg);
    const auto r = bound_value(m, n, k, samples, delta, l_scale, c_scale);
    std::string csv = "m,n,k,n_samples,delta,full,lowrank,ratio,pdim_full,pdim_lowrank\n";
    csv += std::to_string(m) + "," + std::to_string(n) + "," + std::to_string(k) + "," +
           std::to_string(samples) + "," + format_double(delta) + "," + format_double(r.full) +
           "," + format_double(r.lowrank) + "," + format_double(r.ratio) + "," +
           format_double(r.pdim_full) + "," + format_double(r.pdim_lowrank) + "\n";
    write_text(out / "bounds.csv", csv);
    std::cout << "full " << format_double(r.full) << "\n"
              << "lowrank " << format_double(r.lowrank) << "\n"
              << "ratio " << format_double(r.ratio) << "\n";
    return 0;
}

int cmd_gen_data(const CommonArgs& args) {
    const auto cfg = resolve_config(args);
    const auto out = ensure_out_dir(cfg);
    const auto full = synthetic_teacher_full(cfg.synth_n, cfg.synth_samples, cfg.synth_rank,
                                             cfg.synth_noise, cfg.train.seed, cfg.teacher_width);
    save_csv(full.data, out / "data.csv");
    save_checkpoint(full.teacher, out / "teacher_checkpoint.txt");
    std::cout << "samples " << full.data.size() << "\n"
              << "input_dim " << full.data.input_dim() << "\n"
              << "teacher_rank " << matrix_rank(full.teacher.v) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-layer ReLU training with weight decay: low-rank bias experiments"};
    app.require_subcommand(1);
    app.footer("Input data paths resolve against --data-dir, or $" + std::string(kDataDirEnv) +
               " when the flag is absent. Output files land in --out-dir.");

    CommonArgs train_args, sweep_args, census_args, certify_args, spectrum_args, bounds_args,
        gen_args;
    std::string census_checkpoint, certify_checkpoint, spectrum_checkpoint;
    std::string census_family = "partition";
    std::size_t census_batches = 64;
    std::size_t census_bins = 30;
    long certify_i1 = -1, certify_i2 = -1;
    std::size_t bounds_m = 256, bounds_n = 8, bounds_k = 2, bounds_samples = 512;
    double bounds_delta = 0.05, bounds_c = 1.0, bounds_l = 1.0;

    auto* train_cmd = app.add_subcommand("train", "train one network and emit all diagnostics");
    add_common_options(train_cmd, train_args);

    auto* sweep_cmd = app.add_subcommand("sweep", "grid over mu_v and/or batch size");
    add_common_options(sweep_cmd, sweep_args);

    auto* census_cmd =
        app.add_subcommand("census", "batch-gradient norm census for a stored or fresh network");
    add_common_options(census_cmd, census_args);
    census_cmd->add_option("--checkpoint", census_checkpoint,
                           "network checkpoint (default: fresh seeded init)");
    census_cmd->add_option("--family", census_family, "batch family: partition or random");
    census_cmd->add_option("--batches", census_batches, "batch count for --family random");
    census_cmd->add_option("--bins", census_bins, "histogram bin count");

    auto* certify_cmd =
        app.add_subcommand("certify", "build and verify a low-rank certificate for V");
    add_common_options(certify_cmd, certify_args);
    certify_cmd->add_option("--checkpoint", certify_checkpoint,
                            "network checkpoint (default: fresh seeded init)");
    certify_cmd->add_option("--i1", certify_i1, "pin the first witness sample");
    certify_cmd->add_option("--i2", certify_i2, "pin the second witness sample (variable g)");

    auto* spectrum_cmd = app.add_subcommand("spectrum", "singular spectrum of V");
    add_common_options(spectrum_cmd, spectrum_args);
    spectrum_cmd->add_option("--checkpoint", spectrum_checkpoint,
                             "network checkpoint (default: fresh seeded init)");

    auto* bounds_cmd = app.add_subcommand("bounds", "evaluate the generalization bound formulas");
    add_common_options(bounds_cmd, bounds_args);
    bounds_cmd->add_option("--m", bounds_m, "network width");
    bounds_cmd->add_option("--n", bounds_n, "input dimension");
    bounds_cmd->add_option("--k", bounds_k, "rank of the restricted class");
    bounds_cmd->add_option("--num-samples", bounds_samples, "training set size N");
    bounds_cmd->add_option("--delta", bounds_delta, "confidence level");
    bounds_cmd->add_option("--c-scale", bounds_c, "absolute constant C");
    bounds_cmd->add_option("--l-scale", bounds_l, "Lipschitz/scale factor L");

    auto* gen_cmd =
        app.add_subcommand("gen-data", "write a synthetic teacher dataset and its checkpoint");
    add_common_options(gen_cmd, gen_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        json err;
        err["error"] = e.what();
        err["exit_code"] = e.get_exit_code();
        std::cerr << err.dump() << "\n";
        return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_args);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_args);
        if (census_cmd->parsed()) {
            return cmd_census(census_args, census_checkpoint, census_family, census_batches,
                              census_bins);
        }
        if (certify_cmd->parsed()) {
            return cmd_certify(certify_args, certify_checkpoint, certify_i1, certify_i2);
        }
        if (spectrum_cmd->parsed()) return cmd_spectrum(spectrum_args, spectrum_checkpoint);
        if (bounds_cmd->parsed()) {
            return cmd_bounds(bounds_args, bounds_m, bounds_n, bounds_k, bounds_samples,
                              bounds_delta, bounds_c, bounds_l);
        }
        if (gen_cmd->parsed()) return cmd_gen_data(gen_args);
    } catch (const std::exception& ex) {
        json err;
        err["error"] = ex.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
