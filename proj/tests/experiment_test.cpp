#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ranklab/experiment.hpp"

using namespace ranklab;

namespace {

namespace fs = std::filesystem;

fs::path write_temp_config(const std::string& name, const std::string& text) {
    const auto path = fs::temp_directory_path() / name;
    std::ofstream out(path);
    out << text;
    return path;
}

void apply_all(ExperimentConfig& cfg, const std::vector<ConfigEntry>& entries) {
    for (const auto& e : entries) apply_config_entry(cfg, e);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// a config small enough that a full run_point finishes in milliseconds
ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.synth_n = 4;
    cfg.synth_samples = 48;
    cfg.synth_rank = 2;
    cfg.synth_noise = 0.1;
    cfg.n_train = 32;
    cfg.n_test = 8;
    cfg.width = 16;
    cfg.train.batch_size = 8;
    cfg.train.epochs = 3;
    cfg.train.lr0 = 1e-3;
    cfg.train.gspec = GSpec::constant(0.01);
    cfg.train.seed = 5;
    return cfg;
}

}  // namespace

TEST(ConfigFile, ParsesKeysValuesAndComments) {
    const auto path = write_temp_config("ranklab_cfg_basic.txt",
                                        "# leading comment\n"
                                        "\n"
                                        "width = 64   # trailing comment\n"
                                        "  lr0=0.005\n"
                                        "dataset = synthetic\n");
    const auto entries = read_config_file(path);
    ASSERT_EQ(entries.size(), 3u);
    EXPECT_EQ(entries[0].key, "width");
    EXPECT_EQ(entries[0].value, "64");
    EXPECT_EQ(entries[0].where, "config line 3");
    EXPECT_EQ(entries[1].key, "lr0");
    EXPECT_EQ(entries[1].value, "0.005");

    ExperimentConfig cfg;
    apply_all(cfg, entries);
    EXPECT_EQ(cfg.width, 64u);
    EXPECT_DOUBLE_EQ(cfg.train.lr0, 0.005);
    EXPECT_EQ(cfg.source, DataSource::synthetic);
    fs::remove(path);
}

TEST(ConfigFile, LaterEntriesOverrideEarlierOnes) {
    ExperimentConfig cfg;
    apply_config_entry(cfg, {"epochs", "100", "config line 1"});
    EXPECT_EQ(cfg.train.epochs, 100u);
    apply_config_entry(cfg, {"epochs", "7", "override 1"});
    EXPECT_EQ(cfg.train.epochs, 7u);
}

TEST(ConfigFile, UnknownKeyNamesItsLine) {
    ExperimentConfig cfg;
    try {
        apply_config_entry(cfg, {"ponies", "8", "config line 3"});
        FAIL() << "expected a rejection";
    } catch (const std::runtime_error& ex) {
        EXPECT_EQ(std::string(ex.what()), "config line 3: unknown key 'ponies'");
    }
}

TEST(ConfigFile, TypedValueErrorNamesKeyAndLine) {
    const auto path = write_temp_config("ranklab_cfg_typed.txt",
                                        "width = 32\n"
                                        "batch_size = pony\n");
    const auto entries = read_config_file(path);
    ExperimentConfig cfg;
    try {
        apply_all(cfg, entries);
        FAIL() << "expected a rejection";
    } catch (const std::exception& ex) {
        const std::string msg = ex.what();
        EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
        EXPECT_NE(msg.find("batch_size"), std::string::npos) << msg;
        EXPECT_NE(msg.find("pony"), std::string::npos) << msg;
    }
    fs::remove(path);
}

TEST(ConfigFile, MalformedLinesAreRejected) {
    const auto path1 = write_temp_config("ranklab_cfg_bad1.txt", "width 64\n");
    EXPECT_THROW(read_config_file(path1), std::runtime_error);
    fs::remove(path1);

    const auto path2 = write_temp_config("ranklab_cfg_bad2.txt", "lr0 =   \n");
    EXPECT_THROW(read_config_file(path2), std::runtime_error);
    fs::remove(path2);

    EXPECT_THROW(read_config_file(fs::temp_directory_path() / "ranklab_no_such_cfg.txt"),
                 std::runtime_error);
}

TEST(ConfigFile, GRelatedKeys) {
    ExperimentConfig cfg;
    apply_config_entry(cfg, {"mu_v", "0.25", "config line 1"});
    ASSERT_TRUE(cfg.train.gspec.is_constant());
    EXPECT_DOUBLE_EQ(cfg.train.gspec.mu_v, 0.25);
    EXPECT_THROW(apply_config_entry(cfg, {"mu_v", "0", "config line 2"}), std::runtime_error);

    apply_config_entry(cfg, {"g_a", "0.5", "config line 3"});
    apply_config_entry(cfg, {"g_c", "2.0", "config line 4"});
    ASSERT_FALSE(cfg.train.gspec.is_constant());
    EXPECT_DOUBLE_EQ(cfg.train.gspec.a, 0.5);
    EXPECT_DOUBLE_EQ(cfg.train.gspec.c, 2.0);

    apply_config_entry(cfg, {"g", "constant", "config line 5"});
    EXPECT_TRUE(cfg.train.gspec.is_constant());
    EXPECT_THROW(apply_config_entry(cfg, {"g", "quadratic", "config line 6"}),
                 std::runtime_error);
}

TEST(ConfigFile, SweepAxesParseAsLists) {
    ExperimentConfig cfg;
    apply_config_entry(cfg, {"sweep_mu_v", "1, 0.01 ,0.0001", "config line 1"});
    ASSERT_EQ(cfg.sweep_mu_v.size(), 3u);
    EXPECT_DOUBLE_EQ(cfg.sweep_mu_v[1], 0.01);
    apply_config_entry(cfg, {"sweep_batch", "8,16", "config line 2"});
    ASSERT_EQ(cfg.sweep_batch.size(), 2u);
    EXPECT_EQ(cfg.sweep_batch[1], 16u);
    EXPECT_THROW(apply_config_entry(cfg, {"sweep_batch", "8,,16", "config line 3"}),
                 std::runtime_error);
}

TEST(Profiles, NamedDefaults) {
    ExperimentConfig cfg;
    apply_profile(cfg, "housing");
    EXPECT_EQ(cfg.source, DataSource::csv);
    EXPECT_EQ(cfg.target_column, "MedHouseVal");
    EXPECT_EQ(cfg.width, 8192u);
    EXPECT_EQ(cfg.train.epochs, 5000u);
    EXPECT_EQ(cfg.n_train, 1800u);
    EXPECT_EQ(cfg.n_test, 600u);
    EXPECT_DOUBLE_EQ(cfg.train.mu_u, 1e-4);
    EXPECT_DOUBLE_EQ(cfg.train.mu_b, 1e-4);

    apply_profile(cfg, "mnist");
    EXPECT_EQ(cfg.source, DataSource::idx);
    EXPECT_EQ(cfg.width, 32768u);
    EXPECT_EQ(cfg.train.epochs, 2000u);
    EXPECT_DOUBLE_EQ(cfg.train.mu_u, 1e-6);

    apply_profile(cfg, "desk");
    EXPECT_EQ(cfg.source, DataSource::synthetic);
    EXPECT_EQ(cfg.width, 256u);

    EXPECT_THROW(apply_profile(cfg, "skyscraper"), std::runtime_error);
}

TEST(ExperimentData, SyntheticSplitSizes) {
    auto cfg = tiny_config();
    const auto data = load_experiment_data(cfg);
    EXPECT_EQ(data.train.size(), 32u);
    EXPECT_EQ(data.test.size(), 8u);
    EXPECT_EQ(data.train.input_dim(), 4u);
    EXPECT_EQ(data.test.input_dim(), 4u);
}

TEST(ExperimentData, MissingPathsAreRejected) {
    ExperimentConfig cfg;
    cfg.source = DataSource::csv;
    EXPECT_THROW(load_experiment_data(cfg), std::runtime_error);
    cfg.source = DataSource::idx;
    EXPECT_THROW(load_experiment_data(cfg), std::runtime_error);
}

TEST(RunPoint, ProducesCoherentResults) {
    const auto cfg = tiny_config();
    const auto data = load_experiment_data(cfg);
    const auto p = run_point(cfg, data);

    ASSERT_EQ(p.tr.log.epochs.size(), 3u);
    EXPECT_EQ(p.final_train_mse, p.tr.log.epochs.back().train_mse);
    EXPECT_EQ(p.final_stable_rank, p.tr.log.epochs.back().stable_rank);
    EXPECT_DOUBLE_EQ(p.gap.value, p.final_test_mse - p.final_train_mse);
    EXPECT_EQ(p.census.norms.size(), 4u);  // 32 train samples / B = 8
    EXPECT_TRUE(p.cert.holds_proof);

    const auto again = run_point(cfg, data);
    EXPECT_EQ(again.final_train_mse, p.final_train_mse);
    EXPECT_EQ(again.tr.net.v, p.tr.net.v);

    const auto row = summarize_point(cfg, p);
    EXPECT_DOUBLE_EQ(row.mu_v, 0.01);
    EXPECT_EQ(row.batch_size, 8u);
    EXPECT_EQ(row.seed, 5u);
    EXPECT_EQ(row.epsilon, p.census.max_norm);
    EXPECT_EQ(row.cert_bound, p.cert.constant_proof * p.cert.epsilon);
}

TEST(Sweep, SinglePointMatchesPlainRun) {
    auto cfg = tiny_config();
    const auto out_dir = fs::temp_directory_path() / "ranklab_sweep_single";
    fs::remove_all(out_dir);
    cfg.out_dir = out_dir.string();
    cfg.sweep_mu_v = {0.01};

    const auto data = load_experiment_data(cfg);
    const auto sweep = run_sweep(cfg, data);
    ASSERT_EQ(sweep.rows.size(), 1u);
    ASSERT_TRUE(sweep.failures.empty());

    const auto plain = run_point(cfg, data);
    const auto plain_log = fs::temp_directory_path() / "ranklab_plain_log.csv";
    write_train_log(plain.tr.log, plain_log);
    EXPECT_EQ(slurp(out_dir / "train_log_mu0.01_b8.csv"), slurp(plain_log));

    const auto restored = load_checkpoint(out_dir / "checkpoint_mu0.01_b8.txt");
    EXPECT_EQ(restored.v, plain.tr.net.v);
    EXPECT_EQ(restored.u, plain.tr.net.u);

    const auto summary = slurp(out_dir / "summary.csv");
    EXPECT_NE(summary.find("mu_v,batch_size,seed,final_stable_rank,train_mse,test_mse,gap,"
                           "epsilon,cert_distance,cert_bound,cert_holds"),
              std::string::npos);
    EXPECT_NE(summary.find("\n0.01,8,5,"), std::string::npos);

    fs::remove(plain_log);
    fs::remove_all(out_dir);
}

TEST(Sweep, BatchAxisUnderStrongDecay) {
    // Strong decay collapses the stable rank no matter the batch size; the
    // sweep should report that consistently across the axis.
    ExperimentConfig cfg;
    cfg.synth_n = 8;
    cfg.synth_samples = 128;
    cfg.synth_rank = 2;
    cfg.synth_noise = 0.05;
    cfg.n_train = 112;
    cfg.n_test = 16;
    cfg.width = 64;
    cfg.train.batch_size = 16;
    cfg.train.epochs = 300;
    cfg.train.lr0 = 1e-2;
    cfg.train.gspec = GSpec::constant(1.0);
    cfg.train.seed = 3;
    const auto out_dir = fs::temp_directory_path() / "ranklab_sweep_batch";
    fs::remove_all(out_dir);
    cfg.out_dir = out_dir.string();
    cfg.sweep_batch = {8, 16, 32};

    const auto data = load_experiment_data(cfg);
    const auto sweep = run_sweep(cfg, data);
    ASSERT_EQ(sweep.rows.size(), 3u);
    EXPECT_TRUE(sweep.failures.empty());
    double lo = sweep.rows[0].final_stable_rank, hi = lo;
    for (const auto& row : sweep.rows) {
        EXPECT_LE(row.final_stable_rank, 3.0) << "B = " << row.batch_size;
        EXPECT_TRUE(row.cert_holds) << "B = " << row.batch_size;
        lo = std::min(lo, row.final_stable_rank);
        hi = std::max(hi, row.final_stable_rank);
    }
    EXPECT_LE(hi - lo, 1.0);
    for (const std::size_t b : {8, 16, 32}) {
        EXPECT_TRUE(fs::exists(out_dir / ("train_log_mu1_b" + std::to_string(b) + ".csv")));
        EXPECT_TRUE(fs::exists(out_dir / ("checkpoint_mu1_b" + std::to_string(b) + ".txt")));
    }
    fs::remove_all(out_dir);
}

TEST(Sweep, DecayAxisRanksAreMonotone) {
    // Final stable rank along an increasing mu_v axis, non-increasing up to
    // one inversion.
    ExperimentConfig cfg;
    cfg.synth_n = 16;
    cfg.synth_samples = 256;
    cfg.synth_rank = 2;
    cfg.synth_noise = 0.05;
    cfg.n_train = 224;
    cfg.n_test = 32;
    cfg.width = 128;
    cfg.train.batch_size = 16;
    cfg.train.epochs = 400;
    cfg.train.lr0 = 1e-2;
    cfg.train.seed = 7;
    const auto out_dir = fs::temp_directory_path() / "ranklab_sweep_mu";
    fs::remove_all(out_dir);
    cfg.out_dir = out_dir.string();
    cfg.sweep_mu_v = {1e-4, 1e-2, 1e-1, 1.0};

    const auto data = load_experiment_data(cfg);
    const auto sweep = run_sweep(cfg, data);
    ASSERT_EQ(sweep.rows.size(), 4u);
    EXPECT_TRUE(sweep.failures.empty());

    std::size_t inversions = 0;
    for (std::size_t i = 0; i + 1 < sweep.rows.size(); ++i) {
        if (sweep.rows[i + 1].final_stable_rank > sweep.rows[i].final_stable_rank + 1e-9) {
            ++inversions;
        }
    }
    EXPECT_LE(inversions, 1u);
    EXPECT_GT(sweep.rows.front().final_stable_rank, sweep.rows.back().final_stable_rank);
    fs::remove_all(out_dir);
}

TEST(Sweep, FailuresAreRecordedWithoutAborting) {
    auto cfg = tiny_config();
    const auto out_dir = fs::temp_directory_path() / "ranklab_sweep_fail";
    fs::remove_all(out_dir);
    cfg.out_dir = out_dir.string();
    cfg.sweep_batch = {8, 200};  // 200 exceeds the 32-sample training set

    const auto data = load_experiment_data(cfg);
    const auto sweep = run_sweep(cfg, data);
    ASSERT_EQ(sweep.rows.size(), 1u);
    ASSERT_EQ(sweep.failures.size(), 1u);
    EXPECT_EQ(sweep.rows[0].batch_size, 8u);
    EXPECT_EQ(sweep.failures[0].batch_size, 200u);

    const auto errors = slurp(out_dir / "sweep_errors.csv");
    EXPECT_NE(errors.find("mu_v,batch_size,error"), std::string::npos);
    EXPECT_NE(errors.find("200"), std::string::npos);
    fs::remove_all(out_dir);
}

TEST(Sweep, RequiresAnAxis) {
    const auto cfg = tiny_config();
    const auto data = load_experiment_data(cfg);
    EXPECT_THROW(run_sweep(cfg, data), std::invalid_argument);
}
