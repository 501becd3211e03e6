#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "sta/checkpoint.hpp"
#include "sta/errors.hpp"
#include "sta/io.hpp"

namespace fs = std::filesystem;

namespace sta::cli {
namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               (std::string("sta_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        SyntheticConfig sc = one_joint_per_class(2, 4);
        sc.n_sequences = 10;
        sc.min_len = 4;
        sc.max_len = 8;
        data_ = gen_synthetic(sc);
        save_generic(dir_ / "data.txt", data_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    RunConfig small_config(const std::string& variant) const {
        RunConfig c;
        c.apply({{"variant", variant},
                 {"hidden", "4"},
                 {"attn_hidden", "4"},
                 {"n1", "3"},
                 {"n2", "2"},
                 {"batch_size", "4"},
                 {"dropout", "0.5"}});
        c.data = (dir_ / "data.txt").string();
        c.out = (dir_ / "run").string();
        return c;
    }

    std::vector<std::vector<std::string>> read_csv(const fs::path& p) const {
        std::vector<std::vector<std::string>> rows;
        std::istringstream in(read_file(p));
        std::string line;
        while (std::getline(in, line)) {
            std::vector<std::string> row;
            std::stringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) row.push_back(cell);
            rows.push_back(row);
        }
        return rows;
    }

    fs::path dir_;
    Dataset data_;
};

std::size_t count_checkpoints(const fs::path& dir) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".ckpt") ++n;
    return n;
}

TEST_F(Cli, LstmVariantWritesOnlyFinalCheckpoint) {
    std::ostringstream log;
    EXPECT_EQ(cmd_train(small_config("lstm"), log), kExitOk);
    EXPECT_EQ(count_checkpoints(dir_ / "run"), 1u);
    EXPECT_TRUE(fs::exists(dir_ / "run" / "final.ckpt"));
    const auto cp = checkpoint_load(dir_ / "run" / "final.ckpt");
    EXPECT_TRUE(cp.model.spatial_bypass && cp.model.temporal_bypass);
}

TEST_F(Cli, StaVariantWritesStageCheckpoints) {
    std::ostringstream log;
    EXPECT_EQ(cmd_train(small_config("sta"), log), kExitOk);
    EXPECT_EQ(count_checkpoints(dir_ / "run"), 9u);
    const auto rows = read_csv(dir_ / "run" / "loss_trace.csv");
    ASSERT_FALSE(rows.empty());
    EXPECT_EQ(rows[0], (std::vector<std::string>{"iteration", "stage", "loss", "ce", "reg1", "reg2", "reg3"}));
    EXPECT_EQ(rows.size(), 1u + 5 * 3 + 3 * 2);
    EXPECT_TRUE(fs::exists(dir_ / "run" / "config.txt"));
}

TEST_F(Cli, RerunGivesIdenticalFiles) {
    std::ostringstream log;
    auto c = small_config("sta");
    cmd_train(c, log);
    const std::string trace = read_file(dir_ / "run" / "loss_trace.csv");
    const std::string blob = read_file(blob_path(dir_ / "run" / "final.ckpt"));
    c.out = (dir_ / "again").string();
    cmd_train(c, log);
    EXPECT_EQ(read_file(dir_ / "again" / "loss_trace.csv"), trace);
    EXPECT_EQ(read_file(blob_path(dir_ / "again" / "final.ckpt")), blob);
}

TEST_F(Cli, RegularizerFlagsReachTheLoss) {
    auto c = small_config("sta");
    c.set("spatial_reg", "false");
    c.set("temporal_reg", "false");
    const auto tc = c.train_config(data_shape(data_));
    EXPECT_FALSE(tc.loss.spatial_reg);
    EXPECT_FALSE(tc.loss.temporal_reg);
    EXPECT_TRUE(tc.loss.l1_reg);
}

TEST_F(Cli, ConstantModelScoresHalfOnBalancedData) {
    auto m = STAModel::zeros(data_shape(data_));
    m.temporal_bypass = true;
    m.proj_b = Tensor::vector({1, 0});
    const auto r = accuracy_report(m, data_, LossConfig::sbu());
    EXPECT_EQ(r.accuracy, 0.5);
    EXPECT_EQ(r.confusion[0][0], 5u);
    EXPECT_EQ(r.confusion[1][0], 5u);
    EXPECT_EQ(r.class_accuracy(1), 0.0);

    checkpoint_save(m, nullptr, dir_ / "const.ckpt");
    std::ostringstream out;
    EXPECT_EQ(cmd_eval(small_config("sta"), dir_ / "const.ckpt", out), kExitOk);
    EXPECT_NE(out.str().find("50.00"), std::string::npos) << out.str();
}

TEST_F(Cli, EmptyEvaluationSetIsContractError) {
    const auto m = STAModel::zeros(data_shape(data_));
    EXPECT_THROW(accuracy_report(m, {}, LossConfig::sbu()), ContractError);
}

TEST_F(Cli, EvalRejectsMismatchedCheckpoint) {
    auto shape = data_shape(data_);
    shape.joints = 5;
    checkpoint_save(STAModel::zeros(shape), nullptr, dir_ / "wide.ckpt");
    std::ostringstream out;
    EXPECT_THROW(cmd_eval(small_config("sta"), dir_ / "wide.ckpt", out), LoadError);
}

TEST_F(Cli, FoldAllTrainsAndEvaluatesEveryFold) {
    auto c = small_config("lstm");
    c.set("fold", "all");
    std::ostringstream out;
    EXPECT_EQ(cmd_train(c, out), kExitOk);
    for (int k = 0; k < 5; ++k) EXPECT_TRUE(fs::exists(dir_ / "run" / ("fold" + std::to_string(k)) / "final.ckpt"));
    EXPECT_EQ(cmd_eval(c, dir_ / "run", out), kExitOk);
    EXPECT_NE(out.str().find("5-fold mean accuracy"), std::string::npos);
}

TEST_F(Cli, ExportedAttentionIsValid) {
    auto m = init_params(data_shape(data_), 3, 0.5);
    m.temporal.b.fill(0.2);
    export_attention(m, data_[0], dir_ / "attn");
    const auto alpha = read_csv(dir_ / "attn" / "alpha.csv");
    ASSERT_EQ(alpha.size(), 1 + data_[0].valid_len * 4);
    std::vector<double> row_sum(data_[0].valid_len, 0.0);
    for (std::size_t i = 1; i < alpha.size(); ++i) row_sum[std::stoul(alpha[i][0]) - 1] += std::stod(alpha[i][2]);
    for (double s : row_sum) EXPECT_NEAR(s, 1.0, 1e-9);
    const auto beta = read_csv(dir_ / "attn" / "beta.csv");
    ASSERT_EQ(beta.size(), 1 + data_[0].valid_len);
    double prev = 0.0;
    for (std::size_t i = 1; i < beta.size(); ++i) {
        const double b = std::stod(beta[i][1]);
        EXPECT_GE(b, 0.0);
        EXPECT_EQ(std::stod(beta[i][2]), b - prev);
        prev = b;
    }
}

TEST_F(Cli, SingleFrameDeltaEqualsBeta) {
    auto m = init_params(data_shape(data_), 4, 0.5);
    m.temporal.b.fill(0.3);
    auto seq = data_[1];
    seq.valid_len = 1;
    seq.coords.resize(seq.frame_dim());
    export_attention(m, seq, dir_ / "one");
    const auto beta = read_csv(dir_ / "one" / "beta.csv");
    ASSERT_EQ(beta.size(), 2u);
    EXPECT_EQ(beta[1][0], "1");
    EXPECT_EQ(beta[1][1], beta[1][2]);
}

TEST_F(Cli, GenSynthSbuLayoutLoads) {
    SynthArgs a;
    a.synth = one_joint_per_class(3, 30);
    a.synth.n_sequences = 9;
    a.format = "sbu";
    a.out = dir_ / "sbu";
    std::ostringstream out;
    EXPECT_EQ(cmd_gen_synth(a, out), kExitOk);
    const auto data = load_sbu(dir_ / "sbu");
    EXPECT_EQ(data.size(), 9u);
    for (const auto& s : data) {
        EXPECT_EQ(s.joints, 30u);
        EXPECT_TRUE(s.subjects.has_value());
    }
}

TEST_F(Cli, ErrorsMapToExitCodes) {
    std::ostringstream err;
    EXPECT_EQ(report_error(ConfigError("x"), err), kExitConfig);
    EXPECT_EQ(report_error(ParseError("x"), err), kExitData);
    EXPECT_EQ(report_error(CorruptionError("x"), err), kExitData);
    EXPECT_EQ(report_error(NumericError("x"), err), kExitNumeric);
    EXPECT_EQ(report_error(ContractError("x"), err), kExitFailure);
    EXPECT_NE(err.str().find("error: x"), std::string::npos);
}

TEST_F(Cli, MissingDataIsDataError) {
    auto c = small_config("sta");
    c.data = (dir_ / "absent.txt").string();
    std::ostringstream out;
    try {
        cmd_train(c, out);
        FAIL() << "expected an error";
    } catch (const std::exception& e) {
        std::ostringstream err;
        EXPECT_NE(report_error(e, err), kExitOk);
    }
}

TEST(GradCheckCommand, TinyModelPasses) {
    std::ostringstream out;
    EXPECT_EQ(cmd_grad_check(3, 1e-5, out), kExitOk);
}

}  // namespace
}  // namespace sta::cli
