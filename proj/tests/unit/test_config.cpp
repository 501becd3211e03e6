#include <gtest/gtest.h>

#include "sta/config.hpp"
#include "sta/errors.hpp"

namespace sta {
namespace {

TEST(Config, SbuDefaults) {
    const RunConfig c;
    EXPECT_EQ(c.batch_size, 8u);
    EXPECT_EQ(c.loss.lambda1, 0.001);
    EXPECT_EQ(c.loss.lambda2, 0.0001);
    EXPECT_EQ(c.loss.lambda3, 0.0005);
    EXPECT_EQ(c.hidden, 100u);
    EXPECT_EQ(c.main_layers, 3u);
    EXPECT_EQ(c.n1, 1000u);
    EXPECT_EQ(c.n2, 500u);
    EXPECT_EQ(c.dropout, 0.5);
    EXPECT_EQ(c.effective_smooth_window(), 1u);
}

TEST(Config, NtuProfile) {
    RunConfig c;
    c.apply({{"lambda1", "0.5"}, {"profile", "ntu"}});
    EXPECT_EQ(c.batch_size, 256u);
    EXPECT_EQ(c.loss.lambda1, 0.5);
    EXPECT_EQ(c.loss.lambda2, 0.001);
}

TEST(Config, UnknownKeyIsError) {
    RunConfig c;
    EXPECT_THROW(c.set("hiden", "10"), ConfigError);
}

TEST(Config, BadValuesAreErrors) {
    RunConfig c;
    EXPECT_THROW(c.set("hidden", "ten"), ConfigError);
    EXPECT_THROW(c.set("hidden", "0"), ConfigError);
    EXPECT_THROW(c.set("lambda1", "-1"), ConfigError);
    EXPECT_THROW(c.set("dropout", "1"), ConfigError);
    EXPECT_THROW(c.set("smooth_window", "4"), ConfigError);
    EXPECT_THROW(c.set("variant", "gru"), ConfigError);
    EXPECT_THROW(c.set("format", "ntu"), ConfigError);
    EXPECT_THROW(c.set("fold", "x"), ConfigError);
    EXPECT_THROW(c.set("spatial_reg", "maybe"), ConfigError);
}

TEST(Config, VariantForcesBypass) {
    RunConfig c;
    c.n1 = 10;
    c.n2 = 5;
    c.set("variant", "lstm");
    for (const auto& s : c.plan().stages) EXPECT_TRUE(s.spatial_bypass && s.temporal_bypass);
    c.set("variant", "sa");
    for (const auto& s : c.plan().stages) EXPECT_TRUE(s.temporal_bypass);
    c.set("variant", "ta");
    for (const auto& s : c.plan().stages) EXPECT_TRUE(s.spatial_bypass);
    c.set("variant", "sta");
    EXPECT_EQ(c.plan().stages.size(), 8u);
}

TEST(Config, ParseTextWithComments) {
    const auto kv = parse_config_text("# run\nvariant = ta  # ablation\n\n  seed=7\n");
    ASSERT_EQ(kv.size(), 2u);
    EXPECT_EQ(kv[0].first, "variant");
    EXPECT_EQ(kv[0].second, "ta");
    EXPECT_EQ(kv[1].second, "7");
    EXPECT_THROW(parse_config_text("variant ta\n"), ConfigError);
}

TEST(Config, TextRoundTrip) {
    RunConfig c;
    c.apply({{"variant", "sa"}, {"lambda3", "0.25"}, {"temporal_reg", "false"}, {"seed", "99"}, {"format", "sbu"}});
    RunConfig d;
    d.apply(parse_config_text(c.to_text()));
    EXPECT_EQ(d.to_text(), c.to_text());
    EXPECT_EQ(d.effective_smooth_window(), 5u);
}

TEST(Config, TrainConfigCarriesSettings) {
    RunConfig c;
    c.apply({{"hidden", "16"}, {"attn_hidden", "8"}, {"lr", "0.01"}, {"spatial_reg", "false"}});
    ModelShape s;
    s.joints = 5;
    s.classes = 3;
    const auto tc = c.train_config(s);
    EXPECT_EQ(tc.shape.main_hidden, 16u);
    EXPECT_EQ(tc.shape.spatial_hidden, 8u);
    EXPECT_EQ(tc.shape.score_hidden, 8u);
    EXPECT_EQ(tc.shape.joints, 5u);
    EXPECT_EQ(tc.adam.lr, 0.01);
    EXPECT_FALSE(tc.loss.spatial_reg);
}

TEST(Config, MissingFileIsConfigError) { EXPECT_THROW(load_config("/nonexistent/run.cfg"), ConfigError); }

}  // namespace
}  // namespace sta
