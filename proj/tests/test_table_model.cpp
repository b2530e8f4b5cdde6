#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "gsim/gsim.hpp"

namespace gsim {
namespace {

const std::filesystem::path kModels = std::filesystem::path(GSIM_SOURCE_DIR) / "models";

TEST(TableModel, BundledCopiesMatchModelFiles) {
  for (auto name : benchmark_names) {
    std::ifstream in(kModels / (std::string(name) + ".json"));
    ASSERT_TRUE(in) << name;
    const auto on_disk = nlohmann::json::parse(in);
    EXPECT_EQ(on_disk, nlohmann::json::parse(benchmark_source(name))) << name;
    EXPECT_EQ(load_model(kModels / (std::string(name) + ".json"))->content_hash(),
              build_benchmark(name)->content_hash());
  }
}

TEST(TableModel, HashDependsOnContent) {
  EXPECT_NE(build_benchmark("two_state")->content_hash(),
            build_benchmark("cascade3")->content_hash());
  EXPECT_EQ(testing::single_rate(0.1)->content_hash(), testing::single_rate(0.1)->content_hash());
  EXPECT_NE(testing::single_rate(0.1)->content_hash(), testing::single_rate(0.2)->content_hash());
}

TEST(TableModel, MissingFileIsConfigError) {
  EXPECT_THROW(load_model(kModels / "nope.json"), ConfigError);
}

TEST(TableModel, MalformedDocumentsAreConfigErrors) {
  const char* bad[] = {
      R"([1,2])",
      R"({"components":[{"name":"a","states":["x"]}]})",
      R"({"mission_time":-1,"components":[{"name":"a","states":["x"]}]})",
      R"({"mission_time":1,"components":[{"name":"a","states":["x","y"]}],
          "rates":[{"component":"zz","from":"x","to":"y","rate":1}]})",
      R"({"mission_time":1,"components":[{"name":"a","states":["x","y"]}],
          "rates":[{"component":"a","from":"x","to":"y","rate":-1}]})",
      R"({"mission_time":1,"components":[{"name":"a","states":["x","y"]}],
          "process":[{"name":"v","initial":0,"range":[0,1]}],
          "rates":[{"component":"a","from":"x","to":"y",
                    "rate":{"variable":"v","breaks":[0.5],"values":[1]}}]})",
      R"({"mission_time":1,"components":[{"name":"a","states":["x","y"]}],
          "end_states":[{"class":"target","label":"t"}]})",
      R"({"mission_time":1,"components":[{"name":"a","states":["x","y"]}],
          "end_states":[{"class":"meh","config":{"a":"y"}}]})",
      R"({"mission_time":1,"components":[{"name":"a","states":["x","y"],"initial":"q"}]})",
  };
  for (const char* text : bad)
    EXPECT_THROW(TableModel::from_json(nlohmann::json::parse(text)), ConfigError) << text;
}

TEST(TableModel, PiecewiseRateFollowsLevel) {
  auto m = build_benchmark("holdup_tank");
  auto rate_of = [&](double level, const Config& cfg, const Config& target) {
    for (const auto& c : m->transitions({cfg, {level}, 0.0}))
      if (c.target_config == target) return c.rate;
    return 0.0;
  };
  // pump2 off -> on: demand below 4 m, spurious above.
  EXPECT_DOUBLE_EQ(rate_of(3.9, {0, 0, 0}, {0, 1, 0}), 0.05);
  EXPECT_DOUBLE_EQ(rate_of(4.0, {0, 0, 0}, {0, 1, 0}), 0.002);
  // valve closed -> open: demand from 6 m.
  EXPECT_DOUBLE_EQ(rate_of(5.9, {0, 0, 1}, {0, 0, 0}), 0.001);
  EXPECT_DOUBLE_EQ(rate_of(6.0, {0, 0, 1}, {0, 0, 0}), 0.05);
  // pump1 restart only on low level.
  EXPECT_DOUBLE_EQ(rate_of(5.0, {1, 0, 0}, {0, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(rate_of(3.0, {1, 0, 0}, {0, 0, 0}), 0.05);
}

TEST(TableModel, ProcessDependenceNamesTheRate) {
  EXPECT_FALSE(build_benchmark("two_state")->process_dependence());
  EXPECT_FALSE(build_benchmark("cascade3")->process_dependence());
  const auto why = build_benchmark("holdup_tank")->process_dependence();
  ASSERT_TRUE(why);
  EXPECT_NE(why->find("level"), std::string::npos) << *why;
  EXPECT_NE(why->find("pump1:off->on"), std::string::npos) << *why;
}

TEST(TableModel, EndClassesInDeclarationOrder) {
  const auto classes = build_benchmark("holdup_tank")->end_classes();
  ASSERT_EQ(classes.size(), 2u);
  EXPECT_EQ(classes[0].key(), "target:overflow");
  EXPECT_EQ(classes[1].key(), "target:dryout");
}

TEST(TableModel, DriftRulesAreSummed) {
  auto m = build_benchmark("holdup_tank");
  EXPECT_DOUBLE_EQ(m->derivative({{0, 1, 1}, {5.0}, 0.0})[0], 0.2);
  EXPECT_DOUBLE_EQ(m->derivative({{1, 0, 0}, {5.0}, 0.0})[0], -0.1);
  EXPECT_DOUBLE_EQ(m->derivative({{0, 0, 0}, {5.0}, 0.0})[0], 0.0);
}

TEST(EndStateClass, KeysRoundTrip) {
  for (const auto& c : {EndStateClass::ongoing(), EndStateClass::success(),
                        EndStateClass::failure("pump"), EndStateClass::target("all_failed")}) {
    const auto back = EndStateClass::from_key(c.key());
    ASSERT_TRUE(back);
    EXPECT_EQ(*back, c);
  }
  EXPECT_FALSE(EndStateClass::from_key("bogus"));
}

}  // namespace
}  // namespace gsim
