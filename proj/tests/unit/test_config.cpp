#include <gtest/gtest.h>

#include <fstream>

#include "gsv/config.hpp"
#include "gsv/io.hpp"
#include "test_support.hpp"

using namespace gsv;
using nlohmann::json;

TEST(Config, DefaultsRoundTrip) {
  const AppConfig c;
  const json j = to_json(c);
  EXPECT_EQ(to_json(config_from_json(j)), j);
}

TEST(Config, EditedValuesRoundTripThroughFile) {
  AppConfig c;
  c.pipeline.keyframe_interval = 3;
  c.pipeline.keyframe_scale = 0.75;
  c.optimizer.base_lr = 0.0125;
  c.training.intervals = {2, 4};
  c.training.options.mode = PropagationMode::warp_only;
  c.model.kernel_size = 5;
  c.model.offsets = std::vector<Offset>{{0, 0}, {1, 0}, {0, -2}};
  c.segmenter.kind = "toy";
  const auto dir = test::scratch_dir("config_rt");
  save_config(dir / "c.json", c);
  const AppConfig back = load_config(dir / "c.json");
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.pipeline.keyframe_interval, 3u);
  EXPECT_EQ(back.training.options.mode, PropagationMode::warp_only);
  ASSERT_TRUE(back.model.offsets.has_value());
  EXPECT_EQ((*back.model.offsets)[2], (Offset{0, -2}));
}

TEST(Config, MissingKeysKeepDefaults) {
  const AppConfig c = config_from_json(json{{"pipeline", {{"keyframe_interval", 2}}}});
  EXPECT_EQ(c.pipeline.keyframe_interval, 2u);
  EXPECT_EQ(c.optimizer.base_lr, OptimizerConfig{}.base_lr);
  EXPECT_EQ(c.pipeline.classes, 4u);
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_THROW(config_from_json(json{{"pipeline", {{"keyframe_intervall", 2}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"extra", 1}}), std::invalid_argument);
  try {
    config_from_json(json{{"optimizer", {{"lr", 0.1}}}});
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("optimizer.lr"), std::string::npos) << e.what();
  }
}

TEST(Config, InvalidValuesAreRejected) {
  EXPECT_THROW(config_from_json(json{{"pipeline", {{"keyframe_scale", 0.8}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"training", {{"mode", "fast"}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"pipeline", {{"classes", "four"}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json::array()), std::invalid_argument);
}

TEST(Config, InvalidJsonIsAnIoError) {
  const auto dir = test::scratch_dir("config_bad");
  std::ofstream(dir / "bad.json") << "{ \"pipeline\": ";
  EXPECT_THROW(load_config(dir / "bad.json"), IoError);
  EXPECT_THROW(load_config(dir / "absent.json"), IoError);
}

TEST(Config, OffsetsJson) {
  const std::vector<Offset> offs{{0, 0}, {-1, 2}};
  const json j = offsets_to_json(offs);
  EXPECT_EQ(j, json::parse("[[0,0],[-1,2]]"));
  EXPECT_EQ(offsets_from_json(j), offs);
  EXPECT_THROW(offsets_from_json(json::parse("[[0,0,1]]")), std::invalid_argument);
}
