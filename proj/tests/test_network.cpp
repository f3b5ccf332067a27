#include <gtest/gtest.h>

#include <map>
#include <string>

#include "ternroll/network.hpp"

namespace ternroll {
namespace {

const std::string kTiny = R"({
  "name": "tiny",
  "layers": [
    {"kind": "buffer", "in_width": 8, "in_channels": 1, "kernel": 3},
    {"kind": "conv", "in_width": 8, "in_channels": 1, "kernel": 3, "filters": 4, "cse": "td"},
    {"kind": "scale_shift", "in_width": 8, "in_channels": 4, "activation": "relu"},
    {"kind": "buffer", "in_width": 8, "in_channels": 4, "kernel": 2},
    {"kind": "max_pool", "in_width": 8, "in_channels": 4},
    {"kind": "mux", "in_width": 4, "in_channels": 4},
    {"kind": "dense", "in_width": 1, "in_channels": 64, "filters": 10}
  ]
})";

std::string with(const std::string& from, const std::string& to) {
  std::string s = kTiny;
  const auto at = s.find(from);
  if (at == std::string::npos) throw std::logic_error("test pattern not found: " + from);
  return s.replace(at, from.size(), to);
}

TEST(NetworkJson, ParsesDefaultsAndDerivedFields) {
  NetworkSpec net = parse_network_json(kTiny);
  ASSERT_EQ(net.layers.size(), 7u);
  EXPECT_EQ(net.clock_hz, 125e6);
  EXPECT_EQ(net.act_format, kActivationFormat);
  EXPECT_EQ(net.scale_format, kScaleFormat);
  EXPECT_EQ(net.layers[1].name, "Conv1");
  EXPECT_EQ(net.layers[1].cse, CseMethod::TopDown);
  EXPECT_EQ(net.layers[2].name, "SS1");
  EXPECT_EQ(net.layers[2].activation, Activation::ReLU);
  EXPECT_EQ(net.layers[4].kernel, 2);
  EXPECT_EQ(net.layers[4].stride, 2);
  EXPECT_EQ(net.layers[5].pixel_interval, 4);
  EXPECT_EQ(net.layers[6].name, "Dense1");
  EXPECT_EQ(net.layers[6].lanes, 1);
  EXPECT_EQ(output_shape(net.layers[5]), (LayerShape{1, 64}));
}

TEST(NetworkJson, RejectsUnknownKeys) {
  EXPECT_THROW(parse_network_json(with("\"name\": \"tiny\"", "\"nmae\": \"tiny\"")), InputError);
  EXPECT_THROW(parse_network_json(with("\"filters\": 4,", "\"filters\": 4, \"padding\": 1,")), InputError);
}

TEST(NetworkJson, RejectsBadValues) {
  EXPECT_THROW(parse_network_json("{"), InputError);
  EXPECT_THROW(parse_network_json(with("\"kind\": \"conv\"", "\"kind\": \"deconv\"")), InputError);
  EXPECT_THROW(parse_network_json(with("\"cse\": \"td\"", "\"cse\": \"greedy\"")), InputError);
  EXPECT_THROW(parse_network_json(with("\"filters\": 4,", "\"filters\": 4.5,")), InputError);
  EXPECT_THROW(parse_network_json(with("\"activation\": \"relu\"", "\"activation\": \"tanh\"")), InputError);
  EXPECT_THROW(parse_network_json(R"({"layers": []})"), InputError);
}

TEST(NetworkValidate, ShapeMismatchNamesBothLayers) {
  try {
    parse_network_json(with("\"in_channels\": 64", "\"in_channels\": 65"));
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("Mux1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("dense"), std::string::npos) << msg;
  }
}

TEST(NetworkValidate, StructuralRules) {
  // First layer must take one pixel per cycle.
  EXPECT_THROW(parse_network_json(with("\"kernel\": 3},", "\"kernel\": 3, \"pixel_interval\": 2},")), InputError);
  // Intervals disagreeing with the pool cascade.
  EXPECT_THROW(parse_network_json(with("{\"kind\": \"mux\", \"in_width\": 4,", "{\"kind\": \"mux\", \"pixel_interval\": 2, \"in_width\": 4,")),
               InputError);
  // Even conv kernels and buffer/consumer kernel mismatches.
  EXPECT_THROW(parse_network_json(with("\"kernel\": 3, \"filters\": 4", "\"kernel\": 2, \"filters\": 4")), InputError);
  EXPECT_THROW(parse_network_json(with("\"in_channels\": 4, \"kernel\": 2", "\"in_channels\": 4, \"kernel\": 3")),
               InputError);
  EXPECT_THROW(parse_network_json(with("\"filters\": 10", "\"filters\": 0")), InputError);
  EXPECT_THROW(parse_network_json(with("\"kind\": \"conv\",", "\"kind\": \"conv\", \"name\": \"SS1\",")), InputError);
}

TEST(NetworkValidate, Vgg7Plan) {
  NetworkSpec net = load_network(std::string(TERNROLL_DATA_DIR) + "/vgg7.json");
  std::map<std::string, const LayerSpec*> by;
  for (const auto& l : net.layers) by[l.name] = &l;
  for (const char* n : {"Conv1", "Conv2", "Conv3", "Conv4", "Conv5", "Conv6", "Dense1", "SM", "Mux1", "Mux2"}) {
    ASSERT_TRUE(by.count(n)) << n;
  }
  EXPECT_EQ(by["Conv1"]->pixel_interval, 1);
  EXPECT_EQ(by["Conv2"]->pixel_interval, 1);
  EXPECT_EQ(by["Conv3"]->pixel_interval, 4);
  EXPECT_EQ(by["Conv4"]->pixel_interval, 4);
  EXPECT_EQ(by["Conv5"]->pixel_interval, 16);
  EXPECT_EQ(by["Conv6"]->pixel_interval, 16);
  EXPECT_DOUBLE_EQ(by["Conv1"]->epsilon, 0.7);
  EXPECT_DOUBLE_EQ(by["Conv4"]->epsilon, 1.4);
  EXPECT_EQ(by["Dense1"]->lanes, 4);
  EXPECT_EQ(by["SM"]->filters, 10);
}

}  // namespace
}  // namespace ternroll
