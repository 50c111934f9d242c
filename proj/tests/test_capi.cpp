/*
 * Copyright 2026 The Semistream Authors. All Rights Reserved
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "semistream/semistream.h"

namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  ss_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("status strings and version") {
  CHECK(std::string(ss_status_string(SS_OK)) == "ok");
  CHECK(std::string(ss_status_string(SS_ERR_SHAPE)).size() > 0);
  CHECK(std::string(ss_version()).size() > 0);
}

TEST_CASE("argument and domain errors set the last error") {
  ss_model* m = nullptr;
  CHECK(ss_model_generate(1.0, 224, 0, nullptr) == SS_ERR_INVALID_ARGUMENT);
  CHECK(std::string(ss_last_error()).size() > 0);
  CHECK(ss_model_generate(0.0, 224, 0, &m) == SS_ERR_DOMAIN);
  CHECK(m == nullptr);
  CHECK(std::string(ss_last_error()).find("width") != std::string::npos);

  double out = 0;
  CHECK(ss_normalize_performance(-1, 100, 608, &out) == SS_ERR_DOMAIN);
  CHECK(ss_normalize_performance(38.30, 125, 220, &out) == SS_OK);
  CHECK(std::fabs(out - 84.67) <= 0.05);
  CHECK(ss_model_load("/nonexistent/semistream/pkg", &m) != SS_OK);
}

TEST_CASE("engine throughput") {
  double g = 0;
  const double want[] = {89.6, 16.0, 27.2, 27.2, 5.4};
  for (int e = SS_ENGINE_C2D; e <= SS_ENGINE_ADD; ++e) {
    REQUIRE(ss_engine_gops(static_cast<ss_engine>(e), 100e6, &g) == SS_OK);
    CHECK(g == want[e]);
  }
}

TEST_CASE("model lifecycle through the C API") {
  ss_model* m = nullptr;
  REQUIRE(ss_model_generate(0.35, 64, 3, &m) == SS_OK);
  ss_model_info info{};
  REQUIRE(ss_model_info_get(m, &info) == SS_OK);
  CHECK(info.prepared == 0);
  CHECK(info.rounds == 17);
  CHECK(info.head_entries == 1);
  CHECK(info.input_height == 64);
  CHECK(info.output_channels == 1000);

  ss_tensor* image = nullptr;
  REQUIRE(ss_image_random(m, 5, &image) == SS_OK);
  ss_result* r = nullptr;
  CHECK(ss_infer(m, image, nullptr, &r) == SS_ERR_INVALID_ARGUMENT);

  REQUIRE(ss_model_prepare(m, SS_ROUND_NEAREST) == SS_OK);
  CHECK(ss_model_prepare(m, SS_ROUND_NEAREST) == SS_OK);
  CHECK(ss_model_prepare(m, SS_ROUND_TRUNCATE) == SS_ERR_INVALID_ARGUMENT);

  const fs::path dir = fs::temp_directory_path() / "semistream_capi_pkg";
  fs::remove_all(dir);
  REQUIRE(ss_model_save(m, dir.c_str()) == SS_OK);
  ss_model* loaded = nullptr;
  REQUIRE(ss_model_load(dir.c_str(), &loaded) == SS_OK);
  ss_model_info li{};
  REQUIRE(ss_model_info_get(loaded, &li) == SS_OK);
  CHECK(li.prepared == 1);
  CHECK(li.weight_bytes == info.weight_bytes);

  ss_infer_options opts{SS_MODE_STREAM, 0, 0};
  REQUIRE(ss_infer(loaded, image, &opts, &r) == SS_OK);
  const ss_tensor* logits = nullptr;
  REQUIRE(ss_result_logits(r, &logits) == SS_OK);
  int h = 0, w = 0, c = 0;
  REQUIRE(ss_tensor_shape(logits, &h, &w, &c) == SS_OK);
  CHECK(c == 1000);
  const uint8_t* data = nullptr;
  size_t size = 0;
  REQUIRE(ss_tensor_data(logits, &data, &size) == SS_OK);
  std::vector<uint8_t> stream(data, data + size);

  ss_tensor* oracle = nullptr;
  REQUIRE(ss_oracle_infer(m, image, &oracle) == SS_OK);
  REQUIRE(ss_tensor_data(oracle, &data, &size) == SS_OK);
  CHECK(std::vector<uint8_t>(data, data + size) == stream);

  ss_engine_stats st{};
  REQUIRE(ss_result_engine_stats(r, SS_ENGINE_C2D, &st) == SS_OK);
  CHECK(st.cycles == 64u * 64u);
  // Width 0.35 gives a 16-filter entry convolution.
  CHECK(st.madds == 28u * 16u * 64u * 64u);

  char* text = nullptr;
  ss_clock clock = ss_clock_default();
  CHECK(clock.frequency_hz == 100e6);
  CHECK(clock.external_bandwidth == 2.0e9);
  REQUIRE(ss_report(m, &clock, SS_FORMAT_CSV, &text) == SS_OK);
  CHECK(take(text).find("C2D,448,44.8") != std::string::npos);
  double ms = 0, fps = 0;
  REQUIRE(ss_latency(m, &clock, &ms, &fps) == SS_OK);
  CHECK(ms > 0);
  CHECK(fps == doctest::Approx(1000.0 / ms));
  REQUIRE(ss_model_summary(m, &text) == SS_OK);
  CHECK(take(text).size() > 0);

  ss_result_free(r);
  ss_tensor_free(oracle);
  ss_tensor_free(image);
  ss_model_free(loaded);
  ss_model_free(m);
  fs::remove_all(dir);
}

TEST_CASE("shape errors name the expected dims") {
  ss_model* m = nullptr;
  REQUIRE(ss_model_generate(0.35, 32, 1, &m) == SS_OK);
  REQUIRE(ss_model_prepare(m, SS_ROUND_NEAREST) == SS_OK);
  std::vector<uint8_t> pixels(16 * 16 * 3, 128);
  ss_tensor* small = nullptr;
  REQUIRE(ss_tensor_create(16, 16, 3, 1.0 / 128, 128, pixels.data(), &small) == SS_OK);
  ss_result* r = nullptr;
  CHECK(ss_infer(m, small, nullptr, &r) == SS_ERR_SHAPE);
  CHECK(std::string(ss_last_error()).find("32x32x3") != std::string::npos);
  CHECK(ss_tensor_create(2, 2, 3, 0.1, 300, pixels.data(), &small) != SS_OK);
  ss_tensor_free(small);
  ss_model_free(m);
}

TEST_CASE("verification through the C API") {
  ss_verify_options o{11, 5, SS_ROUND_NEAREST, nullptr, SS_FAULT_NONE};
  int passed = 0;
  char* report = nullptr;
  REQUIRE(ss_verify(&o, &passed, &report) == SS_OK);
  CHECK(passed == 1);
  CHECK(take(report).find("verify: ok") != std::string::npos);

  o.fault = SS_FAULT_REQUANT_OFF_BY_ONE;
  REQUIRE(ss_verify(&o, &passed, &report) == SS_OK);
  CHECK(passed == 0);
  CHECK(take(report).find("first mismatch") != std::string::npos);

  o.suite = "nope";
  CHECK(ss_verify(&o, &passed, &report) == SS_ERR_DOMAIN);
}
