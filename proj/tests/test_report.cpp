/*
 * Copyright 2026 The npuguard Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <sstream>

#include "npuguard/report.hpp"

using namespace npuguard;

TEST_SUITE("report") {
  TEST_CASE("config round-trips through JSON") {
    CampaignConfig c;
    c.geometry = {32, 4, Dataflow::OS};
    c.workload.dtype = DType::Bf16;
    c.protection.mask = MaskPolicy::custom_mask(0xFF00);
    c.faults.rates = {1e-5, 2e-4};
    c.faults.site_weights[SiteKind::GuardpadCell] = 0.5;
    c.faults.permanents.push_back({SiteKind::PEPartialSum, "array|psum", 3, 4, true});
    c.trials = 17;
    const auto back = campaign_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(back.geometry.mode == Dataflow::OS);
    CHECK(back.faults.weight(SiteKind::GuardpadCell) == 0.5);
  }

  TEST_CASE("partial configs keep defaults") {
    const auto c = campaign_config_from_json(Json::parse(R"({"trials": 5, "geometry": {"tiles_per_row": 8}})"));
    CHECK(c.trials == 5);
    CHECK(c.geometry.tiles_per_row == 8);
    CHECK(c.geometry.pes_per_tile == 1);
    CHECK(c.workload.kind == WorkloadKind::TinyMlp);
  }

  TEST_CASE("bad configs raise configuration errors") {
    CHECK_THROWS_AS(campaign_config_from_json(Json::parse(R"({"trails": 5})")), ConfigurationError);
    CHECK_THROWS_AS(campaign_config_from_json(Json::parse(R"({"trials": "many"})")), ConfigurationError);
    CHECK_THROWS_AS(campaign_config_from_json(Json::parse(R"({"geometry": {"mode": "XY"}})")), ConfigurationError);
    CHECK_THROWS_AS(campaign_config_from_json(Json::parse(R"({"geometry": {"tiles_per_row": 1}})")),
                    ConfigurationError);
    CHECK_THROWS_AS(campaign_config_from_json(Json::parse(R"({"faults": {"site_weights": {"Moon": 1}}})")),
                    ConfigurationError);
    CHECK_THROWS_AS(campaign_config_from_json(Json::parse(R"({"workload": {"dtype": "fp64"}})")),
                    ConfigurationError);
    CHECK_THROWS_AS(load_json("/nonexistent/config.json"), ConfigurationError);
  }

  TEST_CASE("fault plans round-trip") {
    FaultPlan p;
    p.seed = 9;
    p.trial = 2;
    p.rate = 1e-4;
    p.input_bits = 1000;
    p.passes = 1;
    p.transients.push_back({SiteKind::Writeback, "a/l0|wb", 3, 1, 0});
    p.permanents.push_back({SiteKind::RegisterBit, "reg/l0|cw", 0, 5, false});
    CHECK(fault_plan_from_json(to_json(p)) == p);
  }

  TEST_CASE("sensitivity config parses classes") {
    const auto c = sensitivity_config_from_json(Json::parse(R"({"classes": ["mantissa", "sign"], "trials": 4})"));
    REQUIRE(c.classes.size() == 2);
    CHECK(c.classes[0] == BitClass::Mantissa);
    CHECK(c.trials == 4);
    CHECK_THROWS_AS(sensitivity_config_from_json(Json::parse(R"({"classes": ["exotic"]})")), ConfigurationError);
  }

  TEST_CASE("campaign outputs are byte-identical across runs") {
    CampaignConfig c;
    c.trials = 10;
    c.faults.rates = {1e-3};
    const auto a = run_campaign(c);
    const auto b = run_campaign(c);
    CHECK(to_json(a.report).dump(2) == to_json(b.report).dump(2));
    std::ostringstream ta, tb, ea, eb;
    write_trials_csv(ta, a.trials);
    write_trials_csv(tb, b.trials);
    write_events_csv(ea, a.events);
    write_events_csv(eb, b.events);
    CHECK(ta.str() == tb.str());
    CHECK(ea.str() == eb.str());
    CHECK(ta.str().rfind("rate,trial,", 0) == 0);
    CHECK(ea.str().rfind("rate,trial,site,component,status,cycle", 0) == 0);
    const Json j = to_json(a.report);
    CHECK(j["rates"][0].contains("detection_coverage"));
    CHECK(j["timing"]["slowdown"].get<double>() >= 1.0);
  }

  TEST_CASE("rate zero reports null coverage") {
    CampaignConfig c;
    c.trials = 2;
    c.faults.rates = {0.0};
    const Json j = to_json(run_campaign(c).report);
    CHECK(j["rates"][0]["detection_coverage"].is_null());
    CHECK(j["rates"][0]["correction_coverage"].is_null());
  }
}
