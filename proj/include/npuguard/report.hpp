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

/**
 * @file report.hpp
 * @brief JSON configs and reports, CSV tables.
 *
 * Config parsing is strict: unknown keys and wrong types raise
 * ConfigurationError, missing keys keep their defaults. Reports are emitted
 * with sorted keys so identical runs give identical bytes.
 */

#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "npuguard/campaign.hpp"

namespace npuguard {

using Json = nlohmann::json;

Json to_json(const ShieldConfig& s);
Json to_json(const TimingReport& t);
Json to_json(const CampaignConfig& c);
Json to_json(const CampaignReport& r);
Json to_json(const SensitivityConfig& c);
Json to_json(const SensitivityReport& r);
Json to_json(const FaultPlan& p);
Json to_json(const TrialResult& t);

CampaignConfig campaign_config_from_json(const Json& j);
SensitivityConfig sensitivity_config_from_json(const Json& j);
FaultPlan fault_plan_from_json(const Json& j);

/// Reads and parses a JSON file; I/O and syntax errors raise ConfigurationError.
Json load_json(const std::string& path);

void write_trials_csv(std::ostream& os, const std::vector<TrialRow>& rows);
void write_events_csv(std::ostream& os, const std::vector<EventRow>& rows);
void write_sensitivity_csv(std::ostream& os, const SensitivityReport& r);

}  // namespace npuguard
