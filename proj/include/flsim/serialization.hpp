// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// JSON mappings for the record types, found by nlohmann::json through ADL.
// Objects are emitted with sorted keys and shortest round-trip doubles.

#include <json.hpp>

#include "flsim/control_plane.hpp"

namespace flsim {

using json = nlohmann::json;

void to_json(json& j, const Hyperparams& h);
void from_json(const json& j, Hyperparams& h);

void to_json(json& j, const LinkReport& r);
void from_json(const json& j, LinkReport& r);

void to_json(json& j, const RoundPlan& p);
void from_json(const json& j, RoundPlan& p);

void to_json(json& j, const Feedback& f);
void from_json(const json& j, Feedback& f);

void to_json(json& j, const RoundMetrics& m);
void from_json(const json& j, RoundMetrics& m);

void to_json(json& j, const RoundRecord& r);
void from_json(const json& j, RoundRecord& r);

/// Compact single-line JSON.
std::string to_line(const RoundRecord& record);

}  // namespace flsim
