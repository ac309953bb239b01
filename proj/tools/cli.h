// tools/cli.h

// Copyright 2026  tsb authors

// See the top-level COPYING file for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef TSB_TOOLS_CLI_H_
#define TSB_TOOLS_CLI_H_

#include <iostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace tsb {

// Exit codes of RunCli.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Runs the tsb command line. `args` excludes the program name. Normal output
// goes to `out`, diagnostics and usage errors to `err`.
int RunCli(const std::vector<std::string>& args, std::ostream& out = std::cout,
           std::ostream& err = std::cerr);

// Effective configuration after merging built-in defaults, the JSON config
// file and command line flags (in that order of increasing precedence).
// Unknown keys are rejected with UsageError.
nlohmann::json EffectiveConfig(const nlohmann::json& file_config);

// FNV-1a hash of the canonical dump of an effective configuration, excluding
// log_level. Stamped into every output as a 16-digit hex string.
std::string ConfigHash(const nlohmann::json& effective);

}  // namespace tsb

#endif  // TSB_TOOLS_CLI_H_
