// Copyright 2026 The FeSAIL Authors.
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

#ifndef FESAIL_TOOLS_COMMANDS_HPP_
#define FESAIL_TOOLS_COMMANDS_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "fesail/error.hpp"

namespace fesail::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUser = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

int ExitCodeFor(ErrorKind kind);

// Sets the spdlog level from FESAIL_LOG (error, info or debug; info when
// unset). Returns false for an unrecognized value.
bool ConfigureLogging();

// Entry point shared by the binary and the tests. args[0] is the program
// name.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fesail::cli

#endif  // FESAIL_TOOLS_COMMANDS_HPP_
