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

#ifndef FESAIL_ERROR_HPP_
#define FESAIL_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace fesail {

// Broad failure classes. The CLI maps these onto exit codes, so a new kind
// needs an entry in ExitCodeFor as well.
enum class ErrorKind {
  kArity,     // wrong number of tokens for the field layout
  kParse,     // malformed input file
  kDomain,    // argument outside an operation's domain
  kLookup,    // id not known to a table
  kConfig,    // invalid configuration
  kShape,     // mismatched lengths
  kState,     // internal state missing (e.g. anchor for a batch feature)
  kNumeric,   // non-finite loss or gradient
  kSize,      // instance too large for an exhaustive routine
  kInput,     // missing or unordered input files
  kSpec,      // synthetic stream description violates its invariants
  kContract,  // caller broke a documented precondition
  kIo,        // filesystem failure
};

std::string_view ToString(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace fesail

#endif  // FESAIL_ERROR_HPP_
