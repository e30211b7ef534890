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

#include "fesail/error.hpp"

namespace fesail {

std::string_view ToString(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kArity: return "arity";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kLookup: return "lookup";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kState: return "state";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kSize: return "size";
    case ErrorKind::kInput: return "input";
    case ErrorKind::kSpec: return "spec";
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

}  // namespace fesail
