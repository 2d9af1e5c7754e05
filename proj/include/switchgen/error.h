// Copyright 2026 The switchgen Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SWITCHGEN_ERROR_H_
#define SWITCHGEN_ERROR_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace switchgen {

// Root of every error the library throws. Callers that only need to report
// failures catch this; the subclasses exist so tests and the CLI can map
// failures to specific outcomes (HTTP status, exit code).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, std::size_t offset)
      : Error(message + " at offset " + std::to_string(offset)),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

#define SWITCHGEN_DEFINE_ERROR(Name)  \
  class Name : public Error {         \
   public:                            \
    using Error::Error;               \
  }

SWITCHGEN_DEFINE_ERROR(LimitExceeded);
SWITCHGEN_DEFINE_ERROR(FormatError);
SWITCHGEN_DEFINE_ERROR(UnknownState);
SWITCHGEN_DEFINE_ERROR(DisallowedToken);
SWITCHGEN_DEFINE_ERROR(InvalidSchema);
SWITCHGEN_DEFINE_ERROR(EmptyMask);
SWITCHGEN_DEFINE_ERROR(InvalidArgument);
SWITCHGEN_DEFINE_ERROR(ContextTooLong);
SWITCHGEN_DEFINE_ERROR(EmptyCorpus);
SWITCHGEN_DEFINE_ERROR(RemoteError);
SWITCHGEN_DEFINE_ERROR(ProtocolError);
SWITCHGEN_DEFINE_ERROR(MissingShots);

#undef SWITCHGEN_DEFINE_ERROR

}  // namespace switchgen

#endif  // SWITCHGEN_ERROR_H_
