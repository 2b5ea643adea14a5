// nivec/error.h

// Copyright 2026  The nivec Authors

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

#ifndef NIVEC_ERROR_H_
#define NIVEC_ERROR_H_

#include <stdexcept>
#include <string>

namespace nivec {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kNonFinite,
  kNotPositiveDefinite,
  kBadMagic,
  kBadVersion,
  kTruncated,
  kIo,
  kMissingInput,
  kConfig,
  kCheckFailed,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string &what) {
  throw Error(code, what);
}

#define NIVEC_CHECK(cond, code, msg)                                    \
  do {                                                                  \
    if (!(cond)) ::nivec::Fail((code), std::string(msg));               \
  } while (0)

}  // namespace nivec

#endif  // NIVEC_ERROR_H_
