// Copyright 2026 The avdiar Authors.
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

#include <stdexcept>
#include <string>

namespace avdiar {

// Base of every error thrown by the library. The CLI prints what() as a
// single line prefixed with kind().
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

#define AVDIAR_DEFINE_ERROR(Name, tag)                   \
  class Name : public Error {                            \
   public:                                               \
    using Error::Error;                                  \
    const char* kind() const noexcept override { return tag; } \
  }

AVDIAR_DEFINE_ERROR(DimensionError, "dimension");
AVDIAR_DEFINE_ERROR(ContractError, "contract");
AVDIAR_DEFINE_ERROR(InputError, "input");
AVDIAR_DEFINE_ERROR(ConfigError, "config");
AVDIAR_DEFINE_ERROR(LoadError, "load");
AVDIAR_DEFINE_ERROR(IoError, "io");
AVDIAR_DEFINE_ERROR(ParseError, "parse");
AVDIAR_DEFINE_ERROR(TrainingError, "training");

#undef AVDIAR_DEFINE_ERROR

}  // namespace avdiar
