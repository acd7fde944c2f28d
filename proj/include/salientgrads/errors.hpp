// Copyright 2026 The SalientGrads Authors. All Rights Reserved.
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
// =============================================================================

#pragma once

#include <stdexcept>
#include <string>

namespace salientgrads {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-facing configuration (architecture, sparsity, CLI flags...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Mismatched vector lengths or tensor dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite activation or loss; usually exploded parameters.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed serialized payload or input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A client's copy of the initial parameters differs from the server's.
class VerificationError : public Error {
 public:
  using Error::Error;
};

/// Link failure or aborted transport.
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace salientgrads
