// Copyright 2026 The herdtwin Authors
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

namespace herdtwin {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BoundsError : public Error { using Error::Error; };
class IdentityError : public Error { using Error::Error; };
class ResolutionError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class SchemaError : public Error { using Error::Error; };
class NumericalError : public Error { using Error::Error; };
class TrainingError : public Error { using Error::Error; };
class ModelError : public Error { using Error::Error; };
class LeakageError : public Error { using Error::Error; };

/// Bundle or file whose schema version does not match this build.
class VersionError : public Error {
 public:
  VersionError(std::string expected, std::string found)
      : Error("version mismatch: expected '" + expected + "', found '" + found + "'"),
        expected_(std::move(expected)),
        found_(std::move(found)) {}

  const std::string& expected() const { return expected_; }
  const std::string& found() const { return found_; }

 private:
  std::string expected_;
  std::string found_;
};

}  // namespace herdtwin
