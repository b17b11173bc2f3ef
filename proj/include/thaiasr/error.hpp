// error.hpp
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
//
// Exception types shared by every module. The CLI maps ConfigError and
// LeakageError to exit status 1, everything else to exit status 2.

#ifndef THAIASR_ERROR_HPP_
#define THAIASR_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace thaiasr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters or inputs that violate a documented precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Same speaker found under more than one split label.
class LeakageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; line is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// External tokenizer could not be spawned, exited non-zero, or broke the
// segmentation contract.
class ProcessError : public Error {
 public:
  using Error::Error;
};

}  // namespace thaiasr

#endif  // THAIASR_ERROR_HPP_
