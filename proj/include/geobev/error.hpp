/* Copyright 2026 The GeoBEV Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef GEOBEV_ERROR_HPP_
#define GEOBEV_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace geobev {

// Failure classes, numbered to match the CLI exit-code taxonomy:
// 1 verification failure, 2 config/usage, 3 I/O, 4 file-format.
enum class ErrorKind : int {
  kVerify = 1,
  kConfig = 2,
  kIo = 3,
  kFormat = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_config(const std::string& msg) {
  throw Error(ErrorKind::kConfig, msg);
}
[[noreturn]] inline void throw_io(const std::string& msg) {
  throw Error(ErrorKind::kIo, msg);
}
[[noreturn]] inline void throw_format(const std::string& msg) {
  throw Error(ErrorKind::kFormat, msg);
}
[[noreturn]] inline void throw_verify(const std::string& msg) {
  throw Error(ErrorKind::kVerify, msg);
}

}  // namespace geobev

#endif  // GEOBEV_ERROR_HPP_
