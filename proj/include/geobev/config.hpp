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
#ifndef GEOBEV_CONFIG_HPP_
#define GEOBEV_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>

namespace geobev {

// Line-based "key = value" text with '#' comments. Consumers pop the keys
// they understand and then call finish(), which hard-errors on anything left
// over (unknown keys never pass silently).
class KeyValueFile {
 public:
  static KeyValueFile parse_file(const std::string& path);
  static KeyValueFile parse_text(const std::string& text,
                                 const std::string& origin);

  bool has(const std::string& key) const;
  std::string take_string(const std::string& key, const std::string& fallback);
  double take_real(const std::string& key, double fallback);
  int take_int(const std::string& key, int fallback);
  std::uint64_t take_u64(const std::string& key, std::uint64_t fallback);

  // Throws a config error naming every unconsumed key.
  void finish() const;

 private:
  std::string origin_;
  std::map<std::string, std::string> entries_;
};

void write_key_value_file(const std::string& path,
                          const std::map<std::string, std::string>& entries);

}  // namespace geobev

#endif  // GEOBEV_CONFIG_HPP_
