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
#include "geobev/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "geobev/error.hpp"

namespace geobev {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse_text(const std::string& text,
                                      const std::string& origin) {
  KeyValueFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw_config(origin + " line " + std::to_string(line_no) +
                   ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw_config(origin + " line " + std::to_string(line_no) + ": empty key");
    }
    if (kv.entries_.count(key)) {
      throw_config(origin + " line " + std::to_string(line_no) +
                   ": duplicate key '" + key + "'");
    }
    kv.entries_[key] = value;
  }
  return kv;
}

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), path);
}

bool KeyValueFile::has(const std::string& key) const {
  return entries_.count(key) > 0;
}

std::string KeyValueFile::take_string(const std::string& key,
                                      const std::string& fallback) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::string v = it->second;
  entries_.erase(it);
  return v;
}

double KeyValueFile::take_real(const std::string& key, double fallback) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string v = it->second;
  entries_.erase(it);
  char* end = nullptr;
  const double r = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') {
    throw_config(origin_ + ": key '" + key + "' is not a real number: '" + v +
                 "'");
  }
  return r;
}

int KeyValueFile::take_int(const std::string& key, int fallback) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string v = it->second;
  entries_.erase(it);
  char* end = nullptr;
  const long r = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') {
    throw_config(origin_ + ": key '" + key + "' is not an integer: '" + v + "'");
  }
  return static_cast<int>(r);
}

std::uint64_t KeyValueFile::take_u64(const std::string& key,
                                     std::uint64_t fallback) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string v = it->second;
  entries_.erase(it);
  char* end = nullptr;
  const unsigned long long r = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') {
    throw_config(origin_ + ": key '" + key + "' is not an integer: '" + v + "'");
  }
  return static_cast<std::uint64_t>(r);
}

void KeyValueFile::finish() const {
  if (entries_.empty()) return;
  std::string keys;
  for (const auto& [k, v] : entries_) {
    if (!keys.empty()) keys += ", ";
    keys += "'" + k + "'";
  }
  throw_config(origin_ + ": unknown key(s) " + keys);
}

void write_key_value_file(const std::string& path,
                          const std::map<std::string, std::string>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw_io("cannot open for writing: " + path);
  for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
  if (!out) throw_io("write failed: " + path);
}

}  // namespace geobev
