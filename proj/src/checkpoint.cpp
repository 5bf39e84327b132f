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
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "geobev/error.hpp"
#include "geobev/pipeline.hpp"

namespace geobev {

namespace {

constexpr char kMagic[5] = {'G', 'C', 'G', 'R', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_f64(std::string& buf, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  Reader(const std::string& raw, const std::string& path)
      : raw_(raw), path_(path) {}

  std::uint16_t u16() { return static_cast<std::uint16_t>(byte() | (byte() << 8)); }

  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte()) << (8 * i);
    return v;
  }

  double f64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte()) << (8 * i);
    return std::bit_cast<double>(v);
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = raw_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == raw_.size(); }

 private:
  unsigned byte() {
    need(1);
    return static_cast<unsigned char>(raw_[pos_++]);
  }
  void need(std::size_t n) {
    if (pos_ + n > raw_.size()) {
      throw_format("truncated checkpoint: " + path_);
    }
  }
  const std::string& raw_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::string buf;
  buf.append(kMagic, 5);
  put_u32(buf, kVersion);
  std::uint32_t count = 0;
  params.for_each_param([&](const std::string&, const Tensor&) { ++count; });
  put_u32(buf, count);
  params.for_each_param([&](const std::string& name, const Tensor& t) {
    put_u16(buf, static_cast<std::uint16_t>(name.size()));
    buf.append(name);
    buf.push_back(static_cast<char>(t.ndim()));
    for (int d : t.shape()) put_u32(buf, static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < t.size(); ++i) put_f64(buf, t[i]);
  });
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_io("cannot open checkpoint for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw_io("checkpoint write failed: " + path);
}

void load_checkpoint(ModelParams& params, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open checkpoint: " + path);
  std::string raw((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (raw.size() < 13 || std::memcmp(raw.data(), kMagic, 5) != 0) {
    throw_format("not a GCGR checkpoint (bad magic): " + path);
  }
  Reader r(raw, path);
  r.bytes(5);
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw_format("checkpoint version mismatch in " + path + ": found " +
                 std::to_string(version) + ", expected " +
                 std::to_string(kVersion));
  }
  const std::uint32_t count = r.u32();
  std::map<std::string, Tensor> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.bytes(r.u16());
    const unsigned ndim = static_cast<unsigned char>(r.bytes(1)[0]);
    if (ndim < 1) throw_format("checkpoint entry with zero rank: " + path);
    std::vector<int> shape(ndim);
    std::size_t n = 1;
    for (unsigned d = 0; d < ndim; ++d) {
      const std::uint32_t dim = r.u32();
      if (dim == 0) throw_format("checkpoint entry with zero dim: " + path);
      shape[d] = static_cast<int>(dim);
      n *= dim;
    }
    Tensor t(shape);
    for (std::size_t j = 0; j < n; ++j) t[j] = r.f64();
    if (!entries.emplace(name, std::move(t)).second) {
      throw_format("duplicate checkpoint entry '" + name + "' in " + path);
    }
  }
  if (!r.done()) throw_format("trailing bytes in checkpoint: " + path);

  std::size_t used = 0;
  params.for_each_param([&](const std::string& name, Tensor& t) {
    auto it = entries.find(name);
    if (it == entries.end()) {
      throw_config("checkpoint " + path + " is missing parameter '" + name +
                   "' (config/model mismatch)");
    }
    if (it->second.shape() != t.shape()) {
      throw_config("checkpoint parameter '" + name +
                   "' shape mismatch with the configured model");
    }
    t = it->second;
    ++used;
  });
  if (used != entries.size()) {
    throw_config("checkpoint " + path +
                 " carries extra parameters not present in the configured "
                 "model");
  }
}

}  // namespace geobev
