// Copyright 2026 The avjoint Authors
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

#ifndef AVJOINT_BYTES_HPP_
#define AVJOINT_BYTES_HPP_

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "avjoint/error.hpp"

// Little-endian scalar packing for the on-disk formats, independent of host
// byte order, plus whole-file read/write with explicit error reporting.
namespace avjoint::bytes {

inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

inline void put_f64(std::string& out, double d) {
  put_u64(out, std::bit_cast<uint64_t>(d));
}

inline uint64_t get_u64(const std::string& buf, size_t off) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[off + i]))
         << (8 * i);
  }
  return v;
}

inline double get_f64(const std::string& buf, size_t off) {
  return std::bit_cast<double>(get_u64(buf, off));
}

inline void write_file(const std::filesystem::path& path,
                       const std::string& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace avjoint::bytes

#endif  // AVJOINT_BYTES_HPP_
