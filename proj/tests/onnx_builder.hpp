/* Copyright 2026 The removal-eval Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Test-only protobuf writer for tiny ONNX models.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace onnx_builder {

class Pb {
 public:
  std::vector<std::uint8_t> bytes;

  Pb& varint(std::uint64_t v) {
    while (v >= 0x80) {
      bytes.push_back(static_cast<std::uint8_t>(v | 0x80));
      v >>= 7;
    }
    bytes.push_back(static_cast<std::uint8_t>(v));
    return *this;
  }
  Pb& key(int field, int wire) { return varint(static_cast<std::uint64_t>(field) << 3 | wire); }
  Pb& int_field(int field, std::int64_t v) { return key(field, 0).varint(static_cast<std::uint64_t>(v)); }
  Pb& bytes_field(int field, const std::vector<std::uint8_t>& b) {
    key(field, 2).varint(b.size());
    bytes.insert(bytes.end(), b.begin(), b.end());
    return *this;
  }
  Pb& string_field(int field, const std::string& s) {
    return bytes_field(field, std::vector<std::uint8_t>(s.begin(), s.end()));
  }
  Pb& message(int field, const Pb& m) { return bytes_field(field, m.bytes); }
  Pb& float_field(int field, float f) {
    key(field, 5);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    return *this;
  }
};

inline Pb float_tensor(const std::string& name, const std::vector<std::int64_t>& dims,
                       const std::vector<float>& values, bool raw = true) {
  Pb t;
  for (auto d : dims) t.int_field(1, d);
  t.int_field(2, 1);
  t.string_field(8, name);
  if (raw) {
    std::vector<std::uint8_t> b(values.size() * 4);
    std::memcpy(b.data(), values.data(), b.size());
    t.bytes_field(9, b);
  } else {
    Pb packed;
    for (float v : values) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      for (int i = 0; i < 4; ++i) packed.bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
    t.bytes_field(4, packed.bytes);
  }
  return t;
}

inline Pb int_tensor(const std::string& name, const std::vector<std::int64_t>& dims,
                     const std::vector<std::int64_t>& values) {
  Pb t;
  for (auto d : dims) t.int_field(1, d);
  t.int_field(2, 7);
  t.string_field(8, name);
  Pb packed;
  for (auto v : values) packed.varint(static_cast<std::uint64_t>(v));
  t.bytes_field(7, packed.bytes);
  return t;
}

inline Pb attr_int(const std::string& name, std::int64_t v) {
  Pb a;
  a.string_field(1, name).int_field(3, v).int_field(20, 2);
  return a;
}

inline Pb attr_float(const std::string& name, float v) {
  Pb a;
  a.string_field(1, name).float_field(2, v).int_field(20, 1);
  return a;
}

inline Pb attr_ints(const std::string& name, const std::vector<std::int64_t>& v) {
  Pb a;
  a.string_field(1, name);
  for (auto x : v) a.int_field(8, x);
  a.int_field(20, 7);
  return a;
}

inline Pb attr_string(const std::string& name, const std::string& v) {
  Pb a;
  a.string_field(1, name).string_field(4, v).int_field(20, 3);
  return a;
}

struct NodeSpec {
  std::string op;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<Pb> attributes;
};

inline Pb node(const NodeSpec& spec) {
  Pb n;
  for (const auto& i : spec.inputs) n.string_field(1, i);
  for (const auto& o : spec.outputs) n.string_field(2, o);
  n.string_field(3, spec.op + "_" + (spec.outputs.empty() ? "" : spec.outputs[0]));
  n.string_field(4, spec.op);
  for (const auto& a : spec.attributes) n.message(5, a);
  return n;
}

inline Pb value_info(const std::string& name) {
  Pb v;
  v.string_field(1, name);
  return v;
}

inline std::vector<std::uint8_t> model(const std::vector<NodeSpec>& nodes, const std::vector<Pb>& initializers,
                                       const std::string& input, const std::string& output) {
  Pb g;
  for (const auto& n : nodes) g.message(1, node(n));
  g.string_field(2, "test-graph");
  for (const auto& t : initializers) g.message(5, t);
  g.message(11, value_info(input));
  g.message(12, value_info(output));
  Pb opset;
  opset.string_field(1, "").int_field(2, 13);
  Pb m;
  m.int_field(1, 8);
  m.string_field(2, "onnx-builder");
  m.message(7, g);
  m.message(8, opset);
  return m.bytes;
}

inline void save(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Conv(3 -> 2, 3x3, no padding) + Relu + GlobalAveragePool + Flatten.
// Channel 0: all weights 0.1, bias 3.0. Channel 1: all weights -0.05, bias -2.0.
inline std::vector<std::uint8_t> tiny_backbone() {
  std::vector<float> w(2 * 3 * 3 * 3);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = i < 27 ? 0.1f : -0.05f;
  return model({{"Conv", {"x", "w", "b"}, {"c"}, {attr_ints("kernel_shape", {3, 3})}},
                {"Relu", {"c"}, {"r"}, {}},
                {"GlobalAveragePool", {"r"}, {"p"}, {}},
                {"Flatten", {"p"}, {"y"}, {attr_int("axis", 1)}}},
               {float_tensor("w", {2, 3, 3, 3}, w), float_tensor("b", {2}, {3.0f, -2.0f}, false)}, "x", "y");
}

}  // namespace onnx_builder
