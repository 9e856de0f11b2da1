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

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

// Minimal inference-only interpreter for ONNX models: a protobuf wire decoder for the subset of
// ModelProto the graph needs, plus CPU kernels for the operators common in image-classification
// backbones (NCHW, float32).
namespace removal_eval::onnx {

enum class DataType : std::int32_t { kFloat = 1, kInt32 = 6, kInt64 = 7, kDouble = 11 };

struct Tensor {
  std::vector<std::int64_t> shape;
  // Float tensors use `values`; integer tensors (shapes, axes) use `ints`.
  bool is_int = false;
  std::vector<float> values;
  std::vector<std::int64_t> ints;

  std::int64_t numel() const;
  static Tensor floats(std::vector<std::int64_t> shape, std::vector<float> values);
  static Tensor integers(std::vector<std::int64_t> shape, std::vector<std::int64_t> values);
};

struct Attribute {
  enum class Kind { kFloat, kInt, kString, kTensor, kFloats, kInts, kOther };
  Kind kind = Kind::kOther;
  float f = 0.0f;
  std::int64_t i = 0;
  std::string s;
  Tensor t;
  std::vector<float> floats;
  std::vector<std::int64_t> ints;
};

struct Node {
  std::string op_type;
  std::string name;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, Attribute> attributes;

  std::int64_t attr_int(const std::string& key, std::int64_t fallback) const;
  float attr_float(const std::string& key, float fallback) const;
  std::vector<std::int64_t> attr_ints(const std::string& key,
                                      std::vector<std::int64_t> fallback = {}) const;
  std::string attr_string(const std::string& key, const std::string& fallback) const;
};

struct Graph {
  std::vector<Node> nodes;
  std::map<std::string, Tensor> initializers;
  std::vector<std::string> inputs;   // excludes initializer names
  std::vector<std::string> outputs;
};

// Decodes a serialized ModelProto. Throws kFormat with the byte offset on malformed input.
Graph parse_model(std::span<const std::uint8_t> bytes);

class Session {
 public:
  explicit Session(Graph graph);
  static Session load(const std::filesystem::path& path);

  // Feeds the first graph input and returns the first graph output. Thread-safe.
  Tensor run(const Tensor& input) const;

  const Graph& graph() const { return graph_; }

 private:
  Graph graph_;
};

// Executes one node; exposed for kernel tests.
std::vector<Tensor> run_node(const Node& node, const std::vector<const Tensor*>& inputs);

}  // namespace removal_eval::onnx
