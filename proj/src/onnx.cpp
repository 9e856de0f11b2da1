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

#include "removal_eval/onnx.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>

#include "removal_eval/error.hpp"

namespace removal_eval::onnx {

std::int64_t Tensor::numel() const {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

Tensor Tensor::floats(std::vector<std::int64_t> shape, std::vector<float> values) {
  Tensor t;
  t.shape = std::move(shape);
  t.values = std::move(values);
  if (static_cast<std::int64_t>(t.values.size()) != t.numel()) {
    fail(ErrorKind::kValidation, "tensor value count does not match its shape");
  }
  return t;
}

Tensor Tensor::integers(std::vector<std::int64_t> shape, std::vector<std::int64_t> values) {
  Tensor t;
  t.shape = std::move(shape);
  t.is_int = true;
  t.ints = std::move(values);
  if (static_cast<std::int64_t>(t.ints.size()) != t.numel()) {
    fail(ErrorKind::kValidation, "tensor value count does not match its shape");
  }
  return t;
}

std::int64_t Node::attr_int(const std::string& key, std::int64_t fallback) const {
  auto it = attributes.find(key);
  return it == attributes.end() ? fallback : it->second.i;
}

float Node::attr_float(const std::string& key, float fallback) const {
  auto it = attributes.find(key);
  return it == attributes.end() ? fallback : it->second.f;
}

std::vector<std::int64_t> Node::attr_ints(const std::string& key,
                                          std::vector<std::int64_t> fallback) const {
  auto it = attributes.find(key);
  return it == attributes.end() ? fallback : it->second.ints;
}

std::string Node::attr_string(const std::string& key, const std::string& fallback) const {
  auto it = attributes.find(key);
  return it == attributes.end() ? fallback : it->second.s;
}

// ---------------------------------------------------------------------------------------------
// Protobuf wire decoding

namespace {

using Bytes = std::span<const std::uint8_t>;

class WireReader {
 public:
  WireReader(Bytes bytes, std::uint64_t base) : bytes_(bytes), base_(base) {}

  bool done() const { return pos_ >= bytes_.size(); }
  std::uint64_t offset() const { return base_ + pos_; }

  std::uint64_t varint() {
    std::uint64_t value = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      if (pos_ >= bytes_.size()) throw Error::format_at(offset(), "truncated varint");
      const std::uint8_t b = bytes_[pos_++];
      value |= static_cast<std::uint64_t>(b & 0x7f) << shift;
      if (!(b & 0x80)) return value;
    }
    throw Error::format_at(offset(), "varint longer than 10 bytes");
  }

  std::uint32_t fixed32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t fixed64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  // Length-delimited payload; returns a reader positioned at its start.
  WireReader sub() {
    const std::uint64_t len = varint();
    need(len);
    WireReader r(bytes_.subspan(pos_, len), offset());
    pos_ += len;
    return r;
  }

  std::string string() {
    WireReader r = sub();
    return std::string(r.bytes_.begin(), r.bytes_.end());
  }

  Bytes raw() { return sub().bytes_; }

  void skip(int wire_type) {
    switch (wire_type) {
      case 0: varint(); break;
      case 1: need(8); pos_ += 8; break;
      case 2: sub(); break;
      case 5: need(4); pos_ += 4; break;
      default: throw Error::format_at(offset(), "unsupported wire type " + std::to_string(wire_type));
    }
  }

  std::pair<std::uint32_t, int> tag() {
    const std::uint64_t t = varint();
    return {static_cast<std::uint32_t>(t >> 3), static_cast<int>(t & 7)};
  }

  // Repeated varint field, packed or not.
  void ints(int wire_type, std::vector<std::int64_t>& out) {
    if (wire_type == 2) {
      WireReader r = sub();
      while (!r.done()) out.push_back(static_cast<std::int64_t>(r.varint()));
    } else {
      out.push_back(static_cast<std::int64_t>(varint()));
    }
  }

  // Repeated float field, packed or not.
  void floats(int wire_type, std::vector<float>& out) {
    auto one = [](std::uint32_t bits) {
      float f;
      std::memcpy(&f, &bits, 4);
      return f;
    };
    if (wire_type == 2) {
      WireReader r = sub();
      while (!r.done()) out.push_back(one(r.fixed32()));
    } else {
      out.push_back(one(fixed32()));
    }
  }

  void doubles(int wire_type, std::vector<double>& out) {
    auto one = [](std::uint64_t bits) {
      double d;
      std::memcpy(&d, &bits, 8);
      return d;
    };
    if (wire_type == 2) {
      WireReader r = sub();
      while (!r.done()) out.push_back(one(r.fixed64()));
    } else {
      out.push_back(one(fixed64()));
    }
  }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) throw Error::format_at(offset(), "truncated field");
  }

  Bytes bytes_;
  std::uint64_t base_;
  std::size_t pos_ = 0;
};

template <typename T>
std::vector<T> decode_raw(Bytes raw, std::uint64_t offset) {
  if (raw.size() % sizeof(T) != 0) throw Error::format_at(offset, "raw_data size not a multiple of element size");
  std::vector<T> out(raw.size() / sizeof(T));
  std::memcpy(out.data(), raw.data(), raw.size());  // little-endian host assumed
  return out;
}

Tensor parse_tensor(WireReader r, std::string* name) {
  Tensor t;
  std::int32_t data_type = 0;
  std::vector<float> float_data;
  std::vector<double> double_data;
  std::vector<std::int64_t> int_data;
  Bytes raw;
  bool has_raw = false;
  std::uint64_t raw_offset = 0;
  const std::uint64_t start = r.offset();
  while (!r.done()) {
    auto [field, wt] = r.tag();
    switch (field) {
      case 1: r.ints(wt, t.shape); break;
      case 2: data_type = static_cast<std::int32_t>(r.varint()); break;
      case 4: r.floats(wt, float_data); break;
      case 5: r.ints(wt, int_data); break;
      case 7: r.ints(wt, int_data); break;
      case 8: {
        std::string n = r.string();
        if (name) *name = std::move(n);
        break;
      }
      case 9:
        raw_offset = r.offset();
        raw = r.raw();
        has_raw = true;
        break;
      case 10: r.doubles(wt, double_data); break;
      default: r.skip(wt);
    }
  }
  switch (static_cast<DataType>(data_type)) {
    case DataType::kFloat:
      t.values = has_raw ? decode_raw<float>(raw, raw_offset) : std::move(float_data);
      break;
    case DataType::kDouble: {
      std::vector<double> d = has_raw ? decode_raw<double>(raw, raw_offset) : std::move(double_data);
      t.values.assign(d.begin(), d.end());
      break;
    }
    case DataType::kInt64:
      t.is_int = true;
      t.ints = has_raw ? decode_raw<std::int64_t>(raw, raw_offset) : std::move(int_data);
      break;
    case DataType::kInt32: {
      t.is_int = true;
      if (has_raw) {
        std::vector<std::int32_t> v = decode_raw<std::int32_t>(raw, raw_offset);
        t.ints.assign(v.begin(), v.end());
      } else {
        t.ints = std::move(int_data);
      }
      break;
    }
    default:
      throw Error::format_at(start, "unsupported tensor data type " + std::to_string(data_type));
  }
  const std::size_t have = t.is_int ? t.ints.size() : t.values.size();
  if (static_cast<std::int64_t>(have) != t.numel()) {
    throw Error::format_at(start, "tensor element count " + std::to_string(have) +
                                      " does not match its dims");
  }
  return t;
}

Attribute parse_attribute(WireReader r, std::string& name) {
  Attribute a;
  std::int64_t type = 0;
  while (!r.done()) {
    auto [field, wt] = r.tag();
    switch (field) {
      case 1: name = r.string(); break;
      case 2: {
        const std::uint32_t bits = r.fixed32();
        std::memcpy(&a.f, &bits, 4);
        a.kind = Attribute::Kind::kFloat;
        break;
      }
      case 3: a.i = static_cast<std::int64_t>(r.varint()); a.kind = Attribute::Kind::kInt; break;
      case 4: a.s = r.string(); a.kind = Attribute::Kind::kString; break;
      case 5: a.t = parse_tensor(r.sub(), nullptr); a.kind = Attribute::Kind::kTensor; break;
      case 7: r.floats(wt, a.floats); a.kind = Attribute::Kind::kFloats; break;
      case 8: r.ints(wt, a.ints); a.kind = Attribute::Kind::kInts; break;
      case 20: type = static_cast<std::int64_t>(r.varint()); break;
      default: r.skip(wt);
    }
  }
  // AttributeType: FLOATS = 6, INTS = 7. Empty repeated fields carry no payload, only the type.
  if (type == 6) a.kind = Attribute::Kind::kFloats;
  if (type == 7) a.kind = Attribute::Kind::kInts;
  return a;
}

Node parse_node(WireReader r) {
  Node n;
  while (!r.done()) {
    auto [field, wt] = r.tag();
    switch (field) {
      case 1: n.inputs.push_back(r.string()); break;
      case 2: n.outputs.push_back(r.string()); break;
      case 3: n.name = r.string(); break;
      case 4: n.op_type = r.string(); break;
      case 5: {
        std::string key;
        Attribute a = parse_attribute(r.sub(), key);
        n.attributes[key] = std::move(a);
        break;
      }
      default: r.skip(wt);
    }
  }
  return n;
}

std::string parse_value_info_name(WireReader r) {
  std::string name;
  while (!r.done()) {
    auto [field, wt] = r.tag();
    if (field == 1) {
      name = r.string();
    } else {
      r.skip(wt);
    }
  }
  return name;
}

Graph parse_graph(WireReader r) {
  Graph g;
  std::vector<std::string> declared_inputs;
  while (!r.done()) {
    auto [field, wt] = r.tag();
    switch (field) {
      case 1: g.nodes.push_back(parse_node(r.sub())); break;
      case 5: {
        std::string name;
        Tensor t = parse_tensor(r.sub(), &name);
        g.initializers[name] = std::move(t);
        break;
      }
      case 11: declared_inputs.push_back(parse_value_info_name(r.sub())); break;
      case 12: g.outputs.push_back(parse_value_info_name(r.sub())); break;
      default: r.skip(wt);
    }
  }
  for (auto& in : declared_inputs) {
    if (!g.initializers.count(in)) g.inputs.push_back(std::move(in));
  }
  return g;
}

}  // namespace

Graph parse_model(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw Error::format_at(0, "empty model");
  WireReader r(bytes, 0);
  std::optional<Graph> graph;
  while (!r.done()) {
    auto [field, wt] = r.tag();
    if (field == 7 && wt == 2) {
      graph = parse_graph(r.sub());
    } else {
      r.skip(wt);
    }
  }
  if (!graph) throw Error::format_at(bytes.size(), "model has no graph");
  if (graph->inputs.empty()) fail(ErrorKind::kFormat, "model graph has no runtime input");
  if (graph->outputs.empty()) fail(ErrorKind::kFormat, "model graph has no output");
  return std::move(*graph);
}

// ---------------------------------------------------------------------------------------------
// Kernels

namespace {

[[noreturn]] void bad_node(const Node& n, const std::string& what) {
  fail(ErrorKind::kBackend, n.op_type + " node '" + n.name + "': " + what);
}

const Tensor& input(const Node& n, const std::vector<const Tensor*>& in, std::size_t i) {
  if (i >= in.size() || !in[i]) bad_node(n, "missing input " + std::to_string(i));
  return *in[i];
}

bool has_input(const std::vector<const Tensor*>& in, std::size_t i) {
  return i < in.size() && in[i] != nullptr;
}

const Tensor& float_input(const Node& n, const std::vector<const Tensor*>& in, std::size_t i) {
  const Tensor& t = input(n, in, i);
  if (t.is_int) bad_node(n, "expected a float tensor at input " + std::to_string(i));
  return t;
}

std::vector<std::int64_t> int_values(const Node& n, const Tensor& t) {
  if (!t.is_int) bad_node(n, "expected an integer tensor");
  return t.ints;
}

std::int64_t normalize_axis(const Node& n, std::int64_t axis, std::size_t rank) {
  const auto r = static_cast<std::int64_t>(rank);
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= std::max<std::int64_t>(r, 1)) bad_node(n, "axis out of range");
  return axis;
}

std::vector<std::int64_t> strides_of(const std::vector<std::int64_t>& shape) {
  std::vector<std::int64_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

template <typename T, typename Op>
std::vector<T> broadcast_apply(const Node& n, const std::vector<std::int64_t>& sa, const std::vector<T>& a,
                               const std::vector<std::int64_t>& sb, const std::vector<T>& b,
                               std::vector<std::int64_t>& out_shape, Op op) {
  const std::size_t rank = std::max(sa.size(), sb.size());
  std::vector<std::int64_t> pa(rank, 1), pb(rank, 1);
  std::copy(sa.begin(), sa.end(), pa.begin() + (rank - sa.size()));
  std::copy(sb.begin(), sb.end(), pb.begin() + (rank - sb.size()));
  out_shape.assign(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) bad_node(n, "shapes are not broadcastable");
    out_shape[i] = pa[i] == 1 ? pb[i] : pa[i];
  }
  const auto st_a = strides_of(pa), st_b = strides_of(pb);
  const std::int64_t total =
      std::accumulate(out_shape.begin(), out_shape.end(), std::int64_t{1}, std::multiplies<>());
  std::vector<T> out(static_cast<std::size_t>(total));
  std::vector<std::int64_t> idx(rank, 0);
  for (std::int64_t k = 0; k < total; ++k) {
    std::int64_t oa = 0, ob = 0;
    for (std::size_t d = 0; d < rank; ++d) {
      if (pa[d] != 1) oa += idx[d] * st_a[d];
      if (pb[d] != 1) ob += idx[d] * st_b[d];
    }
    out[static_cast<std::size_t>(k)] = op(a[static_cast<std::size_t>(oa)], b[static_cast<std::size_t>(ob)]);
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

Tensor binary(const Node& n, const std::vector<const Tensor*>& in) {
  const Tensor& a = input(n, in, 0);
  const Tensor& b = input(n, in, 1);
  Tensor out;
  const std::string& op = n.op_type;
  if (a.is_int && b.is_int) {
    out.is_int = true;
    out.ints = broadcast_apply<std::int64_t>(n, a.shape, a.ints, b.shape, b.ints, out.shape,
                                             [&](std::int64_t x, std::int64_t y) -> std::int64_t {
                                               if (op == "Add") return x + y;
                                               if (op == "Sub") return x - y;
                                               if (op == "Mul") return x * y;
                                               if (y == 0) bad_node(n, "integer division by zero");
                                               return x / y;
                                             });
    return out;
  }
  if (a.is_int || b.is_int) bad_node(n, "mixed integer and float operands");
  out.values = broadcast_apply<float>(n, a.shape, a.values, b.shape, b.values, out.shape,
                                      [&](float x, float y) {
                                        if (op == "Add") return x + y;
                                        if (op == "Sub") return x - y;
                                        if (op == "Mul") return x * y;
                                        return x / y;
                                      });
  return out;
}

template <typename Fn>
Tensor unary(const Node& n, const std::vector<const Tensor*>& in, Fn fn) {
  Tensor out = float_input(n, in, 0);
  for (float& v : out.values) v = fn(v);
  return out;
}

struct Window {
  std::vector<std::int64_t> kernel, strides, pads, dilations;
};

// 2-D spatial window attributes with auto_pad resolution. pads are [top, left, bottom, right].
Window resolve_window(const Node& n, std::int64_t h, std::int64_t w, std::vector<std::int64_t> kernel) {
  Window win;
  win.kernel = std::move(kernel);
  if (win.kernel.size() != 2) bad_node(n, "only 2-D spatial windows are supported");
  win.strides = n.attr_ints("strides", {1, 1});
  win.dilations = n.attr_ints("dilations", {1, 1});
  win.pads = n.attr_ints("pads", {0, 0, 0, 0});
  if (win.strides.size() != 2 || win.dilations.size() != 2 || win.pads.size() != 4) {
    bad_node(n, "malformed strides/dilations/pads");
  }
  const std::string auto_pad = n.attr_string("auto_pad", "NOTSET");
  if (auto_pad == "VALID") {
    win.pads = {0, 0, 0, 0};
  } else if (auto_pad == "SAME_UPPER" || auto_pad == "SAME_LOWER") {
    const std::int64_t dims[2] = {h, w};
    for (int d = 0; d < 2; ++d) {
      const std::int64_t out = (dims[d] + win.strides[d] - 1) / win.strides[d];
      const std::int64_t eff = (win.kernel[d] - 1) * win.dilations[d] + 1;
      const std::int64_t total = std::max<std::int64_t>(0, (out - 1) * win.strides[d] + eff - dims[d]);
      const std::int64_t small = total / 2, large = total - total / 2;
      win.pads[d] = auto_pad == "SAME_UPPER" ? small : large;
      win.pads[d + 2] = auto_pad == "SAME_UPPER" ? large : small;
    }
  } else if (auto_pad != "NOTSET") {
    bad_node(n, "unsupported auto_pad " + auto_pad);
  }
  return win;
}

std::int64_t out_extent(std::int64_t in, std::int64_t pad_begin, std::int64_t pad_end, std::int64_t k,
                        std::int64_t stride, std::int64_t dilation, bool ceil_mode) {
  const std::int64_t eff = (k - 1) * dilation + 1;
  const std::int64_t span = in + pad_begin + pad_end - eff;
  if (span < 0) return 0;
  std::int64_t out = (ceil_mode ? (span + stride - 1) / stride : span / stride) + 1;
  // The last window must start inside the input or the leading padding.
  if (ceil_mode && (out - 1) * stride >= in + pad_begin) --out;
  return out;
}

Tensor conv(const Node& n, const std::vector<const Tensor*>& in) {
  const Tensor& x = float_input(n, in, 0);
  const Tensor& wt = float_input(n, in, 1);
  if (x.shape.size() != 4 || wt.shape.size() != 4) bad_node(n, "Conv expects 4-D input and weights");
  const std::int64_t batch = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
  const std::int64_t m = wt.shape[0], cg = wt.shape[1], kh = wt.shape[2], kw = wt.shape[3];
  const std::int64_t group = n.attr_int("group", 1);
  if (group < 1 || c != cg * group || m % group != 0) bad_node(n, "channel/group mismatch");
  const Window win = resolve_window(n, h, w, n.attr_ints("kernel_shape", {kh, kw}));
  if (win.kernel[0] != kh || win.kernel[1] != kw) bad_node(n, "kernel_shape disagrees with weights");
  const std::int64_t oh = out_extent(h, win.pads[0], win.pads[2], kh, win.strides[0], win.dilations[0], false);
  const std::int64_t ow = out_extent(w, win.pads[1], win.pads[3], kw, win.strides[1], win.dilations[1], false);
  if (oh <= 0 || ow <= 0) bad_node(n, "empty output");

  std::vector<float> bias(static_cast<std::size_t>(m), 0.0f);
  if (has_input(in, 2)) {
    const Tensor& b = float_input(n, in, 2);
    if (b.numel() != m) bad_node(n, "bias length mismatch");
    bias = b.values;
  }

  using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const std::int64_t mg = m / group;
  const std::int64_t patch = cg * kh * kw;
  const std::int64_t spatial = oh * ow;
  Tensor out;
  out.shape = {batch, m, oh, ow};
  out.values.assign(static_cast<std::size_t>(batch * m * spatial), 0.0f);
  MatrixF cols(patch, spatial);
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t g = 0; g < group; ++g) {
      for (std::int64_t ci = 0; ci < cg; ++ci) {
        const float* plane = x.values.data() + ((b * c) + g * cg + ci) * h * w;
        for (std::int64_t ky = 0; ky < kh; ++ky) {
          for (std::int64_t kx = 0; kx < kw; ++kx) {
            float* row = cols.data() + ((ci * kh + ky) * kw + kx) * spatial;
            for (std::int64_t oy = 0; oy < oh; ++oy) {
              const std::int64_t iy = oy * win.strides[0] - win.pads[0] + ky * win.dilations[0];
              for (std::int64_t ox = 0; ox < ow; ++ox) {
                const std::int64_t ix = ox * win.strides[1] - win.pads[1] + kx * win.dilations[1];
                row[oy * ow + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w) ? plane[iy * w + ix] : 0.0f;
              }
            }
          }
        }
      }
      Eigen::Map<const MatrixF> weights(wt.values.data() + g * mg * patch, mg, patch);
      Eigen::Map<MatrixF> dst(out.values.data() + (b * m + g * mg) * spatial, mg, spatial);
      dst.noalias() = weights * cols;
      for (std::int64_t k = 0; k < mg; ++k) dst.row(k).array() += bias[static_cast<std::size_t>(g * mg + k)];
    }
  }
  return out;
}

Tensor pool(const Node& n, const std::vector<const Tensor*>& in, bool is_max) {
  const Tensor& x = float_input(n, in, 0);
  if (x.shape.size() != 4) bad_node(n, "pooling expects 4-D input");
  const std::int64_t batch = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
  const Window win = resolve_window(n, h, w, n.attr_ints("kernel_shape"));
  const bool ceil_mode = n.attr_int("ceil_mode", 0) != 0;
  const bool include_pad = n.attr_int("count_include_pad", 0) != 0;
  const std::int64_t oh = out_extent(h, win.pads[0], win.pads[2], win.kernel[0], win.strides[0], win.dilations[0], ceil_mode);
  const std::int64_t ow = out_extent(w, win.pads[1], win.pads[3], win.kernel[1], win.strides[1], win.dilations[1], ceil_mode);
  if (oh <= 0 || ow <= 0) bad_node(n, "empty output");
  if (!is_max && (win.dilations[0] != 1 || win.dilations[1] != 1)) bad_node(n, "dilated average pooling");

  Tensor out;
  out.shape = {batch, c, oh, ow};
  out.values.resize(static_cast<std::size_t>(batch * c * oh * ow));
  for (std::int64_t p = 0; p < batch * c; ++p) {
    const float* plane = x.values.data() + p * h * w;
    float* dst = out.values.data() + p * oh * ow;
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        const std::int64_t y0 = oy * win.strides[0] - win.pads[0];
        const std::int64_t x0 = ox * win.strides[1] - win.pads[1];
        if (is_max) {
          float best = -std::numeric_limits<float>::infinity();
          for (std::int64_t ky = 0; ky < win.kernel[0]; ++ky) {
            const std::int64_t iy = y0 + ky * win.dilations[0];
            if (iy < 0 || iy >= h) continue;
            for (std::int64_t kx = 0; kx < win.kernel[1]; ++kx) {
              const std::int64_t ix = x0 + kx * win.dilations[1];
              if (ix < 0 || ix >= w) continue;
              best = std::max(best, plane[iy * w + ix]);
            }
          }
          dst[oy * ow + ox] = best;
        } else {
          std::int64_t y1 = std::min(y0 + win.kernel[0], h + win.pads[2]);
          std::int64_t x1 = std::min(x0 + win.kernel[1], w + win.pads[3]);
          const std::int64_t padded_count = (y1 - y0) * (x1 - x0);
          const std::int64_t ya = std::max<std::int64_t>(y0, 0), xa = std::max<std::int64_t>(x0, 0);
          y1 = std::min(y1, h);
          x1 = std::min(x1, w);
          float sum = 0.0f;
          for (std::int64_t iy = ya; iy < y1; ++iy)
            for (std::int64_t ix = xa; ix < x1; ++ix) sum += plane[iy * w + ix];
          const std::int64_t count = include_pad ? padded_count : (y1 - ya) * (x1 - xa);
          dst[oy * ow + ox] = count > 0 ? sum / static_cast<float>(count) : 0.0f;
        }
      }
    }
  }
  return out;
}

Tensor global_pool(const Node& n, const std::vector<const Tensor*>& in, bool is_max) {
  const Tensor& x = float_input(n, in, 0);
  if (x.shape.size() < 3) bad_node(n, "global pooling expects spatial dims");
  const std::int64_t planes = x.shape[0] * x.shape[1];
  const std::int64_t area = x.numel() / std::max<std::int64_t>(planes, 1);
  Tensor out;
  out.shape = x.shape;
  for (std::size_t d = 2; d < out.shape.size(); ++d) out.shape[d] = 1;
  out.values.resize(static_cast<std::size_t>(planes));
  for (std::int64_t p = 0; p < planes; ++p) {
    const float* src = x.values.data() + p * area;
    if (is_max) {
      out.values[p] = *std::max_element(src, src + area);
    } else {
      double s = 0.0;
      for (std::int64_t k = 0; k < area; ++k) s += src[k];
      out.values[p] = static_cast<float>(s / static_cast<double>(area));
    }
  }
  return out;
}

Tensor batch_norm(const Node& n, const std::vector<const Tensor*>& in) {
  Tensor out = float_input(n, in, 0);
  const Tensor& scale = float_input(n, in, 1);
  const Tensor& bias = float_input(n, in, 2);
  const Tensor& mean = float_input(n, in, 3);
  const Tensor& var = float_input(n, in, 4);
  const float eps = n.attr_float("epsilon", 1e-5f);
  if (out.shape.size() < 2) bad_node(n, "BatchNormalization expects N x C x ...");
  const std::int64_t c = out.shape[1];
  if (scale.numel() != c || bias.numel() != c || mean.numel() != c || var.numel() != c) {
    bad_node(n, "per-channel parameter length mismatch");
  }
  const std::int64_t inner = out.numel() / (out.shape[0] * c);
  for (std::int64_t b = 0; b < out.shape[0]; ++b) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const float k = scale.values[ch] / std::sqrt(var.values[ch] + eps);
      const float shift = bias.values[ch] - mean.values[ch] * k;
      float* p = out.values.data() + (b * c + ch) * inner;
      for (std::int64_t i = 0; i < inner; ++i) p[i] = p[i] * k + shift;
    }
  }
  return out;
}

Tensor concat(const Node& n, const std::vector<const Tensor*>& in) {
  if (in.empty()) bad_node(n, "no inputs");
  const Tensor& first = input(n, in, 0);
  const std::int64_t axis = normalize_axis(n, n.attr_int("axis", 0), first.shape.size());
  Tensor out;
  out.is_int = first.is_int;
  out.shape = first.shape;
  out.shape[axis] = 0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const Tensor& t = input(n, in, i);
    if (t.is_int != first.is_int || t.shape.size() != first.shape.size()) bad_node(n, "incompatible inputs");
    for (std::size_t d = 0; d < t.shape.size(); ++d) {
      if (static_cast<std::int64_t>(d) != axis && t.shape[d] != first.shape[d]) bad_node(n, "shape mismatch");
    }
    out.shape[axis] += t.shape[axis];
  }
  const std::int64_t outer = std::accumulate(first.shape.begin(), first.shape.begin() + axis,
                                             std::int64_t{1}, std::multiplies<>());
  auto gather = [&](auto member) {
    auto& dst = out.*member;
    dst.reserve(static_cast<std::size_t>(out.numel()));
    for (std::int64_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < in.size(); ++i) {
        const Tensor& t = *in[i];
        const std::int64_t block = t.numel() / std::max<std::int64_t>(outer, 1);
        const auto& src = t.*member;
        dst.insert(dst.end(), src.begin() + o * block, src.begin() + (o + 1) * block);
      }
    }
  };
  if (out.is_int) {
    gather(&Tensor::ints);
  } else {
    gather(&Tensor::values);
  }
  return out;
}

Tensor reshape_to(const Node& n, Tensor t, std::vector<std::int64_t> shape) {
  const std::int64_t total = t.numel();
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == 0) {
      if (i >= t.shape.size()) bad_node(n, "0 in target shape beyond input rank");
      shape[i] = t.shape[i];
    }
    if (shape[i] == -1) {
      if (infer >= 0) bad_node(n, "more than one -1 in target shape");
      infer = static_cast<int>(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0) {
    if (known == 0 || total % known != 0) bad_node(n, "cannot infer reshape dimension");
    shape[infer] = total / known;
  }
  if (std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>()) != total) {
    bad_node(n, "reshape changes element count");
  }
  t.shape = std::move(shape);
  return t;
}

Tensor flatten(const Node& n, const std::vector<const Tensor*>& in) {
  const Tensor& x = input(n, in, 0);
  std::int64_t axis = n.attr_int("axis", 1);
  if (axis < 0) axis += static_cast<std::int64_t>(x.shape.size());
  if (axis < 0 || axis > static_cast<std::int64_t>(x.shape.size())) bad_node(n, "axis out of range");
  const std::int64_t outer = std::accumulate(x.shape.begin(), x.shape.begin() + axis, std::int64_t{1},
                                             std::multiplies<>());
  return reshape_to(n, x, {outer, x.numel() / std::max<std::int64_t>(outer, 1)});
}

std::vector<std::int64_t> axes_of(const Node& n, const std::vector<const Tensor*>& in) {
  if (has_input(in, 1)) return int_values(n, *in[1]);
  return n.attr_ints("axes");
}

Tensor squeeze(const Node& n, const std::vector<const Tensor*>& in) {
  const Tensor& x = input(n, in, 0);
  std::vector<std::int64_t> axes = axes_of(n, in);
  for (auto& a : axes) a = normalize_axis(n, a, x.shape.size());
  std::vector<std::int64_t> shape;
  for (std::size_t d = 0; d < x.shape.size(); ++d) {
    const bool listed = std::find(axes.begin(), axes.end(), static_cast<std::int64_t>(d)) != axes.end();
    if ((axes.empty() && x.shape[d] == 1) || listed) {
      if (x.shape[d] != 1) bad_node(n, "squeezing a dimension that is not 1");
      continue;
    }
    shape.push_back(x.shape[d]);
  }
  Tensor out = x;
  out.shape = std::move(shape);
  return out;
}

Tensor unsqueeze(const Node& n, const std::vector<const Tensor*>& in) {
  const Tensor& x = input(n, in, 0);
  std::vector<std::int64_t> axes = axes_of(n, in);
  const std::size_t rank = x.shape.size() + axes.size();
  for (auto& a : axes) a = normalize_axis(n, a, rank);
  std::sort(axes.begin(), axes.end());
  std::vector<std::int64_t> shape;
  std::size_t src = 0;
  for (std::size_t d = 0; d < rank; ++d) {
    if (std::binary_search(axes.begin(), axes.end(), static_cast<std::int64_t>(d))) {
      shape.push_back(1);
    } else {
      shape.push_back(x.shape.at(src++));
    }
  }
  Tensor out = x;
  out.shape = std::move(shape);
  return out;
}

Tensor gemm(const Node& n, const std::vector<const Tensor*>& in) {
  using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Tensor& a = float_input(n, in, 0);
  const Tensor& b = float_input(n, in, 1);
  if (a.shape.size() != 2 || b.shape.size() != 2) bad_node(n, "Gemm expects 2-D operands");
  Eigen::Map<const MatrixF> ma(a.values.data(), a.shape[0], a.shape[1]);
  Eigen::Map<const MatrixF> mb(b.values.data(), b.shape[0], b.shape[1]);
  const bool ta = n.attr_int("transA", 0) != 0, tb = n.attr_int("transB", 0) != 0;
  const MatrixF lhs = ta ? MatrixF(ma.transpose()) : MatrixF(ma);
  const MatrixF rhs = tb ? MatrixF(mb.transpose()) : MatrixF(mb);
  if (lhs.cols() != rhs.rows()) bad_node(n, "inner dimensions differ");
  MatrixF prod = n.attr_float("alpha", 1.0f) * (lhs * rhs);
  Tensor out;
  out.shape = {prod.rows(), prod.cols()};
  out.values.assign(prod.data(), prod.data() + prod.size());
  if (has_input(in, 2)) {
    Tensor c = float_input(n, in, 2);
    const float beta = n.attr_float("beta", 1.0f);
    for (float& v : c.values) v *= beta;
    Node add = n;
    add.op_type = "Add";
    return binary(add, {&out, &c});
  }
  return out;
}

Tensor matmul(const Node& n, const std::vector<const Tensor*>& in) {
  using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Tensor& a = float_input(n, in, 0);
  const Tensor& b = float_input(n, in, 1);
  if (a.shape.size() < 2 || b.shape.size() != 2) bad_node(n, "MatMul supports [..., M, K] x [K, N]");
  const std::int64_t k = a.shape.back();
  if (k != b.shape[0]) bad_node(n, "inner dimensions differ");
  const std::int64_t rows = a.numel() / k;
  Eigen::Map<const MatrixF> ma(a.values.data(), rows, k);
  Eigen::Map<const MatrixF> mb(b.values.data(), b.shape[0], b.shape[1]);
  const MatrixF prod = ma * mb;
  Tensor out;
  out.shape = a.shape;
  out.shape.back() = b.shape[1];
  out.values.assign(prod.data(), prod.data() + prod.size());
  return out;
}

Tensor reduce_mean(const Node& n, const std::vector<const Tensor*>& in) {
  const Tensor& x = float_input(n, in, 0);
  std::vector<std::int64_t> axes = axes_of(n, in);
  const bool keep = n.attr_int("keepdims", 1) != 0;
  const std::size_t rank = x.shape.size();
  std::vector<bool> reduce(rank, axes.empty());
  for (auto a : axes) reduce[static_cast<std::size_t>(normalize_axis(n, a, rank))] = true;

  std::vector<std::int64_t> kept_shape(rank);
  for (std::size_t d = 0; d < rank; ++d) kept_shape[d] = reduce[d] ? 1 : x.shape[d];
  const auto in_strides = strides_of(x.shape);
  const auto out_strides = strides_of(kept_shape);
  const std::int64_t out_n = std::accumulate(kept_shape.begin(), kept_shape.end(), std::int64_t{1}, std::multiplies<>());
  std::vector<double> sums(static_cast<std::size_t>(out_n), 0.0);
  for (std::int64_t k = 0; k < x.numel(); ++k) {
    std::int64_t o = 0, rem = k;
    for (std::size_t d = 0; d < rank; ++d) {
      const std::int64_t i = rem / in_strides[d];
      rem %= in_strides[d];
      if (!reduce[d]) o += i * out_strides[d];
    }
    sums[static_cast<std::size_t>(o)] += x.values[static_cast<std::size_t>(k)];
  }
  const double count = static_cast<double>(x.numel()) / static_cast<double>(out_n);
  Tensor out;
  for (std::size_t d = 0; d < rank; ++d) {
    if (keep || !reduce[d]) out.shape.push_back(kept_shape[d]);
  }
  out.values.resize(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) out.values[i] = static_cast<float>(sums[i] / count);
  return out;
}

Tensor gather(const Node& n, const std::vector<const Tensor*>& in) {
  const Tensor& data = input(n, in, 0);
  const std::vector<std::int64_t> idx = int_values(n, input(n, in, 1));
  const std::int64_t axis = normalize_axis(n, n.attr_int("axis", 0), data.shape.size());
  if (data.shape.size() != 1 || axis != 0) bad_node(n, "Gather supports 1-D data only");
  Tensor out;
  out.is_int = data.is_int;
  out.shape = input(n, in, 1).shape;
  for (std::int64_t i : idx) {
    if (i < 0) i += data.shape[0];
    if (i < 0 || i >= data.shape[0]) bad_node(n, "index out of range");
    if (data.is_int) {
      out.ints.push_back(data.ints[static_cast<std::size_t>(i)]);
    } else {
      out.values.push_back(data.values[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

}  // namespace

std::vector<Tensor> run_node(const Node& n, const std::vector<const Tensor*>& in) {
  const std::string& op = n.op_type;
  if (op == "Conv") return {conv(n, in)};
  if (op == "Relu") return {unary(n, in, [](float v) { return v > 0.0f ? v : 0.0f; })};
  if (op == "LeakyRelu") {
    const float alpha = n.attr_float("alpha", 0.01f);
    return {unary(n, in, [alpha](float v) { return v >= 0.0f ? v : alpha * v; })};
  }
  if (op == "Sigmoid") return {unary(n, in, [](float v) { return 1.0f / (1.0f + std::exp(-v)); })};
  if (op == "Tanh") return {unary(n, in, [](float v) { return std::tanh(v); })};
  if (op == "Clip") {
    float lo = n.attr_float("min", -std::numeric_limits<float>::infinity());
    float hi = n.attr_float("max", std::numeric_limits<float>::infinity());
    if (has_input(in, 1)) lo = float_input(n, in, 1).values.at(0);
    if (has_input(in, 2)) hi = float_input(n, in, 2).values.at(0);
    return {unary(n, in, [lo, hi](float v) { return std::min(std::max(v, lo), hi); })};
  }
  if (op == "Add" || op == "Sub" || op == "Mul" || op == "Div") return {binary(n, in)};
  if (op == "MaxPool") return {pool(n, in, true)};
  if (op == "AveragePool") return {pool(n, in, false)};
  if (op == "GlobalAveragePool") return {global_pool(n, in, false)};
  if (op == "GlobalMaxPool") return {global_pool(n, in, true)};
  if (op == "BatchNormalization") return {batch_norm(n, in)};
  if (op == "Concat") return {concat(n, in)};
  if (op == "Flatten") return {flatten(n, in)};
  if (op == "Reshape") return {reshape_to(n, input(n, in, 0), int_values(n, input(n, in, 1)))};
  if (op == "Squeeze") return {squeeze(n, in)};
  if (op == "Unsqueeze") return {unsqueeze(n, in)};
  if (op == "Gemm") return {gemm(n, in)};
  if (op == "MatMul") return {matmul(n, in)};
  if (op == "ReduceMean") return {reduce_mean(n, in)};
  if (op == "Gather") return {gather(n, in)};
  if (op == "Identity" || op == "Dropout") return {input(n, in, 0)};
  if (op == "Shape") {
    const Tensor& x = input(n, in, 0);
    return {Tensor::integers({static_cast<std::int64_t>(x.shape.size())}, x.shape)};
  }
  if (op == "Constant") {
    auto it = n.attributes.find("value");
    if (it == n.attributes.end() || it->second.kind != Attribute::Kind::kTensor) {
      bad_node(n, "Constant without a tensor value");
    }
    return {it->second.t};
  }
  bad_node(n, "unsupported operator");
}

Session::Session(Graph graph) : graph_(std::move(graph)) {
  if (graph_.inputs.empty() || graph_.outputs.empty()) {
    fail(ErrorKind::kBackend, "graph needs at least one input and one output");
  }
}

Session Session::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kBackend, "cannot open model " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return Session(parse_model(bytes));
  } catch (const Error& e) {
    fail(ErrorKind::kBackend, "cannot load model " + path.string() + ": " + e.what());
  }
}

Tensor Session::run(const Tensor& input_tensor) const {
  std::map<std::string, Tensor> values;
  values[graph_.inputs.front()] = input_tensor;
  auto lookup = [&](const std::string& name) -> const Tensor* {
    if (name.empty()) return nullptr;
    if (auto it = values.find(name); it != values.end()) return &it->second;
    if (auto it = graph_.initializers.find(name); it != graph_.initializers.end()) return &it->second;
    fail(ErrorKind::kBackend, "value '" + name + "' used before it is produced");
  };
  for (const Node& node : graph_.nodes) {
    std::vector<const Tensor*> args;
    args.reserve(node.inputs.size());
    for (const std::string& name : node.inputs) args.push_back(lookup(name));
    std::vector<Tensor> results = run_node(node, args);
    for (std::size_t i = 0; i < results.size() && i < node.outputs.size(); ++i) {
      if (!node.outputs[i].empty()) values[node.outputs[i]] = std::move(results[i]);
    }
  }
  const Tensor* out = lookup(graph_.outputs.front());
  return *out;
}

}  // namespace removal_eval::onnx
