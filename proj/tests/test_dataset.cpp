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

#include <algorithm>
#include <functional>
#include <set>

#include "doctest.h"
#include "removal_eval/dataset.hpp"
#include "removal_eval/error.hpp"
#include "removal_eval/random.hpp"
#include "test_util.hpp"

using namespace removal_eval;
using test_util::TempDir;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::kValidation;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  FAIL("expected an Error");
  return {};
}

// W. Randolph Franklin's crossing test.
bool pnpoly(const std::vector<double>& ring, double x, double y) {
  const std::size_t n = ring.size() / 2;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const double xi = ring[2 * i], yi = ring[2 * i + 1];
    const double xj = ring[2 * j], yj = ring[2 * j + 1];
    if (((yi > y) != (yj > y)) && (x < (xj - xi) * (y - yi) / (yj - yi) + xi)) inside = !inside;
  }
  return inside;
}

BinaryMask brute_polygon(const PolygonSegmentation& rings, int h, int w) {
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (const auto& ring : rings) {
        if (ring.size() >= 6 && pnpoly(ring, x + 0.5, y + 0.5)) m.set(y, x);
      }
    }
  }
  return m;
}

BinaryMask brute_dilate(const BinaryMask& m, int k) {
  if (k <= 1) return m;
  const int a = k / 2;
  BinaryMask out(m.width(), m.height(), k);
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      bool on = false;
      for (int rr = r - a; rr <= r + k - 1 - a && !on; ++rr) {
        for (int cc = c - a; cc <= c + k - 1 - a && !on; ++cc) {
          if (rr >= 0 && rr < m.height() && cc >= 0 && cc < m.width() && m.get(rr, cc)) on = true;
        }
      }
      out.set(r, c, on);
    }
  }
  return out;
}

BinaryMask random_mask(Rng& rng, int w, int h, double density) {
  BinaryMask m(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) m.set(r, c, rng.uniform() < density);
  }
  return m;
}

std::vector<double> square(double x0, double y0, double x1, double y1) {
  return {x0, y0, x1, y0, x1, y1, x0, y1};
}

const char* kTwoImages = R"({
  "images": [{"id": 1, "width": 4, "height": 3, "file_name": "a.png"},
             {"id": 2, "width": 4, "height": 3, "file_name": "b.png"}],
  "categories": [{"id": 1, "name": "person"}, {"id": 3, "name": "car"}],
  "annotations": [{"image_id": 2, "category_id": 1, "iscrowd": 0,
                   "segmentation": [[0, 0, 2, 0, 2, 2, 0, 2]]}]
})";

}  // namespace

TEST_CASE("parse_annotations builds the index") {
  const AnnotationIndex idx = parse_annotations(kTwoImages);
  REQUIRE(idx.images().size() == 2);
  CHECK(idx.images()[0].id == 1);
  CHECK(idx.images()[1].file_name == "b.png");
  CHECK(idx.instances(1).empty());
  REQUIRE(idx.instances(2).size() == 1);
  CHECK(idx.instances(2)[0].category_id == 1);
  CHECK(std::holds_alternative<PolygonSegmentation>(idx.instances(2)[0].segmentation));
  CHECK(idx.categories().at("car") == 3);
}

TEST_CASE("parse_annotations accepts an empty annotations array") {
  const AnnotationIndex idx = parse_annotations(
      R"({"images": [{"id": 5, "width": 2, "height": 2}], "categories": [], "annotations": []})");
  CHECK(idx.images().size() == 1);
  CHECK(idx.instances(5).empty());
}

TEST_CASE("parse_annotations errors") {
  SUBCASE("unknown image id") {
    const auto fn = [] {
      parse_annotations(R"({"images": [], "categories": [],
        "annotations": [{"image_id": 999, "category_id": 1, "segmentation": []}]})");
    };
    CHECK(kind_of(fn) == ErrorKind::kValidation);
    CHECK(message_of(fn).find("999") != std::string::npos);
  }
  SUBCASE("missing field reports a JSON pointer") {
    const auto fn = [] {
      parse_annotations(R"({"images": [{"id": 1, "width": 2, "height": 2}], "categories": [],
        "annotations": [{"image_id": 1, "category_id": 1}]})");
    };
    CHECK(kind_of(fn) == ErrorKind::kParse);
    CHECK(message_of(fn).find("/annotations/0/segmentation") != std::string::npos);
  }
  SUBCASE("missing top-level array") {
    const auto fn = [] { parse_annotations(R"({"images": [], "annotations": []})"); };
    CHECK(kind_of(fn) == ErrorKind::kParse);
    CHECK(message_of(fn).find("/categories") != std::string::npos);
  }
  SUBCASE("malformed JSON") {
    CHECK(kind_of([] { parse_annotations("{\"images\": ["); }) == ErrorKind::kParse);
  }
  SUBCASE("compressed RLE") {
    CHECK(kind_of([] {
            parse_annotations(R"({"images": [{"id": 1, "width": 2, "height": 2}], "categories": [],
              "annotations": [{"image_id": 1, "category_id": 1,
                               "segmentation": {"counts": "abc", "size": [2, 2]}}]})");
          }) == ErrorKind::kParse);
  }
  SUBCASE("non-positive category id") {
    CHECK(kind_of([] {
            parse_annotations(R"({"images": [{"id": 1, "width": 2, "height": 2}], "categories": [],
              "annotations": [{"image_id": 1, "category_id": 0, "segmentation": []}]})");
          }) == ErrorKind::kValidation);
  }
}

TEST_CASE("decode_rle hand-decoded cases") {
  CHECK(decode_rle({9}, 3, 3).empty());
  CHECK(decode_rle({0, 9}, 3, 3).count() == 9);

  const BinaryMask m = decode_rle({4, 3, 2}, 3, 3);
  std::set<std::pair<int, int>> on;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (m.get(r, c)) on.insert({r, c});
    }
  }
  CHECK(on == std::set<std::pair<int, int>>{{1, 1}, {2, 1}, {0, 2}});
}

TEST_CASE("decode_rle rejects bad counts") {
  CHECK(kind_of([] { decode_rle({4, 3}, 3, 3); }) == ErrorKind::kFormat);
  CHECK(kind_of([] { decode_rle({4, 3, 5}, 3, 3); }) == ErrorKind::kFormat);
  CHECK(kind_of([] { decode_rle({-1, 10}, 3, 3); }) == ErrorKind::kFormat);
}

TEST_CASE("encode_rle round trip on random masks") {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    const int w = 1 + static_cast<int>(rng.below(20));
    const int h = 1 + static_cast<int>(rng.below(20));
    const BinaryMask m = random_mask(rng, w, h, rng.uniform());
    CHECK(decode_rle(encode_rle(m), h, w) == m);
  }
}

TEST_CASE("rasterize_polygon square covers nine centers") {
  const PolygonSegmentation rings{{1, 1, 4, 1, 4, 4, 1, 4}};
  const BinaryMask m = rasterize_polygon(rings, 5, 5);
  CHECK(m.count() == 9);
  CHECK(m == brute_polygon(rings, 5, 5));
  for (int r = 1; r <= 3; ++r) {
    for (int c = 1; c <= 3; ++c) CHECK(m.get(r, c));
  }
}

TEST_CASE("rasterize_polygon degenerate and malformed rings") {
  CHECK(rasterize_polygon({{1, 1, 3, 3, 5, 5}}, 8, 8).empty());
  CHECK(rasterize_polygon({{1, 1, 4, 1, 4, 1, 1, 1}}, 8, 8).empty());
  CHECK(kind_of([] { rasterize_polygon({{1, 1, 4, 1, 4}}, 8, 8); }) == ErrorKind::kFormat);
}

TEST_CASE("rasterize_polygon union of disjoint squares") {
  const PolygonSegmentation rings{square(0, 0, 3, 3), square(5.2, 4.1, 9.7, 8.9)};
  const BinaryMask m = rasterize_polygon(rings, 10, 10);
  CHECK(m == brute_polygon(rings, 10, 10));
  CHECK(m.count() == rasterize_polygon({rings[0]}, 10, 10).count() +
                         rasterize_polygon({rings[1]}, 10, 10).count());
}

TEST_CASE("rasterize_polygon matches point-in-polygon on random rings") {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    PolygonSegmentation rings;
    const int n_rings = 1 + static_cast<int>(rng.below(3));
    for (int k = 0; k < n_rings; ++k) {
      std::vector<double> ring;
      const int pts = 3 + static_cast<int>(rng.below(6));
      for (int p = 0; p < pts; ++p) {
        ring.push_back(rng.uniform(-3.0, 27.0));
        ring.push_back(rng.uniform(-3.0, 23.0));
      }
      rings.push_back(ring);
    }
    CHECK(rasterize_polygon(rings, 20, 24) == brute_polygon(rings, 20, 24));
  }
}

TEST_CASE("build_class_mask is the union of matching instances") {
  AnnotationIndex idx;
  idx.add_image({7, 6, 5, "x.png"});
  Instance poly{1, PolygonSegmentation{square(0, 0, 3, 3)}, false};
  RleSegmentation rle{{12, 8, 10}, 5, 6};
  Instance run{1, rle, true};
  Instance other{2, PolygonSegmentation{square(0, 0, 6, 5)}, false};
  idx.add_instance(7, poly);
  idx.add_instance(7, run);
  idx.add_instance(7, other);

  BinaryMask expected = rasterize_polygon(std::get<PolygonSegmentation>(poly.segmentation), 5, 6);
  const BinaryMask rle_mask = decode_rle(rle.counts, 5, 6);
  const BinaryMask full = build_class_mask(idx, 7, 1);
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 6; ++c) CHECK(full.get(r, c) == (expected.get(r, c) || rle_mask.get(r, c)));
  }
  CHECK(full.coverage() <= expected.coverage() + rle_mask.coverage());
  CHECK(full.kernel_size() == 0);

  MaskOptions no_crowd;
  no_crowd.include_crowd = false;
  CHECK(build_class_mask(idx, 7, 1, no_crowd) == expected);
  CHECK(build_class_mask(idx, 7, 4).empty());

  idx.add_instance(7, Instance{1, RleSegmentation{{30}, 6, 5}, false});
  CHECK(kind_of([&] { build_class_mask(idx, 7, 1); }) == ErrorKind::kFormat);
}

TEST_CASE("dilate examples") {
  BinaryMask m(12, 12);
  m.set(5, 5);
  CHECK(dilate(m, 0) == m);
  CHECK(dilate(m, 1).same_pixels(m));
  const BinaryMask d = dilate(m, 3);
  CHECK(d.kernel_size() == 3);
  CHECK(d.count() == 9);
  for (int r = 4; r <= 6; ++r) {
    for (int c = 4; c <= 6; ++c) CHECK(d.get(r, c));
  }
  const BinaryMask e = dilate(m, 2);
  CHECK(e.count() == 4);
  CHECK(e.get(5, 5));
  CHECK(e.get(6, 6));

  BinaryMask full(7, 9);
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 7; ++c) full.set(r, c);
  }
  for (int k : {2, 5, 30}) CHECK(dilate(full, k).count() == 63);
  CHECK(kind_of([&] { dilate(m, -1); }) == ErrorKind::kValidation);
}

TEST_CASE("dilate matches brute force, is monotone and extensive") {
  Rng rng(2024);
  const std::vector<int> ks{0, 1, 2, 3, 5, 10};
  for (int t = 0; t < 100; ++t) {
    const BinaryMask m = random_mask(rng, 32, 32, 0.01 + 0.1 * rng.uniform());
    std::vector<BinaryMask> out;
    for (int k : ks) {
      out.push_back(dilate(m, k));
      CHECK(out.back().same_pixels(brute_dilate(m, k)));
      CHECK(m.subset_of(out.back()));
    }
    for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i - 1].subset_of(out[i]));
  }
}

TEST_CASE("dilate handles non-square masks") {
  Rng rng(5);
  const BinaryMask m = random_mask(rng, 17, 9, 0.05);
  for (int k : {2, 4, 7, 20}) CHECK(dilate(m, k).same_pixels(brute_dilate(m, k)));
}

TEST_CASE("select_sets applies the coverage band") {
  AnnotationIndex idx;
  // 10x10 images; a square of side s covers s*s percent.
  const auto add = [&](std::int64_t id, double side, std::int64_t cat = 1) {
    idx.add_image({id, 10, 10, ""});
    if (side > 0) idx.add_instance(id, Instance{cat, PolygonSegmentation{square(0, 0, side, side)}, false});
  };
  add(1, 5);         // 25%
  add(2, 0);         // no instances
  add(3, 7.1);       // 49%
  add(4, 4, 2);      // other category only
  add(5, 2);         // 4%
  add(6, 6.3);       // 36%
  idx.add_image({7, 20, 10, ""});
  idx.add_instance(7, Instance{1, RleSegmentation{{0, 1, 199}, 10, 20}, false});  // 0.5%

  const SetSelection sel = select_sets(idx, 1, 0.05, 0.40);
  std::vector<std::int64_t> q;
  for (const auto& [id, cov] : sel.query) q.push_back(id);
  CHECK(q == std::vector<std::int64_t>{1, 6});
  CHECK(sel.query[0].second == doctest::Approx(0.25));
  CHECK(sel.comparison == std::vector<std::int64_t>{2, 4});

  const SetSelection wide = select_sets(idx, 1, 0.01, 1.0);
  for (const auto& [id, cov] : wide.query) CHECK(id != 7);

  const SetSelection all = select_sets(idx, 1, 0.0, 1.0);
  CHECK(all.query.size() == 5);

  CHECK(kind_of([&] { select_sets(idx, 1, 0.4, 0.4); }) == ErrorKind::kUsage);
}

TEST_CASE("select_sets inclusive boundaries and disjointness") {
  AnnotationIndex idx;
  idx.add_image({1, 10, 10, ""});
  idx.add_instance(1, Instance{1, PolygonSegmentation{square(0, 0, 10, 4)}, false});  // exactly 40%
  idx.add_image({2, 10, 10, ""});
  idx.add_instance(2, Instance{1, PolygonSegmentation{square(0, 0, 5, 1)}, false});  // exactly 5%
  const SetSelection sel = select_sets(idx, 1, 0.05, 0.40);
  CHECK(sel.query.size() == 2);

  Rng rng(9);
  AnnotationIndex big;
  for (int i = 1; i <= 200; ++i) {
    big.add_image({i, 8, 8, ""});
    const int n = static_cast<int>(rng.below(3));
    for (int k = 0; k < n; ++k) {
      RleSegmentation rle{encode_rle(random_mask(rng, 8, 8, rng.uniform())), 8, 8};
      big.add_instance(i, Instance{1 + static_cast<std::int64_t>(rng.below(2)), rle, false});
    }
  }
  const SetSelection s = select_sets(big, 1, 0.1, 0.6);
  std::set<std::int64_t> comp(s.comparison.begin(), s.comparison.end());
  for (const auto& [id, cov] : s.query) {
    CHECK(comp.count(id) == 0);
    CHECK(cov >= 0.1);
    CHECK(cov <= 0.6);
  }
  for (std::int64_t id : s.comparison) {
    for (const auto& inst : big.instances(id)) CHECK(inst.category_id != 1);
  }
}

TEST_CASE("mask image conversion") {
  Rng rng(1);
  const BinaryMask m = random_mask(rng, 9, 4, 0.3);
  const ImageBuffer img = m.to_image();
  CHECK(img.channels == 1);
  for (auto v : img.data) CHECK((v == 0 || v == 255));
  CHECK(BinaryMask::from_image(img) == m);
}

TEST_CASE("manifest round trip") {
  std::vector<ManifestEntry> entries{
      {"img_1", "with/img_1.png", "masks/img_1.png", "query", 0.123456789012345, 10},
      {"img_2", "without/img_2.png", "", "comparison", 0.0, 0},
  };
  CHECK(manifest_from_json(manifest_to_json(entries)) == entries);

  TempDir dir("manifest");
  write_manifest(entries, dir / "m.json");
  CHECK(read_manifest(dir / "m.json") == entries);

  CHECK(kind_of([] { manifest_from_json(R"([{"id": "a"}])"); }) == ErrorKind::kParse);
  CHECK(kind_of([] {
          manifest_from_json(
              R"([{"id":"a","image_path":"x","mask_path":"y","role":"other","coverage":0,"kernel_size":0}])");
        }) == ErrorKind::kParse);
  CHECK(kind_of([&] { read_manifest(dir / "missing.json"); }) == ErrorKind::kIo);
}
