#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "higarment/errors.hpp"
#include "higarment/eval.hpp"
#include "higarment/hash.hpp"
#include "higarment/synth.hpp"
#include "support.hpp"

using namespace hg;
using namespace hg::synth;

namespace {

GarmentSpec spec_of(const char* color, const char* fabric, Silhouette sil) {
  GarmentSpec s;
  s.color = *find_color(color);
  s.fabric = *find_fabric(fabric);
  s.silhouette = sil;
  return s;
}

}  // namespace

TEST(Caption, RoundTripsRandomSpecs) {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    GarmentSpec s = random_spec(rng, 0.0);
    const GarmentSpec back = parse_caption(caption(s));
    EXPECT_EQ(back, s) << caption(s);
  }
}

TEST(Caption, Format) {
  GarmentSpec s = spec_of("red", "denim", Silhouette::kPants);
  s.fabric_term = "jeans";
  s.components = static_cast<std::uint8_t>(Component::kPocket) | static_cast<std::uint8_t>(Component::kButtons);
  EXPECT_EQ(caption(s), "red jeans pants with pocket and buttons");
  EXPECT_THROW(parse_caption("red"), ValidationError);
  EXPECT_THROW(parse_caption("red velvet pants"), ValidationError);
}

TEST(Render, Deterministic) {
  const GarmentSpec s = spec_of("blue", "gingham", Silhouette::kHoodie);
  const Sample a = render_sample(s, 32, 5), b = render_sample(s, 32, 5);
  EXPECT_EQ(a.sketch, b.sketch);
  EXPECT_EQ(a.target, b.target);
  EXPECT_EQ(a.caption, b.caption);
}

TEST(Render, SketchAndTargetShareSilhouette) {
  Rng rng(2);
  for (int i = 0; i < 40; ++i) {
    const GarmentSpec s = random_spec(rng, 0.5);
    const Sample smp = render_sample(s, 32, 100 + i);
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x) {
        const bool in_sketch = smp.sketch.at(x, y) > 0.0;
        const bool in_target = smp.target.at(x, y, 0) + smp.target.at(x, y, 1) + smp.target.at(x, y, 2) > 0.0;
        ASSERT_EQ(in_sketch, smp.mask[y * 32 + x] != 0);
        ASSERT_EQ(in_target, in_sketch) << caption(s) << " at " << x << "," << y;
      }
  }
}

TEST(Render, ConflictWiring) {
  GarmentSpec s = spec_of("blue", "cotton", Silhouette::kTshirt);
  s.sketch_color = *find_color("red");
  const Sample smp = render_sample(s, 32, 3);
  EXPECT_EQ(smp.caption.rfind("blue", 0), 0u);
  std::map<double, int> sketch_values;
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 32; ++x)
      if (smp.mask[y * 32 + x]) ++sketch_values[smp.sketch.at(x, y)];
  const auto hint = std::max_element(sketch_values.begin(), sketch_values.end(),
                                     [](auto& a, auto& b) { return a.second < b.second; })->first;
  EXPECT_NEAR(hint, hint_gray(*find_color("red")), 1.0 / 255.0);
  EXPECT_GT(std::abs(hint_gray(*find_color("red")) - hint_gray(*find_color("blue"))), 0.01);
}

TEST(Render, TargetCarriesCaptionColour) {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const GarmentSpec s = random_spec(rng, 1.0);
    const Sample smp = render_sample(s, 32, 7 + i);
    const auto rgb = colors()[s.color].rgb;
    const Mask m(smp.mask.begin(), smp.mask.end());
    // Every foreground pixel is a scalar shade of the caption colour.
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x) {
        if (!m[y * 32 + x]) continue;
        std::size_t ref = 0;
        for (std::size_t c = 1; c < 3; ++c)
          if (rgb[c] > rgb[ref]) ref = c;
        const double k = smp.target.at(x, y, ref) / rgb[ref];
        for (std::size_t c = 0; c < 3; ++c) ASSERT_NEAR(smp.target.at(x, y, c), k * rgb[c], 2.0 / 255.0);
      }
  }
}

TEST(Dataset, ConflictFractionExtremes) {
  const Dataset none = gen_dataset(30, 3, 0.0, 16);
  for (const auto& r : none.records) EXPECT_FALSE(r.spec.conflicted());
  const Dataset all = gen_dataset(30, 3, 1.0, 16);
  for (const auto& r : all.records) {
    ASSERT_TRUE(r.spec.conflicted());
    EXPECT_NE(*r.spec.sketch_color, r.spec.color);
  }
  EXPECT_THROW(gen_dataset(0, 3, 0.5), ValidationError);
  EXPECT_THROW(gen_dataset(3, 3, 1.5), ValidationError);
}

TEST(Dataset, AliasFractionControlsTerms) {
  for (const auto& r : gen_dataset(40, 4, 0.0, 16, 0.0).records) EXPECT_TRUE(r.spec.fabric_term.empty());
  for (const auto& r : gen_dataset(40, 4, 0.0, 16, 1.0).records) EXPECT_FALSE(r.spec.fabric_term.empty());
}

TEST(Dataset, ManifestHashStable) {
  const auto a = gen_dataset(1, 9, 0.5, 16), b = gen_dataset(1, 9, 0.5, 16);
  ASSERT_EQ(a.records.size(), 1u);
  EXPECT_EQ(git_blob_hash(manifest_text(a.records)), git_blob_hash(manifest_text(b.records)));
}

TEST(Dataset, AttributeMarginalsUniform) {
  Rng rng(10);
  const std::size_t n = 10000;
  std::vector<int> sil(silhouette_names().size()), col(colors().size()), fab(fabrics().size());
  std::vector<int> comp(component_names().size());
  for (std::size_t i = 0; i < n; ++i) {
    const GarmentSpec s = random_spec(rng, 0.5);
    ++sil[static_cast<std::size_t>(s.silhouette)];
    ++col[s.color];
    ++fab[s.fabric];
    for (std::size_t b = 0; b < comp.size(); ++b) comp[b] += (s.components >> b) & 1u;
  }
  auto check = [&](const std::vector<int>& counts, const char* what) {
    for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / n, 1.0 / counts.size(), 0.03) << what;
  };
  check(sil, "silhouette");
  check(col, "color");
  check(fab, "fabric");
  for (int c : comp) EXPECT_NEAR(static_cast<double>(c) / n, 0.5, 0.03);
}

TEST(Dataset, WriteReadRoundTrip) {
  const auto dir = test::scratch_dir("dataset_rt");
  const Dataset ds = gen_dataset(5, 11, 0.4, 16);
  write_dataset(ds, dir);
  const Dataset back = read_dataset(dir);
  ASSERT_EQ(back.records.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(back.samples[i].sketch, ds.samples[i].sketch);
    EXPECT_EQ(back.samples[i].target, ds.samples[i].target);
    EXPECT_EQ(back.records[i].spec, ds.records[i].spec);
    EXPECT_EQ(record_to_json_line(back.records[i]), record_to_json_line(ds.records[i]));
  }
}

TEST(Swatch, DenimIsDiagonalTwill) {
  const Image img = render_fabric_swatch("denim", 32, 1);
  const auto h = orientation_histogram(img);
  const auto peak = static_cast<std::size_t>(std::max_element(h.begin(), h.end()) - h.begin());
  // Diagonal gradients fall in the bins around pi/4 or 3pi/4.
  EXPECT_TRUE(peak == 4 || peak == 3 || peak == 12 || peak == 11) << peak;
}

TEST(Swatch, FabricsDiffer) {
  const Image a = render_fabric_swatch("denim", 16, 1), b = render_fabric_swatch("corduroy", 16, 1);
  EXPECT_GT(image_l2_distance(a, b), 0.0);
  EXPECT_THROW(render_fabric_swatch("velvet", 16, 1), ValidationError);
}

TEST(Swatch, StripesPeakAtStripeAngle) {
  // Horizontal stripes: intensity changes along y, gradient angle pi/2.
  const auto h = orientation_histogram(render_fabric_swatch("seersucker", 32, 1));
  EXPECT_EQ(std::max_element(h.begin(), h.end()) - h.begin(), 8);
  // Vertical ribs: gradient angle 0.
  const auto r = orientation_histogram(render_fabric_swatch("corduroy", 32, 1));
  EXPECT_EQ(std::max_element(r.begin(), r.end()) - r.begin(), 0);
}
