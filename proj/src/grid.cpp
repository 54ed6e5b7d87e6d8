#include "higarment/grid.hpp"

#include <vector>

#include "higarment/errors.hpp"

namespace hg {
namespace {

void check_divisible(std::size_t h, std::size_t w, std::size_t p) {
  if (p == 0 || h % p != 0 || w % p != 0) {
    throw DimensionError("grid " + std::to_string(h) + "x" + std::to_string(w) +
                         " is not divisible by patch " + std::to_string(p));
  }
}

// Calls f(patch_flat_index, grid_flat_index) for every element.
template <class F>
void for_each_patch_element(std::size_t h, std::size_t w, std::size_t c, std::size_t p, F f) {
  const std::size_t gw = w / p, gh = h / p, pc = p * p * c;
  for (std::size_t py = 0; py < gh; ++py)
    for (std::size_t px = 0; px < gw; ++px)
      for (std::size_t dy = 0; dy < p; ++dy)
        for (std::size_t dx = 0; dx < p; ++dx)
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t token = py * gw + px;
            const std::size_t patch_flat = token * pc + (dy * p + dx) * c + ch;
            const std::size_t grid_flat = ((py * p + dy) * w + px * p + dx) * c + ch;
            f(patch_flat, grid_flat);
          }
}

}  // namespace

GatherIndex patchify_index(std::size_t h, std::size_t w, std::size_t c, std::size_t p) {
  check_divisible(h, w, p);
  auto idx = std::make_shared<std::vector<std::int64_t>>(h * w * c);
  for_each_patch_element(h, w, c, p, [&](std::size_t pf, std::size_t gf) {
    (*idx)[pf] = static_cast<std::int64_t>(gf);
  });
  return idx;
}

GatherIndex unpatchify_index(std::size_t h, std::size_t w, std::size_t c, std::size_t p) {
  check_divisible(h, w, p);
  auto idx = std::make_shared<std::vector<std::int64_t>>(h * w * c);
  for_each_patch_element(h, w, c, p, [&](std::size_t pf, std::size_t gf) {
    (*idx)[gf] = static_cast<std::int64_t>(pf);
  });
  return idx;
}

Var patchify(const Var& grid, std::size_t h, std::size_t w, std::size_t p) {
  const std::size_t c = grid.cols();
  if (grid.rows() != h * w) throw DimensionError("patchify: grid rows do not match h*w");
  return gather(grid, (h / p) * (w / p), p * p * c, patchify_index(h, w, c, p));
}

Var unpatchify(const Var& patches, std::size_t h, std::size_t w, std::size_t p) {
  if (p == 0 || patches.cols() % (p * p) != 0) throw DimensionError("unpatchify: bad patch width");
  const std::size_t c = patches.cols() / (p * p);
  if (patches.rows() != (h / p) * (w / p)) throw DimensionError("unpatchify: token count mismatch");
  return gather(patches, h * w, c, unpatchify_index(h, w, c, p));
}

}  // namespace hg
