#pragma once

#include <cstddef>

#include "higarment/ops.hpp"

namespace hg {

// Index maps between a [h*w x c] grid (row-major cells, interleaved channels)
// and non-overlapping p x p patches [(h/p)*(w/p) x p*p*c]. Within a patch the
// layout is (dy, dx, channel). Throws DimensionError if p does not divide
// both sides.
GatherIndex patchify_index(std::size_t h, std::size_t w, std::size_t c, std::size_t p);
GatherIndex unpatchify_index(std::size_t h, std::size_t w, std::size_t c, std::size_t p);

Var patchify(const Var& grid, std::size_t h, std::size_t w, std::size_t p);
Var unpatchify(const Var& patches, std::size_t h, std::size_t w, std::size_t p);

}  // namespace hg
