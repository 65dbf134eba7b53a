#pragma once

#include "hazeprior/image.hpp"
#include "hazeprior/rng.hpp"

namespace hazeprior {

/// Synthetic clear night scene: dark sky gradient, building blocks with lit
/// windows, a road band and a few point lights. Used as a deterministic
/// stand-in for clear photographs in tests and demos.
Image procedural_scene(int height, int width, RngStream& rng);

}  // namespace hazeprior
