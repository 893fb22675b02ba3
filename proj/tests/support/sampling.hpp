// Random configurations kept away from the hinge boundaries, where
// finite-difference gradient checks are well defined.
#pragma once

#include <cmath>
#include <stdexcept>

#include "camr/core.hpp"
#include "camr/loss.hpp"

namespace sampling {

// Anchors with every pairwise distance clear of 2m (and of 0) and every norm
// clear of p by more than the 1e-3 guard band.
inline camr::AnchorSet anchors_off_boundary(std::size_t t, std::size_t n, double m,
                                            double p, camr::CounterRng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    camr::Matrix a(t, n);
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = 2.0 * m * rng.gaussian();
    camr::AnchorSet anchors(std::move(a), m, p);
    bool ok = true;
    for (std::size_t y = 0; y < t && ok; ++y) {
      for (std::size_t y2 = y + 1; y2 < t && ok; ++y2) {
        const double d =
            camr::l2_distance(anchors.anchors.row(y), anchors.anchors.row(y2));
        ok = std::abs(2.0 * m - d) > 1e-3 && d > 1e-3;
      }
      if (ok) ok = std::abs(p - camr::l2_norm(anchors.anchors.row(y))) > 1e-3;
    }
    if (ok) return anchors;
  }
  throw std::runtime_error("could not sample anchors off the hinge boundaries");
}

}  // namespace sampling
