#pragma once

#include "rca/degradation.hpp"
#include "rca/field_model.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace rca {

enum class Layout { UniformRandom, Grid, ClusteredCorners };

/// Smoothly varying elliptical Gaussians (plus an optional ring) over the unit square.
struct FieldSpec {
  int p = 200;
  Shape hr_shape{32, 32};
  Layout layout = Layout::UniformRandom;
  double sigma0 = 2.0;         // base Gaussian width, HR pixels
  double size_variation = 0.2; // relative amplitude of the width polynomial
  double eps_max = 0.3;        // bound on |e1|, |e2|
  double ring_amplitude = 0.0; // ring peak relative to the Gaussian peak
  double ring_radius_min = 5.0;
  double ring_radius_max = 7.0;
  double ring_width = 0.8;
  bool spatially_constant = false;
  std::uint64_t seed = 0;

  /// Throws DataError unless p >= 1, sigma0 > 0.5, eps_max in [0, 0.9) and the widths stay positive.
  void validate() const;
};

struct Field {
  PsfMatrix truth;
  std::vector<Position> positions;
};

Field generate_field(FieldSpec const &spec);

struct Degraded {
  ObservationStack stack;
  std::vector<Shift> shifts; // HR pixels
};

/// Y = F(X) + N. Shifts are uniform in [-0.5, 0.5) LR pixels per axis unless zero_shift is set. The noise level
/// gives the requested SNR for the mean patch norm of F(X); no snr means noiseless.
Degraded degrade_field(PsfMatrix const &X, std::vector<Position> const &positions, int m_d,
                       std::optional<double> snr_target, std::uint64_t seed, bool zero_shift = false);

} // namespace rca
