#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <porelbm/lattice.hpp>

namespace porelbm {

/// One recorded time level of a run.
struct ObservableSample {
  std::uint64_t step = 0;
  Vec3 force{0.0, 0.0, 0.0};     // total force on the solid matrix
  Vec3 velocity{0.0, 0.0, 0.0};  // superficial (volume-averaged) velocity
  double speed = 0.0;            // |U . i| along the flow axis
  double delta_rho = 0.0;
  double pressure_gradient = 0.0;  // -F . i / V
  double mass = 0.0;
};

struct ObservableSeries {
  int axis = 0;
  double volume = 0.0;
  std::vector<ObservableSample> samples;

  void push(const ObservableSample& s) {
    if (!samples.empty() && s.step <= samples.back().step) {
      throw std::logic_error("observable samples must be monotone in step");
    }
    samples.push_back(s);
  }
  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
  const ObservableSample& back() const { return samples.back(); }
};

}  // namespace porelbm
