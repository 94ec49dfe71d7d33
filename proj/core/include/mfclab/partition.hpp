#pragma once

#include <span>
#include <string>
#include <vector>

#include "mfclab/model.hpp"

namespace mfc {

// Particles grouped by nearby feedback values: the control ball of radius R
// is covered by axis-aligned cells of side 2*delta/sqrt(d), so every cell
// fits inside a delta-ball around its (clamped) center.  cells holds
// particle indices, one entry per nonempty cell, ordered by cell position.
struct ControlPartition {
  double delta = 0.0;
  double radius_R = 0.0;
  int dim = 1;
  std::vector<double> representatives;  // group-major, dim per group
  std::vector<std::vector<int>> cells;

  int group_count() const { return static_cast<int>(cells.size()); }
  std::span<const double> representative(int j) const {
    return {representatives.data() + static_cast<std::size_t>(j) * dim,
            static_cast<std::size_t>(dim)};
  }
};

// feedback is N x dim row-major; every row must lie in the closed ball of
// radius R.  Cell edges follow the half-open convention [lo, hi), so a value
// on an interior edge joins the upper cell; the last cell keeps the ball
// boundary.
ControlPartition build_partition(std::span<const double> feedback, int dim,
                                 double radius_R, double delta);

struct PartitionResiduals {
  double max_residual = 0.0;
  std::vector<double> per_particle;
};

// Per particle k in cell j: |H(x_k, p_k) + rep_j . p_k + L(x_k, rep_j)|,
// the defect of the cell representative against the Legendre identity.  Zero
// when the representative is the exact feedback -grad_p H(x_k, p_k).
PartitionResiduals residual_check(const ControlPartition& partition,
                                  std::span<const double> states,
                                  std::span<const double> gradients,
                                  const HamiltonianModel& model);

// {delta, radius, dim, representatives, cells} with full double precision.
std::string partition_to_json(const ControlPartition& partition);

}  // namespace mfc
