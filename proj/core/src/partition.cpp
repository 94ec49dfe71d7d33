#include "mfclab/partition.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace mfc {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ControlPartition build_partition(std::span<const double> feedback, int dim,
                                 double radius_R, double delta) {
  require(dim >= 1, "partition: dimension must be >= 1");
  require(radius_R > 0.0, "partition: radius must be positive");
  require(delta > 0.0, "partition: delta must be positive");
  require(!feedback.empty() && feedback.size() % static_cast<std::size_t>(dim) == 0,
          "partition: feedback size must be a positive multiple of dim");
  const int n = static_cast<int>(feedback.size()) / dim;
  for (int k = 0; k < n; ++k) {
    double norm2 = 0.0;
    for (int c = 0; c < dim; ++c) {
      const double v = feedback[static_cast<std::size_t>(k) * dim + c];
      norm2 += v * v;
    }
    require(norm2 <= radius_R * radius_R * (1.0 + 1e-12),
            "partition: feedback outside the control ball");
  }

  const double side = 2.0 * delta / std::sqrt(static_cast<double>(dim));
  const int per_axis = std::max(1, static_cast<int>(std::ceil(2.0 * radius_R / side - 1e-12)));

  std::map<long long, std::vector<int>> by_cell;
  for (int k = 0; k < n; ++k) {
    long long key = 0;
    for (int c = 0; c < dim; ++c) {
      const double v = feedback[static_cast<std::size_t>(k) * dim + c];
      const int idx = std::clamp(static_cast<int>(std::floor((v + radius_R) / side)), 0,
                                 per_axis - 1);
      key = key * per_axis + idx;
    }
    by_cell[key].push_back(k);
  }

  ControlPartition out;
  out.delta = delta;
  out.radius_R = radius_R;
  out.dim = dim;
  for (auto& [key, members] : by_cell) {
    long long rest = key;
    std::vector<int> idx(static_cast<std::size_t>(dim));
    for (int c = dim - 1; c >= 0; --c) {
      idx[c] = static_cast<int>(rest % per_axis);
      rest /= per_axis;
    }
    for (int c = 0; c < dim; ++c) {
      const double center = -radius_R + (idx[c] + 0.5) * side;
      out.representatives.push_back(std::clamp(center, -radius_R, radius_R));
    }
    out.cells.push_back(std::move(members));
  }
  return out;
}

PartitionResiduals residual_check(const ControlPartition& partition,
                                  std::span<const double> states,
                                  std::span<const double> gradients,
                                  const HamiltonianModel& model) {
  int n = 0;
  for (const auto& cell : partition.cells) n += static_cast<int>(cell.size());
  const int d = partition.dim;
  require(static_cast<int>(states.size()) == n * d, "residual: state size mismatch");
  require(static_cast<int>(gradients.size()) == n * d, "residual: gradient size mismatch");

  PartitionResiduals out;
  out.per_particle.assign(static_cast<std::size_t>(n), 0.0);
  for (int j = 0; j < partition.group_count(); ++j) {
    const auto rep = partition.representative(j);
    for (int k : partition.cells[j]) {
      const std::span<const double> x{states.data() + static_cast<std::size_t>(k) * d,
                                      static_cast<std::size_t>(d)};
      const std::span<const double> p{gradients.data() + static_cast<std::size_t>(k) * d,
                                      static_cast<std::size_t>(d)};
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += rep[c] * p[c];
      const double r = std::abs(model.eval_h(x, p) + dot + model.eval_l(x, rep));
      out.per_particle[k] = r;
      out.max_residual = std::max(out.max_residual, r);
    }
  }
  return out;
}

std::string partition_to_json(const ControlPartition& partition) {
  std::string s = "{\n  \"delta\": " + fmt_double(partition.delta) +
                  ",\n  \"radius\": " + fmt_double(partition.radius_R) +
                  ",\n  \"dim\": " + std::to_string(partition.dim) +
                  ",\n  \"representatives\": [";
  for (int j = 0; j < partition.group_count(); ++j) {
    s += j ? ", [" : "[";
    const auto rep = partition.representative(j);
    for (int c = 0; c < partition.dim; ++c) {
      if (c) s += ", ";
      s += fmt_double(rep[c]);
    }
    s += "]";
  }
  s += "],\n  \"cells\": [";
  for (std::size_t j = 0; j < partition.cells.size(); ++j) {
    s += j ? ", [" : "[";
    for (std::size_t i = 0; i < partition.cells[j].size(); ++i) {
      if (i) s += ", ";
      s += std::to_string(partition.cells[j][i]);
    }
    s += "]";
  }
  s += "]\n}\n";
  return s;
}

}  // namespace mfc
